// Acceptance checks AC1-AC9. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include "genmm/cli.hpp"
#include "genmm/genmatch.hpp"
#include "genmm/metrics.hpp"
#include "genmm/motion_io.hpp"
#include "genmm/representation.hpp"
#include "genmm/synthesizer.hpp"
#include "synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace genmm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Result {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Result ac1_oracle() {
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> n(1, 50), p(1, 8), w(1, 8);
    std::uniform_real_distribution<double> u(-2, 2);
    auto random_set = [&](int rows, int pp, int ww) {
        PatchSet s;
        s.patch_size = pp;
        s.patches.resize(rows, pp * ww);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < pp * ww; ++j) s.patches(i, j) = u(rng);
        return s;
    };
    double worst = 0.0;
    const auto t0 = Clock::now();
    for (int trial = 0; trial < 200; ++trial) {
        const int pp = p(rng), ww = w(rng);
        const PatchSet X = random_set(n(rng), pp, ww), Y = random_set(n(rng), pp, ww);
        const double alpha = trial % 2 ? 0.01 : 1.0;
        const auto D = distance_matrix(X, Y);
        const auto N = normalize_distances(D, alpha);
        // brute force: flat sum over all elements, then column minima
        std::vector<double> ref(static_cast<std::size_t>(X.size()) * Y.size());
        for (int i = 0; i < X.size(); ++i)
            for (int j = 0; j < Y.size(); ++j) {
                double s = 0;
                for (int k = 0; k < pp * ww; ++k) s += (X.patches(i, k) - Y.patches(j, k)) * (X.patches(i, k) - Y.patches(j, k));
                ref[i * Y.size() + j] = s;
            }
        for (int j = 0; j < Y.size(); ++j) {
            double m = ref[j];
            for (int i = 1; i < X.size(); ++i) m = std::min(m, ref[i * Y.size() + j]);
            for (int i = 0; i < X.size(); ++i) {
                const double r = ref[i * Y.size() + j];
                const double rn = r / (alpha + m);
                worst = std::max(worst, std::abs(D.values(i, j) - r) / std::max(std::abs(r), 1e-300));
                worst = std::max(worst, std::abs(N.values(i, j) - rn) / std::max(std::abs(rn), 1e-300));
            }
        }
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-9 && t < 10.0, fmt("max rel err %.3g (<= 1e-9), %.2f s (< 10 s)", worst, t)};
}

Result ac2_fixed_point() {
    const auto ex = fixtures::make_clip(44, 2);
    SynthesisConfig cfg;
    cfg.output_length = ex.features.frames();
    cfg.noise.sigma = {0.0};
    const auto plan = plan_for({ex.features}, cfg);
    ConstraintSet keys;
    for (int t = 0; t < ex.features.frames(); ++t) keys.keyframes.push_back({t, ex.features.data.row(t)});
    // keyframes pin the guess only; the stage runs on the unconstrained match
    const auto parts = partition_skeleton(ex.skeleton, cfg.parts);
    const auto guess = apply_constraints(init_coarse_guess(plan, cfg, {ex.features}), keys, 0, plan);
    const auto out = run_stage(guess, {ex.features}, parts, cfg.patch_size, cfg.alpha, cfg.iterations, cfg.match);
    const auto full = synthesize({ex.features}, ex.skeleton, cfg, keys);
    const double err = (out.data - ex.features.data).cwiseAbs().maxCoeff();
    const double err_full = (full.data - ex.features.data).cwiseAbs().maxCoeff();
    return {plan.num_stages == 1 && err <= 1e-6 && err_full <= 1e-6,
            fmt("stages %d, max |out - example| %.3g (stage only) %.3g (synthesize) (<= 1e-6)", plan.num_stages, err,
                err_full)};
}

Result ac3_envelope() {
    int runs = 0, violations = 0;
    double worst = 0.0;
    for (int clip = 0; clip < 3; ++clip) {
        const auto ex = fixtures::make_clip(120 + 60 * clip, 30 + clip);
        std::vector<double> lo(ex.features.width()), hi(ex.features.width());
        for (int c = 0; c < ex.features.width(); ++c) {
            lo[c] = ex.features.data.col(c).minCoeff();
            hi[c] = ex.features.data.col(c).maxCoeff();
        }
        for (int seed = 0; seed < 20; ++seed) {
            SynthesisConfig cfg;
            cfg.output_length = ex.features.frames();
            cfg.seed = static_cast<std::uint64_t>(seed);
            const auto out = synthesize({ex.features}, ex.skeleton, cfg);
            ++runs;
            for (int c = 0; c < out.width(); ++c) {
                const double below = lo[c] - out.data.col(c).minCoeff();
                const double above = out.data.col(c).maxCoeff() - hi[c];
                worst = std::max({worst, below, above});
                if (below > 1e-9 || above > 1e-9) ++violations;
            }
        }
    }
    return {violations == 0, fmt("%d runs (3 clips x 20 seeds), %d channel violations, worst excursion %.3g (<= 1e-9)",
                                 runs, violations, worst)};
}

Result ac4_completeness() {
    const auto single = fixtures::make_clip(500, 41);
    SynthesisConfig cfg;
    cfg.output_length = 2 * single.features.frames();
    cfg.seed = 1;
    const double cov_single = coverage({single.features}, synthesize({single.features}, single.skeleton, cfg), 11);

    std::vector<MotionFeatures> multi;
    int total = 0;
    for (int k = 0; k < 3; ++k) {
        multi.push_back(fixtures::make_clip(120 + 50 * k, 50 + k).features);
        total += multi.back().frames();
    }
    cfg.output_length = 2 * total;
    const double cov_multi = coverage(multi, synthesize(multi, single.skeleton, cfg), 11);

    // alpha ordering: mean coverage over 10 seeds, F = T
    const auto ordering_clip = fixtures::make_clip(500, 41);
    double mean[3] = {0, 0, 0};
    const double alphas[3] = {0.005, 0.5, 5.0};
    for (int a = 0; a < 3; ++a) {
        for (int seed = 0; seed < 10; ++seed) {
            SynthesisConfig c;
            c.alpha = alphas[a];
            c.seed = static_cast<std::uint64_t>(seed);
            c.output_length = ordering_clip.features.frames();
            mean[a] += coverage({ordering_clip.features}, synthesize({ordering_clip.features}, ordering_clip.skeleton, c),
                                11) / 10.0;
        }
    }
    const bool ordered = mean[0] > mean[1] && mean[1] > mean[2];
    return {cov_single >= 95.0 && cov_multi >= 95.0 && ordered,
            fmt("single %.2f%%, multi(3 clips) %.2f%% (>= 95); mean coverage alpha 0.005/0.5/5 = %.2f/%.2f/%.2f "
                "(strictly decreasing)",
                cov_single, cov_multi, mean[0], mean[1], mean[2])};
}

Result ac5_diversity() {
    const auto ex = fixtures::make_clip(300, 60);
    std::vector<MotionFeatures> outs;
    for (int seed = 0; seed < 20; ++seed) {
        SynthesisConfig cfg;
        cfg.output_length = ex.features.frames();
        cfg.seed = static_cast<std::uint64_t>(1000 + seed);
        outs.push_back(synthesize({ex.features}, ex.skeleton, cfg));
    }
    const double div = set_diversity(outs, ex.features);
    // greedy count of outputs that differ from every earlier distinct output
    std::vector<int> distinct;
    for (int i = 0; i < 20; ++i) {
        bool fresh = true;
        for (int j : distinct) fresh = fresh && outs[i].data != outs[j].data;
        if (fresh) distinct.push_back(i);
    }
    int pairs_equal = 0;
    for (int i = 0; i < 20; ++i)
        for (int j = i + 1; j < 20; ++j) pairs_equal += outs[i].data == outs[j].data;
    return {div > 0.05 && distinct.size() >= 19,
            fmt("set diversity %.4f (> 0.05), %zu of 20 distinct, %d identical pairs", div, distinct.size(), pairs_equal)};
}

Result ac6_constraints() {
    const auto ex = fixtures::make_clip(240, 70);
    SynthesisConfig cfg;
    cfg.output_length = 360;
    cfg.seed = 3;

    ConstraintSet loop;
    loop.loop = true;
    const auto looped = synthesize({ex.features}, ex.skeleton, cfg, loop);
    const bool loop_ok = looped.data.row(0) == looped.data.row(looped.frames() - 1);

    // completion: pin the lower body to another clip's
    std::vector<std::string> upper, lower;
    for (const auto& j : ex.skeleton.joints) {
        const auto& n = j.name;
        const bool leg = n == "Hips" || n.find("Leg") != std::string::npos || n.find("Foot") != std::string::npos ||
                         n.find("Toe") != std::string::npos;
        if (leg || n == "Spine") lower.push_back(n);
        if (!leg) upper.push_back(n);
    }
    SynthesisConfig parted = cfg;
    parted.parts = PartitionSpec::explicit_parts({{"upper", upper}, {"lower", lower}});
    const auto parts = partition_skeleton(ex.skeleton, parted.parts);
    const auto track = fixtures::make_clip(360, 71).features;
    ConstraintSet comp;
    comp.fixed_partial = FixedPartial{parts[1], track};
    const auto completed = synthesize({ex.features}, ex.skeleton, parted, comp);
    const auto ref = resample(track, completed.frames());
    double comp_err = 0.0;
    for (int c : parts[1].columns(completed.layout))
        comp_err = std::max(comp_err, (completed.data.col(c) - ref.data.col(c)).cwiseAbs().maxCoeff());

    // keyframes at coarse indices, checked at the mapped final indices
    const auto plan = plan_for({ex.features}, cfg);
    const int F1 = plan.synthesis_lengths.front();
    ConstraintSet keys;
    for (int k : {0, F1 / 3, (2 * F1) / 3, F1 - 1}) keys.keyframes.push_back({k, ex.features.data.row(17 * (k + 1) % 240)});
    const auto keyed = synthesize({ex.features}, ex.skeleton, cfg, keys);
    double key_rms = 0.0;
    for (const auto& k : keys.keyframes) {
        const int idx = map_keyframe_index(k.coarse_frame, plan.num_stages - 1, plan);
        const double rms = std::sqrt((keyed.data.row(idx) - k.pose).squaredNorm() / keyed.width());
        key_rms = std::max(key_rms, rms);
    }
    return {loop_ok && comp_err <= 1e-6 && key_rms <= 0.05,
            fmt("loop first==last %s; completion max err %.3g (<= 1e-6); keyframe max RMS %.3g (<= 0.05)",
                loop_ok ? "bit-exact" : "DIFFERS", comp_err, key_rms)};
}

Result ac7_performance() {
    const auto ex = fixtures::make_clip(500, 80);
    if (ex.skeleton.num_joints() != 65) return {false, "fixture skeleton is not 65 joints"};
    SynthesisConfig cfg;
    cfg.output_length = 1000;
    cfg.seed = 4;
    auto t0 = Clock::now();
    const auto out = synthesize({ex.features}, ex.skeleton, cfg);
    const double t = seconds_since(t0);
    const auto samples = scaling_probe({ex.features}, ex.skeleton, cfg, {1000, 2000, 4000, 8000, 16000});
    std::vector<double> x, y;
    std::string series;
    for (const auto& s : samples) {
        x.push_back(s.frames);
        y.push_back(s.seconds);
        series += fmt(" %d:%.2fs/%.0fMB", s.frames, s.seconds, s.peak_memory / 1048576.0);
    }
    const double r2 = linear_fit_r2(x, y);
    return {out.frames() == 1000 && t < 5.0 && r2 >= 0.9,
            fmt("1000 frames x 65 joints in %.2f s (< 5 s); time R^2 %.4f (>= 0.9);%s", t, r2, series.c_str())};
}

Result ac8_determinism() {
    const fs::path dir = fs::temp_directory_path() / ("genmm_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const auto skel = fixtures::make_humanoid();
    const std::string in = (dir / "walk.bvh").string();
    write_text_file(in, write_bvh(skel, fixtures::make_motion(skel, 300, 90)));
    const std::string cfg = (dir / "job.json").string();
    write_text_file(cfg, R"({"frames": 600, "seed": 7, "alpha": 0.01})");
    std::vector<std::string> outputs;
    bool ok = true;
    for (const char* threads : {"1", "1", "1", "4", "4"}) {
        const std::string out = (dir / ("out_" + std::to_string(outputs.size()) + ".bvh")).string();
        const char* argv[] = {"genmm", "synth", "-i", in.c_str(), "-o", out.c_str(), "--config", cfg.c_str(),
                              "--threads", threads};
        std::ostringstream o, e;
        ok = ok && cli::run(10, argv, o, e) == 0;
        outputs.push_back(read_text_file(out));
    }
    int same = 0;
    for (const auto& s : outputs) same += s == outputs[0];
    fs::remove_all(dir);
    return {ok && same == static_cast<int>(outputs.size()),
            fmt("%d of %zu BVH outputs byte-identical (3 runs at 1 thread, 2 at 4 threads), %zu bytes each", same,
                outputs.size(), outputs[0].size())};
}

Result ac9_round_trips() {
    const auto skel = fixtures::make_humanoid();
    const auto m = fixtures::make_motion(skel, 200, 100, 90.0);
    auto [s1, m1] = parse_bvh(write_bvh(skel, m));
    auto [s2, m2] = parse_bvh(write_bvh(s1, m1));
    double bvh_deg = 0.0;
    for (int t = 0; t < m.num_frames(); ++t)
        for (int j = 0; j < skel.num_joints(); ++j)
            bvh_deg = std::max({bvh_deg, rotation_distance_deg(m.rotation(t, j), m1.rotation(t, j)),
                                rotation_distance_deg(m1.rotation(t, j), m2.rotation(t, j))});
    const bool structure = s2.same_structure(skel) && s1.end_sites.size() == skel.end_sites.size();

    std::mt19937_64 rng(7);
    std::normal_distribution<double> n;
    double six = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Quat q(n(rng), n(rng), n(rng), n(rng));
        q.normalize();
        six = std::max(six, (six_d_to_rotation(rotation_to_6d(q)).toRotationMatrix() - q.toRotationMatrix())
                                .cwiseAbs()
                                .maxCoeff());
    }

    const auto clip = fixtures::make_clip(200, 101);
    const auto [dm, labels] = decode(clip.features, clip.anchor, clip.skeleton);
    const auto [f2, a2] = encode(clip.skeleton, dm, labels);
    double enc = (f2.data - clip.features.data).cwiseAbs().maxCoeff();
    enc = std::max(enc, (dm.root_positions - clip.motion.root_positions).cwiseAbs().maxCoeff());
    return {structure && bvh_deg <= 1e-4 && six < 1e-6 && enc <= 1e-5,
            fmt("BVH round trip %.3g deg (<= 1e-4); 6D round trip %.3g (< 1e-6); encode/decode %.3g (<= 1e-5)",
                bvh_deg, six, enc)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Result()>>> checks{
        {"AC1 oracle equivalence", ac1_oracle},   {"AC2 fixed point", ac2_fixed_point},
        {"AC3 coherence envelope", ac3_envelope}, {"AC4 completeness", ac4_completeness},
        {"AC5 diversity", ac5_diversity},         {"AC6 constraints", ac6_constraints},
        {"AC7 performance and scaling", ac7_performance},
        {"AC8 determinism", ac8_determinism},     {"AC9 representation round trips", ac9_round_trips},
    };
    int failed = 0;
    for (const auto& [name, fn] : checks) {
        Result r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r = {false, std::string("threw: ") + e.what()};
        }
        failed += !r.pass;
        std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
