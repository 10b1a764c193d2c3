#include "genmm/metrics.hpp"
#include "genmm/synthesizer.hpp"
#include "synthetic.hpp"

#include <gtest/gtest.h>

using namespace genmm;

namespace {

void expect_within_envelope(const MotionFeatures& out, const std::vector<MotionFeatures>& examples,
                            const std::vector<int>& cols, const std::string& what) {
    for (int c : cols) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& e : examples) {
            lo = std::min(lo, e.data.col(c).minCoeff());
            hi = std::max(hi, e.data.col(c).maxCoeff());
        }
        ASSERT_GE(out.data.col(c).minCoeff(), lo - 1e-9) << what << " col " << c;
        ASSERT_LE(out.data.col(c).maxCoeff(), hi + 1e-9) << what << " col " << c;
    }
}

std::vector<int> all_columns(const MotionFeatures& f) {
    std::vector<int> c(f.width());
    for (int i = 0; i < f.width(); ++i) c[i] = i;
    return c;
}

}  // namespace

TEST(Synthesizer, ZeroSigmaGivesChannelMeans) {
    const auto a = fixtures::make_clip(60, 1, false).features;
    const auto b = fixtures::make_clip(50, 2, false).features;
    SynthesisConfig cfg;
    cfg.output_length = 80;
    cfg.noise.sigma = {0.0};
    const auto plan = plan_for({a, b}, cfg);
    const auto g = init_coarse_guess(plan, cfg, {a, b});
    ASSERT_EQ(g.frames(), plan.synthesis_lengths.front());
    for (int c = 0; c < a.width(); ++c) {
        const double mean = (a.data.col(c).sum() + b.data.col(c).sum()) / (a.frames() + b.frames());
        for (int t = 0; t < g.frames(); ++t) ASSERT_NEAR(g.data(t, c), mean, 1e-12);
    }
    cfg.noise.mu = {0.25};
    const auto h = init_coarse_guess(plan, cfg, {a, b});
    EXPECT_TRUE((h.data.array() == 0.25).all());
}

TEST(Synthesizer, SeedDeterminesGuess) {
    const auto a = fixtures::make_clip(60, 1, false).features;
    SynthesisConfig cfg;
    cfg.output_length = 60;
    cfg.seed = 42;
    const auto plan = plan_for({a}, cfg);
    const auto g1 = init_coarse_guess(plan, cfg, {a});
    const auto g2 = init_coarse_guess(plan, cfg, {a});
    EXPECT_EQ(g1.data, g2.data);
    cfg.seed = 43;
    EXPECT_NE(init_coarse_guess(plan, cfg, {a}).data, g1.data);
    // noise moments follow the exemplar
    cfg.noise = {};
    const auto big = init_coarse_guess(plan_for({a}, SynthesisConfig{.output_length = 4000}),
                                       SynthesisConfig{.output_length = 4000}, {a});
    for (int c : {0, 5, a.layout.root_col()}) {
        const double m = a.data.col(c).mean();
        const double sd = std::sqrt((a.data.col(c).array() - m).square().mean());
        EXPECT_NEAR(big.data.col(c).mean(), m, 5 * sd / std::sqrt(4000.0) + 1e-12);
    }
}

TEST(Synthesizer, ApplyConstraints) {
    const auto ex = fixtures::make_clip(120, 3, false);
    SynthesisConfig cfg;
    cfg.output_length = 200;
    const auto plan = plan_for({ex.features}, cfg);
    ASSERT_GT(plan.num_stages, 2);
    const int s = 2;
    MotionFeatures track = resample(ex.features, plan.synthesis_lengths[s]);
    EXPECT_EQ(apply_constraints(track, {}, s, plan).data, track.data);

    ConstraintSet loop;
    loop.loop = true;
    const auto looped = apply_constraints(track, loop, s, plan);
    EXPECT_EQ(looped.data.row(looped.frames() - 1), looped.data.row(0));

    const auto parts = partition_skeleton(
        ex.skeleton,
        PartitionSpec::explicit_parts({{"upper", {"Spine", "Spine1", "Spine2", "Neck", "Head", "HeadTop_End", "LeftShoulder", "LeftArm",
                                                  "LeftForeArm", "LeftHand", "RightShoulder", "RightArm", "RightForeArm", "RightHand"}},
                                       {"lower", {"Hips", "Spine", "LeftUpLeg", "LeftLeg", "LeftFoot", "LeftToeBase", "LeftToe_End",
                                                  "RightUpLeg", "RightLeg", "RightFoot", "RightToeBase", "RightToe_End"}}}));
    const auto other = fixtures::make_clip(200, 4, false).features;
    ConstraintSet comp;
    comp.fixed_partial = FixedPartial{parts[1], other};
    for (int st = 0; st < plan.num_stages; ++st) {
        const auto t = resample(ex.features, plan.synthesis_lengths[st]);
        const auto pinned = apply_constraints(t, comp, st, plan);
        const auto ref = resample(other, plan.synthesis_lengths[st]);
        for (int c : parts[1].columns(t.layout)) ASSERT_EQ(pinned.data.col(c), ref.data.col(c));
        for (int c : parts[0].columns(t.layout)) {
            if (std::find(parts[1].joint_indices.begin(), parts[1].joint_indices.end(), c / 6) != parts[1].joint_indices.end())
                continue;
            ASSERT_EQ(pinned.data.col(c), t.data.col(c));
        }
    }

    ConstraintSet keys;
    const int F1 = plan.synthesis_lengths.front();
    keys.keyframes.push_back({F1 - 1, ex.features.data.row(10)});
    keys.keyframes.push_back({F1 / 2, ex.features.data.row(20)});
    const auto pinned = apply_constraints(track, keys, s, plan);
    EXPECT_EQ(pinned.data.row(track.frames() - 1), ex.features.data.row(10));
    const int mid = static_cast<int>(std::round((F1 / 2) * double(track.frames() - 1) / (F1 - 1)));
    EXPECT_EQ(map_keyframe_index(F1 / 2, s, plan), mid);
    EXPECT_EQ(pinned.data.row(mid), ex.features.data.row(20));
    keys.keyframes.push_back({F1, ex.features.data.row(0)});
    EXPECT_THROW(apply_constraints(track, keys, s, plan), ConfigError);
}

TEST(Synthesizer, FixedPoint) {
    const auto ex = fixtures::make_clip(44, 5, false);
    SynthesisConfig cfg;
    cfg.output_length = 44;
    cfg.noise.sigma = {0.0};
    ConstraintSet keys;
    for (int t = 0; t < 44; ++t) keys.keyframes.push_back({t, ex.features.data.row(t)});
    const auto out = synthesize({ex.features}, ex.skeleton, cfg, keys);
    ASSERT_EQ(plan_for({ex.features}, cfg).num_stages, 1);
    EXPECT_LE((out.data - ex.features.data).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Synthesizer, DefaultsStayInEnvelopeAndCover) {
    const auto ex = fixtures::make_clip(150, 6, false);
    SynthesisConfig cfg;
    cfg.output_length = 150;
    cfg.seed = 3;
    const auto out = synthesize({ex.features}, ex.skeleton, cfg);
    ASSERT_EQ(out.frames(), 150);
    expect_within_envelope(out, {ex.features}, all_columns(out), "defaults");
    EXPECT_GE(coverage({ex.features}, out, 11), 95.0);
}

TEST(Synthesizer, SeedsDifferAndRepeat) {
    const auto ex = fixtures::make_clip(120, 7, false);
    SynthesisConfig cfg;
    cfg.output_length = 120;
    cfg.seed = 1;
    const auto a = synthesize({ex.features}, ex.skeleton, cfg);
    const auto a2 = synthesize({ex.features}, ex.skeleton, cfg);
    EXPECT_EQ(a.data, a2.data);
    cfg.match.threads = 4;
    EXPECT_EQ(synthesize({ex.features}, ex.skeleton, cfg).data, a.data);
    cfg.seed = 2;
    const auto b = synthesize({ex.features}, ex.skeleton, cfg);
    EXPECT_NE(a.data, b.data);
    EXPECT_GT(set_diversity({a, b}, ex.features), 0.0);
}

TEST(Synthesizer, MultipleExamplesAndParts) {
    const auto a = fixtures::make_clip(120, 8, false);
    const auto b = fixtures::make_clip(150, 9, false);
    SynthesisConfig cfg;
    cfg.output_length = 300;
    cfg.parts = PartitionSpec::explicit_parts(
        {{"upper", {"Spine", "Spine1", "Spine2", "Neck", "Head", "HeadTop_End", "LeftShoulder", "LeftArm", "LeftForeArm",
                    "LeftHand", "RightShoulder", "RightArm", "RightForeArm", "RightHand"}},
         {"lower", {"Hips", "Spine", "LeftUpLeg", "LeftLeg", "LeftFoot", "LeftToeBase", "LeftToe_End", "RightUpLeg",
                    "RightLeg", "RightFoot", "RightToeBase", "RightToe_End"}}});
    const auto out = synthesize({{a.features, a.skeleton}, {b.features, b.skeleton}}, cfg);
    expect_within_envelope(out, {a.features, b.features}, all_columns(out), "parts");
    ConstraintSet loop;
    loop.loop = true;
    const auto looped = synthesize({a.features, b.features}, a.skeleton, cfg, loop);
    EXPECT_EQ(looped.data.row(299), looped.data.row(0));
}

TEST(Synthesizer, ConfigErrors) {
    const auto ex = fixtures::make_clip(60, 1, false);
    SynthesisConfig cfg;
    cfg.output_length = 5;
    EXPECT_THROW(synthesize({ex.features}, ex.skeleton, cfg), ConfigError);
    cfg.output_length = 60;
    cfg.K = 10;  // K*p = 110 > 60
    EXPECT_THROW(synthesize({ex.features}, ex.skeleton, cfg), ConfigError);
    cfg.K = 4;
    cfg.alpha = 0.0;
    cfg.output_length = 44;
    const auto short_ex = fixtures::make_clip(44, 1, false);
    ConstraintSet keys;
    for (int t = 0; t < 44; ++t) keys.keyframes.push_back({t, short_ex.features.data.row(t)});
    // the guess is the exemplar itself, so column minima are exactly zero
    EXPECT_THROW(synthesize({short_ex.features}, short_ex.skeleton, cfg, keys), NumericError);
    EXPECT_THROW(synthesize({ex.features}, fixtures::make_humanoid(true), SynthesisConfig{.output_length = 60}), ConfigError);
}

TEST(Synthesizer, ReassembleSingleSourceMatchesSynthesize) {
    const auto ex = fixtures::make_clip(100, 10, false);
    SynthesisConfig cfg;
    cfg.output_length = 140;
    cfg.seed = 5;
    std::vector<std::string> names;
    for (const auto& j : ex.skeleton.joints) names.push_back(j.name);
    const auto r = reassemble({{ex.features, ex.skeleton, {"all", names}, {}}}, ex.skeleton, cfg);
    EXPECT_EQ(r.data, synthesize({ex.features}, ex.skeleton, cfg).data);
}

TEST(Synthesizer, ReassembleHeterogeneous) {
    const auto zombie = fixtures::make_clip(120, 11, false);
    const auto monster = fixtures::make_clip(140, 12, true);
    const Skeleton target = zombie.skeleton;
    std::vector<std::string> body;
    for (const auto& j : target.joints)
        if (j.name != "RightArm" && j.name != "RightForeArm" && j.name != "RightHand") body.push_back(j.name);
    // monster joints carry a prefix on the target side to exercise the name map
    Skeleton monster_skel = monster.skeleton;
    std::unordered_map<std::string, std::string> map;
    for (auto& j : monster_skel.joints) {
        map["m_" + j.name] = j.name;
        j.name = "m_" + j.name;
    }
    const std::vector<std::string> arm{"m_RightShoulder", "m_RightArm", "m_RightForeArm", "m_RightHand"};
    SynthesisConfig cfg;
    cfg.output_length = 200;
    const auto out = reassemble({{zombie.features, zombie.skeleton, {"body", body}, {}},
                                 {monster.features, monster_skel, {"arm", arm}, map}},
                                target, cfg);
    ASSERT_EQ(out.layout, zombie.features.layout);

    for (const char* name : {"RightArm", "RightForeArm", "RightHand"}) {
        const int tj = *target.find(name), sj = *monster.skeleton.find(name);
        for (int k = 0; k < 6; ++k) {
            const auto col = out.data.col(6 * tj + k);
            EXPECT_GE(col.minCoeff(), monster.features.data.col(6 * sj + k).minCoeff() - 1e-9);
            EXPECT_LE(col.maxCoeff(), monster.features.data.col(6 * sj + k).maxCoeff() + 1e-9);
        }
    }
    std::vector<int> body_cols;
    for (const auto& n : body)
        if (n != "RightShoulder")
            for (int k = 0; k < 6; ++k) body_cols.push_back(6 * *target.find(n) + k);
    for (int c = out.layout.root_col(); c < out.width(); ++c) body_cols.push_back(c);
    expect_within_envelope(out, {zombie.features}, body_cols, "body");

    auto bad = map;
    bad["m_RightHand"] = "Tail";
    EXPECT_THROW(reassemble({{zombie.features, zombie.skeleton, {"body", body}, {}},
                             {monster.features, monster_skel, {"arm", arm}, bad}},
                            target, cfg),
                 ConfigError);
}
