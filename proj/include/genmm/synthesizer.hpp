#pragma once

// Multi-stage synthesis: noise at the coarsest stage, match-and-blend
// refinement per stage, upsampling in between, and constraint pinning for
// completion, keyframes and looping.

#include "genmm/error.hpp"
#include "genmm/genmatch.hpp"
#include "genmm/motion_io.hpp"
#include "genmm/pyramid.hpp"
#include "genmm/representation.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace genmm {

/// Gaussian moments for the initial guess. Empty vectors mean "take them
/// from the coarsest exemplars"; a single value broadcasts to every channel.
struct NoiseSpec {
    std::vector<double> mu;
    std::vector<double> sigma;

    bool from_example() const { return mu.empty() && sigma.empty(); }
};

struct SynthesisConfig {
    int patch_size = 11;
    double K = 4.0;
    double alpha = 0.01;
    int iterations = 5;
    double ratio = 4.0 / 3.0;
    int output_length = 0;
    std::uint64_t seed = 0;
    PartitionSpec parts = PartitionSpec::whole_skeleton();
    NoiseSpec noise;
    MatchOptions match;

    void validate() const {
        if (patch_size < 2) throw ConfigError("patch size p must be >= 2");
        if (!(K >= 1.0)) throw ConfigError("K must be >= 1");
        if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
        if (iterations < 0) throw ConfigError("iterations E must be >= 0");
        if (!(ratio > 1.0)) throw ConfigError("ratio r must be > 1");
        if (output_length < patch_size) throw ConfigError("output length F must be >= p");
        for (double s : noise.sigma)
            if (!(s >= 0.0)) throw ConfigError("noise sigma must be >= 0");
    }
};

struct Keyframe {
    int coarse_frame = 0;
    Eigen::RowVectorXd pose;
};

struct FixedPartial {
    SkeletalPart part;
    MotionFeatures track;  // full layout, F frames; only the part's columns are used
};

struct ConstraintSet {
    std::vector<Keyframe> keyframes;
    std::optional<FixedPartial> fixed_partial;
    bool loop = false;

    bool empty() const { return keyframes.empty() && !fixed_partial && !loop; }
};

namespace detail {

struct Moments {
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;
};

/// Population mean/std per column, pooled over all tracks.
inline Moments column_moments(const std::vector<RowMatrix>& tracks) {
    const Eigen::Index w = tracks.at(0).cols();
    Moments m{Eigen::VectorXd::Zero(w), Eigen::VectorXd::Zero(w)};
    double n = 0.0;
    for (const auto& t : tracks) {
        for (Eigen::Index r = 0; r < t.rows(); ++r) m.mu += t.row(r).transpose();
        n += static_cast<double>(t.rows());
    }
    m.mu /= n;
    for (const auto& t : tracks)
        for (Eigen::Index r = 0; r < t.rows(); ++r) m.sigma += (t.row(r).transpose() - m.mu).cwiseAbs2();
    m.sigma = (m.sigma / n).cwiseSqrt();
    return m;
}

/// Per-channel moments of the assembled layout; each column takes the
/// moments of the first part that reads it.
inline Moments layout_moments(const std::vector<PartExemplars>& coarse, const FeatureLayout& layout) {
    Moments out{Eigen::VectorXd::Zero(layout.width()), Eigen::VectorXd::Zero(layout.width())};
    std::vector<char> done(layout.width(), 0);
    for (const auto& src : coarse) {
        const Moments m = column_moments(src.tracks);
        const auto cols = src.part.columns(layout);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (done[cols[k]]) continue;
            done[cols[k]] = 1;
            out.mu[cols[k]] = m.mu[static_cast<Eigen::Index>(k)];
            out.sigma[cols[k]] = m.sigma[static_cast<Eigen::Index>(k)];
        }
    }
    return out;
}

inline Eigen::VectorXd broadcast(const std::vector<double>& v, Eigen::Index width, const char* what) {
    if (v.size() == 1) return Eigen::VectorXd::Constant(width, v[0]);
    if (static_cast<Eigen::Index>(v.size()) != width)
        throw ConfigError(std::string("noise ") + what + " must have 1 or " + std::to_string(width) + " entries");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), width);
}

inline MotionFeatures sample_guess(int frames, const FeatureLayout& layout, double frame_time, const Moments& base,
                                   const NoiseSpec& noise, std::uint64_t seed) {
    const Eigen::Index w = layout.width();
    const Eigen::VectorXd mu = noise.mu.empty() ? base.mu : broadcast(noise.mu, w, "mu");
    const Eigen::VectorXd sigma = noise.sigma.empty() ? base.sigma : broadcast(noise.sigma, w, "sigma");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MotionFeatures g;
    g.layout = layout;
    g.frame_time = frame_time;
    g.data.resize(frames, w);
    for (int t = 0; t < frames; ++t)
        for (Eigen::Index c = 0; c < w; ++c) g.data(t, c) = mu[c] + sigma[c] * normal(rng);
    return g;
}

inline void check_constraints(const ConstraintSet& cons, const StagePlan& plan, const FeatureLayout& layout) {
    const int F1 = plan.synthesis_lengths.front();
    for (const auto& k : cons.keyframes) {
        if (k.coarse_frame < 0 || k.coarse_frame >= F1)
            throw ConfigError("keyframe index " + std::to_string(k.coarse_frame) + " is outside the coarsest stage (" +
                              std::to_string(F1) + " frames)");
        if (k.pose.size() != layout.width()) throw ConfigError("keyframe pose has the wrong width");
    }
    if (cons.fixed_partial) {
        const auto& fp = *cons.fixed_partial;
        if (fp.track.frames() != plan.synthesis_lengths.back())
            throw ConfigError("fixed partial track must have exactly F frames");
        if (!(fp.track.layout == layout)) throw ConfigError("fixed partial track layout differs from the output");
    }
    if (cons.loop && plan.synthesis_lengths.back() < 2) throw ConfigError("looping needs at least 2 frames");
}

}  // namespace detail

inline int map_keyframe_index(int coarse_frame, int stage, const StagePlan& plan) {
    if (stage == 0) return coarse_frame;
    const int F1 = plan.synthesis_lengths.front();
    const int Fs = plan.synthesis_lengths[stage];
    if (F1 <= 1) return 0;
    return static_cast<int>(std::round(static_cast<double>(coarse_frame) * (Fs - 1) / (F1 - 1)));
}

/// Gaussian noise of F_1 frames; moments pooled over the coarsest exemplars
/// unless the config overrides them. `stage` indices are zero-based.
inline MotionFeatures init_coarse_guess(const StagePlan& plan, const SynthesisConfig& config,
                                        const std::vector<MotionFeatures>& exemplar_level_1) {
    if (exemplar_level_1.empty()) throw ConfigError("no exemplars for the initial guess");
    const FeatureLayout layout = exemplar_level_1[0].layout;
    std::vector<RowMatrix> tracks;
    for (const auto& e : exemplar_level_1) tracks.push_back(e.data);
    const detail::Moments m = detail::column_moments(tracks);
    return detail::sample_guess(plan.synthesis_lengths.front(), layout, exemplar_level_1[0].frame_time, m,
                                config.noise, config.seed);
}

/// Overwrites pinned content in a stage's track.
inline MotionFeatures apply_constraints(const MotionFeatures& track, const ConstraintSet& cons, int stage,
                                        const StagePlan& plan) {
    if (stage < 0 || stage >= plan.num_stages) throw ConfigError("stage index out of range");
    const int Fs = plan.synthesis_lengths[stage];
    if (track.frames() != Fs) throw ConfigError("track length does not match the stage plan");
    if (cons.empty()) return track;
    MotionFeatures out = track;
    for (const auto& k : cons.keyframes) {
        if (k.coarse_frame < 0 || k.coarse_frame >= plan.synthesis_lengths.front())
            throw ConfigError("keyframe index " + std::to_string(k.coarse_frame) + " out of range");
        const int idx = map_keyframe_index(k.coarse_frame, stage, plan);
        if (idx < 0 || idx >= Fs) throw ConfigError("mapped keyframe index out of range");
        out.data.row(idx) = k.pose;
    }
    if (cons.fixed_partial) {
        const auto& fp = *cons.fixed_partial;
        const MotionFeatures pinned = resample(fp.track, Fs);
        for (int c : fp.part.columns(out.layout)) out.data.col(c) = pinned.data.col(c);
    }
    if (cons.loop) out.data.row(Fs - 1) = out.data.row(0);
    return out;
}

namespace detail {

/// Coarse-to-fine loop shared by synthesize and reassemble.
/// stages[s] holds each part's exemplar tracks at stage s.
inline MotionFeatures run_pipeline(const StagePlan& plan, const std::vector<std::vector<PartExemplars>>& stages,
                                   const FeatureLayout& layout, double frame_time, const SynthesisConfig& cfg,
                                   const ConstraintSet& cons) {
    const Moments base = layout_moments(stages.front(), layout);
    MotionFeatures guess =
        sample_guess(plan.synthesis_lengths.front(), layout, frame_time, base, cfg.noise, cfg.seed);
    guess = apply_constraints(guess, cons, 0, plan);
    for (int s = 0; s < plan.num_stages; ++s) {
        if (s > 0) guess = apply_constraints(resample(guess, plan.synthesis_lengths[s]), cons, s, plan);
        guess = run_stage_parts(guess, stages[s], cfg.patch_size, cfg.alpha, cfg.iterations, cfg.match);
        guess = apply_constraints(guess, cons, s, plan);
    }
    return guess;
}

}  // namespace detail

inline StagePlan plan_for(const std::vector<MotionFeatures>& examples, const SynthesisConfig& config) {
    std::vector<int> lengths;
    for (const auto& e : examples) lengths.push_back(e.frames());
    return plan_stages(lengths, config.output_length, config.patch_size, config.K, config.ratio);
}

/// Synthesizes F frames from one or more examples sharing one skeleton.
inline MotionFeatures synthesize(const std::vector<MotionFeatures>& examples, const Skeleton& skeleton,
                                 const SynthesisConfig& config, const ConstraintSet& constraints = {}) {
    config.validate();
    if (examples.empty()) throw ConfigError("at least one example is required");
    const FeatureLayout layout = examples[0].layout;
    if (layout.joints != skeleton.num_joints()) throw ConfigError("example layout does not match the skeleton");
    for (const auto& e : examples)
        if (!(e.layout == layout)) throw ConfigError("examples must share one skeleton and contact layout");
    const auto parts = partition_skeleton(skeleton, config.parts);
    const StagePlan plan = plan_for(examples, config);
    detail::check_constraints(constraints, plan, layout);

    const auto pyramid = build_exemplar_pyramid(examples, plan);
    std::vector<std::vector<PartExemplars>> stages;
    for (const auto& level : pyramid) stages.push_back(slice_exemplars(level, parts));
    return detail::run_pipeline(plan, stages, layout, examples[0].frame_time, config, constraints);
}

inline MotionFeatures synthesize(const std::vector<std::pair<MotionFeatures, Skeleton>>& examples,
                                 const SynthesisConfig& config, const ConstraintSet& constraints = {}) {
    if (examples.empty()) throw ConfigError("at least one example is required");
    std::vector<MotionFeatures> feats;
    for (const auto& [f, s] : examples) {
        if (!s.same_structure(examples[0].second))
            throw ConfigError("synthesize needs a shared skeleton; use reassemble for heterogeneous skeletons");
        feats.push_back(f);
    }
    return synthesize(feats, examples[0].second, config, constraints);
}

/// One part of a reassembled creature: which joints of which example, and
/// how they are named on the target skeleton.
struct ReassemblySource {
    MotionFeatures example;
    Skeleton skeleton;
    PartSpec part;                                          // joint names on the source skeleton
    std::unordered_map<std::string, std::string> joint_map;  // source name -> target name; identity if absent
};

/// Resolved target-side parts, in source order. Validates the mapping.
inline std::vector<SkeletalPart> reassembly_parts(const std::vector<ReassemblySource>& sources,
                                                  const Skeleton& target) {
    std::vector<SkeletalPart> parts;
    for (const auto& src : sources) {
        SkeletalPart tp;
        tp.name = src.part.name;
        for (const auto& name : src.part.joints) {
            if (!src.skeleton.find(name))
                throw ConfigError("part '" + src.part.name + "': unknown source joint '" + name + "'");
            auto it = src.joint_map.find(name);
            const std::string& tname = it == src.joint_map.end() ? name : it->second;
            auto tj = target.find(tname);
            if (!tj) throw ConfigError("part '" + src.part.name + "': unmapped target joint '" + tname + "'");
            tp.joint_indices.push_back(*tj);
        }
        tp.include_root_motion =
            std::find(tp.joint_indices.begin(), tp.joint_indices.end(), 0) != tp.joint_indices.end();
        parts.push_back(std::move(tp));
    }
    validate_partition(target, parts);
    return parts;
}

/// Synthesizes a creature whose parts come from different examples, possibly
/// with different skeletons. Each part draws patches only from its source.
inline MotionFeatures reassemble(const std::vector<ReassemblySource>& sources, const Skeleton& target,
                                 const SynthesisConfig& config, const ConstraintSet& constraints = {}) {
    config.validate();
    if (sources.empty()) throw ConfigError("reassembly needs at least one source");
    const auto parts = reassembly_parts(sources, target);

    int contacts = -1;
    for (std::size_t b = 0; b < sources.size(); ++b) {
        if (sources[b].example.layout.joints != sources[b].skeleton.num_joints())
            throw ConfigError("source '" + sources[b].part.name + "' features do not match its skeleton");
        if (!parts[b].include_root_motion) continue;
        const int c = sources[b].example.layout.contacts;
        if (contacts >= 0 && c != contacts) throw ConfigError("root-motion sources disagree on contact channels");
        contacts = c;
    }
    const FeatureLayout layout{target.num_joints(), contacts};

    // Distinct source examples share one pyramid entry.
    std::vector<MotionFeatures> examples;
    std::vector<int> example_of(sources.size());
    for (std::size_t b = 0; b < sources.size(); ++b) {
        int found = -1;
        for (std::size_t e = 0; e < examples.size(); ++e)
            if (examples[e].data.rows() == sources[b].example.data.rows() &&
                examples[e].data.cols() == sources[b].example.data.cols() &&
                examples[e].data == sources[b].example.data)
                found = static_cast<int>(e);
        if (found < 0) {
            found = static_cast<int>(examples.size());
            examples.push_back(sources[b].example);
        }
        example_of[b] = found;
    }
    const StagePlan plan = plan_for(examples, config);
    detail::check_constraints(constraints, plan, layout);
    const auto pyramid = build_exemplar_pyramid(examples, plan);

    std::vector<std::vector<int>> source_cols(sources.size());
    for (std::size_t b = 0; b < sources.size(); ++b) {
        SkeletalPart sp;
        for (const auto& name : sources[b].part.joints) sp.joint_indices.push_back(*sources[b].skeleton.find(name));
        sp.include_root_motion = parts[b].include_root_motion;
        source_cols[b] = sp.columns(sources[b].example.layout);
    }

    std::vector<std::vector<PartExemplars>> stages(plan.num_stages);
    for (int s = 0; s < plan.num_stages; ++s)
        for (std::size_t b = 0; b < sources.size(); ++b)
            stages[s].push_back({parts[b], {slice_columns(pyramid[s][example_of[b]].data, source_cols[b])}});
    return detail::run_pipeline(plan, stages, layout, examples[0].frame_time, config, constraints);
}

}  // namespace genmm
