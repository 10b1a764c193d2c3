#pragma once

// Command-line front end: synth, complete, keyframe, loop, reassemble, eval
// and probe. Exit codes: 0 ok, 2 config, 3 parse, 4 numeric, 5 I/O.

#include "genmm/config.hpp"
#include "genmm/error.hpp"
#include "genmm/genmatch.hpp"
#include "genmm/metrics.hpp"
#include "genmm/motion_io.hpp"
#include "genmm/representation.hpp"
#include "genmm/synthesizer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace genmm::cli {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfig = 2, kParse = 3, kNumeric = 4, kIo = 5 };

inline int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return kConfig;
        case ErrorKind::Parse: return kParse;
        case ErrorKind::Numeric: return kNumeric;
        case ErrorKind::Io: return kIo;
    }
    return kUnexpected;
}

struct LoadedClip {
    std::string path;
    Skeleton skeleton;
    RawMotion motion;
    MotionFeatures features;
    RootAnchor anchor;
};

inline LoadedClip load_clip(const std::string& path, const ContactSettings& contacts) {
    LoadedClip clip;
    clip.path = path;
    std::tie(clip.skeleton, clip.motion) = parse_bvh(read_text_file(path));
    if (contacts.foot_joints) {
        clip.skeleton.foot_joints.clear();
        for (const auto& name : *contacts.foot_joints) {
            auto j = clip.skeleton.find(name);
            if (!j) throw ConfigError("foot joint '" + name + "' not found in '" + path + "'");
            clip.skeleton.foot_joints.push_back(*j);
        }
    } else {
        clip.skeleton.foot_joints = detect_foot_joints(clip.skeleton);
    }
    const double threshold = contacts.velocity_threshold.value_or(default_contact_threshold(clip.skeleton));
    const auto labels =
        compute_contact_labels(forward_kinematics(clip.skeleton, clip.motion), clip.skeleton.foot_joints, threshold);
    std::tie(clip.features, clip.anchor) = encode(clip.skeleton, clip.motion, labels);
    return clip;
}

/// Flag values; unset flags fall back to the config document.
struct Flags {
    std::vector<std::string> inputs;
    std::vector<std::string> generated;
    std::string output;
    std::optional<std::string> config;
    std::optional<int> frames;
    std::optional<std::uint64_t> seed;
    std::optional<int> samples;
    std::optional<int> threads;
    std::optional<int> patch_size;
    std::optional<int> iterations;
    std::optional<int> block_rows;
    std::optional<double> K;
    std::optional<double> alpha;
    std::optional<double> ratio;
    std::optional<double> tau;
    std::optional<std::string> anchor;
    std::optional<std::string> labels_out;
    std::optional<std::string> partial;
    std::optional<std::string> part;
    std::optional<std::string> csv;
    std::optional<std::string> frames_list;
};

namespace detail {

inline std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad integer list '" + s + "'");
        }
    }
    return out;
}

inline JobConfig resolve_config(const Flags& f) {
    JobConfig cfg = f.config ? load_job_config(*f.config) : JobConfig{};
    auto& s = cfg.synthesis;
    if (f.frames) s.output_length = *f.frames;
    if (f.seed) s.seed = *f.seed;
    if (f.samples) cfg.samples = *f.samples;
    if (f.threads) s.match.threads = *f.threads;
    if (f.patch_size) s.patch_size = *f.patch_size;
    if (f.iterations) s.iterations = *f.iterations;
    if (f.block_rows) s.match.block_rows = *f.block_rows;
    if (f.K) s.K = *f.K;
    if (f.alpha) s.alpha = *f.alpha;
    if (f.ratio) s.ratio = *f.ratio;
    if (f.tau) cfg.metrics.tau = *f.tau;
    if (f.labels_out) cfg.labels_out = *f.labels_out;
    if (f.anchor) {
        if (*f.anchor == "example") {
            cfg.anchor.from_example = true;
        } else {
            std::vector<double> v;
            std::stringstream ss(*f.anchor);
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    v.push_back(std::stod(item));
                } catch (const std::exception&) {
                    throw ConfigError("bad --anchor value '" + *f.anchor + "'");
                }
            }
            if (v.size() != 3) throw ConfigError("--anchor takes 'example' or x,y,z");
            cfg.anchor = {false, Vec3(v[0], v[1], v[2])};
        }
    }
    if (f.partial || f.part) {
        CompletionSpec c = cfg.completion.value_or(CompletionSpec{});
        if (f.partial) c.track = *f.partial;
        if (f.part) c.part = *f.part;
        cfg.completion = c;
    }
    if (f.frames_list) cfg.probe_frames = parse_int_list(*f.frames_list);
    if (cfg.samples < 1) throw ConfigError("samples must be >= 1");
    return cfg;
}

inline std::vector<LoadedClip> load_inputs(const std::vector<std::string>& paths, const ContactSettings& contacts) {
    if (paths.empty()) throw ConfigError("at least one input clip (-i) is required");
    std::vector<LoadedClip> clips;
    for (const auto& p : paths) clips.push_back(load_clip(p, contacts));
    for (const auto& c : clips)
        if (!c.skeleton.same_structure(clips[0].skeleton) || !(c.features.layout == clips[0].features.layout))
            throw ConfigError("input '" + c.path + "' has a different skeleton than '" + clips[0].path +
                              "'; use reassemble for heterogeneous skeletons");
    return clips;
}

inline std::string sample_path(const std::string& output, int index, int count) {
    if (count == 1) return output;
    namespace fs = std::filesystem;
    fs::path p(output);
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_%03d", index);
    return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

inline std::string labels_csv(const ContactLabels& L) {
    std::ostringstream o;
    for (Eigen::Index t = 0; t < L.rows(); ++t) {
        for (Eigen::Index c = 0; c < L.cols(); ++c) o << (c ? "," : "") << static_cast<int>(L(t, c));
        o << '\n';
    }
    return o.str();
}

inline RootAnchor output_anchor(const JobConfig& cfg, const RootAnchor& example_anchor) {
    return cfg.anchor.from_example ? example_anchor : RootAnchor{cfg.anchor.position};
}

inline void emit(const JobConfig& cfg, const std::string& output, int index, int count, const MotionFeatures& result,
                 const Skeleton& skel, const RootAnchor& anchor) {
    const auto [motion, labels] = decode(result, anchor, skel);
    write_text_file(sample_path(output, index, count), write_bvh(skel, motion));
    if (cfg.labels_out) write_text_file(sample_path(*cfg.labels_out, index, count), labels_csv(labels));
}

inline ConstraintSet build_constraints(const JobConfig& cfg, const std::vector<LoadedClip>& clips,
                                       const std::vector<SkeletalPart>& parts, const StagePlan& plan,
                                       const ContactSettings& contacts) {
    ConstraintSet cons;
    cons.loop = cfg.loop;
    const FeatureLayout layout = clips[0].features.layout;
    const int F1 = plan.synthesis_lengths.front();
    const int F = plan.synthesis_lengths.back();
    for (const auto& ks : cfg.keyframes) {
        Keyframe k;
        if (ks.coarse_frame) {
            k.coarse_frame = *ks.coarse_frame;
        } else {
            if (*ks.frame < 0 || *ks.frame >= F) throw ConfigError("keyframe frame " + std::to_string(*ks.frame) + " is outside the output");
            k.coarse_frame = F == 1 ? 0 : static_cast<int>(std::round(static_cast<double>(*ks.frame) * (F1 - 1) / (F - 1)));
        }
        if (!ks.pose.empty()) {
            k.pose = Eigen::Map<const Eigen::RowVectorXd>(ks.pose.data(), static_cast<Eigen::Index>(ks.pose.size()));
        } else {
            const int e = ks.example.value_or(0);
            if (e < 0 || e >= static_cast<int>(clips.size())) throw ConfigError("keyframe example index out of range");
            const int fr = *ks.example_frame;
            if (fr < 0 || fr >= clips[e].features.frames()) throw ConfigError("keyframe example_frame out of range");
            k.pose = clips[e].features.data.row(fr);
        }
        cons.keyframes.push_back(std::move(k));
    }
    if (cfg.completion) {
        const auto& c = *cfg.completion;
        if (c.track.empty()) throw ConfigError("completion needs a partial-body track (--partial)");
        if (c.part.empty()) throw ConfigError("completion needs a part name (--part)");
        const SkeletalPart* found = nullptr;
        for (const auto& p : parts)
            if (p.name == c.part) found = &p;
        if (!found) throw ConfigError("completion part '" + c.part + "' is not in the configured partition");
        LoadedClip track = load_clip(c.track, contacts);
        if (!track.skeleton.same_structure(clips[0].skeleton) || !(track.features.layout == layout))
            throw ConfigError("partial track '" + c.track + "' does not use the example skeleton");
        if (track.features.frames() != F)
            throw ConfigError("partial track has " + std::to_string(track.features.frames()) + " frames but the output has " +
                              std::to_string(F));
        cons.fixed_partial = FixedPartial{*found, std::move(track.features)};
    }
    return cons;
}

inline int run_synthesis(const std::string& command, const Flags& flags, std::ostream& out) {
    JobConfig cfg = resolve_config(flags);
    if (command == "loop") cfg.loop = true;
    if (command == "keyframe" && cfg.keyframes.empty())
        throw ConfigError("keyframe needs at least one entry under 'keyframes' in the config");
    if (command == "complete" && !cfg.completion)
        throw ConfigError("complete needs --partial and --part (or a 'completion' config entry)");
    if (flags.output.empty()) throw ConfigError("an output path (-o) is required");

    const auto clips = load_inputs(flags.inputs, cfg.contacts);
    std::vector<MotionFeatures> examples;
    int total = 0;
    for (const auto& c : clips) {
        examples.push_back(c.features);
        total += c.features.frames();
    }
    auto& s = cfg.synthesis;
    if (s.output_length == 0) {
        if (cfg.completion && !cfg.completion->track.empty())
            s.output_length = load_clip(cfg.completion->track, cfg.contacts).features.frames();
        else
            s.output_length = 2 * total;
    }
    s.validate();
    const auto parts = partition_skeleton(clips[0].skeleton, s.parts);
    const StagePlan plan = plan_for(examples, s);
    const ConstraintSet cons = build_constraints(cfg, clips, parts, plan, cfg.contacts);
    const RootAnchor anchor = output_anchor(cfg, clips[0].anchor);

    const std::uint64_t base_seed = s.seed;
    for (int k = 0; k < cfg.samples; ++k) {
        SynthesisConfig sc = s;
        sc.seed = base_seed + static_cast<std::uint64_t>(k);
        const MotionFeatures result = synthesize(examples, clips[0].skeleton, sc, cons);
        emit(cfg, flags.output, k, cfg.samples, result, clips[0].skeleton, anchor);
        out << sample_path(flags.output, k, cfg.samples) << '\n';
    }
    return kOk;
}

inline int run_reassemble(const Flags& flags, std::ostream& out) {
    JobConfig cfg = resolve_config(flags);
    if (!cfg.reassembly) throw ConfigError("reassemble needs a 'reassemble' section in the config");
    if (flags.output.empty()) throw ConfigError("an output path (-o) is required");
    const auto& rs = *cfg.reassembly;

    std::map<std::string, LoadedClip> cache;
    auto get = [&](const std::string& path) -> const LoadedClip& {
        auto it = cache.find(path);
        if (it == cache.end()) it = cache.emplace(path, load_clip(path, cfg.contacts)).first;
        return it->second;
    };
    const Skeleton target = get(rs.target).skeleton;
    std::vector<ReassemblySource> sources;
    int longest = 0;
    for (const auto& ss : rs.sources) {
        const LoadedClip& c = get(ss.input);
        ReassemblySource src;
        src.example = c.features;
        src.skeleton = c.skeleton;
        src.part = PartSpec{ss.name, ss.joints};
        src.joint_map.insert(ss.mapping.begin(), ss.mapping.end());
        sources.push_back(std::move(src));
        longest = std::max(longest, c.features.frames());
    }
    if (sources.empty()) throw ConfigError("reassemble needs at least one source");
    auto& s = cfg.synthesis;
    if (s.output_length == 0) s.output_length = 2 * longest;
    const RootAnchor anchor = output_anchor(cfg, get(rs.sources.front().input).anchor);
    const std::uint64_t base_seed = s.seed;
    for (int k = 0; k < cfg.samples; ++k) {
        SynthesisConfig sc = s;
        sc.seed = base_seed + static_cast<std::uint64_t>(k);
        const MotionFeatures result = reassemble(sources, target, sc);
        emit(cfg, flags.output, k, cfg.samples, result, target, anchor);
        out << sample_path(flags.output, k, cfg.samples) << '\n';
    }
    return kOk;
}

inline int run_eval(const Flags& flags, std::ostream& out) {
    const JobConfig cfg = resolve_config(flags);
    if (flags.generated.empty()) throw ConfigError("eval needs at least one generated clip (-g)");
    const auto t0 = std::chrono::steady_clock::now();
    genmm::detail::reset_peak_rss();
    const auto clips = load_inputs(flags.inputs, cfg.contacts);
    std::vector<MotionFeatures> examples;
    for (const auto& c : clips) examples.push_back(c.features);
    std::vector<MotionFeatures> outputs;
    for (const auto& g : flags.generated) {
        LoadedClip c = load_clip(g, cfg.contacts);
        if (!c.skeleton.same_structure(clips[0].skeleton) || !(c.features.layout == examples[0].layout))
            throw ConfigError("generated clip '" + g + "' does not use the example skeleton");
        outputs.push_back(std::move(c.features));
    }
    const int p_local = cfg.metrics.p_local.value_or(cfg.synthesis.patch_size);
    const int p_global = cfg.metrics.p_global.value_or(2 * p_local + 1);
    MetricReport report;
    const MatchOptions opt = cfg.synthesis.match;
    for (const auto& o : outputs) {
        report.coverage += coverage(examples, o, p_local, cfg.metrics.tau, opt);
        report.local_patch_distance += patch_distance(examples, o, p_local, opt);
        report.global_patch_distance += patch_distance(examples, o, p_global, opt);
    }
    const double n = static_cast<double>(outputs.size());
    report.coverage /= n;
    report.local_patch_distance /= n;
    report.global_patch_distance /= n;
    if (outputs.size() >= 2) report.set_diversity = set_diversity(outputs, examples[0]);
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.peak_memory = genmm::detail::peak_rss_bytes();
    out << report.to_text();
    return kOk;
}

inline int run_probe(const Flags& flags, std::ostream& out) {
    JobConfig cfg = resolve_config(flags);
    const auto clips = load_inputs(flags.inputs, cfg.contacts);
    std::vector<MotionFeatures> examples;
    for (const auto& c : clips) examples.push_back(c.features);
    std::vector<int> frames = cfg.probe_frames;
    if (frames.empty()) frames = {1000, 2000, 4000, 8000, 16000};
    cfg.synthesis.output_length = frames.front();
    cfg.synthesis.validate();
    const auto samples = scaling_probe(examples, clips[0].skeleton, cfg.synthesis, frames);
    const std::string csv = probe_csv(samples);
    if (flags.csv)
        write_text_file(*flags.csv, csv);
    else
        out << csv;
    return kOk;
}

inline void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("-c,--config", f.config, "JSON job config");
    sub->add_option("--threads", f.threads, "Worker threads (default: all cores)");
    sub->add_option("--block-rows", f.block_rows, "Distance rows per block");
}

inline void add_synthesis(CLI::App* sub, Flags& f) {
    sub->add_option("-i,--input", f.inputs, "Example BVH clip (repeatable)");
    sub->add_option("-o,--output", f.output, "Output BVH path");
    sub->add_option("--frames", f.frames, "Output length F (default: 2x example length)");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--samples", f.samples, "Number of outputs; writes out_000.bvh, ...");
    sub->add_option("-p,--patch-size", f.patch_size, "Patch size p");
    sub->add_option("-K,--coarse-ratio", f.K, "Coarsest example length in patches (K)");
    sub->add_option("--alpha", f.alpha, "Completeness knob alpha");
    sub->add_option("-E,--iterations", f.iterations, "Iterations per stage");
    sub->add_option("-r,--ratio", f.ratio, "Pyramid ratio r");
    sub->add_option("--anchor", f.anchor, "Root anchor: 'example' or x,y,z (default origin)");
    sub->add_option("--labels", f.labels_out, "Also write contact labels as CSV");
    add_common(sub, f);
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Example-based motion synthesis by generative motion matching", "genmm"};
    app.require_subcommand(1);
    Flags flags;

    auto* synth = app.add_subcommand("synth", "Synthesize novel motion from example clips");
    detail::add_synthesis(synth, flags);
    auto* complete = app.add_subcommand("complete", "Complete a partial-body track");
    detail::add_synthesis(complete, flags);
    complete->add_option("--partial", flags.partial, "BVH whose part columns are pinned");
    complete->add_option("--part", flags.part, "Name of the pinned part in the config's partition");
    auto* keyframe = app.add_subcommand("keyframe", "Synthesize through keyframes listed in the config");
    detail::add_synthesis(keyframe, flags);
    auto* loop = app.add_subcommand("loop", "Synthesize a seamlessly looping clip");
    detail::add_synthesis(loop, flags);
    auto* reasm = app.add_subcommand("reassemble", "Combine parts of heterogeneous skeletons");
    detail::add_synthesis(reasm, flags);
    auto* eval = app.add_subcommand("eval", "Print coverage, diversity and patch distances");
    eval->add_option("-i,--input", flags.inputs, "Example BVH clip (repeatable)");
    eval->add_option("-g,--generated", flags.generated, "Generated BVH clip (repeatable)");
    eval->add_option("-p,--patch-size", flags.patch_size, "Local patch size");
    eval->add_option("--tau", flags.tau, "Coverage RMS tolerance");
    detail::add_common(eval, flags);
    auto* probe = app.add_subcommand("probe", "Measure time and memory against output length");
    probe->add_option("-i,--input", flags.inputs, "Example BVH clip (repeatable)");
    probe->add_option("--frames-list", flags.frames_list, "Comma-separated output lengths");
    probe->add_option("--csv", flags.csv, "Write CSV here instead of stdout");
    probe->add_option("--seed", flags.seed, "Random seed");
    detail::add_common(probe, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "genmm: " << e.what() << '\n';
        return kConfig;
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "reassemble") return detail::run_reassemble(flags, out);
        if (name == "eval") return detail::run_eval(flags, out);
        if (name == "probe") return detail::run_probe(flags, out);
        return detail::run_synthesis(name, flags, out);
    } catch (const Error& e) {
        err << "genmm: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "genmm: unexpected error: " << e.what() << '\n';
        return kUnexpected;
    }
}

}  // namespace genmm::cli
