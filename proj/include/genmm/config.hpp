#pragma once

// Job configuration document (JSON). Every CLI flag has a key here; flags
// override the document.

#include "genmm/error.hpp"
#include "genmm/genmatch.hpp"
#include "genmm/metrics.hpp"
#include "genmm/synthesizer.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace genmm {

struct ContactSettings {
    std::optional<std::vector<std::string>> foot_joints;
    std::optional<double> velocity_threshold;
};

/// A pinned pose, given either inline or as a frame of one of the examples.
/// `frame` is an output-frame index; `coarse_frame` indexes the coarsest stage.
struct KeyframeSpec {
    std::optional<int> frame;
    std::optional<int> coarse_frame;
    std::optional<int> example;
    std::optional<int> example_frame;
    std::vector<double> pose;
};

struct CompletionSpec {
    std::string part;
    std::string track;
};

struct ReassemblySourceSpec {
    std::string input;
    std::string name;
    std::vector<std::string> joints;
    std::map<std::string, std::string> mapping;
};

struct ReassemblySpec {
    std::string target;
    std::vector<ReassemblySourceSpec> sources;
};

struct MetricSettings {
    double tau = kDefaultCoverageTolerance;
    std::optional<int> p_local;
    std::optional<int> p_global;
};

struct AnchorSpec {
    bool from_example = false;
    Vec3 position = Vec3::Zero();
};

struct JobConfig {
    SynthesisConfig synthesis;  // output_length 0 means "pick the default"
    int samples = 1;
    ContactSettings contacts;
    std::vector<KeyframeSpec> keyframes;
    bool loop = false;
    std::optional<CompletionSpec> completion;
    std::optional<ReassemblySpec> reassembly;
    MetricSettings metrics;
    AnchorSpec anchor;
    std::optional<std::string> labels_out;
    std::vector<int> probe_frames;
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline std::vector<double> number_or_list(const json& v, const std::string& what) {
    if (v.is_number()) return {v.get<double>()};
    if (v.is_array()) return v.get<std::vector<double>>();
    throw ConfigError(what + " must be a number or a list of numbers");
}

inline PartitionSpec parse_parts(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() != "whole") throw ConfigError("parts must be \"whole\" or a list of parts");
        return PartitionSpec::whole_skeleton();
    }
    if (!v.is_array()) throw ConfigError("parts must be \"whole\" or a list of parts");
    std::vector<PartSpec> parts;
    for (const auto& p : v) {
        reject_unknown(p, {"name", "joints"}, "part");
        parts.push_back({p.at("name").get<std::string>(), p.at("joints").get<std::vector<std::string>>()});
    }
    return PartitionSpec::explicit_parts(std::move(parts));
}

}  // namespace detail

inline JobConfig parse_job_config(const std::string& text) {
    using detail::json;
    JobConfig cfg;
    try {
        const json doc = json::parse(text);
        if (!doc.is_object()) throw ConfigError("config document must be an object");
        detail::reject_unknown(doc,
                               {"patch_size", "K", "alpha", "iterations", "ratio", "frames", "seed", "threads",
                                "block_rows", "samples", "parts", "noise", "contacts", "keyframes", "loop",
                                "completion", "reassemble", "metrics", "anchor", "labels_out", "probe_frames"},
                               "config");
        auto& s = cfg.synthesis;
        if (doc.contains("patch_size")) s.patch_size = doc["patch_size"].get<int>();
        if (doc.contains("K")) s.K = doc["K"].get<double>();
        if (doc.contains("alpha")) s.alpha = doc["alpha"].get<double>();
        if (doc.contains("iterations")) s.iterations = doc["iterations"].get<int>();
        if (doc.contains("ratio")) s.ratio = doc["ratio"].get<double>();
        if (doc.contains("frames")) s.output_length = doc["frames"].get<int>();
        if (doc.contains("seed")) s.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("threads")) s.match.threads = doc["threads"].get<int>();
        if (doc.contains("block_rows")) s.match.block_rows = doc["block_rows"].get<int>();
        if (doc.contains("samples")) cfg.samples = doc["samples"].get<int>();
        if (doc.contains("parts")) s.parts = detail::parse_parts(doc["parts"]);
        if (doc.contains("noise")) {
            const auto& n = doc["noise"];
            if (n.is_string()) {
                if (n.get<std::string>() != "from-example") throw ConfigError("noise must be \"from-example\" or {mu, sigma}");
            } else {
                detail::reject_unknown(n, {"mu", "sigma"}, "noise");
                if (n.contains("mu")) s.noise.mu = detail::number_or_list(n["mu"], "noise.mu");
                if (n.contains("sigma")) s.noise.sigma = detail::number_or_list(n["sigma"], "noise.sigma");
            }
        }
        if (doc.contains("contacts")) {
            const auto& c = doc["contacts"];
            detail::reject_unknown(c, {"foot_joints", "velocity_threshold"}, "contacts");
            if (c.contains("foot_joints")) cfg.contacts.foot_joints = c["foot_joints"].get<std::vector<std::string>>();
            if (c.contains("velocity_threshold")) cfg.contacts.velocity_threshold = c["velocity_threshold"].get<double>();
        }
        if (doc.contains("keyframes")) {
            for (const auto& k : doc["keyframes"]) {
                detail::reject_unknown(k, {"frame", "coarse_frame", "example", "example_frame", "pose"}, "keyframe");
                KeyframeSpec ks;
                if (k.contains("frame")) ks.frame = k["frame"].get<int>();
                if (k.contains("coarse_frame")) ks.coarse_frame = k["coarse_frame"].get<int>();
                if (k.contains("example")) ks.example = k["example"].get<int>();
                if (k.contains("example_frame")) ks.example_frame = k["example_frame"].get<int>();
                if (k.contains("pose")) ks.pose = k["pose"].get<std::vector<double>>();
                if (ks.frame.has_value() == ks.coarse_frame.has_value())
                    throw ConfigError("a keyframe needs exactly one of 'frame' or 'coarse_frame'");
                if (ks.pose.empty() && !ks.example_frame)
                    throw ConfigError("a keyframe needs 'pose' or 'example_frame'");
                cfg.keyframes.push_back(std::move(ks));
            }
        }
        if (doc.contains("loop")) cfg.loop = doc["loop"].get<bool>();
        if (doc.contains("completion")) {
            const auto& c = doc["completion"];
            detail::reject_unknown(c, {"part", "track"}, "completion");
            cfg.completion = CompletionSpec{c.at("part").get<std::string>(), c.value("track", std::string())};
        }
        if (doc.contains("reassemble")) {
            const auto& r = doc["reassemble"];
            detail::reject_unknown(r, {"target", "sources"}, "reassemble");
            ReassemblySpec rs;
            rs.target = r.at("target").get<std::string>();
            for (const auto& src : r.at("sources")) {
                detail::reject_unknown(src, {"input", "name", "joints", "mapping"}, "reassemble source");
                ReassemblySourceSpec ss;
                ss.input = src.at("input").get<std::string>();
                ss.name = src.value("name", ss.input);
                ss.joints = src.at("joints").get<std::vector<std::string>>();
                if (src.contains("mapping")) ss.mapping = src["mapping"].get<std::map<std::string, std::string>>();
                rs.sources.push_back(std::move(ss));
            }
            cfg.reassembly = std::move(rs);
        }
        if (doc.contains("metrics")) {
            const auto& m = doc["metrics"];
            detail::reject_unknown(m, {"tau", "p_local", "p_global"}, "metrics");
            if (m.contains("tau")) cfg.metrics.tau = m["tau"].get<double>();
            if (m.contains("p_local")) cfg.metrics.p_local = m["p_local"].get<int>();
            if (m.contains("p_global")) cfg.metrics.p_global = m["p_global"].get<int>();
        }
        if (doc.contains("anchor")) {
            const auto& a = doc["anchor"];
            if (a.is_string() && a.get<std::string>() == "example") {
                cfg.anchor.from_example = true;
            } else {
                const auto v = a.get<std::vector<double>>();
                if (v.size() != 3) throw ConfigError("anchor must be \"example\" or [x, y, z]");
                cfg.anchor.position = Vec3(v[0], v[1], v[2]);
            }
        }
        if (doc.contains("labels_out")) cfg.labels_out = doc["labels_out"].get<std::string>();
        if (doc.contains("probe_frames")) cfg.probe_frames = doc["probe_frames"].get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config document: ") + e.what());
    }
    return cfg;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline JobConfig load_job_config(const std::string& path) { return parse_job_config(read_text_file(path)); }

}  // namespace genmm
