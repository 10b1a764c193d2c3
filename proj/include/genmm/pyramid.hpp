#pragma once

// Coarse-to-fine stage planning and temporal resampling.

#include "genmm/error.hpp"
#include "genmm/representation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace genmm {

struct StagePlan {
    int num_stages = 1;
    double ratio = 4.0 / 3.0;
    int patch_size = 11;
    /// Fraction of the full length used at each stage; the last entry is 1.
    std::vector<double> scales;
    /// example_lengths[s][e]
    std::vector<std::vector<int>> example_lengths;
    std::vector<int> synthesis_lengths;

    /// Number of synthesized patches (distance-matrix rows) at each stage.
    std::vector<int> distance_rows() const {
        std::vector<int> rows;
        for (int f : synthesis_lengths) rows.push_back(f - patch_size + 1);
        return rows;
    }
};

/// The coarsest stage puts the shortest example at K*p frames; each finer
/// stage multiplies that by r until the full lengths are reached. Every
/// track (examples and output) follows the same scale schedule.
inline StagePlan plan_stages(const std::vector<int>& example_lengths, int output_length, int patch_size, double K,
                             double ratio) {
    if (example_lengths.empty()) throw ConfigError("at least one example is required");
    if (patch_size < 1) throw ConfigError("patch size must be positive");
    if (!(ratio > 1.0)) throw ConfigError("pyramid ratio r must be > 1");
    if (!(K >= 1.0)) throw ConfigError("K must be >= 1 so that K*p >= p");
    if (output_length < patch_size)
        throw ConfigError("output length " + std::to_string(output_length) + " is shorter than the patch size " +
                          std::to_string(patch_size));
    const int t_min = *std::min_element(example_lengths.begin(), example_lengths.end());
    const double coarse = K * patch_size;
    if (coarse > t_min)
        throw ConfigError("K*p = " + std::to_string(coarse) + " exceeds the shortest example (" +
                          std::to_string(t_min) + " frames)");

    const double levels = std::log(t_min / coarse) / std::log(ratio);
    const int S = std::max(1, static_cast<int>(std::ceil(levels - 1e-9)) + 1);

    StagePlan plan;
    plan.num_stages = S;
    plan.ratio = ratio;
    plan.patch_size = patch_size;
    for (int s = 0; s < S; ++s)
        plan.scales.push_back(s == S - 1 ? 1.0 : (coarse / t_min) * std::pow(ratio, s));

    auto stage_length = [&](int full, int s) {
        if (s == S - 1) return full;
        const int n = static_cast<int>(std::round(full * plan.scales[s]));
        return std::max(patch_size, n);
    };
    for (int s = 0; s < S; ++s) {
        std::vector<int> lengths;
        for (int n : example_lengths) lengths.push_back(stage_length(n, s));
        plan.example_lengths.push_back(std::move(lengths));
        plan.synthesis_lengths.push_back(stage_length(output_length, s));
    }
    return plan;
}

/// Per-channel linear interpolation at positions i*(H-1)/(H'-1).
inline MotionFeatures resample(const MotionFeatures& in, int new_length) {
    if (new_length < 1) throw ConfigError("resample length must be >= 1");
    const int H = in.frames();
    if (new_length == H) return in;
    MotionFeatures out;
    out.frame_time = in.frame_time;
    out.layout = in.layout;
    out.data.resize(new_length, in.width());
    if (new_length == 1 || H == 1) {
        for (int i = 0; i < new_length; ++i) out.data.row(i) = in.data.row(0);
        return out;
    }
    for (int i = 0; i < new_length; ++i) {
        const double pos = static_cast<double>(i) * (H - 1) / (new_length - 1);
        const int i0 = std::min(static_cast<int>(std::floor(pos)), H - 1);
        const double frac = pos - i0;
        if (frac == 0.0 || i0 == H - 1) {
            out.data.row(i) = in.data.row(i0);
        } else {
            out.data.row(i) = in.data.row(i0) + frac * (in.data.row(i0 + 1) - in.data.row(i0));
        }
    }
    return out;
}

/// pyramid[s][e]; the finest level holds the untouched originals.
inline std::vector<std::vector<MotionFeatures>> build_exemplar_pyramid(const std::vector<MotionFeatures>& examples,
                                                                       const StagePlan& plan) {
    std::vector<std::vector<MotionFeatures>> pyramid(plan.num_stages);
    for (int s = 0; s < plan.num_stages; ++s) {
        if (plan.example_lengths[s].size() != examples.size())
            throw ConfigError("stage plan was built for a different number of examples");
        for (std::size_t e = 0; e < examples.size(); ++e)
            pyramid[s].push_back(s == plan.num_stages - 1 ? examples[e]
                                                          : resample(examples[e], plan.example_lengths[s][e]));
    }
    return pyramid;
}

}  // namespace genmm
