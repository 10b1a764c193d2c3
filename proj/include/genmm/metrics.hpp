#pragma once

// Evaluation metrics: coverage, set diversity, patch distance, and a
// time/memory scaling probe.

#include "genmm/error.hpp"
#include "genmm/genmatch.hpp"
#include "genmm/representation.hpp"
#include "genmm/synthesizer.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <sys/resource.h>

namespace genmm {

inline constexpr double kDefaultCoverageTolerance = 0.05;

struct MetricReport {
    double coverage = 0.0;                     // percent
    std::optional<double> set_diversity;       // needs >= 2 outputs
    double global_patch_distance = 0.0;
    double local_patch_distance = 0.0;
    double wall_time = 0.0;                    // seconds
    std::uint64_t peak_memory = 0;             // bytes

    std::string to_text() const {
        std::ostringstream o;
        o.precision(6);
        o << std::fixed;
        o << "coverage: " << coverage << '\n';
        if (set_diversity)
            o << "set_diversity: " << *set_diversity << '\n';
        else
            o << "set_diversity: n/a\n";
        o << "global_patch_distance: " << global_patch_distance << '\n';
        o << "local_patch_distance: " << local_patch_distance << '\n';
        o << "wall_time: " << wall_time << '\n';
        o << "peak_memory: " << peak_memory << '\n';
        return o.str();
    }
};

namespace detail {

/// Minimum squared distance between windows of `a` and windows of `b`,
/// reduced along rows (per window of `b`) or along columns (per window of `a`).
inline void window_minima(const RowMatrix& a, const std::vector<RowMatrix>& bs, int p, std::vector<double>* per_b,
                          std::vector<double>* per_a, const MatchOptions& opt) {
    std::vector<RowMatrix> yts;
    std::vector<int> offset{0};
    for (const auto& b : bs) {
        if (b.cols() != a.cols()) throw ConfigError("feature widths differ");
        if (b.rows() < p) throw ConfigError("track shorter than the patch size");
        yts.emplace_back(b.transpose());
        offset.push_back(offset.back() + static_cast<int>(b.rows()) - p + 1);
    }
    if (a.rows() < p) throw ConfigError("track shorter than the patch size");
    const int nA = static_cast<int>(a.rows()) - p + 1;
    const int nB = offset.back();
    if (per_b) per_b->assign(nB, std::numeric_limits<double>::infinity());
    if (per_a) per_a->assign(nA, std::numeric_limits<double>::infinity());
    const int block = std::max(1, opt.block_rows);
    RowMatrix D;
    for (int i0 = 0; i0 < nA; i0 += block) {
        const int rows = std::min(block, nA - i0);
        window_distances(a, i0, rows, yts, offset, p, D, opt.threads);
        for (int i = 0; i < rows; ++i) {
            const double* r = D.row(i).data();
            for (int j = 0; j < nB; ++j) {
                if (per_b) (*per_b)[j] = std::min((*per_b)[j], r[j]);
                if (per_a) (*per_a)[i0 + i] = std::min((*per_a)[i0 + i], r[j]);
            }
        }
    }
}

inline std::vector<RowMatrix> data_of(const std::vector<MotionFeatures>& v) {
    std::vector<RowMatrix> out;
    for (const auto& f : v) out.push_back(f.data);
    return out;
}

}  // namespace detail

/// Percent of exemplar patches whose nearest synthesized patch has a
/// per-element RMS distance <= tau.
inline double coverage(const std::vector<MotionFeatures>& examples, const MotionFeatures& synthesized, int p,
                       double tau = kDefaultCoverageTolerance, const MatchOptions& opt = {}) {
    std::vector<double> per_example;
    detail::window_minima(synthesized.data, detail::data_of(examples), p, &per_example, nullptr, opt);
    const double elems = static_cast<double>(p) * synthesized.width();
    std::size_t hit = 0;
    for (double d : per_example)
        if (std::sqrt(d / elems) <= tau) ++hit;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(per_example.size());
}

/// Mean per-element RMS distance from each synthesized patch to its nearest
/// exemplar patch.
inline double patch_distance(const std::vector<MotionFeatures>& examples, const MotionFeatures& synthesized, int p,
                             const MatchOptions& opt = {}) {
    std::vector<double> per_synth;
    detail::window_minima(synthesized.data, detail::data_of(examples), p, nullptr, &per_synth, opt);
    const double elems = static_cast<double>(p) * synthesized.width();
    double sum = 0.0;
    for (double d : per_synth) sum += std::sqrt(d / elems);
    return sum / static_cast<double>(per_synth.size());
}

/// Mean across-output standard deviation of the rotation channels,
/// normalized by the standard deviation of the example's rotation channels.
/// Both use population (divide-by-n) standard deviations.
inline double set_diversity(const std::vector<MotionFeatures>& outputs, const MotionFeatures& example) {
    if (outputs.size() < 2) throw ConfigError("set diversity needs at least 2 outputs");
    const int R = example.layout.rotation_width();
    const int H = outputs[0].frames();
    for (const auto& o : outputs)
        if (o.frames() != H || o.layout.rotation_width() != R)
            throw ConfigError("set diversity needs equal-length outputs with the same rotation layout");
    const double n = static_cast<double>(outputs.size());
    double spread = 0.0;
    for (int t = 0; t < H; ++t) {
        for (int c = 0; c < R; ++c) {
            // Welford, so identical samples give exactly zero
            double mean = 0.0, m2 = 0.0, k = 0.0;
            for (const auto& o : outputs) {
                const double x = o.data(t, c);
                k += 1.0;
                const double delta = x - mean;
                mean += delta / k;
                m2 += delta * (x - mean);
            }
            spread += std::sqrt(m2 / n);
        }
    }
    spread /= static_cast<double>(H) * R;

    const auto rot = example.data.leftCols(R);
    const double mean = rot.mean();
    const double var = (rot.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw NumericError("example rotation channels have zero variance");
    return spread / sd;
}

// ---------------------------------------------------------------------------
// Time and memory

namespace detail {

/// Resets the kernel's peak-RSS counter for this process when permitted.
inline bool reset_peak_rss() {
    std::ofstream f("/proc/self/clear_refs");
    if (!f) return false;
    f << "5";
    f.flush();
    return static_cast<bool>(f);
}

inline std::uint64_t peak_rss_bytes() {
    std::ifstream f("/proc/self/status");
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::istringstream in(line.substr(6));
            std::uint64_t kb = 0;
            in >> kb;
            return kb * 1024;
        }
    }
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return static_cast<std::uint64_t>(ru.ru_maxrss) * 1024;
}

}  // namespace detail

struct ProbeSample {
    int frames = 0;
    double seconds = 0.0;
    std::uint64_t peak_memory = 0;
};

/// Runs one synthesis per requested output length, sequentially.
inline std::vector<ProbeSample> scaling_probe(const std::vector<MotionFeatures>& examples, const Skeleton& skeleton,
                                              const SynthesisConfig& config, const std::vector<int>& frame_counts) {
    for (std::size_t i = 1; i < frame_counts.size(); ++i)
        if (frame_counts[i] < frame_counts[i - 1]) throw ConfigError("probe frame counts must be ascending");
    std::vector<ProbeSample> out;
    for (int F : frame_counts) {
        SynthesisConfig cfg = config;
        cfg.output_length = F;
        detail::reset_peak_rss();
        const auto t0 = std::chrono::steady_clock::now();
        const MotionFeatures result = synthesize(examples, skeleton, cfg);
        const auto t1 = std::chrono::steady_clock::now();
        out.push_back({F, std::chrono::duration<double>(t1 - t0).count(), detail::peak_rss_bytes()});
        (void)result;
    }
    return out;
}

/// Coefficient of determination of a least-squares line through (x, y).
inline double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw ConfigError("linear fit needs at least 2 paired samples");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw ConfigError("linear fit needs distinct x values");
    if (syy == 0.0) return 1.0;
    return (sxy * sxy) / (sxx * syy);
}

inline std::string probe_csv(const std::vector<ProbeSample>& samples) {
    std::ostringstream o;
    o << "frames,wall_time_s,peak_memory_bytes\n";
    for (const auto& s : samples) o << s.frames << ',' << s.seconds << ',' << s.peak_memory << '\n';
    return o.str();
}

}  // namespace genmm
