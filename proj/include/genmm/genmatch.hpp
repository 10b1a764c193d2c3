#pragma once

// Generative motion matching: skeletal parts, motion patches, normalized
// patch distances, nearest-neighbour matching and average-voting blends.
//
// Summation order is fixed everywhere so results do not depend on the
// thread count: a patch distance is the sum over frames (in order) of
// per-frame squared distances, each summed over channels in order.

#include "genmm/error.hpp"
#include "genmm/motion_io.hpp"
#include "genmm/parallel.hpp"
#include "genmm/representation.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace genmm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Skeletal parts

struct SkeletalPart {
    std::string name;
    std::vector<int> joint_indices;
    bool include_root_motion = false;

    /// Feature columns this part reads, in slice order.
    std::vector<int> columns(const FeatureLayout& layout) const {
        std::vector<int> cols;
        cols.reserve(joint_indices.size() * kRotationWidth + 3 + layout.contacts);
        for (int j : joint_indices)
            for (int k = 0; k < kRotationWidth; ++k) cols.push_back(layout.rotation_col(j) + k);
        if (include_root_motion) {
            for (int k = 0; k < 3; ++k) cols.push_back(layout.root_col() + k);
            for (int c = 0; c < layout.contacts; ++c) cols.push_back(layout.contact_col(c));
        }
        return cols;
    }

    int width(const FeatureLayout& layout) const {
        return static_cast<int>(joint_indices.size()) * kRotationWidth +
               (include_root_motion ? 3 + layout.contacts : 0);
    }
};

struct PartSpec {
    std::string name;
    std::vector<std::string> joints;
};

/// Either the whole skeleton as one part, or explicit overlapping parts.
struct PartitionSpec {
    bool whole = true;
    std::vector<PartSpec> parts;

    static PartitionSpec whole_skeleton() { return {}; }
    static PartitionSpec explicit_parts(std::vector<PartSpec> parts) { return {false, std::move(parts)}; }
};

/// Checks connectivity, coverage and overlap. Throws ConfigError naming the
/// offending part.
inline void validate_partition(const Skeleton& skel, const std::vector<SkeletalPart>& parts) {
    const int J = skel.num_joints();
    if (parts.empty()) throw ConfigError("partition has no parts");
    std::vector<int> cover(J, 0);
    bool any_root_motion = false;
    for (const auto& part : parts) {
        if (part.joint_indices.empty()) throw ConfigError("part '" + part.name + "' has no joints");
        std::vector<char> in(J, 0);
        for (int j : part.joint_indices) {
            if (j < 0 || j >= J) throw ConfigError("part '" + part.name + "' references an invalid joint index");
            if (in[j]) throw ConfigError("part '" + part.name + "' lists joint '" + skel.joints[j].name + "' twice");
            in[j] = 1;
            ++cover[j];
        }
        // A connected subtree has exactly one member whose parent lies outside.
        int tops = 0;
        for (int j : part.joint_indices) {
            const int p = skel.joints[j].parent;
            if (p < 0 || !in[p]) ++tops;
        }
        if (tops != 1) throw ConfigError("part '" + part.name + "' is not a connected subtree");
        const bool has_root = in[0] != 0;
        if (part.include_root_motion != has_root)
            throw ConfigError("part '" + part.name + "' must carry root motion iff it contains the root joint");
        any_root_motion = any_root_motion || part.include_root_motion;
    }
    for (int j = 0; j < J; ++j)
        if (cover[j] == 0) throw ConfigError("joint '" + skel.joints[j].name + "' is not covered by any part");
    if (!any_root_motion) throw ConfigError("no part carries the root motion");

    // Parts must be linked through shared joints.
    if (parts.size() > 1) {
        const std::size_t B = parts.size();
        std::vector<std::vector<char>> member(B, std::vector<char>(J, 0));
        for (std::size_t b = 0; b < B; ++b)
            for (int j : parts[b].joint_indices) member[b][j] = 1;
        std::vector<char> reached(B, 0);
        std::vector<std::size_t> stack{0};
        reached[0] = 1;
        while (!stack.empty()) {
            const std::size_t a = stack.back();
            stack.pop_back();
            for (std::size_t b = 0; b < B; ++b) {
                if (reached[b]) continue;
                for (int j = 0; j < J; ++j) {
                    if (member[a][j] && member[b][j]) {
                        reached[b] = 1;
                        stack.push_back(b);
                        break;
                    }
                }
            }
        }
        for (std::size_t b = 0; b < B; ++b)
            if (!reached[b]) throw ConfigError("part '" + parts[b].name + "' shares no overlap joint with the others");
    }
}

inline std::vector<SkeletalPart> partition_skeleton(const Skeleton& skel, const PartitionSpec& partition) {
    std::vector<SkeletalPart> parts;
    if (partition.whole) {
        SkeletalPart whole{"whole", {}, true};
        for (int j = 0; j < skel.num_joints(); ++j) whole.joint_indices.push_back(j);
        parts.push_back(std::move(whole));
        return parts;
    }
    for (const auto& ps : partition.parts) {
        SkeletalPart part;
        part.name = ps.name;
        for (const auto& n : ps.joints) {
            auto j = skel.find(n);
            if (!j) throw ConfigError("part '" + ps.name + "': unknown joint '" + n + "'");
            part.joint_indices.push_back(*j);
        }
        part.include_root_motion =
            std::find(part.joint_indices.begin(), part.joint_indices.end(), 0) != part.joint_indices.end();
        parts.push_back(std::move(part));
    }
    validate_partition(skel, parts);
    return parts;
}

/// Joints that belong to more than one part.
inline std::vector<int> overlap_joints(const std::vector<SkeletalPart>& parts, int num_joints) {
    std::vector<int> count(num_joints, 0);
    for (const auto& p : parts)
        for (int j : p.joint_indices) ++count[j];
    std::vector<int> out;
    for (int j = 0; j < num_joints; ++j)
        if (count[j] > 1) out.push_back(j);
    return out;
}

inline RowMatrix slice_columns(const FeatureMatrix& data, const std::vector<int>& cols) {
    RowMatrix out(data.rows(), static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index t = 0; t < data.rows(); ++t)
        for (std::size_t k = 0; k < cols.size(); ++k) out(t, static_cast<Eigen::Index>(k)) = data(t, cols[k]);
    return out;
}

inline RowMatrix slice_part(const MotionFeatures& features, const SkeletalPart& part) {
    return slice_columns(features.data, part.columns(features.layout));
}

// ---------------------------------------------------------------------------
// Patches and distances

struct PatchSet {
    RowMatrix patches;  // N x (p * frame_width), frame-major within a row
    std::vector<int> source_frame;
    std::vector<int> source_example;
    int patch_size = 0;

    int size() const { return static_cast<int>(patches.rows()); }
    int frame_width() const { return patch_size > 0 ? static_cast<int>(patches.cols()) / patch_size : 0; }
};

struct DistanceMatrix {
    RowMatrix values;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
};

/// Stride-1 windows of p frames from every track. `stage` only labels errors.
inline PatchSet extract_patches(const std::vector<RowMatrix>& tracks, int p, int stage = -1) {
    if (p < 1) throw ConfigError("patch size must be positive");
    if (tracks.empty()) throw ConfigError("no tracks to extract patches from");
    const Eigen::Index width = tracks[0].cols();
    Eigen::Index total = 0;
    for (std::size_t e = 0; e < tracks.size(); ++e) {
        if (tracks[e].cols() != width) throw ConfigError("tracks have different feature widths");
        if (tracks[e].rows() < p)
            throw ConfigError("example " + std::to_string(e) + " has " + std::to_string(tracks[e].rows()) +
                              " frames at stage " + std::to_string(stage) + ", fewer than the patch size " +
                              std::to_string(p));
        total += tracks[e].rows() - p + 1;
    }
    PatchSet set;
    set.patch_size = p;
    set.patches.resize(total, p * width);
    Eigen::Index row = 0;
    for (std::size_t e = 0; e < tracks.size(); ++e) {
        for (Eigen::Index t = 0; t + p <= tracks[e].rows(); ++t, ++row) {
            for (int k = 0; k < p; ++k) set.patches.row(row).segment(k * width, width) = tracks[e].row(t + k);
            set.source_frame.push_back(static_cast<int>(t));
            set.source_example.push_back(static_cast<int>(e));
        }
    }
    return set;
}

/// Exact squared-L2 distance between every pair of patches.
inline DistanceMatrix distance_matrix(const PatchSet& X, const PatchSet& Y, int threads = 0) {
    if (X.patch_size != Y.patch_size || X.patches.cols() != Y.patches.cols())
        throw ConfigError("patch sets differ in patch size or feature width");
    const int p = X.patch_size;
    const int w = X.frame_width();
    DistanceMatrix D;
    D.values.resize(X.size(), Y.size());
    parallel_for(0, X.size(), threads, [&](int i) {
        const double* x = X.patches.row(i).data();
        for (int j = 0; j < Y.size(); ++j) {
            const double* y = Y.patches.row(j).data();
            double total = 0.0;
            for (int f = 0; f < p; ++f) {
                double s = 0.0;
                for (int c = 0; c < w; ++c) {
                    const double d = x[f * w + c] - y[f * w + c];
                    s += d * d;
                }
                total += s;
            }
            D.values(i, j) = total;
        }
    });
    return D;
}

namespace detail {

inline void check_alpha_denominators(double alpha, const std::vector<double>& colmin) {
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (alpha == 0.0)
        for (double m : colmin)
            if (m == 0.0) throw NumericError("zero denominator; alpha=0 with exact matches");
}

}  // namespace detail

/// Divides each column by (alpha + its minimum over synthesized patches).
inline DistanceMatrix normalize_distances(const DistanceMatrix& D, double alpha) {
    if (!D.values.allFinite()) throw NumericError("distance matrix has non-finite entries");
    std::vector<double> colmin(D.cols(), std::numeric_limits<double>::infinity());
    for (int i = 0; i < D.rows(); ++i)
        for (int j = 0; j < D.cols(); ++j) colmin[j] = std::min(colmin[j], D.values(i, j));
    detail::check_alpha_denominators(alpha, colmin);
    DistanceMatrix out;
    out.values.resize(D.rows(), D.cols());
    for (int i = 0; i < D.rows(); ++i)
        for (int j = 0; j < D.cols(); ++j) out.values(i, j) = D.values(i, j) / (alpha + colmin[j]);
    return out;
}

/// Row-wise argmin, lowest index on ties.
inline std::vector<int> nearest_matches(const DistanceMatrix& Dn) {
    if (Dn.rows() == 0 || Dn.cols() == 0) throw ConfigError("empty distance matrix");
    std::vector<int> match(Dn.rows());
    for (int i = 0; i < Dn.rows(); ++i) {
        int best = 0;
        double best_v = Dn.values(i, 0);
        for (int j = 1; j < Dn.cols(); ++j) {
            if (Dn.values(i, j) < best_v) {
                best_v = Dn.values(i, j);
                best = j;
            }
        }
        match[i] = best;
    }
    return match;
}

/// Average voting: every output frame is the mean of the matched patch
/// frames that cover it.
inline RowMatrix blend_patches(const std::vector<int>& matches, const PatchSet& Y, int output_length) {
    const int p = Y.patch_size;
    if (static_cast<int>(matches.size()) != output_length - p + 1)
        throw ConfigError("blend needs exactly output_length - p + 1 matches");
    const int w = Y.frame_width();
    RowMatrix acc = RowMatrix::Zero(output_length, w);
    std::vector<int> count(output_length, 0);
    for (std::size_t win = 0; win < matches.size(); ++win) {
        const auto src = Y.patches.row(matches[win]);
        for (int k = 0; k < p; ++k) {
            acc.row(static_cast<Eigen::Index>(win) + k) += src.segment(k * w, w);
            ++count[win + k];
        }
    }
    for (int t = 0; t < output_length; ++t) acc.row(t) /= static_cast<double>(count[t]);
    return acc;
}

/// Averages overlapping columns across parts back into a full feature matrix.
inline MotionFeatures assemble_parts(const std::vector<std::pair<SkeletalPart, RowMatrix>>& partials,
                                     const FeatureLayout& layout, double frame_time = 1.0 / 30.0) {
    if (partials.empty()) throw ConfigError("nothing to assemble");
    const Eigen::Index H = partials[0].second.rows();
    MotionFeatures out;
    out.layout = layout;
    out.frame_time = frame_time;
    out.data = FeatureMatrix::Zero(H, layout.width());
    std::vector<int> count(layout.width(), 0);
    for (const auto& [part, values] : partials) {
        if (values.rows() != H) throw ConfigError("part '" + part.name + "' has a different frame count");
        const auto cols = part.columns(layout);
        if (static_cast<Eigen::Index>(cols.size()) != values.cols())
            throw ConfigError("part '" + part.name + "' has the wrong column count");
        for (std::size_t k = 0; k < cols.size(); ++k) {
            out.data.col(cols[k]) += values.col(static_cast<Eigen::Index>(k));
            ++count[cols[k]];
        }
    }
    for (int c = 0; c < layout.width(); ++c) {
        if (count[c] == 0) throw ConfigError("feature column " + std::to_string(c) + " is not covered by any part");
        if (count[c] > 1) out.data.col(c) /= static_cast<double>(count[c]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Track-level matching used by run_stage. Produces exactly the values of
// extract_patches -> distance_matrix -> normalize_distances ->
// nearest_matches -> blend_patches without materializing patches: a patch
// distance is a diagonal sum over a frame-to-frame distance table.

struct MatchOptions {
    /// Distance rows computed per block; peak memory is O(block_rows * |Y|).
    int block_rows = 16384;
    int threads = 0;
};

/// One part's exemplar tracks, already sliced to the part's columns.
struct PartExemplars {
    SkeletalPart part;
    std::vector<RowMatrix> tracks;
};

namespace detail {

struct PatchRef {
    int example;
    int start;
};

/// G(a, b) = squared distance between frame x0 + a of X and frame b of the
/// exemplar, where `yt` is the exemplar transposed (channels x frames).
inline void frame_distances(const RowMatrix& X, int x0, int rows, const RowMatrix& yt, RowMatrix& G, int threads) {
    const int d = static_cast<int>(yt.rows());
    const int T = static_cast<int>(yt.cols());
    G.resize(rows, T);
    constexpr int kTile = 4;
    const int tiles = (rows + kTile - 1) / kTile;
    parallel_for(0, tiles, threads, [&](int tile) {
        const int a0 = tile * kTile;
        const int n = std::min(kTile, rows - a0);
        double* g[kTile];
        const double* x[kTile];
        for (int r = 0; r < n; ++r) {
            g[r] = G.row(a0 + r).data();
            x[r] = X.row(x0 + a0 + r).data();
            std::fill(g[r], g[r] + T, 0.0);
        }
        for (int c = 0; c < d; ++c) {
            const double* y = yt.row(c).data();
            for (int r = 0; r < n; ++r) {
                const double xv = x[r][c];
                double* gr = g[r];
                for (int b = 0; b < T; ++b) {
                    const double diff = xv - y[b];
                    gr[b] += diff * diff;
                }
            }
        }
    });
}

/// Distances from windows [i0, i0 + rows) of X to every exemplar window.
inline void window_distances(const RowMatrix& X, int i0, int rows, const std::vector<RowMatrix>& yts,
                             const std::vector<int>& col_offset, int p, RowMatrix& D, int threads) {
    D.resize(rows, col_offset.back());
    RowMatrix G;
    for (std::size_t e = 0; e < yts.size(); ++e) {
        frame_distances(X, i0, rows + p - 1, yts[e], G, threads);
        const int n = col_offset[e + 1] - col_offset[e];
        parallel_for(0, rows, threads, [&](int i) {
            double* out = D.row(i).data() + col_offset[e];
            for (int t = 0; t < n; ++t) out[t] = 0.0;
            for (int f = 0; f < p; ++f) {
                const double* g = G.row(i + f).data() + f;
                for (int t = 0; t < n; ++t) out[t] += g[t];
            }
        });
    }
}

}  // namespace detail

/// Nearest exemplar window (under the normalized distance) for every window
/// of `guess`. Returned indices enumerate windows example by example.
inline std::vector<int> match_track(const RowMatrix& guess, const std::vector<RowMatrix>& exemplars, int p,
                                    double alpha, const MatchOptions& opt) {
    const int H = static_cast<int>(guess.rows());
    if (H < p) throw ConfigError("synthesized track is shorter than the patch size");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    std::vector<RowMatrix> yts;
    std::vector<int> col_offset{0};
    for (std::size_t e = 0; e < exemplars.size(); ++e) {
        if (exemplars[e].cols() != guess.cols()) throw ConfigError("exemplar width differs from the guess");
        if (exemplars[e].rows() < p)
            throw ConfigError("example " + std::to_string(e) + " is shorter than the patch size");
        yts.emplace_back(exemplars[e].transpose());
        col_offset.push_back(col_offset.back() + static_cast<int>(exemplars[e].rows()) - p + 1);
    }
    const int nX = H - p + 1;
    const int nY = col_offset.back();
    const int block = std::max(1, opt.block_rows);

    std::vector<double> colmin(nY, std::numeric_limits<double>::infinity());
    RowMatrix D;
    auto update_min = [&](const RowMatrix& Db) {
        for (Eigen::Index i = 0; i < Db.rows(); ++i) {
            const double* r = Db.row(i).data();
            for (int j = 0; j < nY; ++j) colmin[j] = std::min(colmin[j], r[j]);
        }
    };
    std::vector<int> match(nX, 0);
    auto argmin_rows = [&](const RowMatrix& Db, int i0) {
        parallel_for(0, static_cast<int>(Db.rows()), opt.threads, [&](int i) {
            const double* r = Db.row(i).data();
            int best = 0;
            double best_v = r[0] / (alpha + colmin[0]);
            for (int j = 1; j < nY; ++j) {
                const double v = r[j] / (alpha + colmin[j]);
                if (v < best_v) {
                    best_v = v;
                    best = j;
                }
            }
            match[i0 + i] = best;
        });
    };

    if (nX <= block) {
        detail::window_distances(guess, 0, nX, yts, col_offset, p, D, opt.threads);
        update_min(D);
        detail::check_alpha_denominators(alpha, colmin);
        argmin_rows(D, 0);
    } else {
        for (int i0 = 0; i0 < nX; i0 += block) {
            detail::window_distances(guess, i0, std::min(block, nX - i0), yts, col_offset, p, D, opt.threads);
            update_min(D);
        }
        detail::check_alpha_denominators(alpha, colmin);
        for (int i0 = 0; i0 < nX; i0 += block) {
            detail::window_distances(guess, i0, std::min(block, nX - i0), yts, col_offset, p, D, opt.threads);
            argmin_rows(D, i0);
        }
    }
    return match;
}

/// Average-voting blend of exemplar windows addressed as in match_track.
inline RowMatrix blend_track(const std::vector<int>& matches, const std::vector<RowMatrix>& exemplars, int p,
                             int output_length) {
    std::vector<detail::PatchRef> refs;
    for (std::size_t e = 0; e < exemplars.size(); ++e)
        for (int t = 0; t + p <= exemplars[e].rows(); ++t) refs.push_back({static_cast<int>(e), t});
    const Eigen::Index w = exemplars[0].cols();
    RowMatrix acc = RowMatrix::Zero(output_length, w);
    std::vector<int> count(output_length, 0);
    for (std::size_t win = 0; win < matches.size(); ++win) {
        const auto& ref = refs[matches[win]];
        for (int k = 0; k < p; ++k) {
            acc.row(static_cast<Eigen::Index>(win) + k) += exemplars[ref.example].row(ref.start + k);
            ++count[win + k];
        }
    }
    for (int t = 0; t < output_length; ++t) acc.row(t) /= static_cast<double>(count[t]);
    return acc;
}

/// E rounds of match-and-blend per part, all parts reading the same frozen
/// guess, then assembling once per round.
inline MotionFeatures run_stage_parts(const MotionFeatures& guess, const std::vector<PartExemplars>& sources, int p,
                                      double alpha, int iterations, const MatchOptions& opt = {}) {
    if (iterations < 0) throw ConfigError("iteration count must be >= 0");
    MotionFeatures current = guess;
    for (int it = 0; it < iterations; ++it) {
        std::vector<std::pair<SkeletalPart, RowMatrix>> partials;
        partials.reserve(sources.size());
        for (const auto& src : sources) {
            const RowMatrix g = slice_part(current, src.part);
            const auto matches = match_track(g, src.tracks, p, alpha, opt);
            partials.emplace_back(src.part, blend_track(matches, src.tracks, p, current.frames()));
        }
        current = assemble_parts(partials, guess.layout, guess.frame_time);
    }
    return current;
}

inline std::vector<PartExemplars> slice_exemplars(const std::vector<MotionFeatures>& exemplars,
                                                  const std::vector<SkeletalPart>& parts) {
    std::vector<PartExemplars> out;
    for (const auto& part : parts) {
        PartExemplars pe{part, {}};
        for (const auto& ex : exemplars) pe.tracks.push_back(slice_part(ex, part));
        out.push_back(std::move(pe));
    }
    return out;
}

inline MotionFeatures run_stage(const MotionFeatures& guess, const std::vector<MotionFeatures>& exemplars,
                                const std::vector<SkeletalPart>& parts, int p, double alpha, int iterations,
                                const MatchOptions& opt = {}) {
    for (const auto& ex : exemplars)
        if (!(ex.layout == guess.layout)) throw ConfigError("exemplar layout differs from the guess");
    return run_stage_parts(guess, slice_exemplars(exemplars, parts), p, alpha, iterations, opt);
}

}  // namespace genmm
