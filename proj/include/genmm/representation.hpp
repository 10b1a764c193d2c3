#pragma once

#include "genmm/error.hpp"
#include "genmm/motion_io.hpp"
#include "genmm/rotation.hpp"

#include <Eigen/Core>

#include <array>
#include <string>

namespace genmm {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline constexpr int kRotationWidth = 6;

/// Column layout of a feature row: [6D rotation per joint | V (3) | L (C)].
struct FeatureLayout {
    int joints = 0;
    int contacts = 0;

    int width() const { return joints * kRotationWidth + 3 + contacts; }
    int rotation_col(int joint) const { return joint * kRotationWidth; }
    int root_col() const { return joints * kRotationWidth; }
    int contact_col(int c) const { return joints * kRotationWidth + 3 + c; }
    int rotation_width() const { return joints * kRotationWidth; }

    bool operator==(const FeatureLayout&) const = default;
};

struct MotionFeatures {
    FeatureMatrix data;
    double frame_time = 1.0 / 30.0;
    FeatureLayout layout;

    int frames() const { return static_cast<int>(data.rows()); }
    int width() const { return static_cast<int>(data.cols()); }
};

struct RootAnchor {
    Vec3 initial_root_position = Vec3::Zero();
};

/// First two rotation-matrix columns, column-major: [m00 m10 m20 m01 m11 m21].
inline Vec6 rotation_to_6d(const Quat& q) {
    const Mat3 m = q.normalized().toRotationMatrix();
    Vec6 v;
    v << m(0, 0), m(1, 0), m(2, 0), m(0, 1), m(1, 1), m(2, 1);
    return v;
}

/// Gram-Schmidt back to a rotation. `frame`/`joint` only label the error.
inline Quat six_d_to_rotation(const Eigen::Ref<const Vec6>& v, int frame = -1, int joint = -1) {
    const Vec3 a1 = v.head<3>();
    const Vec3 a2 = v.tail<3>();
    auto fail = [&](const char* why) {
        throw NumericError(std::string("degenerate 6D rotation (") + why + ") at frame " + std::to_string(frame) +
                           ", joint " + std::to_string(joint));
    };
    if (!a1.allFinite() || !a2.allFinite()) fail("non-finite");
    if (a1.norm() <= 1e-8 || a2.norm() <= 1e-8) fail("near-zero column");
    const Vec3 b1 = a1.normalized();
    const Vec3 ortho = a2 - a2.dot(b1) * b1;
    if (ortho.norm() <= 1e-8 * a2.norm()) fail("parallel columns");
    const Vec3 b2 = ortho.normalized();
    const Vec3 b3 = b1.cross(b2);
    Mat3 m;
    m.col(0) = b1;
    m.col(1) = b2;
    m.col(2) = b3;
    return Quat(m).normalized();
}

inline std::pair<MotionFeatures, RootAnchor> encode(const Skeleton& skel, const RawMotion& motion,
                                                    const ContactLabels& labels) {
    const int T = motion.num_frames();
    const int J = skel.num_joints();
    if (motion.joints != J) throw ConfigError("motion joint count does not match skeleton");
    if (labels.rows() != T) throw ConfigError("contact label rows do not match frame count");
    if (T < 2) throw ConfigError("encoding needs at least 2 frames");

    MotionFeatures f;
    f.frame_time = motion.frame_time;
    f.layout = {J, static_cast<int>(labels.cols())};
    f.data.resize(T, f.layout.width());
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < J; ++j)
            f.data.row(t).segment<kRotationWidth>(f.layout.rotation_col(j)) =
                rotation_to_6d(motion.rotation(t, j)).transpose();
        if (t >= 1)
            f.data.row(t).segment<3>(f.layout.root_col()) =
                motion.root_positions.row(t) - motion.root_positions.row(t - 1);
        for (int c = 0; c < f.layout.contacts; ++c) f.data(t, f.layout.contact_col(c)) = labels(t, c);
    }
    f.data.row(0).segment<3>(f.layout.root_col()) = f.data.row(1).segment<3>(f.layout.root_col());

    RootAnchor anchor;
    anchor.initial_root_position = motion.root_positions.row(0).transpose();
    return {std::move(f), anchor};
}

inline std::pair<RawMotion, ContactLabels> decode(const MotionFeatures& f, const RootAnchor& anchor,
                                                  const Skeleton& skel) {
    const int J = skel.num_joints();
    if (f.layout.joints != J || f.width() != f.layout.width())
        throw ConfigError("feature layout does not match skeleton");
    const int T = f.frames();
    RawMotion m;
    m.frame_time = f.frame_time;
    m.joints = J;
    m.root_positions.resize(T, 3);
    m.rotations.resize(static_cast<std::size_t>(T) * J);
    ContactLabels labels(T, f.layout.contacts);
    for (int t = 0; t < T; ++t) {
        if (t == 0)
            m.root_positions.row(0) = anchor.initial_root_position.transpose();
        else
            m.root_positions.row(t) = m.root_positions.row(t - 1) + f.data.row(t).segment<3>(f.layout.root_col());
        for (int j = 0; j < J; ++j) {
            const Vec6 v = f.data.row(t).segment<kRotationWidth>(f.layout.rotation_col(j)).transpose();
            m.rotation(t, j) = six_d_to_rotation(v, t, j);
        }
        for (int c = 0; c < f.layout.contacts; ++c) labels(t, c) = f.data(t, f.layout.contact_col(c)) >= 0.5 ? 1.0 : 0.0;
    }
    m.canonicalize();
    return {std::move(m), std::move(labels)};
}

}  // namespace genmm
