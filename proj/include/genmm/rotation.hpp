#pragma once

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace genmm {

using Quat = Eigen::Quaterniond;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Axis : int { X = 0, Y = 1, Z = 2 };

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

inline Vec3 axis_vector(Axis a) {
    Vec3 v = Vec3::Zero();
    v[static_cast<int>(a)] = 1.0;
    return v;
}

inline Quat axis_rotation(Axis a, double degrees) {
    return Quat(Eigen::AngleAxisd(degrees * kDegToRad, axis_vector(a)));
}

/// Composes intrinsic rotations in the given order: R = R_a0 * R_a1 * ...
/// This is the BVH convention, where channels are listed outermost first.
inline Quat compose_euler(std::span<const Axis> order, std::span<const double> degrees) {
    Quat q = Quat::Identity();
    for (std::size_t i = 0; i < order.size(); ++i) q = q * axis_rotation(order[i], degrees[i]);
    return q.normalized();
}

/// Inverse of compose_euler for three distinct axes. The middle angle lands
/// in [-90, 90]; at gimbal lock the last angle is set to zero.
inline std::array<double, 3> decompose_euler(const Quat& q, const std::array<Axis, 3>& order) {
    const Mat3 m = q.normalized().toRotationMatrix();
    const int i = static_cast<int>(order[0]);
    const int j = static_cast<int>(order[1]);
    const int k = static_cast<int>(order[2]);
    // +1 for cyclic orders (xyz, yzx, zxy), -1 otherwise.
    const double e = ((j - i + 3) % 3 == 1) ? 1.0 : -1.0;

    const double sb = e * m(i, k);
    const double cb = std::sqrt(m(i, i) * m(i, i) + m(i, j) * m(i, j));
    double a, b, c;
    b = std::atan2(sb, cb);
    if (cb > 1e-9) {
        a = std::atan2(-e * m(j, k), m(k, k));
        c = std::atan2(-e * m(i, j), m(i, i));
    } else {
        a = std::atan2(e * m(k, j), m(j, j));
        c = 0.0;
    }
    return {a * kRadToDeg, b * kRadToDeg, c * kRadToDeg};
}

/// Angle in degrees of the relative rotation between two unit quaternions.
inline double rotation_distance_deg(const Quat& a, const Quat& b) {
    const Quat r = a.normalized().conjugate() * b.normalized();
    return 2.0 * std::atan2(r.vec().norm(), std::abs(r.w())) * kRadToDeg;
}

/// Puts the first frame in the w >= 0 hemisphere, then flips each later
/// frame so it has a nonnegative dot product with its predecessor.
inline void canonicalize_track(std::vector<Quat>& track) {
    for (std::size_t t = 0; t < track.size(); ++t) {
        Quat& q = track[t];
        const bool flip = (t == 0) ? (q.w() < 0.0) : (q.dot(track[t - 1]) < 0.0);
        if (flip) q.coeffs() = -q.coeffs();
    }
}

}  // namespace genmm
