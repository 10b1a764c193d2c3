#pragma once

// BVH reading and writing, forward kinematics and foot-contact labels.

#include "genmm/error.hpp"
#include "genmm/rotation.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace genmm {

enum class ChannelKind { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

inline bool is_rotation(ChannelKind c) { return static_cast<int>(c) >= 3; }
inline Axis channel_axis(ChannelKind c) { return static_cast<Axis>(static_cast<int>(c) % 3); }

inline std::string_view channel_name(ChannelKind c) {
    static constexpr std::string_view names[] = {"Xposition", "Yposition", "Zposition",
                                                  "Xrotation", "Yrotation", "Zrotation"};
    return names[static_cast<int>(c)];
}

inline std::optional<ChannelKind> parse_channel_name(std::string_view s) {
    for (int i = 0; i < 6; ++i) {
        auto c = static_cast<ChannelKind>(i);
        if (s == channel_name(c)) return c;
    }
    return std::nullopt;
}

struct Joint {
    std::string name;
    int parent = -1;  // -1 for the root
    Vec3 offset = Vec3::Zero();
    std::vector<ChannelKind> channels;

    std::vector<Axis> rotation_order() const {
        std::vector<Axis> order;
        for (auto c : channels)
            if (is_rotation(c)) order.push_back(channel_axis(c));
        return order;
    }
};

/// BVH "End Site" leaf: geometry only, no channels and no feature columns.
struct EndSite {
    int parent = 0;
    Vec3 offset = Vec3::Zero();
};

struct Skeleton {
    std::vector<Joint> joints;
    std::vector<EndSite> end_sites;
    std::vector<int> foot_joints;

    int num_joints() const { return static_cast<int>(joints.size()); }

    std::optional<int> find(std::string_view name) const {
        for (int j = 0; j < num_joints(); ++j)
            if (joints[j].name == name) return j;
        return std::nullopt;
    }

    std::vector<int> children(int j) const {
        std::vector<int> out;
        for (int k = j + 1; k < num_joints(); ++k)
            if (joints[k].parent == j) out.push_back(k);
        return out;
    }

    /// Throws ConfigError when the topology invariants do not hold.
    void validate() const {
        if (joints.empty()) throw ConfigError("skeleton has no joints");
        if (joints[0].parent != -1) throw ConfigError("joint 0 must be the root");
        std::unordered_set<std::string> names;
        for (int j = 0; j < num_joints(); ++j) {
            const auto& jt = joints[j];
            if (j > 0 && (jt.parent < 0 || jt.parent >= j))
                throw ConfigError("joint '" + jt.name + "' is not in topological order or is a second root");
            if (!names.insert(jt.name).second) throw ConfigError("duplicate joint name '" + jt.name + "'");
        }
        for (int f : foot_joints)
            if (f < 0 || f >= num_joints()) throw ConfigError("foot joint index out of range");
        for (const auto& e : end_sites)
            if (e.parent < 0 || e.parent >= num_joints()) throw ConfigError("end site parent out of range");
    }

    bool same_structure(const Skeleton& o) const {
        if (joints.size() != o.joints.size()) return false;
        for (std::size_t j = 0; j < joints.size(); ++j)
            if (joints[j].name != o.joints[j].name || joints[j].parent != o.joints[j].parent) return false;
        return true;
    }
};

/// Root trajectory plus local joint rotations, frame-major.
struct RawMotion {
    double frame_time = 1.0 / 30.0;
    Eigen::MatrixX3d root_positions;  // T x 3
    std::vector<Quat> rotations;      // T * J, index t * J + j
    int joints = 0;

    int num_frames() const { return static_cast<int>(root_positions.rows()); }
    Quat& rotation(int t, int j) { return rotations[static_cast<std::size_t>(t) * joints + j]; }
    const Quat& rotation(int t, int j) const { return rotations[static_cast<std::size_t>(t) * joints + j]; }

    static RawMotion identity(int frames, int joints, double frame_time = 1.0 / 30.0) {
        RawMotion m;
        m.frame_time = frame_time;
        m.joints = joints;
        m.root_positions = Eigen::MatrixX3d::Zero(frames, 3);
        m.rotations.assign(static_cast<std::size_t>(frames) * joints, Quat::Identity());
        return m;
    }

    /// Sign-aligns every joint's quaternion track over time.
    void canonicalize() {
        std::vector<Quat> track(num_frames());
        for (int j = 0; j < joints; ++j) {
            for (int t = 0; t < num_frames(); ++t) track[t] = rotation(t, j);
            canonicalize_track(track);
            for (int t = 0; t < num_frames(); ++t) rotation(t, j) = track[t];
        }
    }
};

/// T x C matrix of 0/1 entries.
using ContactLabels = Eigen::MatrixXd;

namespace detail {

struct Token {
    std::string text;
    int line;
};

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline double parse_number(const std::string& s, int line) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ParseError("expected a number, got '" + s + "'", line);
    return v;
}

class HierarchyReader {
public:
    HierarchyReader(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    const Token& peek() const {
        if (pos_ >= tokens_.size()) throw ParseError("unexpected end of hierarchy", last_line());
        return tokens_[pos_];
    }
    const Token& next() {
        const Token& t = peek();
        ++pos_;
        return t;
    }
    void expect(std::string_view word) {
        const Token& t = next();
        if (t.text != word) throw ParseError("expected '" + std::string(word) + "', got '" + t.text + "'", t.line);
    }
    bool done() const { return pos_ >= tokens_.size(); }

    Vec3 read_offset() {
        expect("OFFSET");
        Vec3 v;
        for (int i = 0; i < 3; ++i) {
            const Token& t = next();
            v[i] = parse_number(t.text, t.line);
        }
        return v;
    }

    void read_joint(Skeleton& skel, int parent, const std::string& name) {
        expect("{");
        Joint joint;
        joint.name = name;
        joint.parent = parent;
        joint.offset = read_offset();
        if (peek().text == "CHANNELS") {
            next();
            const Token& n = next();
            const double count = parse_number(n.text, n.line);
            if (count < 0 || count != static_cast<int>(count)) throw ParseError("bad channel count", n.line);
            for (int i = 0; i < static_cast<int>(count); ++i) {
                const Token& c = next();
                auto kind = parse_channel_name(c.text);
                if (!kind) throw ParseError("unknown channel '" + c.text + "'", c.line);
                joint.channels.push_back(*kind);
            }
        }
        const int index = skel.num_joints();
        skel.joints.push_back(std::move(joint));
        while (true) {
            const Token& t = next();
            if (t.text == "}") return;
            if (t.text == "JOINT") {
                const Token& child = next();
                read_joint(skel, index, child.text);
            } else if (t.text == "End") {
                expect("Site");
                expect("{");
                EndSite e;
                e.parent = index;
                e.offset = read_offset();
                expect("}");
                skel.end_sites.push_back(e);
            } else {
                throw ParseError("unexpected token '" + t.text + "' in joint '" + name + "'", t.line);
            }
        }
    }

    int last_line() const { return tokens_.empty() ? 1 : tokens_.back().line; }

private:
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

inline double snap(double v) {
    if (std::abs(v) < 1e-10) return 0.0;
    return v + 0.0;
}

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", snap(v));
    return buf;
}

}  // namespace detail

/// Parses BVH text. Euler channels are composed in the order they are listed.
/// Translation channels on non-root joints are read and dropped; the
/// hierarchy offset is used instead.
inline std::pair<Skeleton, RawMotion> parse_bvh(std::string_view text) {
    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            std::string_view ln = text.substr(start, end - start);
            if (!ln.empty() && ln.back() == '\r') ln.remove_suffix(1);
            lines.emplace_back(ln);
            start = end + 1;
        }
    }

    std::size_t motion_line = lines.size();
    std::vector<detail::Token> tokens;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto words = detail::split_ws(lines[i]);
        if (!words.empty() && words[0] == "MOTION") {
            motion_line = i;
            break;
        }
        for (auto& w : words) tokens.push_back({std::move(w), static_cast<int>(i + 1)});
    }

    Skeleton skel;
    {
        detail::HierarchyReader reader(std::move(tokens));
        if (reader.done()) throw ParseError("missing HIERARCHY section", 1);
        reader.expect("HIERARCHY");
        const auto& root_kw = reader.next();
        if (root_kw.text != "ROOT") throw ParseError("expected 'ROOT', got '" + root_kw.text + "'", root_kw.line);
        const auto& root_name = reader.next();
        reader.read_joint(skel, -1, root_name.text);
        if (!reader.done()) {
            const auto& t = reader.peek();
            throw ParseError("unexpected token '" + t.text + "' after root joint", t.line);
        }
    }
    if (motion_line == lines.size()) throw ParseError("missing MOTION section", static_cast<int>(lines.size()));
    try {
        skel.validate();
    } catch (const ConfigError& e) {
        throw ParseError(e.what(), 1);
    }

    // MOTION header
    std::size_t li = motion_line + 1;
    auto next_nonempty = [&]() -> std::size_t {
        while (li < lines.size() && detail::split_ws(lines[li]).empty()) ++li;
        return li;
    };
    next_nonempty();
    if (li >= lines.size()) throw ParseError("missing 'Frames:' line", static_cast<int>(li));
    auto frames_words = detail::split_ws(lines[li]);
    if (frames_words.size() != 2 || frames_words[0] != "Frames:")
        throw ParseError("expected 'Frames: <n>'", static_cast<int>(li + 1));
    const double frames_d = detail::parse_number(frames_words[1], static_cast<int>(li + 1));
    if (frames_d < 0 || frames_d != static_cast<int>(frames_d))
        throw ParseError("bad frame count", static_cast<int>(li + 1));
    const int frames = static_cast<int>(frames_d);
    const int frames_line = static_cast<int>(li + 1);
    ++li;
    next_nonempty();
    if (li >= lines.size()) throw ParseError("missing 'Frame Time:' line", static_cast<int>(li));
    auto ft_words = detail::split_ws(lines[li]);
    if (ft_words.size() != 3 || ft_words[0] != "Frame" || ft_words[1] != "Time:")
        throw ParseError("expected 'Frame Time: <seconds>'", static_cast<int>(li + 1));
    const double frame_time = detail::parse_number(ft_words[2], static_cast<int>(li + 1));
    ++li;

    std::size_t total_channels = 0;
    for (const auto& j : skel.joints) total_channels += j.channels.size();

    const int J = skel.num_joints();
    RawMotion motion;
    motion.frame_time = frame_time;
    motion.joints = J;
    std::vector<std::vector<double>> rows;
    for (; li < lines.size(); ++li) {
        auto words = detail::split_ws(lines[li]);
        if (words.empty()) continue;
        const int line_no = static_cast<int>(li + 1);
        if (words.size() != total_channels)
            throw ParseError("expected " + std::to_string(total_channels) + " values, got " +
                                 std::to_string(words.size()),
                             line_no);
        if (static_cast<int>(rows.size()) >= frames)
            throw ParseError("more data rows than the declared " + std::to_string(frames) + " frames", line_no);
        std::vector<double> row(words.size());
        for (std::size_t k = 0; k < words.size(); ++k) row[k] = detail::parse_number(words[k], line_no);
        rows.push_back(std::move(row));
    }
    if (static_cast<int>(rows.size()) != frames)
        throw ParseError("declared " + std::to_string(frames) + " frames but found " + std::to_string(rows.size()) +
                             " data rows",
                         frames_line);
    if (frames < 2) throw ParseError("a motion needs at least 2 frames", static_cast<int>(motion_line + 2));

    motion.root_positions.resize(frames, 3);
    motion.rotations.resize(static_cast<std::size_t>(frames) * J);
    for (int t = 0; t < frames; ++t) {
        std::size_t k = 0;
        for (int j = 0; j < J; ++j) {
            const auto& joint = skel.joints[j];
            std::vector<Axis> order;
            std::vector<double> angles;
            Vec3 pos = joint.offset;
            for (auto c : joint.channels) {
                const double v = rows[t][k++];
                if (is_rotation(c)) {
                    order.push_back(channel_axis(c));
                    angles.push_back(v);
                } else {
                    pos[static_cast<int>(channel_axis(c))] = v;
                }
            }
            if (j == 0) motion.root_positions.row(t) = pos.transpose();
            motion.rotation(t, j) = compose_euler(order, angles);
        }
    }
    motion.canonicalize();
    return {std::move(skel), std::move(motion)};
}

/// Emits BVH text. Rotations are converted back to Euler angles in each
/// joint's declared channel order.
inline std::string write_bvh(const Skeleton& skel, const RawMotion& motion) {
    const int J = skel.num_joints();
    if (motion.joints != J) throw ConfigError("motion joint count does not match skeleton");
    std::ostringstream out;
    out << "HIERARCHY\n";

    auto indent = [](int depth) { return std::string(static_cast<std::size_t>(depth), '\t'); };
    auto write_offset = [&](const Vec3& o, int depth) {
        out << indent(depth) << "OFFSET " << detail::fmt_num(o.x()) << ' ' << detail::fmt_num(o.y()) << ' '
            << detail::fmt_num(o.z()) << '\n';
    };
    auto write_joint = [&](auto&& self, int j, int depth) -> void {
        const auto& jt = skel.joints[j];
        out << indent(depth) << (j == 0 ? "ROOT " : "JOINT ") << jt.name << '\n';
        out << indent(depth) << "{\n";
        write_offset(jt.offset, depth + 1);
        if (!jt.channels.empty()) {
            out << indent(depth + 1) << "CHANNELS " << jt.channels.size();
            for (auto c : jt.channels) out << ' ' << channel_name(c);
            out << '\n';
        }
        for (int c : skel.children(j)) self(self, c, depth + 1);
        for (const auto& e : skel.end_sites) {
            if (e.parent != j) continue;
            out << indent(depth + 1) << "End Site\n" << indent(depth + 1) << "{\n";
            write_offset(e.offset, depth + 2);
            out << indent(depth + 1) << "}\n";
        }
        out << indent(depth) << "}\n";
    };
    write_joint(write_joint, 0, 0);

    // Validate the channel layouts once.
    for (const auto& jt : skel.joints) {
        auto order = jt.rotation_order();
        if (order.size() == 3 && order[0] != order[1] && order[1] != order[2] && order[0] != order[2]) continue;
        if (order.empty()) continue;
        throw ConfigError("joint '" + jt.name + "' needs zero or three distinct rotation channels to be written");
    }

    const int T = motion.num_frames();
    out << "MOTION\n";
    out << "Frames: " << T << '\n';
    out << "Frame Time: " << detail::fmt_num(motion.frame_time) << '\n';
    for (int t = 0; t < T; ++t) {
        bool first = true;
        auto emit = [&](double v) {
            if (!first) out << ' ';
            out << detail::fmt_num(v);
            first = false;
        };
        for (int j = 0; j < J; ++j) {
            const auto& jt = skel.joints[j];
            auto order = jt.rotation_order();
            std::array<double, 3> euler{0.0, 0.0, 0.0};
            if (order.size() == 3) euler = decompose_euler(motion.rotation(t, j), {order[0], order[1], order[2]});
            int r = 0;
            for (auto c : jt.channels) {
                if (is_rotation(c)) {
                    emit(euler[r++]);
                } else {
                    const int a = static_cast<int>(channel_axis(c));
                    emit(j == 0 ? motion.root_positions(t, a) : jt.offset[a]);
                }
            }
        }
        out << '\n';
    }
    return out.str();
}

/// World-space joint positions, frame-major.
struct JointPositions {
    int frames = 0;
    int joints = 0;
    std::vector<Vec3> data;

    Vec3& at(int t, int j) { return data[static_cast<std::size_t>(t) * joints + j]; }
    const Vec3& at(int t, int j) const { return data[static_cast<std::size_t>(t) * joints + j]; }
};

inline JointPositions forward_kinematics(const Skeleton& skel, const RawMotion& motion) {
    const int J = skel.num_joints();
    const int T = motion.num_frames();
    JointPositions pos;
    pos.frames = T;
    pos.joints = J;
    pos.data.resize(static_cast<std::size_t>(T) * J);
    std::vector<Quat> global(J);
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < J; ++j) {
            const int p = skel.joints[j].parent;
            if (p < 0) {
                global[j] = motion.rotation(t, j);
                pos.at(t, j) = motion.root_positions.row(t).transpose();
            } else {
                global[j] = global[p] * motion.rotation(t, j);
                pos.at(t, j) = pos.at(t, p) + global[p] * skel.joints[j].offset;
            }
        }
    }
    return pos;
}

/// Vertical (Y) extent of the rest pose, end sites included. Falls back to
/// the largest bounding-box side, then to 1.
inline double character_height(const Skeleton& skel) {
    std::vector<Vec3> pts(skel.num_joints());
    for (int j = 0; j < skel.num_joints(); ++j) {
        const int p = skel.joints[j].parent;
        pts[j] = p < 0 ? Vec3::Zero() : Vec3(pts[p] + skel.joints[j].offset);
    }
    std::vector<Vec3> all = pts;
    for (const auto& e : skel.end_sites) all.push_back(pts[e.parent] + e.offset);
    Vec3 lo = all[0], hi = all[0];
    for (const auto& v : all) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Vec3 ext = hi - lo;
    if (ext.y() > 0.0) return ext.y();
    if (ext.maxCoeff() > 0.0) return ext.maxCoeff();
    return 1.0;
}

/// Joints whose name mentions a foot or toe, case-insensitively.
inline std::vector<int> detect_foot_joints(const Skeleton& skel) {
    std::vector<int> out;
    for (int j = 0; j < skel.num_joints(); ++j) {
        std::string lower = skel.joints[j].name;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lower.find("foot") != std::string::npos || lower.find("toe") != std::string::npos) out.push_back(j);
    }
    return out;
}

inline constexpr double kDefaultContactThresholdPerHeight = 0.006;

inline double default_contact_threshold(const Skeleton& skel) {
    return kDefaultContactThresholdPerHeight * character_height(skel);
}

inline ContactLabels compute_contact_labels(const JointPositions& positions, const std::vector<int>& foot_joints,
                                            double velocity_threshold) {
    const int T = positions.frames;
    if (T < 2) throw ConfigError("contact labels need at least 2 frames");
    const int C = static_cast<int>(foot_joints.size());
    ContactLabels L = ContactLabels::Zero(T, C);
    for (int c = 0; c < C; ++c) {
        const int j = foot_joints[c];
        for (int t = 1; t < T; ++t)
            L(t, c) = (positions.at(t, j) - positions.at(t - 1, j)).norm() <= velocity_threshold ? 1.0 : 0.0;
        L(0, c) = L(1, c);
    }
    return L;
}

}  // namespace genmm
