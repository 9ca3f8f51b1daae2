// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hmflow {

int SkeletonLayout::root() const {
    for (size_t i = 0; i < joints.size(); ++i)
        if (joints[i].parent < 0) return static_cast<int>(i);
    return -1;
}

int SkeletonLayout::index_of(const std::string& name) const {
    for (size_t i = 0; i < joints.size(); ++i)
        if (joints[i].name == name) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> SkeletonLayout::pool_groups() const {
    std::vector<std::string> groups;
    for (const auto& j : joints)
        if (std::find(groups.begin(), groups.end(), j.pool_group) == groups.end())
            groups.push_back(j.pool_group);
    return groups;
}

std::vector<int> SkeletonLayout::pool_assignment() const {
    auto groups = pool_groups();
    std::vector<int> assign(joints.size(), -1);
    for (size_t i = 0; i < joints.size(); ++i) {
        auto it = std::find(groups.begin(), groups.end(), joints[i].pool_group);
        assign[i] = static_cast<int>(it - groups.begin());
    }
    return assign;
}

static void derive_depths(SkeletonLayout& layout) {
    // Parents may appear in any order; iterate until settled.
    const int n = layout.joint_count();
    std::vector<int> depth(static_cast<size_t>(n), -1);
    int root = layout.root();
    require(root >= 0, ErrorCode::format_error, "skeleton has no root joint");
    depth[static_cast<size_t>(root)] = 0;
    for (int pass = 0; pass < n; ++pass) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int p = layout.joints[static_cast<size_t>(i)].parent;
            if (p >= 0 && depth[static_cast<size_t>(p)] >= 0 && depth[static_cast<size_t>(i)] < 0) {
                depth[static_cast<size_t>(i)] = depth[static_cast<size_t>(p)] + 1;
                changed = true;
            }
        }
        if (!changed) break;
    }
    for (int i = 0; i < n; ++i) {
        require(depth[static_cast<size_t>(i)] >= 0, ErrorCode::format_error,
                "joint unreachable from the root: " + layout.joints[static_cast<size_t>(i)].name);
        layout.joints[static_cast<size_t>(i)].depth = depth[static_cast<size_t>(i)];
    }
}

void SkeletonLayout::validate() const {
    require(!joints.empty(), ErrorCode::format_error, "empty skeleton");
    int roots = 0;
    for (const auto& j : joints) roots += j.parent < 0 ? 1 : 0;
    require(roots == 1, ErrorCode::format_error, "skeleton must have exactly one root");
    const Joint& r = joints[static_cast<size_t>(root())];
    require(r.depth == 0, ErrorCode::format_error, "root depth must be 0");
    require(r.tpose_x == 0.0 && r.tpose_y == 0.0, ErrorCode::format_error,
            "root T-pose coordinates must be the origin");
    for (const auto& j : joints) {
        require(std::isfinite(j.tpose_x) && std::isfinite(j.tpose_y), ErrorCode::format_error,
                "non-finite T-pose coordinate");
        if (j.parent >= 0) {
            require(j.parent < joint_count(), ErrorCode::format_error, "parent index out of range");
            require(j.depth == joints[static_cast<size_t>(j.parent)].depth + 1,
                    ErrorCode::format_error, "depth must increase by one along edges");
        }
    }
    for (auto [l, rgt] : symmetry_pairs) {
        require(l >= 0 && l < joint_count() && rgt >= 0 && rgt < joint_count(),
                ErrorCode::format_error, "symmetry pair index out of range");
        const Joint& a = joints[static_cast<size_t>(l)];
        const Joint& b = joints[static_cast<size_t>(rgt)];
        require(a.tpose_x == -b.tpose_x && a.tpose_y == b.tpose_y, ErrorCode::format_error,
                "mirrored pair must have opposite x and equal y");
        require(a.depth == b.depth, ErrorCode::format_error, "mirrored pair must share depth");
    }
}

SkeletonLayout SkeletonLayout::pooled_layout() const {
    auto groups = pool_groups();
    auto assign = pool_assignment();
    const int G = static_cast<int>(groups.size());
    SkeletonLayout out;
    out.joints.resize(static_cast<size_t>(G));

    std::vector<int> head(static_cast<size_t>(G), -1);  // shallowest member
    std::vector<int> count(static_cast<size_t>(G), 0);
    for (int j = 0; j < joint_count(); ++j) {
        int g = assign[static_cast<size_t>(j)];
        Joint& gj = out.joints[static_cast<size_t>(g)];
        gj.name = groups[static_cast<size_t>(g)];
        gj.pool_group = groups[static_cast<size_t>(g)];
        gj.tpose_x += joints[static_cast<size_t>(j)].tpose_x;
        gj.tpose_y += joints[static_cast<size_t>(j)].tpose_y;
        ++count[static_cast<size_t>(g)];
        if (head[static_cast<size_t>(g)] < 0 ||
            joints[static_cast<size_t>(j)].depth <
                joints[static_cast<size_t>(head[static_cast<size_t>(g)])].depth)
            head[static_cast<size_t>(g)] = j;
    }
    for (int g = 0; g < G; ++g) {
        out.joints[static_cast<size_t>(g)].tpose_x /= count[static_cast<size_t>(g)];
        out.joints[static_cast<size_t>(g)].tpose_y /= count[static_cast<size_t>(g)];
        int h = head[static_cast<size_t>(g)];
        int parent_joint = joints[static_cast<size_t>(h)].parent;
        out.joints[static_cast<size_t>(g)].parent =
            parent_joint < 0 ? -1 : assign[static_cast<size_t>(parent_joint)];
    }
    for (int a = 0; a < G; ++a)
        for (int b = a + 1; b < G; ++b) {
            const Joint& ja = out.joints[static_cast<size_t>(a)];
            const Joint& jb = out.joints[static_cast<size_t>(b)];
            if (ja.tpose_x != 0.0 && ja.tpose_x == -jb.tpose_x && ja.tpose_y == jb.tpose_y)
                out.symmetry_pairs.emplace_back(a, b);
        }
    derive_depths(out);
    out.validate();
    return out;
}

SkeletonLayout SkeletonLayout::reference15() {
    SkeletonLayout s;
    auto add = [&](const std::string& name, const std::string& parent, double x, double y,
                   const std::string& group) {
        Joint j;
        j.name = name;
        j.parent = parent.empty() ? -1 : s.index_of(parent);
        j.tpose_x = x;
        j.tpose_y = y;
        j.pool_group = group;
        s.joints.push_back(j);
    };
    add("pelvis", "", 0.0, 0.0, "pelvis");
    add("spine", "pelvis", 0.0, 0.45, "torso");
    add("head", "spine", 0.0, 0.75, "torso");
    add("shoulder_l", "spine", -0.20, 0.55, "left_arm");
    add("elbow_l", "shoulder_l", -0.45, 0.55, "left_arm");
    add("wrist_l", "elbow_l", -0.70, 0.55, "left_arm");
    add("shoulder_r", "spine", 0.20, 0.55, "right_arm");
    add("elbow_r", "shoulder_r", 0.45, 0.55, "right_arm");
    add("wrist_r", "elbow_r", 0.70, 0.55, "right_arm");
    add("hip_l", "pelvis", -0.11, -0.05, "left_leg");
    add("knee_l", "hip_l", -0.11, -0.50, "left_leg");
    add("ankle_l", "knee_l", -0.11, -0.95, "left_leg");
    add("hip_r", "pelvis", 0.11, -0.05, "right_leg");
    add("knee_r", "hip_r", 0.11, -0.50, "right_leg");
    add("ankle_r", "knee_r", 0.11, -0.95, "right_leg");
    for (const auto& base : {"shoulder", "elbow", "wrist", "hip", "knee", "ankle"})
        s.symmetry_pairs.emplace_back(s.index_of(std::string(base) + "_l"),
                                      s.index_of(std::string(base) + "_r"));
    derive_depths(s);
    s.validate();
    return s;
}

SkeletonLayout SkeletonLayout::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io_error, "cannot open skeleton layout: " + path);
    SkeletonLayout s;
    std::vector<std::pair<std::string, std::string>> pending_sym;
    std::vector<std::string> parent_names;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        if (kind == "joint") {
            Joint j;
            std::string parent;
            if (!(ls >> j.name >> parent >> j.tpose_x >> j.tpose_y >> j.pool_group))
                raise(ErrorCode::format_error,
                      "malformed joint line " + std::to_string(lineno) + " in " + path);
            parent_names.push_back(parent);
            s.joints.push_back(j);
        } else if (kind == "symmetry") {
            std::string a, b;
            if (!(ls >> a >> b))
                raise(ErrorCode::format_error,
                      "malformed symmetry line " + std::to_string(lineno) + " in " + path);
            pending_sym.emplace_back(a, b);
        } else {
            raise(ErrorCode::format_error,
                  "unknown directive '" + kind + "' at line " + std::to_string(lineno));
        }
    }
    for (size_t i = 0; i < s.joints.size(); ++i) {
        const std::string& p = parent_names[i];
        if (p == "-") {
            s.joints[i].parent = -1;
        } else {
            int idx = s.index_of(p);
            require(idx >= 0, ErrorCode::format_error, "unknown parent joint: " + p);
            s.joints[i].parent = idx;
        }
    }
    for (const auto& [a, b] : pending_sym) {
        int ia = s.index_of(a), ib = s.index_of(b);
        require(ia >= 0 && ib >= 0, ErrorCode::format_error, "symmetry names unknown");
        s.symmetry_pairs.emplace_back(ia, ib);
    }
    derive_depths(s);
    s.validate();
    return s;
}

void SkeletonLayout::save(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), ErrorCode::io_error, "cannot write skeleton layout: " + path);
    out << "# skeleton layout: joint <name> <parent|-> <tpose_x> <tpose_y> <pool_group>\n";
    for (const auto& j : joints) {
        out << "joint " << j.name << ' '
            << (j.parent < 0 ? std::string("-") : joints[static_cast<size_t>(j.parent)].name) << ' '
            << j.tpose_x << ' ' << j.tpose_y << ' ' << j.pool_group << '\n';
    }
    for (auto [l, r] : symmetry_pairs)
        out << "symmetry " << joints[static_cast<size_t>(l)].name << ' '
            << joints[static_cast<size_t>(r)].name << '\n';
    require(out.good(), ErrorCode::io_error, "write failed: " + path);
}

}  // namespace hmflow
