// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/error.hpp"

namespace hmflow {

struct Joint {
    std::string name;
    int parent = -1;  // -1 for the root
    double tpose_x = 0.0;
    double tpose_y = 0.0;
    int depth = 0;            // derived: root 0, child = parent + 1
    std::string pool_group;   // latent-joint assignment used by the VAE
};

// Kinematic layout shared by the positional encoding, the VAE pooling and
// the synthetic generator: joint order, parents, frontal-plane T-pose
// coordinates (x lateral, y vertical, pelvis at the origin) and left/right
// symmetry pairs.
struct SkeletonLayout {
    std::vector<Joint> joints;
    std::vector<std::pair<int, int>> symmetry_pairs;  // (left, right)

    int root() const;
    int joint_count() const { return static_cast<int>(joints.size()); }
    int index_of(const std::string& name) const;  // -1 when absent

    // Pool group names in first-appearance order; defines latent joint order.
    std::vector<std::string> pool_groups() const;
    // joint index -> pool group index
    std::vector<int> pool_assignment() const;

    void validate() const;

    // Group-level layout: one joint per pool group at the centroid of its
    // members, parented through the shallowest member. Used for rope
    // positions of latent-joint tokens.
    SkeletonLayout pooled_layout() const;

    // The 15-joint humanoid used by the synthetic corpus.
    static SkeletonLayout reference15();

    // Structured text file: `joint <name> <parent|-> <tpose_x> <tpose_y>
    // <pool_group>` plus `symmetry <left> <right>` lines. Depth is derived.
    static SkeletonLayout load(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace hmflow
