// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/motionvae.hpp"
#include "core/rng.hpp"
#include "core/skeleton.hpp"
#include "core/tensor.hpp"

namespace hmflow {

// Procedural motion programs on the 15-joint reference skeleton. Motions are
// analytic, smooth, deterministic given (program, params, frames, seed) and
// carry enough structure for rule-based semantic checks.
//
// Channel layout (D_j = 6), frame rate 20 fps:
//   pelvis (root): yaw rate [rad/frame], forward and lateral velocity in the
//     heading frame [units/frame], root height, height velocity, zero pad
//   other joints: local position (x lateral, y up, z forward) relative to
//     the pelvis in the heading frame, then its per-frame velocity

constexpr double kFrameRate = 20.0;
constexpr double kRestHeight = 0.95;

namespace root_channel {
constexpr int yaw_rate = 0;
constexpr int v_fwd = 1;
constexpr int v_lat = 2;
constexpr int height = 3;
constexpr int v_height = 4;
}  // namespace root_channel

namespace joint_channel {
constexpr int x = 0;
constexpr int y = 1;
constexpr int z = 2;
constexpr int vx = 3;
constexpr int vy = 4;
constexpr int vz = 5;
}  // namespace joint_channel

enum class ProgramId : std::uint32_t {
    walk_forward = 0,
    turn = 1,
    raise_arm = 2,
    wave = 3,
    jump = 4,
    walk_circle = 5,
};

constexpr int kProgramCount = 6;
const char* program_name(ProgramId id);
ProgramId program_from_name(const std::string& name);

struct ProgramParams {
    double speed = 1.2;     // walk_forward / walk_circle, units per second
    int direction = 1;      // turn / walk_circle: +1 left, -1 right
    int side = 0;           // raise_arm / wave: 0 left, 1 right
    double amplitude = 0.25;  // jump height / wave lateral amplitude / turn angle share
    double cycles = 3.0;    // wave oscillation count
};

// Parameter draw within the documented ranges of each program.
ProgramParams sample_params(ProgramId id, Rng& rng);
void validate_params(ProgramId id, const ProgramParams& p);

// Deterministic kinematic forward model; frames >= 16.
MotionSequence generate_motion(ProgramId id, const ProgramParams& p, std::int64_t frames,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// text side
// ---------------------------------------------------------------------------

// Closed vocabulary over the program templates; id 0 is the null token.
struct Vocabulary {
    std::vector<std::string> words;
    std::unordered_map<std::string, std::int64_t> index;

    std::int64_t size() const { return static_cast<std::int64_t>(words.size()); }
    std::vector<std::int64_t> tokenize(const std::string& text) const;
    std::string detokenize(const std::vector<std::int64_t>& ids) const;

    static const Vocabulary& standard();
    static Vocabulary from_words(std::vector<std::string> words);
};

// Template fill; deterministic given (id, params, seed).
std::string make_text(ProgramId id, const ProgramParams& p, std::uint64_t seed);

// Full conditioning construction: text, token ids, word embeddings from the
// supplied table and the mean-pooled sentence vector. An empty program
// (std::nullopt) produces the null-token sequence of length 1.
struct TextCondition {
    std::string text;
    std::vector<std::int64_t> tokens;
    Tensor c;      // [n, table_dim]
    Tensor c_vec;  // [table_dim]
};
TextCondition text_condition(std::optional<ProgramId> id, const ProgramParams& p,
                             std::uint64_t seed, const Tensor& embed_table,
                             const Vocabulary& vocab = Vocabulary::standard());

// ---------------------------------------------------------------------------
// corpus
// ---------------------------------------------------------------------------

struct CorpusRecord {
    std::uint32_t program = 0;  // kUnlabeled for motions without a program
    ProgramParams params;
    std::uint64_t seed = 0;
    std::uint8_t split = 0;  // 0 train, 1 val, 2 test
    std::string text;
    std::vector<std::int64_t> tokens;
    MotionSequence motion;

    static constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;
    bool labeled() const { return program != kUnlabeled; }
    ProgramId program_id() const { return static_cast<ProgramId>(program); }
};

struct CorpusSpec {
    std::vector<ProgramId> programs{ProgramId::walk_forward, ProgramId::turn,
                                    ProgramId::raise_arm,   ProgramId::wave,
                                    ProgramId::jump,        ProgramId::walk_circle};
    int n_per_program = 10;
    std::int64_t min_frames = 64;
    std::int64_t max_frames = 64;
    std::uint64_t seed = 1;
};

struct Corpus {
    CorpusSpec spec;
    std::vector<CorpusRecord> records;

    std::vector<int> split_indices(int split) const;  // record indices
};

// Seed-splitting rule: record i derives Rng::mix(master, i + 1); the
// train/val/test bucket hashes the same stream at a fixed salt, 80/5/15.
std::uint64_t record_seed(std::uint64_t master, std::int64_t index);
int record_split(std::uint64_t master, std::int64_t index);

Corpus build_corpus(const CorpusSpec& spec);

void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

// ---------------------------------------------------------------------------
// external pose-feature files
// ---------------------------------------------------------------------------

// Layout config (JSON): feature_dim, dtype (float32|float64), d_j, and per
// joint the flat feature indices it owns (shorter lists are zero padded).
struct PoseLayoutConfig {
    std::int64_t feature_dim = 0;
    std::string dtype = "float32";
    std::int64_t d_j = 0;
    std::vector<std::string> joint_names;
    std::vector<std::vector<std::int64_t>> joint_indices;

    static PoseLayoutConfig load(const std::string& path);
};

// Raw dense [frames x feature_dim] array -> MotionSequence per the layout.
MotionSequence load_pose_features(const std::string& path, const PoseLayoutConfig& layout);
void save_pose_features(const std::string& path, const MotionSequence& motion,
                        const PoseLayoutConfig& layout);

}  // namespace hmflow
