// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hmflow {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

// C1 bump with maximum exactly 1 at the center.
double bump(double u, double center, double half_width) {
    double v = (u - center) / half_width;
    if (v <= -1.0 || v >= 1.0) return 0.0;
    double q = 1.0 - v * v;
    return q * q;
}

}  // namespace

const char* program_name(ProgramId id) {
    switch (id) {
        case ProgramId::walk_forward: return "walk_forward";
        case ProgramId::turn: return "turn";
        case ProgramId::raise_arm: return "raise_arm";
        case ProgramId::wave: return "wave";
        case ProgramId::jump: return "jump";
        case ProgramId::walk_circle: return "walk_circle";
    }
    raise(ErrorCode::invalid_argument, "unknown program id");
}

ProgramId program_from_name(const std::string& name) {
    for (int i = 0; i < kProgramCount; ++i)
        if (name == program_name(static_cast<ProgramId>(i))) return static_cast<ProgramId>(i);
    raise(ErrorCode::invalid_argument, "unknown program name: " + name);
}

ProgramParams sample_params(ProgramId id, Rng& rng) {
    ProgramParams p;
    switch (id) {
        case ProgramId::walk_forward:
            p.speed = rng.uniform(0.8, 1.6);
            break;
        case ProgramId::turn:
            p.direction = rng.bernoulli(0.5) ? 1 : -1;
            p.amplitude = rng.uniform(0.5 * M_PI, 0.9 * M_PI);  // total yaw
            break;
        case ProgramId::raise_arm:
            p.side = rng.bernoulli(0.5) ? 1 : 0;
            p.amplitude = rng.uniform(0.35, 0.5);  // lift above the shoulder line
            break;
        case ProgramId::wave:
            p.side = rng.bernoulli(0.5) ? 1 : 0;
            p.amplitude = rng.uniform(0.14, 0.2);  // lateral amplitude
            p.cycles = rng.uniform(2.5, 3.2);
            break;
        case ProgramId::jump:
            p.amplitude = rng.uniform(0.15, 0.35);  // apex height above rest
            break;
        case ProgramId::walk_circle:
            p.speed = rng.uniform(1.0, 1.5);
            p.direction = rng.bernoulli(0.5) ? 1 : -1;
            p.amplitude = rng.uniform(1.3 * M_PI, 2.0 * M_PI);  // total winding
            break;
    }
    return p;
}

void validate_params(ProgramId id, const ProgramParams& p) {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    switch (id) {
        case ProgramId::walk_forward:
            require(in(p.speed, 0.3, 2.5), ErrorCode::invalid_argument, "walk speed out of range");
            return;
        case ProgramId::turn:
            require(p.direction == 1 || p.direction == -1, ErrorCode::invalid_argument,
                    "turn direction must be +-1");
            require(in(p.amplitude, 0.3 * M_PI, M_PI), ErrorCode::invalid_argument,
                    "turn angle out of range");
            return;
        case ProgramId::raise_arm:
            require(p.side == 0 || p.side == 1, ErrorCode::invalid_argument, "side must be 0/1");
            require(in(p.amplitude, 0.25, 0.6), ErrorCode::invalid_argument,
                    "arm lift out of range");
            return;
        case ProgramId::wave:
            require(p.side == 0 || p.side == 1, ErrorCode::invalid_argument, "side must be 0/1");
            require(in(p.amplitude, 0.08, 0.3), ErrorCode::invalid_argument,
                    "wave amplitude out of range");
            require(in(p.cycles, 1.5, 4.0), ErrorCode::invalid_argument,
                    "wave cycles out of range");
            return;
        case ProgramId::jump:
            require(in(p.amplitude, 0.08, 0.5), ErrorCode::invalid_argument,
                    "jump height out of range");
            return;
        case ProgramId::walk_circle:
            require(in(p.speed, 0.3, 2.5), ErrorCode::invalid_argument, "walk speed out of range");
            require(p.direction == 1 || p.direction == -1, ErrorCode::invalid_argument,
                    "circle direction must be +-1");
            require(in(p.amplitude, M_PI, 2.5 * M_PI), ErrorCode::invalid_argument,
                    "circle winding out of range");
            return;
    }
    raise(ErrorCode::invalid_argument, "unknown program id");
}

MotionSequence generate_motion(ProgramId id, const ProgramParams& p, std::int64_t frames,
                               std::uint64_t seed) {
    require(frames >= 16, ErrorCode::invalid_argument, "programs need at least 16 frames");
    validate_params(id, p);
    const SkeletonLayout layout = SkeletonLayout::reference15();
    const int J = layout.joint_count();

    Rng rng(seed, 0xC0FFEEull);
    const double gait_phase = rng.uniform(0.0, kTau);
    const double idle_phase = rng.uniform(0.0, kTau);
    const double amp_jitter = 1.0 + rng.uniform(-0.08, 0.08);

    std::vector<double> rest_x(static_cast<size_t>(J)), rest_y(static_cast<size_t>(J));
    for (int j = 0; j < J; ++j) {
        rest_x[static_cast<size_t>(j)] = layout.joints[static_cast<size_t>(j)].tpose_x;
        rest_y[static_cast<size_t>(j)] = layout.joints[static_cast<size_t>(j)].tpose_y;
    }
    const int root = layout.root();
    auto idx = [&](const char* name) { return layout.index_of(name); };
    const int ankle[2] = {idx("ankle_l"), idx("ankle_r")};
    const int knee[2] = {idx("knee_l"), idx("knee_r")};
    const int wrist[2] = {idx("wrist_l"), idx("wrist_r")};
    const int elbow[2] = {idx("elbow_l"), idx("elbow_r")};
    const int head_j = idx("head");

    const std::int64_t L = frames;
    std::vector<double> px(static_cast<size_t>(L * J)), py(static_cast<size_t>(L * J)),
        pz(static_cast<size_t>(L * J));
    std::vector<double> yaw(static_cast<size_t>(L)), vfwd(static_cast<size_t>(L)),
        vlat(static_cast<size_t>(L)), height(static_cast<size_t>(L));

    auto P = [&](std::int64_t i, int j) { return static_cast<size_t>(i * J + j); };

    const bool walking = id == ProgramId::walk_forward || id == ProgramId::walk_circle;
    const double speed = p.speed;
    const double step_hz = 1.4 + 0.35 * speed;
    const double leg_amp = 0.22 * amp_jitter * (walking ? speed / 1.2 : 0.0);
    const double arm_amp = 0.13 * amp_jitter * (walking ? speed / 1.2 : 0.0);

    const double yaw0 = rng.uniform(-0.3, 0.3);
    const int side = p.side;
    const double side_sign = side == 0 ? -1.0 : 1.0;  // left joints sit at negative x

    // The jump apex lands exactly on a frame, so the peak height is analytic.
    const std::int64_t apex_frame = static_cast<std::int64_t>(std::llround(0.52 * (L - 1)));
    const double u_apex = static_cast<double>(apex_frame) / static_cast<double>(L - 1);
    const double u_crouch = u_apex - 0.30;

    for (std::int64_t i = 0; i < L; ++i) {
        const double t = static_cast<double>(i) / kFrameRate;
        const double u = static_cast<double>(i) / static_cast<double>(L - 1);
        const double gait = kTau * step_hz * t + gait_phase;

        for (int j = 0; j < J; ++j) {
            px[P(i, j)] = rest_x[static_cast<size_t>(j)];
            py[P(i, j)] = rest_y[static_cast<size_t>(j)];
            pz[P(i, j)] = 0.0;
        }
        yaw[static_cast<size_t>(i)] = yaw0;
        vfwd[static_cast<size_t>(i)] = 0.0;
        vlat[static_cast<size_t>(i)] = 0.0;
        height[static_cast<size_t>(i)] = kRestHeight;

        // idle sway keeps non-walking programs alive
        const double sway = 0.01 * std::sin(kTau * 0.8 * t + idle_phase);
        px[P(i, head_j)] += sway;
        pz[P(i, idx("spine"))] += 0.5 * sway;

        if (walking) {
            const double stride = std::sin(gait);
            pz[P(i, ankle[0])] += leg_amp * stride;
            pz[P(i, ankle[1])] -= leg_amp * stride;
            pz[P(i, knee[0])] += 0.55 * leg_amp * stride;
            pz[P(i, knee[1])] -= 0.55 * leg_amp * stride;
            py[P(i, ankle[0])] += 0.06 * std::max(0.0, std::sin(gait + 0.5 * M_PI));
            py[P(i, ankle[1])] += 0.06 * std::max(0.0, std::sin(gait + 1.5 * M_PI));
            pz[P(i, wrist[0])] -= arm_amp * stride;
            pz[P(i, wrist[1])] += arm_amp * stride;
            pz[P(i, elbow[0])] -= 0.5 * arm_amp * stride;
            pz[P(i, elbow[1])] += 0.5 * arm_amp * stride;
            vfwd[static_cast<size_t>(i)] =
                (speed / kFrameRate) * (1.0 + 0.04 * std::sin(2.0 * gait));
            vlat[static_cast<size_t>(i)] = 0.012 * std::sin(gait);
            height[static_cast<size_t>(i)] += 0.02 * std::sin(2.0 * gait);
        }

        switch (id) {
            case ProgramId::walk_forward:
                break;
            case ProgramId::walk_circle:
                yaw[static_cast<size_t>(i)] = yaw0 + p.direction * p.amplitude * u;
                break;
            case ProgramId::turn: {
                yaw[static_cast<size_t>(i)] = yaw0 + p.direction * p.amplitude * smoothstep(u);
                const double shuffle = 0.04 * std::sin(kTau * 1.5 * t + gait_phase);
                pz[P(i, ankle[0])] += shuffle;
                pz[P(i, ankle[1])] -= shuffle;
                vfwd[static_cast<size_t>(i)] = 0.05 / kFrameRate;
                break;
            }
            case ProgramId::raise_arm:
            case ProgramId::wave: {
                const double lift = id == ProgramId::raise_arm ? p.amplitude : 0.42;
                const double reach = id == ProgramId::raise_arm ? 0.6 : 0.35;
                const double prog = smoothstep(u / reach);
                py[P(i, wrist[side])] += lift * prog;
                px[P(i, wrist[side])] -= side_sign * 0.30 * prog;  // inward
                py[P(i, elbow[side])] += 0.45 * lift * prog;
                px[P(i, elbow[side])] -= side_sign * 0.15 * prog;
                if (id == ProgramId::wave) {
                    const double phase_u = std::max(0.0, (u - reach) / (1.0 - reach));
                    px[P(i, wrist[side])] +=
                        p.amplitude * prog * std::sin(kTau * p.cycles * phase_u);
                    px[P(i, elbow[side])] +=
                        0.35 * p.amplitude * prog * std::sin(kTau * p.cycles * phase_u);
                }
                break;
            }
            case ProgramId::jump: {
                const double crouch = bump(u, u_crouch, 0.18);
                const double flight = bump(u, u_apex, 0.22);
                height[static_cast<size_t>(i)] =
                    kRestHeight - 0.10 * crouch + p.amplitude * flight;
                py[P(i, knee[0])] += 0.12 * crouch + 0.16 * flight;
                py[P(i, knee[1])] += 0.12 * crouch + 0.16 * flight;
                py[P(i, ankle[0])] += 0.05 * crouch + 0.28 * flight;
                py[P(i, ankle[1])] += 0.05 * crouch + 0.28 * flight;
                pz[P(i, wrist[0])] -= 0.08 * flight;
                pz[P(i, wrist[1])] -= 0.08 * flight;
                break;
            }
        }
    }

    // Velocities are forward differences; the last frame repeats the
    // previous delta.
    Tensor out({L, static_cast<std::int64_t>(J), 6});
    auto diff1 = [&](const std::vector<double>& s, std::int64_t i) {
        if (i + 1 < L) return s[static_cast<size_t>(i + 1)] - s[static_cast<size_t>(i)];
        return s[static_cast<size_t>(i)] - s[static_cast<size_t>(i - 1)];
    };
    for (std::int64_t i = 0; i < L; ++i) {
        out.at(i, root, root_channel::yaw_rate) = diff1(yaw, i);
        out.at(i, root, root_channel::v_fwd) = vfwd[static_cast<size_t>(i)];
        out.at(i, root, root_channel::v_lat) = vlat[static_cast<size_t>(i)];
        out.at(i, root, root_channel::height) = height[static_cast<size_t>(i)];
        out.at(i, root, root_channel::v_height) = diff1(height, i);
        for (int j = 0; j < J; ++j) {
            if (j == root) continue;
            out.at(i, j, joint_channel::x) = px[P(i, j)];
            out.at(i, j, joint_channel::y) = py[P(i, j)];
            out.at(i, j, joint_channel::z) = pz[P(i, j)];
            auto d = [&](const std::vector<double>& s) {
                if (i + 1 < L) return s[P(i + 1, j)] - s[P(i, j)];
                return s[P(i, j)] - s[P(i - 1, j)];
            };
            out.at(i, j, joint_channel::vx) = d(px);
            out.at(i, j, joint_channel::vy) = d(py);
            out.at(i, j, joint_channel::vz) = d(pz);
        }
    }
    return MotionSequence{out};
}

// ---------------------------------------------------------------------------
// text
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& program_templates(ProgramId id) {
    static const std::vector<std::string> walk{"a person walks forward {adv}",
                                               "someone walks straight ahead {adv}",
                                               "a person walks ahead {adv}"};
    static const std::vector<std::string> turn{"a person turns {dir} in place",
                                               "someone rotates to the {dir}"};
    static const std::vector<std::string> lift{"a person raises their {side} arm",
                                               "someone lifts the {side} hand up high"};
    static const std::vector<std::string> wave{"a person waves with their {side} hand",
                                               "someone greets waving the {side} arm"};
    static const std::vector<std::string> jump{"a person jumps straight up",
                                               "someone leaps into the air"};
    static const std::vector<std::string> circle{"a person walks in a circle turning {dir}",
                                                 "someone follows a curved path to the {dir}"};
    switch (id) {
        case ProgramId::walk_forward: return walk;
        case ProgramId::turn: return turn;
        case ProgramId::raise_arm: return lift;
        case ProgramId::wave: return wave;
        case ProgramId::jump: return jump;
        case ProgramId::walk_circle: return circle;
    }
    raise(ErrorCode::invalid_argument, "unknown program id");
}

std::string speed_adverb(double speed) {
    if (speed < 1.05) return "slowly";
    if (speed < 1.35) return "steadily";
    return "quickly";
}

std::string fill_template(const std::string& pattern, const ProgramParams& p) {
    std::string out = pattern;
    auto replace = [&](const std::string& slot, const std::string& value) {
        auto pos = out.find(slot);
        if (pos != std::string::npos) out.replace(pos, slot.size(), value);
    };
    replace("{adv}", speed_adverb(p.speed));
    replace("{dir}", p.direction > 0 ? "left" : "right");
    replace("{side}", p.side == 0 ? "left" : "right");
    return out;
}

}  // namespace

std::string make_text(ProgramId id, const ProgramParams& p, std::uint64_t seed) {
    validate_params(id, p);
    const auto& templates = program_templates(id);
    Rng rng(seed, 0x7E47ull);
    size_t pick = static_cast<size_t>(rng.next_below(templates.size()));
    return fill_template(templates[pick], p);
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
    Vocabulary v;
    v.words = std::move(words);
    for (size_t i = 0; i < v.words.size(); ++i)
        v.index[v.words[i]] = static_cast<std::int64_t>(i);
    return v;
}

const Vocabulary& Vocabulary::standard() {
    static const Vocabulary vocab = [] {
        std::set<std::string> bag;
        std::vector<ProgramParams> variants(4);
        variants[0].speed = 0.9;
        variants[1].speed = 1.2;
        variants[1].direction = -1;
        variants[1].side = 1;
        variants[2].speed = 1.5;
        variants[3].direction = 1;
        for (int prog = 0; prog < kProgramCount; ++prog) {
            for (const auto& tmpl : program_templates(static_cast<ProgramId>(prog))) {
                for (const auto& v : variants) {
                    std::istringstream words(fill_template(tmpl, v));
                    std::string w;
                    while (words >> w) bag.insert(w);
                }
            }
        }
        std::vector<std::string> list{"<null>"};
        list.insert(list.end(), bag.begin(), bag.end());
        return from_words(std::move(list));
    }();
    return vocab;
}

std::vector<std::int64_t> Vocabulary::tokenize(const std::string& text) const {
    std::istringstream stream(text);
    std::vector<std::int64_t> out;
    std::string w;
    while (stream >> w) {
        auto it = index.find(w);
        require(it != index.end(), ErrorCode::tokenization_error,
                "word outside the closed vocabulary: " + w);
        out.push_back(it->second);
    }
    require(!out.empty(), ErrorCode::tokenization_error, "empty text");
    return out;
}

std::string Vocabulary::detokenize(const std::vector<std::int64_t>& ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && ids[i] < size(), ErrorCode::invalid_argument,
                "token id out of range");
        if (i) out += ' ';
        out += words[static_cast<size_t>(ids[i])];
    }
    return out;
}

TextCondition text_condition(std::optional<ProgramId> id, const ProgramParams& p,
                             std::uint64_t seed, const Tensor& embed_table,
                             const Vocabulary& vocab) {
    require(embed_table.rank() == 2 &&
                embed_table.dim(0) == static_cast<std::int64_t>(vocab.size()),
            ErrorCode::invalid_argument, "embedding table rows must match the vocabulary");
    TextCondition out;
    if (id.has_value()) {
        out.text = make_text(*id, p, seed);
        out.tokens = vocab.tokenize(out.text);
    } else {
        out.text = "";
        out.tokens = {0};  // the null token sequence of length 1
    }
    const std::int64_t D = embed_table.dim(1);
    const std::int64_t n = static_cast<std::int64_t>(out.tokens.size());
    out.c = Tensor({n, D});
    out.c_vec = Tensor({D});
    for (std::int64_t i = 0; i < n; ++i) {
        const double* row = embed_table.data() + out.tokens[static_cast<size_t>(i)] * D;
        for (std::int64_t c = 0; c < D; ++c) {
            out.c.at(i, c) = row[c];
            out.c_vec.at(c) += row[c] / static_cast<double>(n);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// corpus
// ---------------------------------------------------------------------------

std::uint64_t record_seed(std::uint64_t master, std::int64_t index) {
    return Rng::mix(master, static_cast<std::uint64_t>(index) + 1);
}

int record_split(std::uint64_t master, std::int64_t index) {
    std::uint64_t h = Rng::mix(record_seed(master, index), 0x5EEDull);
    std::uint64_t bucket = h % 10000;
    if (bucket < 8000) return 0;
    if (bucket < 8500) return 1;
    return 2;
}

std::vector<int> Corpus::split_indices(int split) const {
    std::vector<int> out;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].split == split) out.push_back(static_cast<int>(i));
    return out;
}

Corpus build_corpus(const CorpusSpec& spec) {
    require(spec.n_per_program >= 1, ErrorCode::invalid_argument, "n_per_program must be >= 1");
    require(!spec.programs.empty(), ErrorCode::invalid_argument, "no programs selected");
    require(spec.min_frames >= 16 && spec.max_frames >= spec.min_frames,
            ErrorCode::invalid_argument, "invalid frame range");
    Corpus corpus;
    corpus.spec = spec;
    std::int64_t idx = 0;
    for (ProgramId prog : spec.programs) {
        for (int rep = 0; rep < spec.n_per_program; ++rep, ++idx) {
            CorpusRecord rec;
            rec.program = static_cast<std::uint32_t>(prog);
            rec.seed = record_seed(spec.seed, idx);
            rec.split = static_cast<std::uint8_t>(record_split(spec.seed, idx));
            Rng rng(rec.seed);
            std::int64_t L =
                spec.min_frames + static_cast<std::int64_t>(rng.next_below(
                                      static_cast<std::uint64_t>(spec.max_frames - spec.min_frames + 1)));
            rec.params = sample_params(prog, rng);
            rec.text = make_text(prog, rec.params, rec.seed);
            rec.tokens = Vocabulary::standard().tokenize(rec.text);
            rec.motion = generate_motion(prog, rec.params, L, rec.seed);
            corpus.records.push_back(std::move(rec));
        }
    }
    return corpus;
}

namespace {

constexpr char kCorpusMagic[4] = {'H', 'M', 'F', 'C'};
constexpr std::uint32_t kCorpusVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::io_error, "cannot write corpus: " + path);

    nlohmann::ordered_json header;
    header["version"] = kCorpusVersion;
    header["frame_rate"] = kFrameRate;
    header["joints"] = 15;
    header["channels"] = 6;
    header["n_records"] = corpus.records.size();
    header["programs"] = nlohmann::ordered_json::array();
    for (ProgramId p : corpus.spec.programs) header["programs"].push_back(program_name(p));
    header["n_per_program"] = corpus.spec.n_per_program;
    header["min_frames"] = corpus.spec.min_frames;
    header["max_frames"] = corpus.spec.max_frames;
    header["seed"] = corpus.spec.seed;
    header["vocabulary"] = Vocabulary::standard().words;

    out.write(kCorpusMagic, 4);
    write_pod<std::uint32_t>(out, kCorpusVersion);
    std::string hs = header.dump();
    write_pod<std::uint64_t>(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    for (const auto& rec : corpus.records) {
        write_pod<std::uint32_t>(out, rec.program);
        write_pod<double>(out, rec.params.speed);
        write_pod<std::int32_t>(out, rec.params.direction);
        write_pod<std::int32_t>(out, rec.params.side);
        write_pod<double>(out, rec.params.amplitude);
        write_pod<double>(out, rec.params.cycles);
        write_pod<std::uint64_t>(out, rec.seed);
        write_pod<std::uint8_t>(out, rec.split);
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(rec.text.size()));
        out.write(rec.text.data(), static_cast<std::streamsize>(rec.text.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(rec.tokens.size()));
        for (auto t : rec.tokens) write_pod<std::int64_t>(out, t);
        const Tensor& m = rec.motion.payload;
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim(0)));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim(1)));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim(2)));
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(m.size() *
                                               static_cast<std::int64_t>(sizeof(double))));
    }
    require(out.good(), ErrorCode::io_error, "corpus write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io_error, "cannot open corpus: " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, kCorpusMagic, 4) == 0, ErrorCode::format_error,
            "not a corpus file: " + path);
    auto version = read_pod<std::uint32_t>(in);
    require(version == kCorpusVersion, ErrorCode::format_error, "unsupported corpus version");
    auto header_len = read_pod<std::uint64_t>(in);
    std::string hs(header_len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(header_len));
    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::format_error, std::string("bad corpus header: ") + e.what());
    }

    Corpus corpus;
    corpus.spec.programs.clear();
    for (const auto& name : header.at("programs"))
        corpus.spec.programs.push_back(program_from_name(name.get<std::string>()));
    corpus.spec.n_per_program = header.at("n_per_program").get<int>();
    corpus.spec.min_frames = header.at("min_frames").get<std::int64_t>();
    corpus.spec.max_frames = header.at("max_frames").get<std::int64_t>();
    corpus.spec.seed = header.at("seed").get<std::uint64_t>();

    auto n_records = header.at("n_records").get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_records; ++i) {
        CorpusRecord rec;
        rec.program = read_pod<std::uint32_t>(in);
        rec.params.speed = read_pod<double>(in);
        rec.params.direction = read_pod<std::int32_t>(in);
        rec.params.side = read_pod<std::int32_t>(in);
        rec.params.amplitude = read_pod<double>(in);
        rec.params.cycles = read_pod<double>(in);
        rec.seed = read_pod<std::uint64_t>(in);
        rec.split = read_pod<std::uint8_t>(in);
        auto text_len = read_pod<std::uint32_t>(in);
        rec.text.resize(text_len);
        in.read(rec.text.data(), text_len);
        auto n_tokens = read_pod<std::uint32_t>(in);
        rec.tokens.resize(n_tokens);
        for (auto& t : rec.tokens) t = read_pod<std::int64_t>(in);
        auto L = read_pod<std::uint32_t>(in);
        auto J = read_pod<std::uint32_t>(in);
        auto D = read_pod<std::uint32_t>(in);
        Tensor m({static_cast<std::int64_t>(L), static_cast<std::int64_t>(J),
                  static_cast<std::int64_t>(D)});
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(m.size() *
                                             static_cast<std::int64_t>(sizeof(double))));
        require(in.good(), ErrorCode::format_error, "truncated corpus: " + path);
        rec.motion = MotionSequence{m};
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// pose-feature files
// ---------------------------------------------------------------------------

PoseLayoutConfig PoseLayoutConfig::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io_error, "cannot open layout config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::format_error, std::string("bad layout config: ") + e.what());
    }
    PoseLayoutConfig cfg;
    cfg.feature_dim = j.at("feature_dim").get<std::int64_t>();
    cfg.dtype = j.value("dtype", std::string("float32"));
    cfg.d_j = j.at("d_j").get<std::int64_t>();
    require(cfg.dtype == "float32" || cfg.dtype == "float64", ErrorCode::format_error,
            "dtype must be float32 or float64");
    for (const auto& joint : j.at("joints")) {
        cfg.joint_names.push_back(joint.at("name").get<std::string>());
        std::vector<std::int64_t> idxs = joint.at("indices").get<std::vector<std::int64_t>>();
        require(static_cast<std::int64_t>(idxs.size()) <= cfg.d_j, ErrorCode::format_error,
                "joint owns more channels than d_j");
        for (auto ix : idxs)
            require(ix >= 0 && ix < cfg.feature_dim, ErrorCode::format_error,
                    "feature index out of range");
        cfg.joint_indices.push_back(std::move(idxs));
    }
    require(!cfg.joint_indices.empty(), ErrorCode::format_error, "layout lists no joints");
    return cfg;
}

MotionSequence load_pose_features(const std::string& path, const PoseLayoutConfig& layout) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io_error, "cannot open pose features: " + path);
    in.seekg(0, std::ios::end);
    std::int64_t bytes = static_cast<std::int64_t>(in.tellg());
    in.seekg(0);
    const std::int64_t esz = layout.dtype == "float32" ? 4 : 8;
    const std::int64_t row = layout.feature_dim * esz;
    require(row > 0 && bytes % row == 0, ErrorCode::format_error,
            "file size is not a multiple of feature_dim");
    const std::int64_t frames = bytes / row;
    require(frames >= 1, ErrorCode::format_error, "empty pose-feature file");

    const std::int64_t J = static_cast<std::int64_t>(layout.joint_indices.size());
    Tensor out({frames, J, layout.d_j});
    std::vector<char> buf(static_cast<size_t>(row));
    for (std::int64_t f = 0; f < frames; ++f) {
        in.read(buf.data(), row);
        require(in.good(), ErrorCode::format_error, "truncated pose-feature file");
        auto fetch = [&](std::int64_t i) {
            if (layout.dtype == "float32") {
                float v;
                std::memcpy(&v, buf.data() + i * 4, 4);
                return static_cast<double>(v);
            }
            double v;
            std::memcpy(&v, buf.data() + i * 8, 8);
            return v;
        };
        for (std::int64_t j = 0; j < J; ++j) {
            const auto& idxs = layout.joint_indices[static_cast<size_t>(j)];
            for (std::int64_t c = 0; c < static_cast<std::int64_t>(idxs.size()); ++c)
                out.at(f, j, c) = fetch(idxs[static_cast<size_t>(c)]);
        }
    }
    return MotionSequence{out};
}

void save_pose_features(const std::string& path, const MotionSequence& motion,
                        const PoseLayoutConfig& layout) {
    require(motion.joints() == static_cast<std::int64_t>(layout.joint_indices.size()) &&
                motion.channels() == layout.d_j,
            ErrorCode::invalid_argument, "motion does not match the layout");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::io_error, "cannot write pose features: " + path);
    const std::int64_t esz = layout.dtype == "float32" ? 4 : 8;
    std::vector<char> buf;
    for (std::int64_t f = 0; f < motion.frames(); ++f) {
        buf.assign(static_cast<size_t>(layout.feature_dim * esz), 0);
        for (std::int64_t j = 0; j < motion.joints(); ++j) {
            const auto& idxs = layout.joint_indices[static_cast<size_t>(j)];
            for (std::int64_t c = 0; c < static_cast<std::int64_t>(idxs.size()); ++c) {
                if (layout.dtype == "float32") {
                    float v = static_cast<float>(motion.payload.at(f, j, c));
                    std::memcpy(buf.data() + idxs[static_cast<size_t>(c)] * 4, &v, 4);
                } else {
                    double v = motion.payload.at(f, j, c);
                    std::memcpy(buf.data() + idxs[static_cast<size_t>(c)] * 8, &v, 8);
                }
            }
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    require(out.good(), ErrorCode::io_error, "pose-feature write failed: " + path);
}

}  // namespace hmflow
