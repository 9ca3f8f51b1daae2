// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "core/config.hpp"
#include "core/evalkit.hpp"
#include "core/resample.hpp"
#include "core/trainer.hpp"

namespace hmflow {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void prepare_out_dir(const std::string& out_dir, const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec, ErrorCode::io_error, "cannot create output directory: " + out_dir);
    std::ofstream copy(join(out_dir, "config_used.cfg"));
    require(copy.good(), ErrorCode::io_error, "cannot write the config copy");
    copy << cfg.verbatim();
}

ScaleSchedule schedule_from_config(const RunConfig& cfg) {
    require(cfg.has("schedule.scales"), ErrorCode::invalid_config,
            "schedule.scales is required");
    return make_schedule(cfg.get_doubles("schedule.scales"),
                         cfg.get_doubles_opt("schedule.times"));
}

TrainConfig train_config_from(const RunConfig& cfg) {
    TrainConfig t;
    t.steps = cfg.get_int("train.steps", t.steps);
    t.batch = static_cast<int>(cfg.get_int("train.batch", t.batch));
    t.lr = cfg.get_double("train.lr", t.lr);
    t.weight_decay = cfg.get_double("train.weight_decay", t.weight_decay);
    t.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    t.kl_weight = cfg.get_double("train.kl_weight", t.kl_weight);
    t.aug_weight = cfg.get_double("train.aug_weight", t.aug_weight);
    t.aug_fraction = cfg.get_double("train.aug_fraction", t.aug_fraction);
    t.cfg_dropout = cfg.get_double("train.cfg_dropout", t.cfg_dropout);
    t.threads = static_cast<int>(cfg.get_int("train.threads", t.threads));
    t.log_every = cfg.get_int("train.log_every", t.log_every);
    if (cfg.has("train.lr_drops")) t.lr_drops = cfg.get_doubles("train.lr_drops");
    t.lr_factor = cfg.get_double("train.lr_factor", t.lr_factor);
    return t;
}

VAEConfig vae_config_from(const RunConfig& cfg) {
    VAEConfig v;
    v.hidden = static_cast<int>(cfg.get_int("vae.hidden", v.hidden));
    v.latent_channels = static_cast<int>(cfg.get_int("vae.latent_channels", v.latent_channels));
    return v;
}

TMDiTConfig tmdit_config_from(const RunConfig& cfg, int vocab_size, int latent_channels) {
    TMDiTConfig m = TMDiTConfig::desk(vocab_size);
    m.n_blocks = static_cast<int>(cfg.get_int("model.n_blocks", m.n_blocks));
    m.n_separate = static_cast<int>(cfg.get_int("model.n_separate", m.n_separate));
    m.n_shared = static_cast<int>(cfg.get_int("model.n_shared", m.n_shared));
    m.model_dim = static_cast<int>(cfg.get_int("model.dim", m.model_dim));
    m.n_heads = static_cast<int>(cfg.get_int("model.heads", m.n_heads));
    m.ffn_dim = static_cast<int>(cfg.get_int("model.ffn_dim", m.ffn_dim));
    m.max_words = static_cast<int>(cfg.get_int("model.max_words", m.max_words));
    m.latent_channels = latent_channels;
    return m;
}

std::vector<ProgramId> programs_from(const RunConfig& cfg, const char* key) {
    if (!cfg.has(key)) {
        std::vector<ProgramId> all;
        for (int i = 0; i < kProgramCount; ++i) all.push_back(static_cast<ProgramId>(i));
        return all;
    }
    std::vector<ProgramId> out;
    for (const auto& name : cfg.get_strings(key)) out.push_back(program_from_name(name));
    return out;
}

// World-frame root trajectory integrated from the root channels; heading 0
// faces +z.
void write_trajectory(const std::string& path, const MotionSequence& m) {
    const SkeletonLayout layout = SkeletonLayout::reference15();
    const int root = layout.root();
    std::ofstream out(path);
    require(out.good(), ErrorCode::io_error, "cannot write trajectory: " + path);
    out << "# frame world_x world_z heading height\n";
    double x = 0.0, z = 0.0, psi = 0.0;
    for (std::int64_t i = 0; i < m.frames(); ++i) {
        double vf = m.payload.at(i, root, root_channel::v_fwd);
        double vl = m.payload.at(i, root, root_channel::v_lat);
        out << i << ' ' << x << ' ' << z << ' ' << psi << ' '
            << m.payload.at(i, root, root_channel::height) << '\n';
        x += vf * std::sin(psi) + vl * std::cos(psi);
        z += vf * std::cos(psi) - vl * std::sin(psi);
        psi += m.payload.at(i, root, root_channel::yaw_rate);
    }
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
    CorpusSpec spec;
    spec.programs = programs_from(cfg, "data.programs");
    spec.n_per_program = static_cast<int>(cfg.get_int("data.n_per_program", 10));
    spec.min_frames = cfg.get_int("data.min_frames", 64);
    spec.max_frames = cfg.get_int("data.max_frames", 64);
    spec.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    Corpus corpus = build_corpus(spec);
    std::string path = join(out_dir, cfg.get_string("data.out", "corpus.bin"));
    save_corpus(path, corpus);
    std::cout << "wrote " << corpus.records.size() << " records to " << path << "\n";
    return 0;
}

int cmd_train_vae(const RunConfig& cfg, const std::string& out_dir) {
    Corpus corpus = load_corpus(cfg.get_string("data.corpus"));
    auto result = train_vae(corpus, vae_config_from(cfg), train_config_from(cfg),
                            join(out_dir, "vae.ckpt"), join(out_dir, "metrics_vae.txt"));
    std::cout << "vae checkpoint written; final loss "
              << (result.loss_trace.empty() ? 0.0 : result.loss_trace.back()) << "\n";
    return 0;
}

int cmd_train_tmdit(const RunConfig& cfg, const std::string& out_dir) {
    Corpus corpus = load_corpus(cfg.get_string("data.corpus"));
    auto vae = load_vae_checkpoint(cfg.get_string("vae.checkpoint"));
    ScaleSchedule sched = schedule_from_config(cfg);
    TMDiTConfig model_cfg =
        tmdit_config_from(cfg, static_cast<int>(Vocabulary::standard().size()),
                          vae->config().latent_channels);
    auto result = train_tmdit(corpus, *vae, model_cfg, sched, train_config_from(cfg),
                              join(out_dir, "tmdit.ckpt"), join(out_dir, "metrics_tmdit.txt"));
    std::cout << "tmdit checkpoint written; final loss "
              << (result.loss_trace.empty() ? 0.0 : result.loss_trace.back()) << "\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg, const std::string& out_dir) {
    GenerationPipeline pipe =
        GenerationPipeline::open(cfg.get_string("vae.checkpoint"), cfg.get_string("tmdit.checkpoint"));

    std::vector<std::string> prompts;
    if (cfg.has("sample.prompt_file")) {
        std::ifstream in(cfg.get_string("sample.prompt_file"));
        require(in.good(), ErrorCode::io_error, "cannot open prompt file");
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) prompts.push_back(line);
        require(!prompts.empty(), ErrorCode::invalid_config, "prompt file is empty");
    } else {
        prompts.push_back(cfg.get_string("sample.prompt"));
    }

    const std::int64_t frames = cfg.get_int("sample.frames", 64);
    const int count = static_cast<int>(cfg.get_int("sample.count", 1));
    const double guidance = cfg.get_double("guidance_weight", 2.5);
    std::vector<int> steps = cfg.has("steps_per_stage")
                                 ? cfg.get_ints("steps_per_stage")
                                 : std::vector<int>(
                                       static_cast<size_t>(pipe.model->schedule().stage_count), 8);
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

    Corpus out_set;
    out_set.spec.programs.clear();
    out_set.spec.n_per_program = count;
    out_set.spec.min_frames = frames;
    out_set.spec.max_frames = frames;
    out_set.spec.seed = seed;

    std::int64_t idx = 0;
    for (const auto& prompt : prompts) {
        auto tokens = pipe.vocab.tokenize(prompt);
        for (int rep = 0; rep < count; ++rep, ++idx) {
            Rng noise_rng(seed, 0x5A11ull + static_cast<std::uint64_t>(idx));
            CorpusRecord rec;
            rec.program = CorpusRecord::kUnlabeled;
            rec.seed = Rng::mix(seed, static_cast<std::uint64_t>(idx));
            rec.split = 2;
            rec.text = prompt;
            rec.tokens = tokens;
            rec.motion = pipe.generate(tokens, frames, steps, guidance, noise_rng);
            out_set.records.push_back(std::move(rec));
        }
    }

    std::string path = join(out_dir, "samples.bin");
    save_corpus(path, out_set);
    write_trajectory(join(out_dir, "trajectory.txt"), out_set.records.front().motion);
    std::cout << "wrote " << out_set.records.size() << " motions to " << path << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& out_dir) {
    Corpus corpus = load_corpus(cfg.get_string("data.corpus"));
    const std::string mode = cfg.get_string("eval.mode", "gen");
    std::ofstream report(join(out_dir, "eval.txt"));
    require(report.good(), ErrorCode::io_error, "cannot write the eval report");
    report << "# eval report\nmode " << mode << "\n";

    auto test_idx = corpus.split_indices(2);
    require(test_idx.size() >= 4, ErrorCode::invalid_argument, "test split too small");

    if (mode == "gt-halves") {
        // Ground truth against itself: distance near zero, accuracy 1.
        std::vector<MotionSequence> half_a, half_b;
        std::vector<LabeledMotion> labeled;
        for (size_t i = 0; i < test_idx.size(); ++i) {
            const auto& rec = corpus.records[static_cast<size_t>(test_idx[i])];
            (i % 2 == 0 ? half_a : half_b).push_back(rec.motion);
            if (rec.labeled())
                labeled.push_back({rec.motion, rec.program_id(), rec.params});
        }
        double fpd = frechet_pose_distance(PoseFeatureSet::from_motions(half_a),
                                           PoseFeatureSet::from_motions(half_b));
        double acc = semantic_accuracy(labeled);
        report << "fpd_gt_halves " << fpd << "\n";
        report << "semantic_accuracy " << acc << "\n";
        std::cout << "gt halves: fpd " << fpd << ", semantic accuracy " << acc << "\n";
        return 0;
    }

    require(mode == "gen", ErrorCode::invalid_config, "eval.mode must be gen or gt-halves");
    GenerationPipeline pipe =
        GenerationPipeline::open(cfg.get_string("vae.checkpoint"), cfg.get_string("tmdit.checkpoint"));
    const int per_program = static_cast<int>(cfg.get_int("eval.samples_per_program", 100));
    const std::int64_t frames = cfg.get_int("sample.frames", 64);
    const double guidance = cfg.get_double("guidance_weight", 2.5);
    std::vector<int> steps = cfg.has("steps_per_stage")
                                 ? cfg.get_ints("steps_per_stage")
                                 : std::vector<int>(
                                       static_cast<size_t>(pipe.model->schedule().stage_count), 8);
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

    // Generate per program; evaluate rules and feature distances.
    std::vector<ProgramId> programs = corpus.spec.programs;
    require(!programs.empty(), ErrorCode::invalid_argument, "corpus lists no programs");

    std::vector<std::vector<MotionSequence>> gen_by_prog(programs.size());
    std::vector<std::vector<MotionSequence>> test_by_prog(programs.size());
    std::vector<LabeledMotion> labeled_gen;
    std::vector<MotionSequence> all_gen;

    for (size_t p = 0; p < programs.size(); ++p) {
        for (int i = 0; i < per_program; ++i) {
            std::uint64_t s = Rng::mix(seed, p * 100000ull + static_cast<std::uint64_t>(i));
            Rng prng(s);
            ProgramParams params = sample_params(programs[p], prng);
            std::string prompt = make_text(programs[p], params, s);
            auto tokens = pipe.vocab.tokenize(prompt);
            Rng noise_rng(s, 0x9E11ull);
            MotionSequence m = pipe.generate(tokens, frames, steps, guidance, noise_rng);
            labeled_gen.push_back({m, programs[p], params});
            gen_by_prog[p].push_back(m);
            all_gen.push_back(std::move(m));
        }
        for (int idx : test_idx) {
            const auto& rec = corpus.records[static_cast<size_t>(idx)];
            if (rec.labeled() && rec.program_id() == programs[p])
                test_by_prog[p].push_back(rec.motion);
        }
        require(test_by_prog[p].size() >= 2, ErrorCode::invalid_argument,
                "test split lacks samples for a program");
    }

    double overall = semantic_accuracy(labeled_gen);
    report << "samples_per_program " << per_program << "\n";
    report << "semantic_accuracy_overall " << overall << "\n";
    std::cout << "semantic accuracy overall " << overall << "\n";
    for (size_t p = 0; p < programs.size(); ++p) {
        std::vector<LabeledMotion> subset;
        for (const auto& s : labeled_gen)
            if (s.program == programs[p]) subset.push_back(s);
        report << "semantic_accuracy " << program_name(programs[p]) << " "
               << semantic_accuracy(subset) << "\n";
    }

    bool matched_lower = true;
    for (size_t p = 0; p < programs.size(); ++p) {
        auto gen_set = PoseFeatureSet::from_motions(gen_by_prog[p]);
        double matched = frechet_pose_distance(gen_set,
                                               PoseFeatureSet::from_motions(test_by_prog[p]));
        report << "fpd " << program_name(programs[p]) << " " << program_name(programs[p]) << " "
               << matched << "\n";
        for (size_t q = 0; q < programs.size(); ++q) {
            if (q == p) continue;
            double mismatched = frechet_pose_distance(
                gen_set, PoseFeatureSet::from_motions(test_by_prog[q]));
            report << "fpd " << program_name(programs[p]) << " " << program_name(programs[q])
                   << " " << mismatched << "\n";
            if (mismatched <= matched) matched_lower = false;
        }
    }
    report << "fpd_matched_lower " << (matched_lower ? "true" : "false") << "\n";
    report << "diversity " << diversity(all_gen, 300, seed) << "\n";
    std::cout << "matched-label fpd strictly lower: " << (matched_lower ? "yes" : "no") << "\n";
    return 0;
}

int cmd_diagnose(const RunConfig& cfg, const std::string& out_dir) {
    ScaleSchedule sched = schedule_from_config(cfg);
    const int steps = static_cast<int>(cfg.get_int("diagnose.steps", 8));
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    std::vector<std::uint64_t> seeds;
    for (std::int64_t i = 0; i < cfg.get_int("diagnose.n_seeds", 3); ++i)
        seeds.push_back(Rng::mix(seed, static_cast<std::uint64_t>(i)));

    std::unique_ptr<TMDiT> scratch;
    std::shared_ptr<TMDiT> loaded;
    std::vector<std::int64_t> tokens{1};
    Tensor::Shape shape;
    if (cfg.has("tmdit.checkpoint")) {
        auto lt = load_tmdit_checkpoint(cfg.get_string("tmdit.checkpoint"));
        loaded = lt.model;
        shape = {cfg.get_int("diagnose.frames", 16), lt.model->config().latent_joints,
                 lt.model->config().latent_channels};
    } else {
        // Seeded scratch model: the diagnostic needs any deterministic field.
        TMDiTConfig mc;
        mc.n_blocks = 2;
        mc.n_separate = 1;
        mc.n_shared = 1;
        mc.model_dim = 32;
        mc.n_heads = 2;
        mc.ffn_dim = 64;
        mc.vocab_size = static_cast<int>(Vocabulary::standard().size());
        mc.latent_channels = static_cast<int>(cfg.get_int("diagnose.channels", 8));
        Rng init(seed, 0xD1A6ull);
        scratch = std::make_unique<TMDiT>(mc, SkeletonLayout::reference15(), sched, init);
        Rng rnd(seed, 0xD1A7ull);
        scratch->randomize(rnd);
        shape = {cfg.get_int("diagnose.frames", 16), mc.latent_joints, mc.latent_channels};
    }
    const TMDiT& model = loaded ? *loaded : *scratch;
    TMDiTVelocityField field(model, tokens);

    auto rep = noise_consistency_diagnostic(field, model.schedule(), seeds, steps, shape);

    std::ofstream out(join(out_dir, "diagnostic.txt"));
    require(out.good(), ErrorCode::io_error, "cannot write the diagnostic report");
    auto line = [&](const std::string& k, const std::string& v) {
        out << k << ' ' << v << '\n';
        std::cout << k << ' ' << v << '\n';
    };
    line("seeds", std::to_string(seeds.size()));
    line("steps_per_stage", std::to_string(steps));
    line("deterministic_rerun_deviation", std::to_string(rep.deterministic_rerun_deviation));
    line("deterministic_draws_after_init", std::to_string(rep.deterministic_draws_after_init));
    line("naive_rerun_deviation", std::to_string(rep.naive_rerun_deviation));
    line("naive_draws_after_init", std::to_string(rep.naive_draws_after_init));
    line("cross_rule_gap", std::to_string(rep.cross_rule_gap));
    bool consistent = rep.deterministic_rerun_deviation == 0.0 && rep.deterministic_draws_after_init == 0 &&
                      rep.naive_rerun_deviation > 0.0;
    line("noise_consistency", consistent ? "PASS" : "FAIL");
    return consistent ? 0 : 1;
}

int cmd_retention(const RunConfig& cfg, const std::string& out_dir) {
    Corpus corpus = load_corpus(cfg.get_string("data.corpus"));
    std::vector<double> ratios{1.0, 0.8, 0.6, 0.4, 0.2};
    if (cfg.has("retention.ratios")) ratios = cfg.get_doubles("retention.ratios");

    std::vector<LabeledMotion> samples;
    for (int idx : corpus.split_indices(2)) {
        const auto& rec = corpus.records[static_cast<size_t>(idx)];
        if (rec.labeled()) samples.push_back({rec.motion, rec.program_id(), rec.params});
    }
    require(!samples.empty(), ErrorCode::invalid_argument, "no labeled test motions");

    auto table = retention_study(samples, ratios);
    std::ofstream out(join(out_dir, "retention.txt"));
    require(out.good(), ErrorCode::io_error, "cannot write the retention table");
    out << "# ratio accuracy\n";
    std::cout << "ratio accuracy\n";
    for (const auto& row : table) {
        out << row.ratio << ' ' << row.accuracy << '\n';
        std::cout << row.ratio << ' ' << row.accuracy << '\n';
    }
    return 0;
}

int cmd_inspect_schedule(const RunConfig& cfg) {
    ScaleSchedule sched = schedule_from_config(cfg);
    const std::int64_t l = cfg.get_int("inspect.frames", 16);
    std::cout << "stage scale t_begin t_end frames\n";
    for (int k = 1; k <= sched.stage_count; ++k) {
        std::cout << k << ' ' << sched.scale(k) << ' ' << sched.t_begin(k) << ' '
                  << sched.t_end(k) << ' ' << sched.stage_length(k, l) << '\n';
    }
    return 0;
}

}  // namespace

int run_command(const std::string& command, const std::string& config_path,
                const std::vector<std::string>& overrides, const std::string& out_dir) {
    RunConfig cfg = config_path.empty() ? RunConfig::parse_text("")
                                        : RunConfig::parse_file(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    require(cfg.has("seed"), ErrorCode::invalid_config, "a seed is mandatory (seed = N)");

    if (command == "inspect-schedule") return cmd_inspect_schedule(cfg);

    prepare_out_dir(out_dir, cfg);
    if (command == "gen-data") return cmd_gen_data(cfg, out_dir);
    if (command == "train-vae") return cmd_train_vae(cfg, out_dir);
    if (command == "train-tmdit") return cmd_train_tmdit(cfg, out_dir);
    if (command == "sample") return cmd_sample(cfg, out_dir);
    if (command == "eval") return cmd_eval(cfg, out_dir);
    if (command == "diagnose") return cmd_diagnose(cfg, out_dir);
    if (command == "retention") return cmd_retention(cfg, out_dir);
    raise(ErrorCode::unknown_command, "unknown command: " + command);
}

}  // namespace hmflow
