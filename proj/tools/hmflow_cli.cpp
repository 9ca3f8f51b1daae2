// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Links only the public C API of libhmflow.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hmflow/hmflow.h"

namespace {

struct CommonArgs {
    std::string config;
    std::string out_dir = "hmflow_out";
    std::vector<std::string> overrides;
    std::int64_t seed = -1;
    bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "Run configuration file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "Output directory");
    cmd->add_option("--set", args.overrides, "Override: key=value (repeatable)");
    cmd->add_option("--seed", args.seed, "Master seed (overrides the config)")
        ->each([&args](const std::string&) { args.has_seed = true; });
}

int run(const std::string& command, CommonArgs& args) {
    std::vector<std::string> overrides = args.overrides;
    if (args.has_seed) overrides.push_back("seed=" + std::to_string(args.seed));
    std::vector<const char*> ptrs;
    ptrs.reserve(overrides.size());
    for (const auto& o : overrides) ptrs.push_back(o.c_str());
    hmf_status status =
        hmf_run(command.c_str(), args.config.empty() ? nullptr : args.config.c_str(),
                ptrs.data(), ptrs.size(), args.out_dir.c_str());
    if (status != HMF_OK) {
        std::fprintf(stderr, "error (%s): %s\n", hmf_status_name(status), hmf_last_error());
        return static_cast<int>(status);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hmflow: hierarchical flow matching for skeletal motion"};
    app.require_subcommand(1);

    const struct {
        const char* name;
        const char* help;
    } commands[] = {
        {"gen-data", "Generate the procedural motion-text corpus"},
        {"train-vae", "Train the motion VAE (stage one)"},
        {"train-tmdit", "Train the velocity model (stage two)"},
        {"sample", "Generate motions from a text prompt"},
        {"eval", "Evaluate generated motions against the corpus"},
        {"diagnose", "Noise-consistency diagnostic for the transition rule"},
        {"retention", "Semantic accuracy under temporal downsampling"},
        {"inspect-schedule", "Print the stage table of a scale schedule"},
    };

    std::vector<std::pair<std::string, CommonArgs>> invocations;
    invocations.reserve(std::size(commands));
    std::string prompt;
    for (const auto& c : commands) {
        invocations.emplace_back(c.name, CommonArgs{});
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, invocations.back().second);
        if (std::string(c.name) == "sample")
            sub->add_option("--prompt", prompt, "Text prompt (shortcut for sample.prompt)");
    }

    CLI11_PARSE(app, argc, argv);

    for (auto& [name, args] : invocations) {
        if (app.get_subcommand(name)->parsed()) {
            if (name == "sample" && !prompt.empty())
                args.overrides.push_back("sample.prompt=" + prompt);
            return run(name, args);
        }
    }
    return 0;
}
