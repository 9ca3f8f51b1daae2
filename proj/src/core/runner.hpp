// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace hmflow {

// Executes one pipeline command: gen-data, train-vae, train-tmdit, sample,
// eval, diagnose, retention or inspect-schedule. Artifacts land in out_dir
// together with a verbatim copy of the effective configuration. Throws
// Error on failure; returns 0 on success.
int run_command(const std::string& command, const std::string& config_path,
                const std::vector<std::string>& overrides, const std::string& out_dir);

}  // namespace hmflow
