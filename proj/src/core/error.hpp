// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hmflow {

// Mirrors the hmf_status codes of the C API one-to-one.
enum class ErrorCode : int {
    ok = 0,
    invalid_argument = 1,
    invalid_schedule = 2,
    invalid_config = 3,
    degenerate_transition = 4,
    integration_failure = 5,
    io_error = 6,
    format_error = 7,
    tokenization_error = 8,
    distance_undefined = 9,
    training_diverged = 10,
    incompatible_checkpoint = 11,
    unknown_command = 12,
    internal_error = 13,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) raise(code, msg);
}

}  // namespace hmflow
