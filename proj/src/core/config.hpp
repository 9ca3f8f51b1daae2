// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hmflow {

// Structured text run configuration: `key = value` lines with dotted keys,
// `#` comments, scalars (number, bool, string) and bracketed lists. Command
// line overrides use the same `key = value` syntax.
class RunConfig {
public:
    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);

    void apply_override(const std::string& assignment);  // "key=value"

    bool has(const std::string& key) const;

    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::optional<std::vector<double>> get_doubles_opt(const std::string& key) const;
    std::vector<std::string> get_strings(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key) const;

    // Original text plus any applied overrides; written verbatim next to the
    // artifacts of each run.
    std::string verbatim() const;

private:
    const std::string& raw(const std::string& key) const;

    std::map<std::string, std::string> values_;
    std::string source_text_;
    std::vector<std::string> overrides_;
};

}  // namespace hmflow
