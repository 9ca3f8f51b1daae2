// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace hmflow {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_quotes(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_list(const std::string& value) {
    require(value.size() >= 2 && value.front() == '[' && value.back() == ']',
            ErrorCode::invalid_config, "expected a [..] list: " + value);
    std::vector<std::string> items;
    std::string body = value.substr(1, value.size() - 2);
    std::string cur;
    for (char ch : body) {
        if (ch == ',') {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    std::string last = trim(cur);
    if (!last.empty()) items.push_back(last);
    return items;
}

void parse_assignment(const std::string& line, std::string& key, std::string& value) {
    auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::invalid_config,
            "expected key = value: " + line);
    key = trim(line.substr(0, eq));
    value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorCode::invalid_config, "empty key in: " + line);
    require(!value.empty(), ErrorCode::invalid_config, "empty value for key: " + key);
}

}  // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    cfg.source_text_ = text;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::string key, value;
        try {
            parse_assignment(line, key, value);
        } catch (const Error& e) {
            raise(ErrorCode::invalid_config,
                  std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io_error, "cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

void RunConfig::apply_override(const std::string& assignment) {
    std::string key, value;
    parse_assignment(assignment, key, value);
    values_[key] = value;
    overrides_.push_back(key + " = " + value);
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& RunConfig::raw(const std::string& key) const {
    auto it = values_.find(key);
    require(it != values_.end(), ErrorCode::invalid_config, "missing config key: " + key);
    return it->second;
}

double RunConfig::get_double(const std::string& key) const {
    try {
        size_t used = 0;
        double v = std::stod(raw(key), &used);
        require(used == raw(key).size(), ErrorCode::invalid_config,
                "not a number: " + key + " = " + raw(key));
        return v;
    } catch (const std::logic_error&) {
        raise(ErrorCode::invalid_config, "not a number: " + key + " = " + raw(key));
    }
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
    try {
        size_t used = 0;
        long long v = std::stoll(raw(key), &used);
        require(used == raw(key).size(), ErrorCode::invalid_config,
                "not an integer: " + key + " = " + raw(key));
        return v;
    } catch (const std::logic_error&) {
        raise(ErrorCode::invalid_config, "not an integer: " + key + " = " + raw(key));
    }
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = raw(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    raise(ErrorCode::invalid_config, "not a boolean: " + key + " = " + v);
}

std::string RunConfig::get_string(const std::string& key) const { return strip_quotes(raw(key)); }

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(raw(key))) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::logic_error&) {
            raise(ErrorCode::invalid_config, "not a number in list " + key + ": " + item);
        }
    }
    return out;
}

std::optional<std::vector<double>> RunConfig::get_doubles_opt(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_doubles(key);
}

std::vector<std::string> RunConfig::get_strings(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& item : split_list(raw(key))) out.push_back(strip_quotes(item));
    return out;
}

std::vector<int> RunConfig::get_ints(const std::string& key) const {
    std::vector<int> out;
    for (double v : get_doubles(key)) out.push_back(static_cast<int>(v));
    return out;
}

std::string RunConfig::verbatim() const {
    std::string out = source_text_;
    if (!overrides_.empty()) {
        if (!out.empty() && out.back() != '\n') out += '\n';
        out += "# command-line overrides\n";
        for (const auto& o : overrides_) out += o + '\n';
    }
    return out;
}

}  // namespace hmflow
