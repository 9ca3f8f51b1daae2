// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "core/config.hpp"
#include "core/error.hpp"

using namespace hmflow;

TEST_CASE("scalar parsing with comments and whitespace") {
    auto cfg = RunConfig::parse_text(
        "# a comment\n"
        "seed = 42\n"
        "train.lr = 2e-4   # trailing comment\n"
        "name = \"quoted value\"\n"
        "flag = true\n"
        "\n");
    CHECK(cfg.get_int("seed") == 42);
    CHECK(cfg.get_double("train.lr") == doctest::Approx(2e-4));
    CHECK(cfg.get_string("name") == "quoted value");
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK_THROWS_AS((void)cfg.get_int("missing"), Error);
    CHECK_THROWS_AS((void)cfg.get_int("name"), Error);
}

TEST_CASE("lists") {
    auto cfg = RunConfig::parse_text(
        "schedule.scales = [0.5, 1.0]\n"
        "steps_per_stage = [8, 8]\n"
        "data.programs = [walk_forward, jump]\n");
    auto scales = cfg.get_doubles("schedule.scales");
    REQUIRE(scales.size() == 2);
    CHECK(scales[0] == 0.5);
    auto steps = cfg.get_ints("steps_per_stage");
    CHECK(steps == std::vector<int>{8, 8});
    auto programs = cfg.get_strings("data.programs");
    CHECK(programs == std::vector<std::string>{"walk_forward", "jump"});
    CHECK_THROWS_AS((void)cfg.get_doubles("data.programs"), Error);
}

TEST_CASE("overrides land on top and appear in the verbatim copy") {
    auto cfg = RunConfig::parse_text("seed = 1\ntrain.steps = 100\n");
    cfg.apply_override("train.steps=500");
    cfg.apply_override("extra.key=[1, 2]");
    CHECK(cfg.get_int("train.steps") == 500);
    CHECK(cfg.get_doubles("extra.key").size() == 2);
    std::string copy = cfg.verbatim();
    CHECK(copy.find("seed = 1") != std::string::npos);
    CHECK(copy.find("train.steps = 500") != std::string::npos);
    CHECK(copy.find("# command-line overrides") != std::string::npos);
}

TEST_CASE("malformed input") {
    CHECK_THROWS_AS((void)RunConfig::parse_text("just words\n"), Error);
    CHECK_THROWS_AS((void)RunConfig::parse_text("key =\n"), Error);
    RunConfig cfg = RunConfig::parse_text("");
    CHECK_THROWS_AS(cfg.apply_override("no-equals-sign"), Error);
}
