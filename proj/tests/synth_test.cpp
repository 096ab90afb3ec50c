#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gridwatch/synth.hpp"

using namespace gridwatch;

namespace {

GridSpec spec_228() {
    GridSpec spec;
    spec.rows = 2;
    spec.cols = 2;
    return spec;
}

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& name, const std::string& body)
        : path(std::filesystem::temp_directory_path() / name) {
        std::ofstream out(path, std::ios::trunc);
        out << body;
    }
    ~TempFile() { std::filesystem::remove(path); }
};

std::string rule_json(const std::string& category, const std::string& kind,
                      const std::string& mask) {
    return R"({"category":")" + category + R"(","kind":")" + kind + R"(","mask":)" + mask + "}";
}

std::vector<ZoneRule> person_rule_at_origin() {
    ZoneRule rule;
    rule.category = ObjectCategory::person;
    rule.kind = RuleKind::private_forbidden;
    rule.mask = {1, 0, 0, 0};
    return {rule};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return body;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("scenario ids map onto rule kinds") {
    CHECK(kind_for_scenario(1) == RuleKind::private_forbidden);
    CHECK(kind_for_scenario(2) == RuleKind::public_forbidden);
    CHECK(kind_for_scenario(3) == RuleKind::rare);
    CHECK_THROWS_AS(kind_for_scenario(0), ArgumentError);
    CHECK_THROWS_AS(kind_for_scenario(4), ArgumentError);
    CHECK(rule_kind_from_name("rare") == RuleKind::rare);
    CHECK_FALSE(rule_kind_from_name("bogus").has_value());
}

TEST_CASE("load_rules parses, warns, and merges") {
    SUBCASE("empty rule file gives no rules plus a warning") {
        TempFile f("gw_rules_empty.json", "[]");
        const LoadedRules r = load_rules(f.path, spec_228());
        CHECK(r.rules.empty());
        CHECK(r.warnings.size() == 1);
    }
    SUBCASE("duplicate (category, kind) pairs merge by mask union") {
        TempFile f("gw_rules_merge.json",
                   "[" + rule_json("person", "private_forbidden", "[[1,0],[0,0]]") + "," +
                       rule_json("person", "private_forbidden", "[[0,0],[0,1]]") + "]");
        const LoadedRules r = load_rules(f.path, spec_228());
        REQUIRE(r.rules.size() == 1);
        CHECK(r.rules[0].mask == std::vector<std::uint8_t>{1, 0, 0, 1});
        CHECK_FALSE(r.warnings.empty());
    }
    SUBCASE("unknown category is a parse error") {
        TempFile f("gw_rules_cat.json",
                   "[" + rule_json("plane", "rare", "[[1,0],[0,0]]") + "]");
        CHECK_THROWS_AS(load_rules(f.path, spec_228()), ParseError);
    }
    SUBCASE("unknown kind is a parse error") {
        TempFile f("gw_rules_kind.json",
                   "[" + rule_json("person", "sometimes", "[[1,0],[0,0]]") + "]");
        CHECK_THROWS_AS(load_rules(f.path, spec_228()), ParseError);
    }
    SUBCASE("mask shape must match the grid") {
        TempFile f("gw_rules_shape.json",
                   "[" + rule_json("person", "rare", "[[1,0,1],[0,0,0]]") + "]");
        CHECK_THROWS_AS(load_rules(f.path, spec_228()), ConfigError);
    }
    SUBCASE("mask entries must be 0 or 1") {
        TempFile f("gw_rules_entries.json",
                   "[" + rule_json("person", "rare", "[[1,2],[0,0]]") + "]");
        CHECK_THROWS_AS(load_rules(f.path, spec_228()), ParseError);
    }
    SUBCASE("all-zero mask is rejected") {
        TempFile f("gw_rules_zero.json",
                   "[" + rule_json("person", "rare", "[[0,0],[0,0]]") + "]");
        CHECK_THROWS_AS(load_rules(f.path, spec_228()), ConfigError);
    }
}

TEST_CASE("inject with a single eligible cell picks exactly that cell") {
    const GridSpec spec = spec_228();
    const GridVector source(spec);
    const InjectionResult r = inject(source, 1, person_rule_at_origin(), 1, 99);
    REQUIRE(r.injected.size() == 1);
    CHECK(r.injected[0] == GridCell{0, 0, ObjectCategory::person});
    CHECK(r.grid.bit(linear_index(r.injected[0], spec)) == 1);
    CHECK(r.scenario == 1);
    CHECK(diff_cells(source, r.grid) == r.injected);
}

TEST_CASE("inject is deterministic and honors the seed") {
    const GridSpec spec = spec_228();
    const GridVector source(spec);
    ZoneRule rule;
    rule.category = ObjectCategory::bike;
    rule.kind = RuleKind::rare;
    rule.mask = {1, 1, 1, 1};
    const std::vector<ZoneRule> rules = {rule};

    const InjectionResult a = inject(source, 3, rules, 2, 5);
    const InjectionResult b = inject(source, 3, rules, 2, 5);
    CHECK(a.grid == b.grid);
    CHECK(a.injected == b.injected);

    bool seed_changes_something = false;
    for (std::uint64_t s = 6; s < 16; ++s)
        if (inject(source, 3, rules, 2, s).grid != a.grid) seed_changes_something = true;
    CHECK(seed_changes_something);
}

TEST_CASE("inject only fills cells that are empty, in-mask, in-channel") {
    const GridSpec spec = spec_228();
    ZoneRule rule;
    rule.category = ObjectCategory::truck;
    rule.kind = RuleKind::public_forbidden;
    rule.mask = {1, 1, 0, 0};
    GridVector source(spec);
    source.set_bit(linear_index({0, 0, ObjectCategory::truck}, spec), 1);  // occupies one option

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const InjectionResult r = inject(source, 2, {rule}, 1, seed);
        REQUIRE(r.injected.size() == 1);
        CHECK(r.injected[0] == GridCell{0, 1, ObjectCategory::truck});  // only empty option
    }
}

TEST_CASE("inject saturates when count exceeds the eligible cells") {
    const GridVector source(spec_228());
    CHECK_THROWS_AS(inject(source, 1, person_rule_at_origin(), 2, 1), SaturationError);
    ZoneRule rule = person_rule_at_origin()[0];
    GridVector occupied = set_cell(source, {0, 0, ObjectCategory::person});
    CHECK_THROWS_AS(inject(occupied, 1, {rule}, 1, 1), SaturationError);
    // a rule list with no rule of the scenario's kind is a config problem, not saturation
    CHECK_THROWS_AS(inject(source, 2, person_rule_at_origin(), 1, 1), ConfigError);
}

TEST_CASE("generate_test_set cardinality and per-sample diffs") {
    const GridSpec spec = spec_228();
    ZoneRule rule;
    rule.category = ObjectCategory::van;
    rule.kind = RuleKind::rare;
    rule.mask = {1, 1, 1, 1};

    std::vector<Sample> sources(2);
    for (std::size_t i = 0; i < sources.size(); ++i) {
        sources[i].grid = GridVector(spec);
        sources[i].gps.values = {0.1 * static_cast<double>(i), 0.5, 0.9};
        sources[i].source_frame = "src" + std::to_string(i);
    }

    const auto items = generate_test_set(sources, 3, 3, {rule}, 42, 2);
    CHECK(items.size() == 6);
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& [sample, injection] = items[i];
        CHECK(injection.source_sample == i / 3);
        CHECK(sample.gps.values == sources[i / 3].gps.values);
        CHECK(diff_cells(sources[i / 3].grid, sample.grid).size() == 2);
        CHECK(diff_cells(sources[i / 3].grid, sample.grid) == injection.injected);
    }
}

TEST_CASE("regenerated synthetic datasets are byte-identical") {
    const GridSpec spec = spec_228();
    ZoneRule rule;
    rule.category = ObjectCategory::motorbike;
    rule.kind = RuleKind::private_forbidden;
    rule.mask = {0, 1, 1, 1};
    std::vector<Sample> sources(3);
    for (auto& s : sources) s.grid = GridVector(spec);

    const auto dir_a = std::filesystem::temp_directory_path() / "gw_synth_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "gw_synth_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);

    save_synth_dataset(generate_test_set(sources, 1, 2, {rule}, 7), spec, 1, 7, dir_a);
    save_synth_dataset(generate_test_set(sources, 1, 2, {rule}, 7), spec, 1, 7, dir_b);
    for (const char* name : {"grids.bin", "samples.csv", "manifest.csv", "synth.json"})
        CHECK(read_file(dir_a / name) == read_file(dir_b / name));

    const SynthDataset back = load_synth_dataset(dir_a);
    CHECK(back.scenario == 1);
    CHECK(back.spec == spec);
    REQUIRE(back.items.size() == 6);
    for (const auto& [sample, injection] : back.items) {
        CHECK(injection.injected.size() == 1);
        CHECK(sample.grid.bit(linear_index(injection.injected[0], spec)) == 1);
    }

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("saturation during generation names the source") {
    std::vector<Sample> sources(1);
    sources[0].grid = GridVector(spec_228());
    try {
        generate_test_set(sources, 1, 1, person_rule_at_origin(), 3, 2);
        FAIL_CHECK("expected saturation error");
    } catch (const SaturationError& e) {
        CHECK(std::string(e.what()).find("source 0") != std::string::npos);
    }
}

}  // TEST_SUITE
