#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridwatch/grid.hpp"
#include "gridwatch/ingest.hpp"

namespace gridwatch {

enum class RuleKind {
    private_forbidden,  // scenario 1: breaks a site-private rule
    public_forbidden,   // scenario 2: breaks a public rule
    rare,               // scenario 3: legal but rare configuration
};

std::string_view rule_kind_name(RuleKind kind);
std::optional<RuleKind> rule_kind_from_name(std::string_view name);

/// Maps scenario id 1/2/3 onto the rule kind it draws injections from.
RuleKind kind_for_scenario(int scenario);

/// A zone rule: the spatial cells (row-major rows x cols mask) where placing
/// an object of `category` is of kind `kind`.
struct ZoneRule {
    ObjectCategory category = ObjectCategory::person;
    RuleKind kind = RuleKind::private_forbidden;
    std::vector<std::uint8_t> mask;  // rows*cols entries, 0/1
};

struct LoadedRules {
    std::vector<ZoneRule> rules;
    std::vector<std::string> warnings;
};

/// JSON array of {"category": str, "kind": str, "mask": [[0/1,...],...]}.
/// Rules sharing (category, kind) are merged by mask union. Mask shape must
/// match the grid's spatial dims.
LoadedRules load_rules(const std::filesystem::path& path, const GridSpec& spec);

struct InjectionResult {
    GridVector grid;
    std::vector<GridCell> injected;  // sorted by linear index
    int scenario = 0;
    std::size_t source_sample = 0;
};

/// Sets `count` distinct cells chosen uniformly (seeded) among cells that a
/// rule of the scenario's kind allows and that are 0 in the source grid.
InjectionResult inject(const GridVector& source, int scenario,
                       const std::vector<ZoneRule>& rules, std::size_t count,
                       std::uint64_t rng_seed);

/// One injected sample per (source, repeat) pair; the per-injection seed is
/// derived from seed ^ source_index (further mixed per repeat). GPS features
/// are copied from the source unchanged.
std::vector<std::pair<Sample, InjectionResult>> generate_test_set(
    const std::vector<Sample>& sources, int scenario, std::size_t per_source,
    const std::vector<ZoneRule>& rules, std::uint64_t seed, std::size_t count_per_injection = 1);

/// One manifest line: which cell was injected into which output sample.
struct ManifestRow {
    std::size_t sample_index = 0;
    std::size_t source_index = 0;
    GridCell cell;
};

/// Manifest CSV of injected cells: sample_index,source_index,row,col,category.
void write_manifest(const std::vector<InjectionResult>& injections,
                    const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path, const GridSpec& spec);

/// Synthetic dataset directory: the plain dataset layout (grids.bin +
/// samples.csv) plus manifest.csv and a synth.json provenance note.
void save_synth_dataset(const std::vector<std::pair<Sample, InjectionResult>>& items,
                        const GridSpec& spec, int scenario, std::uint64_t seed,
                        const std::filesystem::path& dir);

struct SynthDataset {
    GridSpec spec;
    int scenario = 0;
    std::vector<std::pair<Sample, InjectionResult>> items;
};

SynthDataset load_synth_dataset(const std::filesystem::path& dir);

}  // namespace gridwatch
