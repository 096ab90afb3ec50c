#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridwatch/ingest.hpp"

namespace gridwatch {

/// Options for the bundled demo world: an 8x8 site seen from above, with a
/// walkway, a bike path, a two-lane road, a plaza, a car park, and the empty
/// back side of a building. Scene statistics follow fixed zone rules so the
/// three anomaly scenarios (person behind the building, bike on the road,
/// truck or bike in the car park) never occur in generated data.
struct WorldOptions {
    std::size_t scenes = 150;
    std::uint64_t seed = 7;
    GridSpec spec;  // must be 8x8 spatially
};

struct World {
    std::vector<FrameAnnotation> annotations;
    std::vector<FlightRecord> flight;
};

World generate_world(const WorldOptions& options);

/// The zone rule set matching generate_world's layout, as rule-file JSON.
std::string default_rules_json();

/// Writes annotations.jsonl, flight.csv and rules.json into dir.
void write_world(const World& world, const std::filesystem::path& dir);

}  // namespace gridwatch
