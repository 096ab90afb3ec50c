#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridwatch/grid.hpp"
#include "gridwatch/ingest.hpp"

namespace gridwatch {

/// One declarative experiment file (key = value lines, # comments) driving
/// the whole reproduce pipeline. Relative paths resolve against the config
/// file's directory. All seeds are explicit; there are no wall-clock
/// defaults anywhere.
struct RunConfig {
    std::filesystem::path annotations;
    std::filesystem::path flight_log;
    std::filesystem::path rules;

    std::size_t grid_rows = 8;
    std::size_t grid_cols = 8;
    std::size_t frame_width = 1920;
    std::size_t frame_height = 1080;

    SplitRatios ratios;
    std::int64_t gap_ms = 500;
    std::uint64_t seed = 42;

    std::vector<std::string> models = {"uav-adnet", "uav-adnet-wo-gps", "cvae", "vae"};
    std::vector<std::size_t> hidden = {256, 128};
    std::size_t latent = 32;
    double kl_weight = 1e-3;

    std::size_t epochs = 200;
    std::size_t batch = 32;
    double lr = 1e-3;
    std::size_t patience = 10;

    double threshold = 0.5;
    std::vector<int> scenarios = {1, 2, 3};
    std::size_t per_source = 1;
    std::size_t inject_count = 1;
    std::size_t synth_sources = 0;  // cap on test sources used for injection; 0 = all

    GridSpec grid_spec() const;
    void validate() const;        // value ranges; throws ConfigError
    void validate_paths() const;  // referenced files exist; throws ConfigError
    std::string to_text() const;  // effective config, parseable by parse_run_config
};

RunConfig parse_run_config(const std::filesystem::path& path);

/// Applies one "key=value" override (same keys as the file).
void apply_override(RunConfig& config, const std::string& assignment,
                    const std::filesystem::path& base_dir);

}  // namespace gridwatch
