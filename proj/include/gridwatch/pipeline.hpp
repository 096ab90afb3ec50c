#pragma once

#include <cstddef>
#include <filesystem>

#include "gridwatch/runconfig.hpp"

namespace gridwatch {

/// Runs the full experiment described by config into out_dir:
///   ingest/   train/val/test dataset splits
///   synth/    one injected test set per scenario
///   train/    one checkpoint + loss curve per model
///   eval/     tables/ plus metrics.json
/// Each stage leaves a .done marker and is skipped when already complete, so
/// interrupted runs resume from the last finished stage. jobs > 1 spreads
/// independent per-model / per-scenario work over that many threads; results
/// are bit-identical to jobs == 1.
void run_experiment(const RunConfig& config, const std::filesystem::path& out_dir,
                    std::size_t jobs = 1);

}  // namespace gridwatch
