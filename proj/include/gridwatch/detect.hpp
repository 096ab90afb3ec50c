#pragma once

#include <filesystem>
#include <vector>

#include "gridwatch/ingest.hpp"
#include "gridwatch/nn.hpp"

namespace gridwatch {

/// Per-scene detection outcome. anomalous_cells are exactly the cells that
/// are 1 in the input but 0 in the binarized reconstruction — objects the
/// model refuses to reproduce.
struct AnomalyReport {
    GridVector input;
    std::vector<double> reconstruction;
    GridVector m_grid;
    std::vector<GridCell> anomalous_cells;  // sorted by linear index
    bool scene_anomalous = false;
    double threshold = 0.5;
};

/// Deterministic inference (z = mu; copy-crop input supplied when the model
/// uses it). Output in (0,1)^grid_len.
std::vector<double> reconstruct(const Network& net, const GridVector& grid,
                                const GpsFeature* gps);

/// bit = 1 iff prob > threshold (strict). Threshold must lie in (0,1).
GridVector binarize(const std::vector<double>& probs, double threshold, const GridSpec& spec);

AnomalyReport detect(const Network& net, const Sample& sample, double threshold);

void write_report(const AnomalyReport& report, const std::filesystem::path& path);
AnomalyReport read_report(const std::filesystem::path& path);

}  // namespace gridwatch
