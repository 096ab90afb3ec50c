#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gridwatch/detect.hpp"
#include "gridwatch/synth.hpp"

namespace gridwatch {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

/// tp = |G1 ∩ M1|, tn = |G0 ∩ M0|, fp = |G0 ∩ M1|, fn = |G1 ∩ M0| where G is
/// the ground-truth grid and M the binarized model output.
ConfusionCounts confusion(const GridVector& ground, const GridVector& model_out);

struct MetricRow {
    std::string model_name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // some denominator was zero; affected values are 0
};

/// Harmonic mean 2pr/(p+r); 0 when p + r == 0.
double f1_score(double precision, double recall);

MetricRow metrics(const ConfusionCounts& counts, std::string model_name = "");

struct ScenarioEval {
    ConfusionCounts counts;  // summed over samples (micro-averaging)
    MetricRow micro;
    MetricRow macro;  // per-sample metrics averaged, for comparison
};

/// Ground truth per sample is the pre-injection source grid (the injected
/// grid with its injected cells cleared); M is the binarized reconstruction
/// of the injected grid.
ScenarioEval evaluate_scenario(const Network& net,
                               const std::vector<std::pair<Sample, InjectionResult>>& test_set,
                               double threshold);

/// Reconstructs the rule-consistent source grid by clearing the injected
/// cells.
GridVector source_grid_of(const std::pair<Sample, InjectionResult>& item);

struct DetectionAccuracy {
    double exact = 0.0;    // flagged set == injected set
    double lenient = 0.0;  // injected ⊆ flagged (extra flags allowed)
};

DetectionAccuracy detection_accuracy(const std::vector<AnomalyReport>& reports,
                                     const std::vector<InjectionResult>& injections);

/// Writes scenario_<id>.csv/.md plus accuracy.csv/.md (and the lenient
/// variant) into dir. Rows keep their given order; values to 4 decimals.
void emit_tables(const std::map<int, std::vector<MetricRow>>& scenario_rows,
                 const std::map<std::string, std::map<int, DetectionAccuracy>>& accuracy,
                 const std::vector<std::string>& model_order, const std::filesystem::path& dir);

}  // namespace gridwatch
