#include "gridwatch/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace gridwatch {

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << body;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

ConfusionCounts confusion(const GridVector& ground, const GridVector& model_out) {
    if (!(ground.spec() == model_out.spec()))
        throw ShapeError("confusion: ground and model grids have different specs");
    ConfusionCounts c;
    for (std::size_t i = 0; i < ground.size(); ++i) {
        const bool g = ground.bit(i) != 0;
        const bool m = model_out.bit(i) != 0;
        if (g && m)
            ++c.tp;
        else if (!g && !m)
            ++c.tn;
        else if (!g && m)
            ++c.fp;
        else
            ++c.fn;
    }
    return c;
}

double f1_score(double precision, double recall) {
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

MetricRow metrics(const ConfusionCounts& counts, std::string model_name) {
    MetricRow row;
    row.model_name = std::move(model_name);
    const double tp = static_cast<double>(counts.tp);
    if (counts.tp + counts.fp == 0)
        row.degenerate = true;
    else
        row.precision = tp / static_cast<double>(counts.tp + counts.fp);
    if (counts.tp + counts.fn == 0)
        row.degenerate = true;
    else
        row.recall = tp / static_cast<double>(counts.tp + counts.fn);
    if (row.precision + row.recall == 0.0)
        row.degenerate = true;
    else
        row.f1 = f1_score(row.precision, row.recall);
    return row;
}

GridVector source_grid_of(const std::pair<Sample, InjectionResult>& item) {
    GridVector source = item.second.grid;
    const GridSpec& spec = source.spec();
    for (const GridCell& cell : item.second.injected) source.set_bit(linear_index(cell, spec), 0);
    return source;
}

ScenarioEval evaluate_scenario(const Network& net,
                               const std::vector<std::pair<Sample, InjectionResult>>& test_set,
                               double threshold) {
    if (test_set.empty()) throw ArgumentError("evaluate_scenario: empty test set");
    const ModelConfig& cfg = net.config();

    ScenarioEval eval;
    double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
    bool macro_degenerate = false;
    for (const auto& item : test_set) {
        const Sample& sample = item.first;
        const GridVector ground = source_grid_of(item);
        const std::vector<double> probs =
            reconstruct(net, sample.grid, cfg.use_gps ? &sample.gps : nullptr);
        const GridVector m = binarize(probs, threshold, sample.grid.spec());
        const ConfusionCounts counts = confusion(ground, m);
        eval.counts += counts;
        const MetricRow per_sample = metrics(counts);
        macro_p += per_sample.precision;
        macro_r += per_sample.recall;
        macro_f1 += per_sample.f1;
        macro_degenerate = macro_degenerate || per_sample.degenerate;
    }
    eval.micro = metrics(eval.counts);
    const double n = static_cast<double>(test_set.size());
    eval.macro.precision = macro_p / n;
    eval.macro.recall = macro_r / n;
    eval.macro.f1 = macro_f1 / n;
    eval.macro.degenerate = macro_degenerate;
    return eval;
}

DetectionAccuracy detection_accuracy(const std::vector<AnomalyReport>& reports,
                                     const std::vector<InjectionResult>& injections) {
    if (reports.size() != injections.size())
        throw ArgumentError("detection_accuracy: " + std::to_string(reports.size()) +
                            " reports vs " + std::to_string(injections.size()) + " injections");
    if (reports.empty()) throw ArgumentError("detection_accuracy: empty input");

    std::size_t exact = 0, lenient = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const std::vector<GridCell>& flagged = reports[i].anomalous_cells;
        const std::vector<GridCell>& injected = injections[i].injected;
        // both are sorted by linear index
        if (flagged == injected) ++exact;
        const bool covered = std::includes(
            flagged.begin(), flagged.end(), injected.begin(), injected.end(),
            [&](const GridCell& a, const GridCell& b) {
                return linear_index(a, reports[i].input.spec()) <
                       linear_index(b, reports[i].input.spec());
            });
        if (covered) ++lenient;
    }
    DetectionAccuracy acc;
    acc.exact = static_cast<double>(exact) / static_cast<double>(reports.size());
    acc.lenient = static_cast<double>(lenient) / static_cast<double>(reports.size());
    return acc;
}

void emit_tables(const std::map<int, std::vector<MetricRow>>& scenario_rows,
                 const std::map<std::string, std::map<int, DetectionAccuracy>>& accuracy,
                 const std::vector<std::string>& model_order, const std::filesystem::path& dir) {
    if (scenario_rows.empty()) throw ArgumentError("emit_tables: no scenario rows");
    std::filesystem::create_directories(dir);

    for (const auto& [scenario, rows] : scenario_rows) {
        std::string csv = "model,precision,recall,f1\n";
        std::string md = "| Model | Precision | Recall | F1-score |\n|---|---|---|---|\n";
        for (const MetricRow& row : rows) {
            csv += row.model_name + ',' + fixed4(row.precision) + ',' + fixed4(row.recall) + ',' +
                   fixed4(row.f1) + '\n';
            md += "| " + row.model_name + " | " + fixed4(row.precision) + " | " +
                  fixed4(row.recall) + " | " + fixed4(row.f1) + " |\n";
        }
        const std::string base = "scenario_" + std::to_string(scenario);
        write_text(dir / (base + ".csv"), csv);
        write_text(dir / (base + ".md"), md);
    }

    if (accuracy.empty()) return;
    std::vector<int> scenario_ids;
    for (const auto& [scenario, rows] : scenario_rows) scenario_ids.push_back(scenario);

    for (const bool lenient : {false, true}) {
        std::string csv = "model";
        std::string md = "| Model |";
        for (int s : scenario_ids) {
            csv += ",scenario_" + std::to_string(s);
            md += " Scenario " + std::to_string(s) + " |";
        }
        csv += '\n';
        md += "\n|---|";
        for (std::size_t i = 0; i < scenario_ids.size(); ++i) md += "---|";
        md += '\n';
        for (const std::string& model : model_order) {
            const auto it = accuracy.find(model);
            if (it == accuracy.end()) continue;
            csv += model;
            md += "| " + model + " |";
            for (int s : scenario_ids) {
                const auto sit = it->second.find(s);
                const double v = sit == it->second.end()
                                     ? 0.0
                                     : (lenient ? sit->second.lenient : sit->second.exact);
                csv += ',' + fixed4(v);
                md += ' ' + fixed4(v) + " |";
            }
            csv += '\n';
            md += '\n';
        }
        const std::string base = lenient ? "accuracy_lenient" : "accuracy";
        write_text(dir / (base + ".csv"), csv);
        write_text(dir / (base + ".md"), md);
    }
}

}  // namespace gridwatch
