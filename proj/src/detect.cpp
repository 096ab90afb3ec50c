#include "gridwatch/detect.hpp"

#include <fstream>

#include <json.hpp>

#include "textio.hpp"

namespace gridwatch {

std::vector<double> reconstruct(const Network& net, const GridVector& grid,
                                const GpsFeature* gps) {
    return forward_deterministic(net, grid, gps);
}

GridVector binarize(const std::vector<double>& probs, double threshold, const GridSpec& spec) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("binarize threshold must lie in (0, 1), got " +
                          textio::format_double(threshold));
    if (probs.size() != spec.cell_count())
        throw ShapeError("binarize: " + std::to_string(probs.size()) + " probabilities for a " +
                         "grid of " + std::to_string(spec.cell_count()) + " cells");
    GridVector out(spec);
    for (std::size_t i = 0; i < probs.size(); ++i)
        out.set_bit(i, probs[i] > threshold ? 1 : 0);
    return out;
}

AnomalyReport detect(const Network& net, const Sample& sample, double threshold) {
    AnomalyReport report;
    report.threshold = threshold;
    report.input = sample.grid;
    report.reconstruction =
        reconstruct(net, sample.grid, net.config().use_gps ? &sample.gps : nullptr);
    report.m_grid = binarize(report.reconstruction, threshold, sample.grid.spec());
    for (std::size_t i = 0; i < report.input.size(); ++i) {
        if (report.input.bit(i) == 1 && report.m_grid.bit(i) == 0)
            report.anomalous_cells.push_back(cell_at(i, report.input.spec()));
    }
    report.scene_anomalous = !report.anomalous_cells.empty();
    return report;
}

void write_report(const AnomalyReport& report, const std::filesystem::path& path) {
    const GridSpec& spec = report.input.spec();
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const GridCell& cell : report.anomalous_cells) {
        cells.push_back({{"row", cell.row},
                         {"col", cell.col},
                         {"category", std::string(category_name(cell.category))}});
    }
    nlohmann::ordered_json j = {
        {"grid", {{"rows", spec.rows}, {"cols", spec.cols}, {"categories", spec.categories}}},
        {"threshold", report.threshold},
        {"input", to_bit_string(report.input)},
        {"reconstruction", report.reconstruction},
        {"m_grid", to_bit_string(report.m_grid)},
        {"anomalous_cells", std::move(cells)},
        {"scene_anomalous", report.scene_anomalous},
    };
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

AnomalyReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        GridSpec spec;
        spec.rows = j.at("grid").at("rows").get<std::size_t>();
        spec.cols = j.at("grid").at("cols").get<std::size_t>();
        spec.categories = j.at("grid").at("categories").get<std::size_t>();
        AnomalyReport report;
        report.threshold = j.at("threshold").get<double>();
        report.input = from_bit_string(spec, j.at("input").get<std::string>());
        report.reconstruction = j.at("reconstruction").get<std::vector<double>>();
        report.m_grid = from_bit_string(spec, j.at("m_grid").get<std::string>());
        for (const nlohmann::json& c : j.at("anomalous_cells")) {
            GridCell cell;
            cell.row = c.at("row").get<std::size_t>();
            cell.col = c.at("col").get<std::size_t>();
            const auto category = category_from_name(c.at("category").get<std::string>());
            if (!category) throw ParseError("unknown category in report");
            cell.category = *category;
            report.anomalous_cells.push_back(cell);
        }
        report.scene_anomalous = j.at("scene_anomalous").get<bool>();
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace gridwatch
