#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <vector>

#include "gridwatch/detect.hpp"
#include "gridwatch/rng.hpp"

using namespace gridwatch;

namespace {

GridSpec spec_228() {
    GridSpec spec;
    spec.rows = 2;
    spec.cols = 2;
    return spec;
}

ModelConfig config_for(const GridSpec& spec, bool gps = false, bool copy_crop = false) {
    ModelConfig c;
    c.grid_len = spec.cell_count();
    c.use_gps = gps;
    c.use_copy_crop = copy_crop;
    c.hidden_sizes = {8};
    c.latent_dim = 2;
    return c;
}

std::size_t tensor_index(const Network& net, const std::string& name) {
    const auto& ts = net.tensors();
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (ts[i].name == name) return i;
    REQUIRE(false);
    return 0;
}

// Zeros net whose output bias pins each cell to the target bit.
Network oracle_net(const GridSpec& spec, const GridVector& target) {
    Network net = Network::zeros(config_for(spec));
    const std::size_t bi = tensor_index(net, "out.b");
    double* bias = net.tensor_data(bi);
    for (std::size_t i = 0; i < target.size(); ++i) bias[i] = target.bit(i) ? 12.0 : -12.0;
    return net;
}

// Copy-crop net that reproduces its input verbatim after binarization.
Network copy_net(const GridSpec& spec) {
    Network net = Network::zeros(config_for(spec, false, true));
    const std::size_t wi = tensor_index(net, "out.W");
    const TensorSpec& w = net.tensors()[wi];
    const std::size_t skip_start = w.cols - spec.cell_count();
    double* data = net.tensor_data(wi);
    for (std::size_t i = 0; i < spec.cell_count(); ++i)
        data[i * w.cols + skip_start + i] = 24.0;
    double* bias = net.tensor_data(tensor_index(net, "out.b"));
    for (std::size_t i = 0; i < spec.cell_count(); ++i) bias[i] = -12.0;
    return net;
}

GridVector random_grid(const GridSpec& spec, Rng& rng) {
    GridVector g(spec);
    for (std::size_t i = 0; i < g.size(); ++i) g.set_bit(i, rng() & 1);
    return g;
}

}  // namespace

TEST_SUITE("detect") {

TEST_CASE("binarize applies a strict threshold") {
    const GridSpec spec = spec_228();
    std::vector<double> probs(spec.cell_count(), 0.5);
    const GridVector all_half = binarize(probs, 0.5, spec);
    CHECK(popcount(all_half) == 0);  // 0.5 > 0.5 is false

    probs[0] = 0.2;
    probs[1] = 0.9;
    const GridVector mixed = binarize(probs, 0.5, spec);
    CHECK(mixed.bit(0) == 0);
    CHECK(mixed.bit(1) == 1);
}

TEST_CASE("binarize is monotone in the threshold") {
    const GridSpec spec = spec_228();
    Rng rng(5);
    std::vector<double> probs(spec.cell_count());
    for (double& p : probs) p = unit_double(rng);
    for (double lo = 0.1; lo < 0.85; lo += 0.1) {
        const GridVector a = binarize(probs, lo, spec);
        const GridVector b = binarize(probs, lo + 0.1, spec);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(b.bit(i) <= a.bit(i));  // raising threshold never sets new bits
    }
}

TEST_CASE("binarize validates its inputs") {
    const GridSpec spec = spec_228();
    const std::vector<double> probs(spec.cell_count(), 0.5);
    CHECK_THROWS_AS(binarize(probs, 0.0, spec), ConfigError);
    CHECK_THROWS_AS(binarize(probs, 1.0, spec), ConfigError);
    CHECK_THROWS_AS(binarize(std::vector<double>(3, 0.5), 0.5, spec), ShapeError);
}

TEST_CASE("reconstruct on the zero net is all 0.5") {
    const GridSpec spec = spec_228();
    const Network net = Network::zeros(config_for(spec));
    Rng rng(6);
    const std::vector<double> y = reconstruct(net, random_grid(spec, rng), nullptr);
    for (double v : y) CHECK(v == 0.5);
}

TEST_CASE("all-zero input never produces anomalies") {
    const GridSpec spec = spec_228();
    const Network net = Network::zeros(config_for(spec));
    Sample s;
    s.grid = GridVector(spec);
    const AnomalyReport report = detect(net, s, 0.5);
    CHECK(report.anomalous_cells.empty());
    CHECK_FALSE(report.scene_anomalous);
}

TEST_CASE("oracle net flags exactly the injected cell") {
    const GridSpec spec = spec_228();
    GridVector consistent(spec);
    consistent.set_bit(linear_index({0, 1, ObjectCategory::car}, spec), 1);
    const Network net = oracle_net(spec, consistent);

    const GridCell injected{1, 1, ObjectCategory::person};
    Sample s;
    s.grid = set_cell(consistent, injected);
    const AnomalyReport report = detect(net, s, 0.5);
    REQUIRE(report.anomalous_cells.size() == 1);
    CHECK(report.anomalous_cells[0] == injected);
    CHECK(report.scene_anomalous);
}

TEST_CASE("cells absent from the input are never flagged") {
    const GridSpec spec = spec_228();
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const GridVector target = random_grid(spec, rng);
        const Network net = oracle_net(spec, target);
        Sample s;
        s.grid = random_grid(spec, rng);
        const AnomalyReport report = detect(net, s, 0.5);
        for (const GridCell& cell : report.anomalous_cells)
            CHECK(s.grid.bit(linear_index(cell, spec)) == 1);
        // flags re-derivable from the stored grids
        std::vector<GridCell> rederived;
        for (std::size_t i = 0; i < s.grid.size(); ++i)
            if (s.grid.bit(i) == 1 && report.m_grid.bit(i) == 0)
                rederived.push_back(cell_at(i, spec));
        CHECK(rederived == report.anomalous_cells);
        CHECK(report.scene_anomalous == !report.anomalous_cells.empty());
    }
}

TEST_CASE("near-zero threshold turns every cell on and flags nothing") {
    const GridSpec spec = spec_228();
    const Network net = Network::zeros(config_for(spec));  // outputs 0.5 > 0.01 everywhere
    Sample s;
    Rng rng(8);
    s.grid = random_grid(spec, rng);
    const AnomalyReport report = detect(net, s, 0.01);
    CHECK(popcount(report.m_grid) == spec.cell_count());
    CHECK(report.anomalous_cells.empty());
}

TEST_CASE("copy net reproduces its input verbatim") {
    const GridSpec spec = spec_228();
    const Network net = copy_net(spec);
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        Sample s;
        s.grid = random_grid(spec, rng);
        const AnomalyReport report = detect(net, s, 0.5);
        CHECK(report.m_grid == s.grid);
        CHECK(report.anomalous_cells.empty());
    }
}

TEST_CASE("report JSON round-trips") {
    const GridSpec spec = spec_228();
    GridVector target(spec);
    target.set_bit(5, 1);
    const Network net = oracle_net(spec, target);
    Sample s;
    Rng rng(10);
    s.grid = random_grid(spec, rng);
    const AnomalyReport report = detect(net, s, 0.4);

    const auto path = std::filesystem::temp_directory_path() / "gw_report_test.json";
    write_report(report, path);
    const AnomalyReport back = read_report(path);
    CHECK(back.input == report.input);
    CHECK(back.m_grid == report.m_grid);
    CHECK(back.reconstruction == report.reconstruction);
    CHECK(back.anomalous_cells == report.anomalous_cells);
    CHECK(back.scene_anomalous == report.scene_anomalous);
    CHECK(back.threshold == report.threshold);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
