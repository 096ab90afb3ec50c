#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gridwatch/nn.hpp"
#include "gridwatch/rng.hpp"

using namespace gridwatch;

namespace {

GridSpec tiny_spec() {
    GridSpec spec;
    spec.rows = 1;
    spec.cols = 2;  // 1*2*8 = 16 cells
    return spec;
}

ModelConfig tiny_config(bool gps, bool copy_crop) {
    ModelConfig c;
    c.grid_len = 16;
    c.use_gps = gps;
    c.use_copy_crop = copy_crop;
    c.hidden_sizes = {8};
    c.latent_dim = 2;
    return c;
}

GridVector random_grid(const GridSpec& spec, Rng& rng) {
    GridVector g(spec);
    for (std::size_t i = 0; i < g.size(); ++i) g.set_bit(i, rng() & 1);
    return g;
}

// Central finite difference of the total loss w.r.t. one parameter.
double numeric_grad(Network& net, std::size_t p, const GridVector& x, const GpsFeature* gps,
                    std::uint64_t seed, double h) {
    const double saved = net.params()[p];
    net.params()[p] = saved + h;
    const double up = sample_loss(net, x, gps, seed).total;
    net.params()[p] = saved - h;
    const double down = sample_loss(net, x, gps, seed).total;
    net.params()[p] = saved;
    return (up - down) / (2.0 * h);
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("variant slugs map onto the four flag combinations") {
    const struct {
        const char* slug;
        bool gps, copy_crop;
        const char* display;
    } expect[] = {
        {"uav-adnet", true, true, "UAV-AdNet"},
        {"uav-adnet-wo-gps", false, true, "UAV-AdNet-wo-gps"},
        {"cvae", true, false, "CVAE"},
        {"vae", false, false, "VAE"},
    };
    for (const auto& e : expect) {
        const ModelConfig c = config_for_variant(e.slug, 16);
        CHECK(c.use_gps == e.gps);
        CHECK(c.use_copy_crop == e.copy_crop);
        CHECK(c.grid_len == 16);
        CHECK(variant_display_name(c) == e.display);
        CHECK(variant_slug(c) == e.slug);
    }
    const auto slugs = all_variant_slugs();
    REQUIRE(slugs.size() == 4);
    CHECK(slugs[0] == "uav-adnet");
    CHECK(slugs[3] == "vae");
    CHECK_THROWS_AS(config_for_variant("resnet", 16), UsageError);
}

TEST_CASE("config validation") {
    ModelConfig c = tiny_config(false, false);
    CHECK_NOTHROW(c.validate());
    c.grid_len = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config(false, false);
    c.hidden_sizes = {8, 0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config(false, false);
    c.latent_dim = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config(false, false);
    c.kl_weight = -0.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("zero network encodes to the standard normal posterior") {
    const Network net = Network::zeros(tiny_config(false, false));
    Rng rng(1);
    const LatentStats stats = encode(net, random_grid(tiny_spec(), rng), nullptr);
    REQUIRE(stats.mu.size() == 2);
    for (double m : stats.mu) CHECK(m == 0.0);
    for (double lv : stats.log_var) CHECK(lv == 0.0);
}

TEST_CASE("zero network decodes to all 0.5") {
    const Network net = Network::zeros(tiny_config(false, false));
    const std::vector<double> z(2, 0.7);
    const std::vector<double> y = decode(net, z, nullptr, nullptr);
    REQUIRE(y.size() == 16);
    for (double v : y) CHECK(v == 0.5);
}

TEST_CASE("encode is deterministic and validates shapes") {
    const Network net = Network::glorot(tiny_config(true, false), 5);
    Rng rng(2);
    const GridVector g = random_grid(tiny_spec(), rng);
    const GpsFeature gps{{0.2, 0.4, 0.9}};
    const LatentStats a = encode(net, g, &gps);
    const LatentStats b = encode(net, g, &gps);
    CHECK(a.mu == b.mu);
    CHECK(a.log_var == b.log_var);

    GridSpec wrong;
    wrong.rows = 2;
    wrong.cols = 2;  // 32 cells, net wants 16
    CHECK_THROWS_AS(encode(net, GridVector(wrong), &gps), ShapeError);
    CHECK_THROWS_AS(encode(net, g, nullptr), ConfigError);  // gps required

    const Network no_gps = Network::glorot(tiny_config(false, false), 5);
    CHECK_THROWS_AS(encode(no_gps, g, &gps), ConfigError);  // gps must be absent
}

TEST_CASE("log_var respects the clamp") {
    // Force huge pre-activations through the log-var head bias.
    ModelConfig cfg = tiny_config(false, false);
    Network net = Network::zeros(cfg);
    for (auto& t : net.tensors())
        if (t.name == "logvar.b")
            for (std::size_t i = 0; i < t.size(); ++i)
                net.params()[t.offset + i] = 1e6;
    Rng rng(3);
    const LatentStats stats = encode(net, random_grid(tiny_spec(), rng), nullptr);
    for (double lv : stats.log_var) CHECK(lv == kLogVarClamp);
}

TEST_CASE("reparameterize draws are seed-reproducible") {
    LatentStats stats;
    stats.mu = {0.0, 0.0};
    stats.log_var = {0.0, 0.0};
    Rng a(77), b(77);
    CHECK(reparameterize(stats, a) == reparameterize(stats, b));
}

TEST_CASE("reparameterize at the clamp floor collapses onto mu") {
    LatentStats stats;
    stats.mu = {1.5, -2.0};
    stats.log_var = {-kLogVarClamp, -kLogVarClamp};
    Rng rng(7);
    const std::vector<double> z = reparameterize(stats, rng);
    // noise scale e^{-5} ~ 6.7e-3; allow a few sigma
    CHECK(std::abs(z[0] - 1.5) < 0.05);
    CHECK(std::abs(z[1] + 2.0) < 0.05);
}

TEST_CASE("reparameterize variance over 1e5 draws is about 1") {
    LatentStats stats;
    stats.mu = {0.0};
    stats.log_var = {0.0};
    Rng rng(13);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = reparameterize(stats, rng)[0];
        sum += z;
        sum2 += z * z;
    }
    const double mean = sum / n;
    CHECK(sum2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("decode enforces the copy-crop and gps contracts") {
    Rng rng(4);
    const GridVector g = random_grid(tiny_spec(), rng);
    const std::vector<double> z(2, 0.1);
    const GpsFeature gps;

    const Network plain = Network::glorot(tiny_config(false, false), 6);
    CHECK_THROWS_AS(decode(plain, z, nullptr, &g), ConfigError);   // no copy-crop wanted
    CHECK_THROWS_AS(decode(plain, z, &gps, nullptr), ConfigError); // no gps wanted

    const Network skip = Network::glorot(tiny_config(false, true), 6);
    CHECK_THROWS_AS(decode(skip, z, nullptr, nullptr), ConfigError);  // grid input required
    const std::vector<double> y = decode(skip, z, nullptr, &g);
    for (double v : y) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("copy-crop output reacts to a flipped input bit") {
    const Network net = Network::glorot(tiny_config(false, true), 8);
    Rng rng(5);
    const GridVector g = random_grid(tiny_spec(), rng);
    GridVector flipped = g;
    flipped.set_bit(3, g.bit(3) ? 0 : 1);
    const std::vector<double> z(2, 0.0);
    const std::vector<double> y0 = decode(net, z, nullptr, &g);
    const std::vector<double> y1 = decode(net, z, nullptr, &flipped);
    CHECK(y0 != y1);
}

TEST_CASE("loss matches the closed forms") {
    GridSpec spec;
    spec.rows = 4;
    spec.cols = 4;  // 128 cells
    const GridVector zeros(spec);
    LatentStats stats;
    stats.mu = {0.0, 0.0};
    stats.log_var = {0.0, 0.0};

    SUBCASE("perfect reconstruction has zero recon") {
        Rng rng(6);
        GridVector x(spec);
        std::vector<double> x_hat(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x.set_bit(i, rng() & 1);
            x_hat[i] = x.bit(i);
        }
        const LossParts parts = loss(x, x_hat, stats, 1e-3);
        CHECK(parts.recon == 0.0);
        CHECK(parts.kl == 0.0);
        CHECK(parts.total == 0.0);
    }
    SUBCASE("all-0.5 output on the zero grid costs exactly 0.25") {
        const std::vector<double> x_hat(zeros.size(), 0.5);
        CHECK(loss(zeros, x_hat, stats, 1e-3).recon == 0.25);
    }
    SUBCASE("kl closed form and exact decomposition") {
        LatentStats s;
        s.mu = {1.0, -1.0};
        s.log_var = {0.5, -0.5};
        const std::vector<double> x_hat(zeros.size(), 0.3);
        const double beta = 0.37;
        const LossParts parts = loss(zeros, x_hat, s, beta);
        double kl = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            kl += -0.5 * (1.0 + s.log_var[i] - s.mu[i] * s.mu[i] - std::exp(s.log_var[i]));
        CHECK(parts.kl == doctest::Approx(kl).epsilon(1e-15));
        CHECK(parts.total == parts.recon + beta * parts.kl);
        CHECK(parts.kl > 0.0);
    }
    SUBCASE("length mismatch is a shape error") {
        const std::vector<double> x_hat(10, 0.5);
        CHECK_THROWS_AS(loss(zeros, x_hat, stats, 1e-3), ShapeError);
    }
}

TEST_CASE("glorot init is seeded, bounded, with zero biases") {
    const ModelConfig cfg = tiny_config(true, true);
    const Network a = Network::glorot(cfg, 31);
    const Network b = Network::glorot(cfg, 31);
    const Network c = Network::glorot(cfg, 32);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    CHECK(!std::equal(a.params().begin(), a.params().end(), c.params().begin()));

    for (const TensorSpec& t : a.tensors()) {
        if (t.cols == 1) {  // bias vector
            for (std::size_t i = 0; i < t.size(); ++i)
                CHECK(a.params()[t.offset + i] == 0.0);
        } else {
            const double bound = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
            for (std::size_t i = 0; i < t.size(); ++i)
                CHECK(std::abs(a.params()[t.offset + i]) <= bound);
        }
    }
}

TEST_CASE("sample_loss equals backward's loss and gradients are finite") {
    for (const bool gps : {false, true})
        for (const bool cc : {false, true}) {
            const Network net = Network::glorot(tiny_config(gps, cc), 41);
            Rng rng(9);
            const GridVector x = random_grid(tiny_spec(), rng);
            const GpsFeature feature{{0.1, 0.6, 0.3}};
            const GpsFeature* gp = gps ? &feature : nullptr;
            const BackwardResult bw = backward(net, x, gp, 333);
            const LossParts fw = sample_loss(net, x, gp, 333);
            CHECK(bw.loss.total == fw.total);
            REQUIRE(bw.grad.size() == net.param_count());
            for (double g : bw.grad) CHECK(std::isfinite(g));
        }
}

TEST_CASE("kl gradient never touches decoder parameters") {
    ModelConfig cfg = tiny_config(true, true);
    const Network net = Network::glorot(cfg, 43);
    Rng rng(10);
    const GridVector x = random_grid(tiny_spec(), rng);
    const GpsFeature gps{{0.5, 0.5, 0.5}};

    // Same eps draw; the only difference between beta=0 and beta=1 gradients
    // is the beta*kl term, so decoder/output tensors must agree exactly.
    ModelConfig c0 = cfg;
    c0.kl_weight = 0.0;
    ModelConfig c1 = cfg;
    c1.kl_weight = 1.0;
    Network n0 = Network::zeros(c0);
    Network n1 = Network::zeros(c1);
    std::copy(net.params().begin(), net.params().end(), n0.params().begin());
    std::copy(net.params().begin(), net.params().end(), n1.params().begin());

    const BackwardResult g0 = backward(n0, x, &gps, 777);
    const BackwardResult g1 = backward(n1, x, &gps, 777);
    for (const TensorSpec& t : net.tensors()) {
        if (t.name.rfind("dec", 0) == 0 || t.name.rfind("out", 0) == 0) {
            for (std::size_t i = 0; i < t.size(); ++i)
                CHECK(g0.grad[t.offset + i] == g1.grad[t.offset + i]);
        }
    }
    // ...while the encoder heads do see the kl term.
    bool some_head_differs = false;
    for (const TensorSpec& t : net.tensors())
        if (t.name.rfind("mu", 0) == 0 || t.name.rfind("logvar", 0) == 0)
            for (std::size_t i = 0; i < t.size(); ++i)
                if (g0.grad[t.offset + i] != g1.grad[t.offset + i]) some_head_differs = true;
    CHECK(some_head_differs);
}

TEST_CASE("analytic gradients agree with central differences") {
    // Small slice of the full oracle sweep; kept quick for the unit suite.
    const double h = 1e-4;
    for (const bool gps : {false, true})
        for (const bool cc : {false, true}) {
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                Network net = Network::glorot(tiny_config(gps, cc), 100 + seed);
                Rng rng(seed);
                const GridVector x = random_grid(tiny_spec(), rng);
                const GpsFeature feature{{0.3, 0.8, 0.2}};
                const GpsFeature* gp = gps ? &feature : nullptr;
                const std::uint64_t eps_seed = 5000 + seed;

                const BackwardResult bw = backward(net, x, gp, eps_seed);
                for (std::size_t p = 0; p < net.param_count(); p += 7) {
                    const double numeric = numeric_grad(net, p, x, gp, eps_seed, h);
                    const double analytic = bw.grad[p];
                    const double scale = std::max(std::abs(numeric), std::abs(analytic));
                    if (scale >= 1e-5)
                        CHECK(std::abs(numeric - analytic) / scale < 1e-4);
                    else
                        CHECK(std::abs(numeric - analytic) < 1e-9);
                }
            }
        }
}

TEST_CASE("backward_into accumulates") {
    const Network net = Network::glorot(tiny_config(false, false), 51);
    Rng rng(11);
    const GridVector x = random_grid(tiny_spec(), rng);
    std::vector<double> acc(net.param_count(), 0.0);
    backward_into(net, x, nullptr, 1, acc);
    backward_into(net, x, nullptr, 1, acc);
    const BackwardResult once = backward(net, x, nullptr, 1);
    for (std::size_t p = 0; p < acc.size(); ++p)
        CHECK(acc[p] == doctest::Approx(2.0 * once.grad[p]).epsilon(1e-12));
}

TEST_CASE("forward_deterministic is pure") {
    const Network net = Network::glorot(tiny_config(true, true), 61);
    Rng rng(12);
    const GridVector x = random_grid(tiny_spec(), rng);
    const GpsFeature gps{{0.9, 0.1, 0.4}};
    const std::vector<double> a = forward_deterministic(net, x, &gps);
    const std::vector<double> b = forward_deterministic(net, x, &gps);
    CHECK(a == b);
    for (double v : a) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("checkpoint round-trip preserves forward outputs bit-for-bit") {
    for (const char* slug : {"uav-adnet", "uav-adnet-wo-gps", "cvae", "vae"}) {
        ModelConfig cfg = config_for_variant(slug, 16);
        cfg.hidden_sizes = {8};
        cfg.latent_dim = 2;
        const Network net = Network::glorot(cfg, 71);
        const auto path = std::filesystem::temp_directory_path() /
                          (std::string("gridwatch_ckpt_") + slug + ".bin");
        save_checkpoint(net, path);
        const Network back = load_checkpoint(path);
        CHECK(back.config() == net.config());
        REQUIRE(back.param_count() == net.param_count());
        CHECK(std::equal(net.params().begin(), net.params().end(), back.params().begin()));

        Rng rng(13);
        const GridVector x = random_grid(tiny_spec(), rng);
        const GpsFeature gps{{0.2, 0.2, 0.2}};
        const GpsFeature* gp = cfg.use_gps ? &gps : nullptr;
        CHECK(forward_deterministic(net, x, gp) == forward_deterministic(back, x, gp));
        std::filesystem::remove(path);
    }
}

TEST_CASE("checkpoint loader rejects garbage") {
    const auto path = std::filesystem::temp_directory_path() / "gridwatch_ckpt_garbage.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
