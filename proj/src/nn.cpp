#include "gridwatch/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace gridwatch {

namespace {

constexpr char kCheckpointMagic[8] = {'G', 'W', 'C', 'K', 'P', 'T', '1', '\n'};

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// y = W x + b, W row-major (out_dim x in_dim)
void affine(const double* W, const double* b, const double* x, double* y,
            std::size_t out_dim, std::size_t in_dim) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        const double* row = W + i * in_dim;
        double acc = b[i];
        for (std::size_t k = 0; k < in_dim; ++k) acc += row[k] * x[k];
        y[i] = acc;
    }
}

// dW += dy (x) x ; db += dy
void add_outer(double* dW, double* db, const double* dy, const double* x,
               std::size_t out_dim, std::size_t in_dim) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        const double d = dy[i];
        db[i] += d;
        double* row = dW + i * in_dim;
        for (std::size_t k = 0; k < in_dim; ++k) row[k] += d * x[k];
    }
}

// dx += W^T dy
void add_transposed(const double* W, const double* dy, double* dx,
                    std::size_t out_dim, std::size_t in_dim) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        const double d = dy[i];
        const double* row = W + i * in_dim;
        for (std::size_t k = 0; k < in_dim; ++k) dx[k] += d * row[k];
    }
}

// Tensor indices follow declaration order; W at even slot, b right after.
struct Layout {
    std::size_t hidden_count = 0;
    std::size_t enc_w(std::size_t i) const { return 2 * i; }
    std::size_t mu_w() const { return 2 * hidden_count; }
    std::size_t lv_w() const { return 2 * hidden_count + 2; }
    std::size_t dec_w(std::size_t i) const { return 2 * hidden_count + 4 + 2 * i; }
    std::size_t out_w() const { return 4 * hidden_count + 4; }
};

struct Trace {
    std::vector<double> enc_in;
    std::vector<std::vector<double>> enc_pre;
    std::vector<std::vector<double>> enc_act;
    std::vector<double> mu;
    std::vector<double> lv_pre;
    std::vector<double> lv;
    std::vector<double> eps;  // empty in deterministic mode
    std::vector<double> z;
    std::vector<double> dec_in;
    std::vector<std::vector<double>> dec_pre;
    std::vector<std::vector<double>> dec_act;
    std::vector<double> head_in;
    std::vector<double> y;
};

void check_inputs(const ModelConfig& cfg, const GridVector& grid, const GpsFeature* gps) {
    if (grid.size() != cfg.grid_len)
        throw ShapeError("grid length " + std::to_string(grid.size()) +
                         " does not match model grid_len " + std::to_string(cfg.grid_len));
    if (cfg.use_gps && gps == nullptr)
        throw ConfigError("model is gps-conditioned but no gps feature was supplied");
    if (!cfg.use_gps && gps != nullptr)
        throw ConfigError("gps feature supplied to a model with use_gps=false");
    if (gps != nullptr) {
        for (double v : gps->values) {
            if (!std::isfinite(v)) throw NumericError("gps feature contains a non-finite value");
        }
    }
}

// Forward pass shared by sampling and deterministic inference; eps_rng
// nullptr means z = mu.
Trace run_forward(const Network& net, const GridVector& x, const GpsFeature* gps, Rng* eps_rng) {
    const ModelConfig& cfg = net.config();
    const Layout lay{cfg.hidden_sizes.size()};
    const std::size_t eg = cfg.effective_gps_len();
    Trace t;

    t.enc_in.resize(cfg.grid_len + eg);
    for (std::size_t i = 0; i < cfg.grid_len; ++i) t.enc_in[i] = static_cast<double>(x.bit(i));
    for (std::size_t k = 0; k < eg; ++k) t.enc_in[cfg.grid_len + k] = gps->values[k];

    const std::vector<TensorSpec>& ts = net.tensors();
    const double* cur = t.enc_in.data();
    std::size_t cur_len = t.enc_in.size();
    for (std::size_t i = 0; i < cfg.hidden_sizes.size(); ++i) {
        const TensorSpec& w = ts[lay.enc_w(i)];
        std::vector<double> pre(w.rows);
        affine(net.tensor_data(lay.enc_w(i)), net.tensor_data(lay.enc_w(i) + 1), cur, pre.data(),
               w.rows, cur_len);
        std::vector<double> act(w.rows);
        for (std::size_t j = 0; j < w.rows; ++j) act[j] = pre[j] > 0.0 ? pre[j] : 0.0;
        t.enc_pre.push_back(std::move(pre));
        t.enc_act.push_back(std::move(act));
        cur = t.enc_act.back().data();
        cur_len = w.rows;
    }

    t.mu.resize(cfg.latent_dim);
    affine(net.tensor_data(lay.mu_w()), net.tensor_data(lay.mu_w() + 1), cur, t.mu.data(),
           cfg.latent_dim, cur_len);
    t.lv_pre.resize(cfg.latent_dim);
    affine(net.tensor_data(lay.lv_w()), net.tensor_data(lay.lv_w() + 1), cur, t.lv_pre.data(),
           cfg.latent_dim, cur_len);
    t.lv.resize(cfg.latent_dim);
    for (std::size_t j = 0; j < cfg.latent_dim; ++j)
        t.lv[j] = std::clamp(t.lv_pre[j], -kLogVarClamp, kLogVarClamp);

    t.z.resize(cfg.latent_dim);
    if (eps_rng != nullptr) {
        t.eps.resize(cfg.latent_dim);
        for (std::size_t j = 0; j < cfg.latent_dim; ++j) t.eps[j] = gaussian(*eps_rng);
        for (std::size_t j = 0; j < cfg.latent_dim; ++j)
            t.z[j] = t.mu[j] + std::exp(0.5 * t.lv[j]) * t.eps[j];
    } else {
        t.z = t.mu;
    }

    t.dec_in.resize(cfg.latent_dim + eg);
    std::copy(t.z.begin(), t.z.end(), t.dec_in.begin());
    for (std::size_t k = 0; k < eg; ++k) t.dec_in[cfg.latent_dim + k] = gps->values[k];

    cur = t.dec_in.data();
    cur_len = t.dec_in.size();
    for (std::size_t i = 0; i < cfg.hidden_sizes.size(); ++i) {
        const TensorSpec& w = ts[lay.dec_w(i)];
        std::vector<double> pre(w.rows);
        affine(net.tensor_data(lay.dec_w(i)), net.tensor_data(lay.dec_w(i) + 1), cur, pre.data(),
               w.rows, cur_len);
        std::vector<double> act(w.rows);
        for (std::size_t j = 0; j < w.rows; ++j) act[j] = pre[j] > 0.0 ? pre[j] : 0.0;
        t.dec_pre.push_back(std::move(pre));
        t.dec_act.push_back(std::move(act));
        cur = t.dec_act.back().data();
        cur_len = w.rows;
    }

    t.head_in.assign(cur, cur + cur_len);
    if (cfg.use_copy_crop) {
        t.head_in.resize(cur_len + cfg.grid_len);
        for (std::size_t i = 0; i < cfg.grid_len; ++i)
            t.head_in[cur_len + i] = static_cast<double>(x.bit(i));
    }

    std::vector<double> y_pre(cfg.grid_len);
    affine(net.tensor_data(lay.out_w()), net.tensor_data(lay.out_w() + 1), t.head_in.data(),
           y_pre.data(), cfg.grid_len, t.head_in.size());
    t.y.resize(cfg.grid_len);
    for (std::size_t i = 0; i < cfg.grid_len; ++i) t.y[i] = sigmoid(y_pre[i]);
    return t;
}

LossParts loss_from_trace(const GridVector& x, const Trace& t, double beta) {
    LossParts parts;
    const std::size_t n = t.y.size();
    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(x.bit(i)) - t.y[i];
        se += d * d;
    }
    parts.recon = se / static_cast<double>(n);
    double kl = 0.0;
    for (std::size_t j = 0; j < t.mu.size(); ++j)
        kl += 1.0 + t.lv[j] - t.mu[j] * t.mu[j] - std::exp(t.lv[j]);
    parts.kl = -0.5 * kl;
    parts.total = parts.recon + beta * parts.kl;
    return parts;
}

}  // namespace

bool RealMatrix::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void ModelConfig::validate() const {
    if (grid_len < 1) throw ConfigError("model config: grid_len must be >= 1");
    if (latent_dim < 1) throw ConfigError("model config: latent_dim must be >= 1");
    if (hidden_sizes.empty()) throw ConfigError("model config: at least one hidden layer required");
    for (std::size_t h : hidden_sizes)
        if (h < 1) throw ConfigError("model config: hidden sizes must be positive");
    if (gps_len != 0 && gps_len != kGpsFeatureLen)
        throw ConfigError("model config: gps_len must be 0 or " + std::to_string(kGpsFeatureLen));
    if (use_gps && gps_len == 0)
        throw ConfigError("model config: use_gps requires gps_len > 0");
    if (kl_weight < 0.0) throw ConfigError("model config: kl_weight must be >= 0");
}

ModelConfig config_for_variant(std::string_view variant, std::size_t grid_len) {
    ModelConfig cfg;
    cfg.grid_len = grid_len;
    if (variant == "uav-adnet") {
        cfg.use_gps = true;
        cfg.use_copy_crop = true;
    } else if (variant == "uav-adnet-wo-gps") {
        cfg.use_gps = false;
        cfg.use_copy_crop = true;
    } else if (variant == "cvae") {
        cfg.use_gps = true;
        cfg.use_copy_crop = false;
    } else if (variant == "vae") {
        cfg.use_gps = false;
        cfg.use_copy_crop = false;
    } else {
        throw UsageError("unknown model variant '" + std::string(variant) +
                         "' (expected uav-adnet, uav-adnet-wo-gps, cvae or vae)");
    }
    return cfg;
}

std::string variant_display_name(const ModelConfig& config) {
    if (config.use_copy_crop) return config.use_gps ? "UAV-AdNet" : "UAV-AdNet-wo-gps";
    return config.use_gps ? "CVAE" : "VAE";
}

std::string variant_slug(const ModelConfig& config) {
    if (config.use_copy_crop) return config.use_gps ? "uav-adnet" : "uav-adnet-wo-gps";
    return config.use_gps ? "cvae" : "vae";
}

std::span<const std::string_view> all_variant_slugs() {
    static constexpr std::string_view slugs[] = {"uav-adnet", "uav-adnet-wo-gps", "cvae", "vae"};
    return slugs;
}

Network::Network(const ModelConfig& config) : config_(config) {
    config.validate();
    const std::size_t eg = config.effective_gps_len();
    std::size_t offset = 0;
    auto push = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        tensors_.push_back(TensorSpec{name, offset, rows, cols});
        offset += rows * cols;
    };
    std::size_t in = config.grid_len + eg;
    for (std::size_t i = 0; i < config.hidden_sizes.size(); ++i) {
        push("enc" + std::to_string(i) + ".W", config.hidden_sizes[i], in);
        push("enc" + std::to_string(i) + ".b", config.hidden_sizes[i], 1);
        in = config.hidden_sizes[i];
    }
    push("mu.W", config.latent_dim, in);
    push("mu.b", config.latent_dim, 1);
    push("logvar.W", config.latent_dim, in);
    push("logvar.b", config.latent_dim, 1);
    in = config.latent_dim + eg;
    for (std::size_t i = 0; i < config.hidden_sizes.size(); ++i) {
        const std::size_t out = config.hidden_sizes[config.hidden_sizes.size() - 1 - i];
        push("dec" + std::to_string(i) + ".W", out, in);
        push("dec" + std::to_string(i) + ".b", out, 1);
        in = out;
    }
    const std::size_t head_in = in + (config.use_copy_crop ? config.grid_len : 0);
    push("out.W", config.grid_len, head_in);
    push("out.b", config.grid_len, 1);
    params_.assign(offset, 0.0);
}

Network Network::glorot(const ModelConfig& config, std::uint64_t seed) {
    Network net(config);
    Rng rng(seed);
    for (const TensorSpec& t : net.tensors_) {
        if (t.cols == 1) continue;  // biases start at zero
        const double a = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
        double* data = net.params_.data() + t.offset;
        for (std::size_t i = 0; i < t.size(); ++i) data[i] = uniform_in(rng, -a, a);
    }
    return net;
}

Network Network::zeros(const ModelConfig& config) { return Network(config); }

LatentStats encode(const Network& net, const GridVector& grid, const GpsFeature* gps) {
    check_inputs(net.config(), grid, gps);
    Trace t = run_forward(net, grid, gps, nullptr);
    return LatentStats{std::move(t.mu), std::move(t.lv)};
}

std::vector<double> reparameterize(const LatentStats& stats, Rng& rng) {
    if (stats.mu.size() != stats.log_var.size())
        throw ShapeError("latent stats: mu and log_var lengths differ");
    std::vector<double> z(stats.mu.size());
    for (std::size_t j = 0; j < z.size(); ++j)
        z[j] = stats.mu[j] + std::exp(0.5 * stats.log_var[j]) * gaussian(rng);
    return z;
}

std::vector<double> decode(const Network& net, std::span<const double> z, const GpsFeature* gps,
                           const GridVector* grid_input) {
    const ModelConfig& cfg = net.config();
    if (z.size() != cfg.latent_dim)
        throw ShapeError("latent vector length " + std::to_string(z.size()) +
                         " does not match latent_dim " + std::to_string(cfg.latent_dim));
    if (cfg.use_gps && gps == nullptr)
        throw ConfigError("model is gps-conditioned but no gps feature was supplied");
    if (!cfg.use_gps && gps != nullptr)
        throw ConfigError("gps feature supplied to a model with use_gps=false");
    if (cfg.use_copy_crop && grid_input == nullptr)
        throw ConfigError("copy-crop model requires the grid input at decode time");
    if (!cfg.use_copy_crop && grid_input != nullptr)
        throw ConfigError("grid input supplied to a model with use_copy_crop=false");
    if (grid_input != nullptr && grid_input->size() != cfg.grid_len)
        throw ShapeError("copy-crop grid input length does not match model grid_len");

    const Layout lay{cfg.hidden_sizes.size()};
    const std::size_t eg = cfg.effective_gps_len();
    std::vector<double> v(cfg.latent_dim + eg);
    std::copy(z.begin(), z.end(), v.begin());
    for (std::size_t k = 0; k < eg; ++k) v[cfg.latent_dim + k] = gps->values[k];

    const std::vector<TensorSpec>& ts = net.tensors();
    std::vector<double> cur = std::move(v);
    for (std::size_t i = 0; i < cfg.hidden_sizes.size(); ++i) {
        const TensorSpec& w = ts[lay.dec_w(i)];
        std::vector<double> next(w.rows);
        affine(net.tensor_data(lay.dec_w(i)), net.tensor_data(lay.dec_w(i) + 1), cur.data(),
               next.data(), w.rows, cur.size());
        for (double& x : next) x = x > 0.0 ? x : 0.0;
        cur = std::move(next);
    }
    std::vector<double> head_in = std::move(cur);
    if (cfg.use_copy_crop) {
        const std::size_t base = head_in.size();
        head_in.resize(base + cfg.grid_len);
        for (std::size_t i = 0; i < cfg.grid_len; ++i)
            head_in[base + i] = static_cast<double>(grid_input->bit(i));
    }
    std::vector<double> y(cfg.grid_len);
    affine(net.tensor_data(lay.out_w()), net.tensor_data(lay.out_w() + 1), head_in.data(), y.data(),
           cfg.grid_len, head_in.size());
    for (double& t : y) t = sigmoid(t);
    return y;
}

LossParts loss(const GridVector& x, std::span<const double> x_hat, const LatentStats& stats,
               double beta) {
    if (x.size() != x_hat.size())
        throw ShapeError("loss: grid length " + std::to_string(x.size()) +
                         " vs reconstruction length " + std::to_string(x_hat.size()));
    LossParts parts;
    double se = 0.0;
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        const double d = static_cast<double>(x.bit(i)) - x_hat[i];
        se += d * d;
    }
    parts.recon = se / static_cast<double>(x_hat.size());
    double kl = 0.0;
    for (std::size_t j = 0; j < stats.mu.size(); ++j)
        kl += 1.0 + stats.log_var[j] - stats.mu[j] * stats.mu[j] - std::exp(stats.log_var[j]);
    parts.kl = -0.5 * kl;
    parts.total = parts.recon + beta * parts.kl;
    return parts;
}

LossParts sample_loss(const Network& net, const GridVector& x, const GpsFeature* gps,
                      std::uint64_t seed) {
    check_inputs(net.config(), x, gps);
    Rng rng(seed);
    Trace t = run_forward(net, x, gps, &rng);
    return loss_from_trace(x, t, net.config().kl_weight);
}

LossParts backward_into(const Network& net, const GridVector& x, const GpsFeature* gps,
                        std::uint64_t seed, std::span<double> grad_accum) {
    check_inputs(net.config(), x, gps);
    if (grad_accum.size() != net.param_count())
        throw ShapeError("gradient buffer size does not match parameter count");

    const ModelConfig& cfg = net.config();
    const Layout lay{cfg.hidden_sizes.size()};
    const std::size_t H = cfg.hidden_sizes.size();
    const double beta = cfg.kl_weight;
    Rng rng(seed);
    Trace t = run_forward(net, x, gps, &rng);
    const LossParts parts = loss_from_trace(x, t, beta);

    const std::vector<TensorSpec>& ts = net.tensors();
    auto grad_of = [&](std::size_t idx) { return grad_accum.data() + ts[idx].offset; };
    const double inv_len = 1.0 / static_cast<double>(cfg.grid_len);

    // output head
    std::vector<double> d_ypre(cfg.grid_len);
    for (std::size_t i = 0; i < cfg.grid_len; ++i) {
        const double dy = 2.0 * inv_len * (t.y[i] - static_cast<double>(x.bit(i)));
        d_ypre[i] = dy * t.y[i] * (1.0 - t.y[i]);
    }
    add_outer(grad_of(lay.out_w()), grad_of(lay.out_w() + 1), d_ypre.data(), t.head_in.data(),
              cfg.grid_len, t.head_in.size());
    std::vector<double> d_head_in(t.head_in.size(), 0.0);
    add_transposed(net.tensor_data(lay.out_w()), d_ypre.data(), d_head_in.data(), cfg.grid_len,
                   t.head_in.size());
    // the copy-crop slice of head_in is the raw input; nothing to propagate there

    // decoder hidden stack
    const std::size_t dec_last_len = cfg.hidden_sizes[0];
    std::vector<double> d_act(d_head_in.begin(), d_head_in.begin() + static_cast<std::ptrdiff_t>(dec_last_len));
    for (std::size_t ii = H; ii-- > 0;) {
        const TensorSpec& w = ts[lay.dec_w(ii)];
        std::vector<double> d_pre(w.rows);
        for (std::size_t j = 0; j < w.rows; ++j)
            d_pre[j] = t.dec_pre[ii][j] > 0.0 ? d_act[j] : 0.0;
        const double* input = ii == 0 ? t.dec_in.data() : t.dec_act[ii - 1].data();
        add_outer(grad_of(lay.dec_w(ii)), grad_of(lay.dec_w(ii) + 1), d_pre.data(), input, w.rows,
                  w.cols);
        std::vector<double> d_input(w.cols, 0.0);
        add_transposed(net.tensor_data(lay.dec_w(ii)), d_pre.data(), d_input.data(), w.rows, w.cols);
        d_act = std::move(d_input);
    }

    // reparameterization + KL into latent stats
    std::vector<double> d_mu(cfg.latent_dim, 0.0);
    std::vector<double> d_lv(cfg.latent_dim, 0.0);
    for (std::size_t j = 0; j < cfg.latent_dim; ++j) {
        const double dz = d_act[j];  // decoder input starts with z
        d_mu[j] = dz + beta * t.mu[j];
        d_lv[j] = dz * 0.5 * std::exp(0.5 * t.lv[j]) * t.eps[j] +
                  beta * 0.5 * (std::exp(t.lv[j]) - 1.0);
        // clamp gradient: zero outside the active range
        if (t.lv_pre[j] <= -kLogVarClamp || t.lv_pre[j] >= kLogVarClamp) d_lv[j] = 0.0;
    }

    const double* enc_last = H == 0 ? t.enc_in.data() : t.enc_act[H - 1].data();
    const std::size_t enc_last_len = ts[lay.mu_w()].cols;
    add_outer(grad_of(lay.mu_w()), grad_of(lay.mu_w() + 1), d_mu.data(), enc_last, cfg.latent_dim,
              enc_last_len);
    add_outer(grad_of(lay.lv_w()), grad_of(lay.lv_w() + 1), d_lv.data(), enc_last, cfg.latent_dim,
              enc_last_len);
    std::vector<double> d_enc(enc_last_len, 0.0);
    add_transposed(net.tensor_data(lay.mu_w()), d_mu.data(), d_enc.data(), cfg.latent_dim,
                   enc_last_len);
    add_transposed(net.tensor_data(lay.lv_w()), d_lv.data(), d_enc.data(), cfg.latent_dim,
                   enc_last_len);

    // encoder hidden stack
    for (std::size_t ii = H; ii-- > 0;) {
        const TensorSpec& w = ts[lay.enc_w(ii)];
        std::vector<double> d_pre(w.rows);
        for (std::size_t j = 0; j < w.rows; ++j)
            d_pre[j] = t.enc_pre[ii][j] > 0.0 ? d_enc[j] : 0.0;
        const double* input = ii == 0 ? t.enc_in.data() : t.enc_act[ii - 1].data();
        add_outer(grad_of(lay.enc_w(ii)), grad_of(lay.enc_w(ii) + 1), d_pre.data(), input, w.rows,
                  w.cols);
        if (ii > 0) {
            std::vector<double> d_input(w.cols, 0.0);
            add_transposed(net.tensor_data(lay.enc_w(ii)), d_pre.data(), d_input.data(), w.rows,
                           w.cols);
            d_enc = std::move(d_input);
        }
    }

    if (!std::isfinite(parts.total))
        throw NumericError("non-finite loss in backward pass");
    return parts;
}

BackwardResult backward(const Network& net, const GridVector& x, const GpsFeature* gps,
                        std::uint64_t seed) {
    BackwardResult result;
    result.grad.assign(net.param_count(), 0.0);
    result.loss = backward_into(net, x, gps, seed, result.grad);
    for (const TensorSpec& t : net.tensors()) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!std::isfinite(result.grad[t.offset + i]))
                throw NumericError("non-finite gradient in parameter tensor " + t.name);
        }
    }
    return result;
}

std::vector<double> forward_deterministic(const Network& net, const GridVector& grid,
                                          const GpsFeature* gps) {
    check_inputs(net.config(), grid, gps);
    Trace t = run_forward(net, grid, gps, nullptr);
    return std::move(t.y);
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));

    const ModelConfig& cfg = net.config();
    nlohmann::ordered_json header = {
        {"grid_len", cfg.grid_len},       {"gps_len", cfg.gps_len},
        {"use_gps", cfg.use_gps},         {"use_copy_crop", cfg.use_copy_crop},
        {"hidden_sizes", cfg.hidden_sizes}, {"latent_dim", cfg.latent_dim},
        {"kl_weight", cfg.kl_weight},
    };
    const std::string header_str = header.dump();
    auto write_u32 = [&](std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    auto write_f64 = [&](double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), 8);
    };
    write_u32(static_cast<std::uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    write_u32(static_cast<std::uint32_t>(net.tensors().size()));
    for (const TensorSpec& t : net.tensors()) {
        write_u32(static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_u32(static_cast<std::uint32_t>(t.rows));
        write_u32(static_cast<std::uint32_t>(t.cols));
        const double* data = net.tensor_data(&t - net.tensors().data());
        for (std::size_t i = 0; i < t.size(); ++i) write_f64(data[i]);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw ParseError("not a checkpoint file: " + path.string());
    auto read_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    };
    auto read_f64 = [&]() {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    };
    const std::uint32_t header_len = read_u32();
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (!in) throw ParseError("checkpoint: truncated header in " + path.string());
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("checkpoint: bad config header: " + std::string(e.what()));
    }
    ModelConfig cfg;
    try {
        cfg.grid_len = header.at("grid_len").get<std::size_t>();
        cfg.gps_len = header.at("gps_len").get<std::size_t>();
        cfg.use_gps = header.at("use_gps").get<bool>();
        cfg.use_copy_crop = header.at("use_copy_crop").get<bool>();
        cfg.hidden_sizes = header.at("hidden_sizes").get<std::vector<std::size_t>>();
        cfg.latent_dim = header.at("latent_dim").get<std::size_t>();
        cfg.kl_weight = header.at("kl_weight").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint: missing config field: " + std::string(e.what()));
    }
    Network net = Network::zeros(cfg);
    const std::uint32_t tensor_count = read_u32();
    if (tensor_count != net.tensors().size())
        throw ParseError("checkpoint: tensor count mismatch in " + path.string());
    for (std::size_t ti = 0; ti < tensor_count; ++ti) {
        const std::uint32_t name_len = read_u32();
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rows = read_u32();
        const std::uint32_t cols = read_u32();
        const TensorSpec& expected = net.tensors()[ti];
        if (name != expected.name || rows != expected.rows || cols != expected.cols)
            throw ParseError("checkpoint: tensor '" + name + "' does not match expected '" +
                             expected.name + "'");
        double* data = net.tensor_data(ti);
        for (std::size_t i = 0; i < expected.size(); ++i) data[i] = read_f64();
    }
    if (!in) throw ParseError("checkpoint: truncated tensor data in " + path.string());
    for (double v : net.params())
        if (!std::isfinite(v)) throw NumericError("checkpoint contains non-finite parameters");
    return net;
}

}  // namespace gridwatch
