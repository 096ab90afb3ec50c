#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gridwatch/error.hpp"
#include "gridwatch/grid.hpp"
#include "gridwatch/rng.hpp"

namespace gridwatch {

/// Normalized (lat, lon, altitude) conditioning feature, each in [0, 1].
struct GpsFeature {
    std::array<double, 3> values{0.0, 0.0, 0.0};
};

inline constexpr std::size_t kGpsFeatureLen = 3;

/// Dense real matrix, row-major. Exchange type at module boundaries;
/// entries must stay finite.
struct RealMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    bool all_finite() const;
};

/// Architecture switches spanning the four model variants:
///   use_gps=true,  use_copy_crop=true   -> UAV-AdNet
///   use_gps=false, use_copy_crop=true   -> UAV-AdNet-wo-gps
///   use_gps=true,  use_copy_crop=false  -> CVAE
///   use_gps=false, use_copy_crop=false  -> VAE
struct ModelConfig {
    std::size_t grid_len = 0;
    std::size_t gps_len = kGpsFeatureLen;
    bool use_gps = false;
    bool use_copy_crop = false;
    std::vector<std::size_t> hidden_sizes{256, 128};
    std::size_t latent_dim = 32;
    double kl_weight = 1e-3;

    std::size_t effective_gps_len() const { return use_gps ? gps_len : 0; }
    void validate() const;  // throws ConfigError
    bool operator==(const ModelConfig&) const = default;
};

/// Canonical variant slugs: "uav-adnet", "uav-adnet-wo-gps", "cvae", "vae".
ModelConfig config_for_variant(std::string_view variant, std::size_t grid_len);

/// Display name ("UAV-AdNet", ...) for the flag combination.
std::string variant_display_name(const ModelConfig& config);
std::string variant_slug(const ModelConfig& config);

/// The four slugs in canonical (reporting) order.
std::span<const std::string_view> all_variant_slugs();

struct TensorSpec {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
};

/// Fully-connected VAE with optional GPS conditioning (feature concatenated
/// to encoder and decoder inputs) and optional copy-crop link (raw grid
/// input concatenated to the final decoder layer's input). Parameters live
/// in one flat buffer described by a list of named tensors.
class Network {
public:
    static Network glorot(const ModelConfig& config, std::uint64_t seed);
    static Network zeros(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    std::span<const double> params() const { return params_; }
    std::span<double> params() { return params_; }
    const std::vector<TensorSpec>& tensors() const { return tensors_; }
    std::size_t param_count() const { return params_.size(); }

    const double* tensor_data(std::size_t tensor_index) const {
        return params_.data() + tensors_[tensor_index].offset;
    }
    double* tensor_data(std::size_t tensor_index) {
        return params_.data() + tensors_[tensor_index].offset;
    }

private:
    friend struct NetworkAccess;
    explicit Network(const ModelConfig& config);

    ModelConfig config_;
    std::vector<TensorSpec> tensors_;
    std::vector<double> params_;
};

struct LatentStats {
    std::vector<double> mu;
    std::vector<double> log_var;  // clamped to [-10, 10]
};

inline constexpr double kLogVarClamp = 10.0;

LatentStats encode(const Network& net, const GridVector& grid, const GpsFeature* gps);

/// z = mu + exp(0.5 * log_var) * eps, eps ~ N(0, I) drawn from rng.
std::vector<double> reparameterize(const LatentStats& stats, Rng& rng);

std::vector<double> decode(const Network& net, std::span<const double> z, const GpsFeature* gps,
                           const GridVector* grid_input);

struct LossParts {
    double total = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

/// recon = mean((x - x_hat)^2); kl = -0.5 * sum(1 + lv - mu^2 - exp(lv));
/// total = recon + beta * kl.
LossParts loss(const GridVector& x, std::span<const double> x_hat, const LatentStats& stats,
               double beta);

/// Stochastic forward pass (eps drawn from Rng(seed)) followed by loss.
/// Pairs with backward(): the same seed reproduces the same eps draw.
LossParts sample_loss(const Network& net, const GridVector& x, const GpsFeature* gps,
                      std::uint64_t seed);

struct BackwardResult {
    std::vector<double> grad;  // d(total)/d(param), flat, aligned with params()
    LossParts loss;
};

BackwardResult backward(const Network& net, const GridVector& x, const GpsFeature* gps,
                        std::uint64_t seed);

/// Adds this sample's gradient of the total loss into grad_accum (which must
/// have param_count() entries). Returns the loss parts.
LossParts backward_into(const Network& net, const GridVector& x, const GpsFeature* gps,
                        std::uint64_t seed, std::span<double> grad_accum);

/// Deterministic inference: encode, take z = mu, decode (with the copy-crop
/// input when configured). Output in (0,1)^grid_len.
std::vector<double> forward_deterministic(const Network& net, const GridVector& grid,
                                          const GpsFeature* gps);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace gridwatch
