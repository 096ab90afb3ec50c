#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gridwatch/ingest.hpp"
#include "gridwatch/nn.hpp"

namespace gridwatch {

struct TrainOptions {
    std::size_t epochs_max = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t patience = 10;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

struct LossCurvePoint {
    std::size_t epoch = 0;  // 1-based
    double e_train = 0.0;
    double e_val = 0.0;
};

using LossCurve = std::vector<LossCurvePoint>;

/// Adam with bias-corrected moment estimates over one flat parameter vector.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t param_count, double learning_rate, double beta1, double beta2,
                  double epsilon);

    void step(std::span<double> params, std::span<const double> grad);
    std::size_t steps_taken() const { return steps_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t steps_ = 0;
    std::vector<double> m_, v_;
};

/// Mean over samples of the per-sample reconstruction MSE, computed with the
/// deterministic latent (z = mu) so repeated evaluation gives the same value.
double reconstruction_error(const Network& net, const std::vector<Sample>& samples);

struct TrainResult {
    Network net;  // checkpoint with the lowest e_val
    LossCurve curve;
};

/// Seeded minibatch training. Stops at epochs_max or once e_val has gone
/// `patience` consecutive epochs without improving on its best value.
/// Passing resume_from (with first_epoch > 1) continues from a checkpoint:
/// per-epoch shuffle and noise streams are keyed by the absolute epoch
/// number, so a resumed run is itself fully deterministic. Optimizer moments
/// restart from zero on resume.
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const ModelConfig& config, const TrainOptions& opts,
                  const Network* resume_from = nullptr, std::size_t first_epoch = 1);

void export_curve(const LossCurve& curve, const std::filesystem::path& path);
LossCurve import_curve(const std::filesystem::path& path);

}  // namespace gridwatch
