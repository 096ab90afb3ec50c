#include "gridwatch/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "textio.hpp"

namespace gridwatch {

namespace {

// Seed streams, so shuffling, initialization and epsilon draws never overlap.
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamShuffle = 2;
constexpr std::uint64_t kStreamEps = 3;

const GpsFeature* gps_for(const Sample& s, const ModelConfig& config) {
    return config.use_gps ? &s.gps : nullptr;
}

}  // namespace

void TrainOptions::validate() const {
    if (epochs_max < 1) throw ConfigError("train options: epochs_max must be >= 1");
    if (batch_size < 1) throw ConfigError("train options: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train options: learning_rate must be > 0");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0))
        throw ConfigError("train options: adam_beta1 must be in (0, 1)");
    if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0))
        throw ConfigError("train options: adam_beta2 must be in (0, 1)");
    if (!(adam_epsilon > 0.0)) throw ConfigError("train options: adam_epsilon must be > 0");
    if (patience < 1) throw ConfigError("train options: patience must be >= 1");
}

AdamOptimizer::AdamOptimizer(std::size_t param_count, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(param_count, 0.0),
      v_(param_count, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw ShapeError("adam step: parameter/gradient size mismatch");
    ++steps_;
    const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double m_hat = m_[i] / bias1;
        const double v_hat = v_[i] / bias2;
        params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
}

double reconstruction_error(const Network& net, const std::vector<Sample>& samples) {
    if (samples.empty())
        throw ArgumentError("reconstruction_error needs at least one sample");
    const ModelConfig& cfg = net.config();
    double sum = 0.0;
    for (const Sample& s : samples) {
        const std::vector<double> y = forward_deterministic(net, s.grid, gps_for(s, cfg));
        double se = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = static_cast<double>(s.grid.bit(i)) - y[i];
            se += d * d;
        }
        sum += se / static_cast<double>(y.size());
    }
    return sum / static_cast<double>(samples.size());
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const ModelConfig& config, const TrainOptions& opts,
                  const Network* resume_from, std::size_t first_epoch) {
    config.validate();
    opts.validate();
    if (train_set.empty()) throw ArgumentError("train: empty training set");
    if (val_set.empty()) throw ArgumentError("train: empty validation set");
    if (first_epoch < 1) throw ArgumentError("train: first_epoch must be >= 1");
    if (resume_from != nullptr && !(resume_from->config() == config))
        throw ConfigError("train: resume checkpoint config differs from requested config");

    Network net = resume_from != nullptr
                      ? *resume_from
                      : Network::glorot(config, derive_seed(opts.seed, kStreamInit));
    std::vector<double> grad(net.param_count(), 0.0);
    AdamOptimizer adam(net.param_count(), opts.learning_rate, opts.adam_beta1, opts.adam_beta2,
                       opts.adam_epsilon);

    const std::size_t n = train_set.size();
    std::vector<std::size_t> order(n);

    LossCurve curve;
    std::vector<double> best_params(net.params().begin(), net.params().end());
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;

    for (std::size_t epoch = first_epoch; epoch <= opts.epochs_max; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(opts.seed, kStreamShuffle, epoch));
        shuffle(order, shuffle_rng);

        for (std::size_t start = 0; start < n; start += opts.batch_size) {
            const std::size_t end = std::min(n, start + opts.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t pos = start; pos < end; ++pos) {
                const Sample& s = train_set[order[pos]];
                const std::uint64_t eps_seed =
                    derive_seed(opts.seed, kStreamEps, epoch * n + order[pos]);
                batch_loss +=
                    backward_into(net, s.grid, gps_for(s, config), eps_seed, grad).total;
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (double& g : grad) g *= inv;
            if (!std::isfinite(batch_loss))
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
            adam.step(net.params(), grad);
        }

        const double e_train = reconstruction_error(net, train_set);
        const double e_val = reconstruction_error(net, val_set);
        if (!std::isfinite(e_train) || !std::isfinite(e_val))
            throw NumericError("non-finite reconstruction error at epoch " +
                               std::to_string(epoch));
        curve.push_back({epoch, e_train, e_val});

        if (e_val < best_val) {
            best_val = e_val;
            best_params.assign(net.params().begin(), net.params().end());
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= opts.patience) break;
        }
    }

    std::copy(best_params.begin(), best_params.end(), net.params().begin());
    return TrainResult{std::move(net), std::move(curve)};
}

void export_curve(const LossCurve& curve, const std::filesystem::path& path) {
    if (curve.empty()) throw ArgumentError("export_curve: empty curve");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,e_train,e_val\n";
    for (const LossCurvePoint& p : curve) {
        out << p.epoch << ',' << textio::format_double(p.e_train) << ','
            << textio::format_double(p.e_val) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

LossCurve import_curve(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || textio::strip_cr(line) != "epoch,e_train,e_val")
        throw ParseError(path.string() + ": bad loss-curve header");
    LossCurve curve;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = textio::strip_cr(std::move(line));
        if (line.empty()) continue;
        const std::vector<std::string> f = textio::split_csv_line(line);
        if (f.size() != 3)
            throw ParseError(path.string() + " line " + std::to_string(line_no) +
                             ": expected 3 fields");
        LossCurvePoint p;
        p.epoch = static_cast<std::size_t>(textio::parse_int(f[0], "epoch"));
        p.e_train = textio::parse_double(f[1], "e_train");
        p.e_val = textio::parse_double(f[2], "e_val");
        if (!curve.empty() && p.epoch <= curve.back().epoch)
            throw ParseError(path.string() + " line " + std::to_string(line_no) +
                             ": epochs not strictly increasing");
        curve.push_back(p);
    }
    return curve;
}

}  // namespace gridwatch
