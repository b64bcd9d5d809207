#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "glab/common.hpp"
#include "glab/errors.hpp"
#include "glab/gmm_world.hpp"
#include "glab/net.hpp"
#include "glab/process.hpp"
#include "glab/rng.hpp"
#include "glab/schedule.hpp"

namespace glab {

struct TrainConfig {
    double p_uncond = 0.1;
    int steps = 20000;
    int batch = 256;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(p_uncond >= 0.0 && p_uncond <= 1.0))
            throw ConfigError("train.p_uncond must be in [0,1], got " + std::to_string(p_uncond));
        if (steps < 0) throw ConfigError("train.steps must be >= 0");
        if (batch < 1) throw ConfigError("train.batch must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    }
};

// One prepared minibatch: data corrupted to per-element noise levels, with
// conditioning already dropped to the null token where the coin came up.
struct TrainingBatch {
    Mat z;                           // B x d noisy inputs
    std::vector<double> lambdas;     // B
    std::vector<Conditioning> cond;  // B, post-dropout
    Mat eps;                         // B x d regression targets
};

// Draw (x, c), flip conditioning to null with probability p_uncond, sample
// lambda from the schedule distribution and corrupt x to that level.
// Lambda draws are i.i.d. across the batch.
inline TrainingBatch prepare_batch(const GmmWorld& world, const Schedule& schedule,
                                   double p_uncond, int batch, Rng& rng) {
    if (batch < 1) throw ConfigError("prepare_batch: batch must be >= 1");
    TrainingBatch out;
    out.z.resize(batch, world.dims);
    out.eps.resize(batch, world.dims);
    out.lambdas.resize(static_cast<std::size_t>(batch));
    out.cond.resize(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) {
        const auto [x, c] = sample_data(world, rng);
        const bool drop = rng.uniform() < p_uncond;
        out.cond[static_cast<std::size_t>(i)] =
            drop ? Conditioning::null_token() : Conditioning::of_class(c);
        const double lambda = sample_lambda(schedule, rng.uniform());
        out.lambdas[static_cast<std::size_t>(i)] = lambda;
        const Vec eps = rng.normal_vec(world.dims);
        out.eps.row(i) = eps.transpose();
        out.z.row(i) = (alpha_at(lambda) * x + sigma_at(lambda) * eps).transpose();
    }
    return out;
}

// Batch-mean squared eps-prediction error and its parameter gradient.
inline std::pair<double, Vec> loss_and_grad(const DenoiserNet& net, const TrainingBatch& batch) {
    DenoiserNet::Workspace ws;
    const Mat out = net.forward(batch.z, batch.lambdas, batch.cond, &ws);
    const Mat residual = out - batch.eps;
    const double batch_size = static_cast<double>(batch.z.rows());
    const double loss = residual.squaredNorm() / batch_size;
    const Mat grad_out = (2.0 / batch_size) * residual;
    return {loss, net.backward(ws, grad_out)};
}

inline double loss_only(const DenoiserNet& net, const TrainingBatch& batch) {
    const Mat out = net.forward(batch.z, batch.lambdas, batch.cond);
    return (out - batch.eps).squaredNorm() / static_cast<double>(batch.z.rows());
}

// Spec-shaped overload: samples the minibatch itself.
inline std::pair<double, Vec> loss_and_grad(const DenoiserNet& net, const GmmWorld& world,
                                            const Schedule& schedule, double p_uncond, int batch,
                                            Rng& rng) {
    return loss_and_grad(net, prepare_batch(world, schedule, p_uncond, batch, rng));
}

class AdamOptimizer {
public:
    AdamOptimizer(int dim, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon),
          m_(Vec::Zero(dim)), v_(Vec::Zero(dim)) {}

    void step(Vec& params, const Vec& grad) {
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
        const double correction1 = 1.0 - std::pow(beta1_, t_);
        const double correction2 = 1.0 - std::pow(beta2_, t_);
        params.array() -= lr_ * (m_.array() / correction1) /
                          ((v_.array() / correction2).sqrt() + eps_);
    }

private:
    double lr_, beta1_, beta2_, eps_;
    Vec m_, v_;
    int t_ = 0;
};

using TrainObserver = std::function<void(int step, double loss)>;

// Fixed-step joint conditional/unconditional training. Deterministic given
// the config seed; steps = 0 returns the net unchanged.
inline DenoiserNet train(DenoiserNet net, const GmmWorld& world, const TrainConfig& cfg,
                         const Schedule& schedule, const TrainObserver& observer = nullptr) {
    cfg.validate();
    schedule.validate();
    world.validate();
    Rng rng(cfg.seed);
    AdamOptimizer adam(net.param_count(), cfg.learning_rate);
    for (int step = 0; step < cfg.steps; ++step) {
        const TrainingBatch batch = prepare_batch(world, schedule, cfg.p_uncond, cfg.batch, rng);
        const auto [loss, grad] = loss_and_grad(net, batch);
        if (!std::isfinite(loss))
            throw NumericError("train: loss diverged (non-finite) at step " +
                               std::to_string(step));
        adam.step(net.params(), grad);
        if (observer) observer(step, loss);
    }
    return net;
}

}  // namespace glab
