#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glab/denoiser.hpp"
#include "glab/errors.hpp"
#include "glab/gmm_world.hpp"
#include "glab/guidance.hpp"
#include "glab/parallel.hpp"
#include "glab/process.hpp"
#include "glab/rng.hpp"
#include "glab/schedule.hpp"

namespace glab {

struct SamplerConfig {
    int steps = 1024;   // T, the number of grid points
    double v = 0.3;     // reverse-variance interpolation exponent
    Schedule schedule;

    void validate() const {
        if (steps < 2)
            throw ConfigError("sampler.T must be >= 2 (the grid must contain both endpoints), got " +
                              std::to_string(steps));
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError("sampler.v must be in [0,1], got " + std::to_string(v));
        schedule.validate();
    }
};

// Per-step record for white-box tests: the transition variance actually
// used at step t (0 for the final, noiseless step).
struct StepTrace {
    int t = 0;
    double lambda = 0.0;
    double lambda_next = 0.0;
    double variance = 0.0;
};
using StepObserver = std::function<void(const StepTrace&)>;

namespace detail {

template <Denoiser D>
Vec guided_eps_at(const D& denoiser, const GmmWorld* world, const GuidanceConfig& guidance,
                  const Vec& z, double lambda, int klass) {
    const Conditioning cond = Conditioning::of_class(klass);
    switch (guidance.mode) {
        case GuidanceMode::kNone:
            return denoiser.predict_eps(z, lambda, cond);
        case GuidanceMode::kClassifierFree: {
            const Vec eps_cond = denoiser.predict_eps(z, lambda, cond);
            const Vec eps_uncond = denoiser.predict_eps(z, lambda, Conditioning::null_token());
            return cf_guided_eps(eps_cond, eps_uncond, guidance.w);
        }
        case GuidanceMode::kClassifier: {
            if (world == nullptr)
                throw ConfigError("classifier guidance needs the oracle world for its classifier");
            const Vec eps_cond = denoiser.predict_eps(z, lambda, cond);
            const Vec grad = classifier_grad(*world, Latent{z, lambda}, klass);
            return classifier_guided_eps(eps_cond, grad, sigma_at(lambda), guidance.w);
        }
    }
    throw ConfigError("unknown guidance mode");
}

}  // namespace detail

// One reverse chain: z_1 ~ N(0, I) at lambda_min, then T guided denoising
// steps along the increasing lambda grid. Every step but the last draws
// fresh noise with the v-interpolated variance; the last returns the
// denoised estimate itself.
template <Denoiser D>
Vec ancestral_sample(const D& denoiser, const GmmWorld* world, const GuidanceConfig& guidance,
                     const SamplerConfig& cfg, int klass, Rng& rng,
                     const StepObserver& observer = nullptr) {
    cfg.validate();
    guidance.validate();
    if (world != nullptr) world->require_class(klass);

    const std::vector<double> grid = timestep_grid(cfg.schedule, cfg.steps);
    const int dims = denoiser.data_dim();

    Vec z = rng.normal_vec(dims);
    Vec x_hat;
    for (int t = 0; t < cfg.steps; ++t) {
        const double lambda = grid[t];
        const Vec eps = detail::guided_eps_at(denoiser, world, guidance, z, lambda, klass);
        x_hat = x_from_eps(Latent{z, lambda}, eps);
        if (!all_finite(x_hat))
            throw NumericError("ancestral_sample: non-finite denoised estimate at step t = " +
                               std::to_string(t + 1));
        if (t + 1 < cfg.steps) {
            const double lambda_next = grid[t + 1];
            const GaussianParams post = posterior_params(Latent{z, lambda}, x_hat, lambda_next);
            const double variance = reverse_variance(lambda, lambda_next, cfg.v);
            if (observer) observer(StepTrace{t + 1, lambda, lambda_next, variance});
            z = post.mean + std::sqrt(variance) * rng.normal_vec(dims);
            if (!all_finite(z))
                throw NumericError("ancestral_sample: non-finite latent at step t = " +
                                   std::to_string(t + 2));
        } else {
            if (observer) observer(StepTrace{t + 1, lambda, lambda, 0.0});
        }
    }
    return x_hat;
}

struct LabeledSamples {
    Mat x;                    // one sample per row
    std::vector<int> labels;  // intended class per row

    int count() const { return static_cast<int>(x.rows()); }
    int dims() const { return static_cast<int>(x.cols()); }
};

// n independent chains. Each chain derives its own stream from (seed,
// chain index), so the batch is reproducible regardless of the thread
// partition. klass empty means the intended class of each chain is drawn
// from the world priors.
template <Denoiser D>
LabeledSamples sample_batch(const D& denoiser, const GmmWorld& world,
                            const GuidanceConfig& guidance, const SamplerConfig& cfg,
                            std::optional<int> klass, int n, std::uint64_t seed) {
    cfg.validate();
    guidance.validate();
    if (n < 0) throw ConfigError("sample_batch: n must be >= 0");
    if (klass) world.require_class(*klass);

    LabeledSamples out;
    out.x = Mat::Zero(n, world.dims);
    out.labels.assign(static_cast<std::size_t>(n), 0);
    if (n == 0) return out;

    parallel_for(n, [&](int i) {
        Rng rng(derive_stream_seed(seed, static_cast<std::uint64_t>(i)));
        int c;
        if (klass) {
            c = *klass;
        } else {
            std::vector<double> priors(world.num_classes());
            for (int k = 0; k < world.num_classes(); ++k) priors[k] = world.classes[k].prior;
            c = rng.categorical(priors);
        }
        out.x.row(i) = ancestral_sample(denoiser, &world, guidance, cfg, c, rng).transpose();
        out.labels[static_cast<std::size_t>(i)] = c;
    });
    return out;
}

}  // namespace glab
