#pragma once

#include <cmath>
#include <string>

#include "glab/common.hpp"
#include "glab/errors.hpp"
#include "glab/schedule.hpp"

namespace glab {

// A noisy latent together with the log-SNR it lives at.
struct Latent {
    Vec z;
    double lambda = 0.0;
};

// Isotropic Gaussian: mean vector plus a single scalar variance.
struct GaussianParams {
    Vec mean;
    double variance = 0.0;
};

namespace detail {
inline void require_decreasing_snr(double lambda, double lambda_prime, const char* what) {
    if (!(lambda < lambda_prime))
        throw OrderingError(std::string(what) + ": requires lambda < lambda_prime, got lambda = " +
                            std::to_string(lambda) + ", lambda_prime = " +
                            std::to_string(lambda_prime));
}
}  // namespace detail

// z_lambda = alpha x + sigma eps.
inline Latent forward_marginal(const Vec& x, const NoiseLevel& level, const Vec& eps) {
    if (x.size() != eps.size())
        throw ShapeError("forward_marginal: x has dim " + std::to_string(x.size()) +
                         " but eps has dim " + std::to_string(eps.size()));
    return Latent{level.alpha * x + level.sigma * eps, level.lambda};
}

// Variance of the forward transition toward lower SNR:
// sigma^2_{lambda|lambda'} = (1 - e^(lambda - lambda')) sigma_lambda^2.
// The 1 - e^x factor goes through expm1 so tiny gaps keep full precision.
inline double transition_variance(double lambda, double lambda_prime) {
    detail::require_decreasing_snr(lambda, lambda_prime, "transition_variance");
    return -std::expm1(lambda - lambda_prime) * sigma_squared_at(lambda);
}

// Parameters of q(z_lambda' | z_lambda, x) for lambda < lambda':
// mean = e^(lambda-lambda') (alpha'/alpha) z + (1 - e^(lambda-lambda')) alpha' x,
// variance = (1 - e^(lambda-lambda')) sigma'^2.
inline GaussianParams posterior_params(const Latent& z, const Vec& x, double lambda_prime) {
    detail::require_decreasing_snr(z.lambda, lambda_prime, "posterior_params");
    if (z.z.size() != x.size())
        throw ShapeError("posterior_params: z has dim " + std::to_string(z.z.size()) +
                         " but x has dim " + std::to_string(x.size()));
    const double ratio = std::exp(z.lambda - lambda_prime);
    const double one_minus = -std::expm1(z.lambda - lambda_prime);
    const double alpha_prime = alpha_at(lambda_prime);
    const double alpha = alpha_at(z.lambda);
    GaussianParams out;
    out.mean = ratio * (alpha_prime / alpha) * z.z + one_minus * alpha_prime * x;
    out.variance = one_minus * sigma_squared_at(lambda_prime);
    return out;
}

// Reverse-transition variance: geometric interpolation between the
// conditioned posterior variance (v = 0) and the forward transition
// variance (v = 1).
inline double reverse_variance(double lambda, double lambda_prime, double v) {
    detail::require_decreasing_snr(lambda, lambda_prime, "reverse_variance");
    if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError("reverse_variance: v " + std::to_string(v) + " outside [0,1]");
    const double one_minus = -std::expm1(lambda - lambda_prime);
    const double posterior_var = one_minus * sigma_squared_at(lambda_prime);
    const double forward_var = one_minus * sigma_squared_at(lambda);
    return std::pow(posterior_var, 1.0 - v) * std::pow(forward_var, v);
}

// x = (z - sigma eps_hat) / alpha. alpha underflows only for lambda below
// roughly -1480 in double precision; guarded regardless.
inline Vec x_from_eps(const Latent& z, const Vec& eps_hat) {
    if (z.z.size() != eps_hat.size())
        throw ShapeError("x_from_eps: z has dim " + std::to_string(z.z.size()) +
                         " but eps_hat has dim " + std::to_string(eps_hat.size()));
    const double alpha = alpha_at(z.lambda);
    if (alpha == 0.0 || !std::isfinite(alpha))
        throw NumericError("x_from_eps: alpha underflow at lambda = " + std::to_string(z.lambda));
    return (z.z - sigma_at(z.lambda) * eps_hat) / alpha;
}

}  // namespace glab
