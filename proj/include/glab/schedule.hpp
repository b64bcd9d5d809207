#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "glab/errors.hpp"

namespace glab {

// Numerically stable logistic sigmoid.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Signal/noise scales as functions of the log signal-to-noise ratio alone:
// alpha^2 = sigmoid(lambda), sigma^2 = sigmoid(-lambda), so alpha^2 + sigma^2 = 1.
inline double alpha_squared_at(double lambda) { return sigmoid(lambda); }
inline double sigma_squared_at(double lambda) { return sigmoid(-lambda); }
inline double alpha_at(double lambda) { return std::sqrt(sigmoid(lambda)); }
inline double sigma_at(double lambda) { return std::sqrt(sigmoid(-lambda)); }

// Log-SNR endpoints plus the constants of the truncated hyperbolic secant
// distribution used for training-time lambda draws:
// lambda = -2 log tan(a u + b) for uniform u, with
// b = arctan(e^(-lambda_max/2)) and a = arctan(e^(-lambda_min/2)) - b.
struct Schedule {
    double lambda_min = -20.0;
    double lambda_max = 20.0;

    double secant_b() const { return std::atan(std::exp(-lambda_max / 2.0)); }
    double secant_a() const { return std::atan(std::exp(-lambda_min / 2.0)) - secant_b(); }

    void validate() const {
        if (!(lambda_min < lambda_max))
            throw ConfigError("schedule: lambda_min (" + std::to_string(lambda_min) +
                              ") must be < lambda_max (" + std::to_string(lambda_max) + ")");
        if (!(secant_a() > 0.0) || !(secant_b() > 0.0))
            throw ConfigError("schedule: derived secant constants must be positive");
    }

    bool contains(double lambda) const {
        return lambda >= lambda_min && lambda <= lambda_max;
    }
};

struct NoiseLevel {
    double lambda = 0.0;
    double alpha = 1.0;
    double sigma = 0.0;
};

inline void require_in_schedule(const Schedule& s, double lambda) {
    if (lambda < s.lambda_min)
        throw DomainError("lambda " + std::to_string(lambda) + " below lambda_min " +
                          std::to_string(s.lambda_min));
    if (lambda > s.lambda_max)
        throw DomainError("lambda " + std::to_string(lambda) + " above lambda_max " +
                          std::to_string(s.lambda_max));
}

inline NoiseLevel noise_level(const Schedule& s, double lambda) {
    require_in_schedule(s, lambda);
    return NoiseLevel{lambda, alpha_at(lambda), sigma_at(lambda)};
}

// Inverse-transform draw of lambda from the secant distribution. The
// endpoints u = 0 and u = 1 use the closed forms lambda_max and lambda_min
// directly; the tan expression would lose precision there.
inline double sample_lambda(const Schedule& s, double u) {
    if (!(u >= 0.0 && u <= 1.0))
        throw DomainError("u " + std::to_string(u) + " outside [0,1]");
    if (u == 0.0) return s.lambda_max;
    if (u == 1.0) return s.lambda_min;
    const double lambda = -2.0 * std::log(std::tan(s.secant_a() * u + s.secant_b()));
    return std::clamp(lambda, s.lambda_min, s.lambda_max);
}

// Inverse of sample_lambda: the uniform variate that maps to this lambda.
// Note this is the inverse transform u(lambda), which decreases in lambda;
// the probability CDF of the lambda distribution is 1 - u(lambda).
inline double lambda_cdf(const Schedule& s, double lambda) {
    require_in_schedule(s, lambda);
    if (lambda == s.lambda_max) return 0.0;
    if (lambda == s.lambda_min) return 1.0;
    const double u = (std::atan(std::exp(-lambda / 2.0)) - s.secant_b()) / s.secant_a();
    return std::clamp(u, 0.0, 1.0);
}

// Lambda values for uniformly spaced u over [0,1] inclusive, sorted
// increasing: grid[0] = lambda_min, grid[T-1] = lambda_max. The sampler
// walks this order; forward-process uses rise in the reverse direction.
inline std::vector<double> timestep_grid(const Schedule& s, int steps) {
    if (steps < 2)
        throw ConfigError("timestep grid needs T >= 2 to contain both endpoints, got T = " +
                          std::to_string(steps));
    std::vector<double> grid(steps);
    for (int i = 0; i < steps; ++i) {
        const double u = static_cast<double>(steps - 1 - i) / static_cast<double>(steps - 1);
        grid[i] = sample_lambda(s, u);
    }
    return grid;
}

}  // namespace glab
