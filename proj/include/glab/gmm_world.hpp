#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "glab/common.hpp"
#include "glab/errors.hpp"
#include "glab/process.hpp"
#include "glab/rng.hpp"
#include "glab/schedule.hpp"

namespace glab {

// One mixture component: an isotropic Gaussian class-conditional.
struct GmmClass {
    Vec mean;
    double stddev = 1.0;
    double prior = 1.0;
};

// Labeled mixture-of-Gaussians data distribution. Everything downstream
// (noisy marginals, scores, the Bayes classifier, guided densities) is
// closed-form, which is what makes this world usable as an oracle.
struct GmmWorld {
    int dims = 0;
    std::vector<GmmClass> classes;

    int num_classes() const { return static_cast<int>(classes.size()); }

    void validate() const {
        if (dims < 1) throw ConfigError("world: dims must be >= 1");
        if (classes.empty()) throw ConfigError("world: needs at least one class");
        double prior_sum = 0.0;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            const auto& k = classes[c];
            if (k.mean.size() != dims)
                throw ConfigError("world: class " + std::to_string(c) + " mean has dim " +
                                  std::to_string(k.mean.size()) + ", expected " +
                                  std::to_string(dims));
            if (!(k.stddev > 0.0))
                throw ConfigError("world: class " + std::to_string(c) + " std must be > 0");
            if (!(k.prior > 0.0))
                throw ConfigError("world: class " + std::to_string(c) + " prior must be > 0");
            prior_sum += k.prior;
        }
        if (std::abs(prior_sum - 1.0) > 1e-12)
            throw ConfigError("world: priors sum to " + std::to_string(prior_sum) +
                              ", expected 1 within 1e-12");
    }

    void require_class(int c) const {
        if (c < 0 || c >= num_classes())
            throw LookupError("class index " + std::to_string(c) + " out of range [0, " +
                              std::to_string(num_classes()) + ")");
    }
};

// Three equal-prior classes on an equilateral triangle of circumradius 2,
// each with std 0.3. The default fixture world for densities and sweeps.
inline GmmWorld triangle_world() {
    const double r = 2.0;
    const double rt3 = std::sqrt(3.0);
    GmmWorld w;
    w.dims = 2;
    w.classes = {
        {(Vec(2) << 0.0, r).finished(), 0.3, 1.0 / 3.0},
        {(Vec(2) << -r * rt3 / 2.0, -r / 2.0).finished(), 0.3, 1.0 / 3.0},
        {(Vec(2) << r * rt3 / 2.0, -r / 2.0).finished(), 0.3, 1.0 / 3.0},
    };
    return w;
}

inline double log_isotropic_normal(const Vec& x, const Vec& mean, double variance) {
    const double d = static_cast<double>(x.size());
    return -0.5 * d * std::log(2.0 * M_PI * variance) -
           (x - mean).squaredNorm() / (2.0 * variance);
}

// (x, c) with c ~ priors and x ~ N(mu_c, s_c^2 I).
inline std::pair<Vec, int> sample_data(const GmmWorld& world, Rng& rng) {
    const double u = rng.uniform();
    int c = world.num_classes() - 1;
    double acc = 0.0;
    for (int i = 0; i < world.num_classes(); ++i) {
        acc += world.classes[i].prior;
        if (u < acc) {
            c = i;
            break;
        }
    }
    const auto& k = world.classes[c];
    return {k.mean + k.stddev * rng.normal_vec(world.dims), c};
}

namespace detail {

// Variance of the class-c noisy marginal q(z_lambda | c) = N(alpha mu_c, (alpha^2 s_c^2 + sigma^2) I).
inline double marginal_variance(const GmmClass& k, double alpha, double sigma) {
    return alpha * alpha * k.stddev * k.stddev + sigma * sigma;
}

// Per-class log joint log pi_c + log q(z | c) at signal scale alpha, noise
// scale sigma. alpha = 1, sigma = 0 gives the data-space densities.
inline Vec log_class_joint(const GmmWorld& world, const Vec& z, double alpha, double sigma) {
    Vec out(world.num_classes());
    for (int c = 0; c < world.num_classes(); ++c) {
        const auto& k = world.classes[c];
        out[c] = std::log(k.prior) +
                 log_isotropic_normal(z, alpha * k.mean, marginal_variance(k, alpha, sigma));
    }
    return out;
}

inline Vec softmax(const Vec& logits) {
    const double m = logits.maxCoeff();
    Vec p = (logits.array() - m).exp();
    return p / p.sum();
}

}  // namespace detail

// Exact eps-prediction for the class-c noisy marginal:
// eps*(z, c) = sigma (z - alpha mu_c) / (alpha^2 s_c^2 + sigma^2).
inline Vec exact_cond_eps(const GmmWorld& world, const Latent& z, int c) {
    world.require_class(c);
    const auto& k = world.classes[c];
    const double alpha = alpha_at(z.lambda);
    const double sigma = sigma_at(z.lambda);
    return sigma * (z.z - alpha * k.mean) / detail::marginal_variance(k, alpha, sigma);
}

// Bayes posterior over classes given the noisy latent:
// p(c | z) proportional to pi_c N(z; alpha mu_c, (alpha^2 s_c^2 + sigma^2) I).
inline Vec bayes_posterior(const GmmWorld& world, const Latent& z) {
    return detail::softmax(
        detail::log_class_joint(world, z.z, alpha_at(z.lambda), sigma_at(z.lambda)));
}

// Data-space Bayes classifier (the lambda -> lambda_max limit).
inline Vec bayes_posterior_data(const GmmWorld& world, const Vec& x) {
    return detail::softmax(detail::log_class_joint(world, x, 1.0, 0.0));
}

// Unconditional eps-prediction as the posterior-weighted mixture of the
// conditional ones; this is the mixture identity sum_c p(x|c) p(c) = p(x)
// applied to scores.
inline Vec exact_uncond_eps(const GmmWorld& world, const Latent& z) {
    const Vec post = bayes_posterior(world, z);
    Vec out = Vec::Zero(z.z.size());
    for (int c = 0; c < world.num_classes(); ++c)
        out += post[c] * exact_cond_eps(world, z, c);
    return out;
}

// Gradient of the log Bayes posterior in z:
// grad log p(c | z) = -(eps*(z,c) - eps*(z)) / sigma.
inline Vec classifier_grad(const GmmWorld& world, const Latent& z, int c) {
    world.require_class(c);
    const double sigma = sigma_at(z.lambda);
    return -(exact_cond_eps(world, z, c) - exact_uncond_eps(world, z)) / sigma;
}

// ---------------------------------------------------------------------------
// Guided density grids (data space, 2-D worlds)

struct GridSpec {
    double x_lo = -4.0, x_hi = 4.0;
    double y_lo = -4.0, y_hi = 4.0;
    int resolution = 256;  // points per axis
};

// Normalized guided class-conditional densities p(x|c) p(c|x)^w on a
// uniform grid, plus their prior-weighted mixture. values(iy, ix) holds the
// density at (x_lo + ix hx, y_lo + iy hy).
struct DensityGrid {
    GridSpec spec;
    double w = 0.0;
    std::vector<Mat> class_density;
    Mat mixture;

    double x_at(int ix) const {
        return spec.x_lo + (spec.x_hi - spec.x_lo) * ix / (spec.resolution - 1);
    }
    double y_at(int iy) const {
        return spec.y_lo + (spec.y_hi - spec.y_lo) * iy / (spec.resolution - 1);
    }
    double cell_dx() const { return (spec.x_hi - spec.x_lo) / (spec.resolution - 1); }
    double cell_dy() const { return (spec.y_hi - spec.y_lo) / (spec.resolution - 1); }
};

namespace detail {

inline double trapezoid_weight(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

// Trapezoid integral of a grid of values over the spec box.
inline double grid_integral(const Mat& values, const GridSpec& spec) {
    const int n = spec.resolution;
    double acc = 0.0;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            acc += trapezoid_weight(iy, n) * trapezoid_weight(ix, n) * values(iy, ix);
    const double hx = (spec.x_hi - spec.x_lo) / (n - 1);
    const double hy = (spec.y_hi - spec.y_lo) / (n - 1);
    return acc * hx * hy;
}

// Unnormalized guided log density log p(x|c) + w log p(c|x) at a point.
inline double guided_log_value(const GmmWorld& world, const Vec& x, int c, double w) {
    const Vec logj = log_class_joint(world, x, 1.0, 0.0);
    const double m = logj.maxCoeff();
    const double log_norm = m + std::log((logj.array() - m).exp().sum());
    const double log_cond = logj[c] - std::log(world.classes[c].prior);
    const double log_post = logj[c] - log_norm;
    return log_cond + w * log_post;
}

inline Mat guided_class_grid(const GmmWorld& world, int c, double w, const GridSpec& spec) {
    const int n = spec.resolution;
    Mat values(n, n);
    Vec x(2);
    for (int iy = 0; iy < n; ++iy) {
        x[1] = spec.y_lo + (spec.y_hi - spec.y_lo) * iy / (n - 1);
        for (int ix = 0; ix < n; ++ix) {
            x[0] = spec.x_lo + (spec.x_hi - spec.x_lo) * ix / (n - 1);
            values(iy, ix) = std::exp(guided_log_value(world, x, c, w));
        }
    }
    return values;
}

}  // namespace detail

// Per-class guided densities, each normalized by trapezoid quadrature, and
// the prior-weighted mixture. Rejects grids that truncate visible mass
// (boundary above 1e-8 of the peak) or whose quadrature has not converged
// (full- vs half-resolution integrals differing by more than 1e-3).
inline DensityGrid guided_density_grid(const GmmWorld& world, double w, const GridSpec& spec) {
    if (world.dims != 2) throw ConfigError("guided_density_grid: needs a 2-D world");
    if (!(w >= 0.0)) throw ConfigError("guided_density_grid: w must be >= 0");
    if (spec.resolution < 8) throw ConfigError("guided_density_grid: resolution must be >= 8");
    if (!(spec.x_lo < spec.x_hi) || !(spec.y_lo < spec.y_hi))
        throw ConfigError("guided_density_grid: empty bounds box");

    DensityGrid grid;
    grid.spec = spec;
    grid.w = w;
    grid.mixture = Mat::Zero(spec.resolution, spec.resolution);

    GridSpec coarse = spec;
    coarse.resolution = spec.resolution / 2 + 1;

    for (int c = 0; c < world.num_classes(); ++c) {
        Mat values = detail::guided_class_grid(world, c, w, spec);

        const double peak = values.maxCoeff();
        double boundary = 0.0;
        const int n = spec.resolution;
        for (int i = 0; i < n; ++i) {
            boundary = std::max({boundary, values(0, i), values(n - 1, i), values(i, 0),
                                 values(i, n - 1)});
        }
        if (boundary > 1e-8 * peak)
            throw QuadratureError("guided_density_grid: boundary density " +
                                  std::to_string(boundary / peak) +
                                  " of peak for class " + std::to_string(c) +
                                  "; enlarge the bounds");

        const double integral = detail::grid_integral(values, spec);
        const double integral_coarse =
            detail::grid_integral(detail::guided_class_grid(world, c, w, coarse), coarse);
        const double residual = std::abs(integral - integral_coarse) / integral;
        if (residual > 1e-3)
            throw QuadratureError("guided_density_grid: normalization residual " +
                                  std::to_string(residual) + " above 1e-3 for class " +
                                  std::to_string(c) + "; refine the grid");

        values /= integral;
        grid.mixture += world.classes[c].prior * values;
        grid.class_density.push_back(std::move(values));
    }
    return grid;
}

// Differential entropy (nats) of one normalized class grid by quadrature.
inline double differential_entropy(const DensityGrid& grid, int c) {
    if (c < 0 || c >= static_cast<int>(grid.class_density.size()))
        throw LookupError("differential_entropy: class index " + std::to_string(c));
    const Mat& p = grid.class_density[c];
    const int n = grid.spec.resolution;
    double acc = 0.0;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            const double v = p(iy, ix);
            if (v > 0.0)
                acc -= detail::trapezoid_weight(iy, n) * detail::trapezoid_weight(ix, n) * v *
                       std::log(v);
        }
    return acc * grid.cell_dx() * grid.cell_dy();
}

}  // namespace glab
