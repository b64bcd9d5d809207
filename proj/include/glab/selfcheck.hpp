#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "glab/common.hpp"
#include "glab/gmm_world.hpp"
#include "glab/guidance.hpp"
#include "glab/process.hpp"
#include "glab/rng.hpp"
#include "glab/schedule.hpp"

namespace glab {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CheckOptions {
    std::uint64_t seed = 0x51ab5eedULL;
    Schedule schedule{};
    GmmWorld world = triangle_world();
    // Fault-injection knob for exercising the failure path: scales the
    // transition variance inside the marginal-composition identity.
    double transition_variance_perturbation = 0.0;
};

inline bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.passed) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Small numeric helpers used only by the check battery

namespace checkdetail {

// Asymptotic Kolmogorov tail Q(x) = 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2).
inline double kolmogorov_tail(double x) {
    if (x <= 0.0) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1) ? term : -term;
        if (term < 1e-16) break;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

// One-sample KS statistic of values against the uniform CDF on [0,1].
inline double ks_statistic_uniform(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, values[i] - lo, hi - values[i]});
    }
    return d;
}

// Log densities written independently of the score formulas, as the
// differentiation targets for the finite-difference probes.
inline double log_cond_density(const GmmWorld& world, const Vec& z, double lambda, int c) {
    const double alpha = alpha_at(lambda);
    const double sigma = sigma_at(lambda);
    const auto& k = world.classes[static_cast<std::size_t>(c)];
    const double var = alpha * alpha * k.stddev * k.stddev + sigma * sigma;
    return log_isotropic_normal(z, alpha * k.mean, var);
}

inline double log_mixture_density(const GmmWorld& world, const Vec& z, double lambda) {
    double max_log = -1e300;
    std::vector<double> logs(static_cast<std::size_t>(world.num_classes()));
    for (int c = 0; c < world.num_classes(); ++c) {
        logs[static_cast<std::size_t>(c)] =
            std::log(world.classes[static_cast<std::size_t>(c)].prior) +
            log_cond_density(world, z, lambda, c);
        max_log = std::max(max_log, logs[static_cast<std::size_t>(c)]);
    }
    double acc = 0.0;
    for (const double l : logs) acc += std::exp(l - max_log);
    return max_log + std::log(acc);
}

template <typename F>
Vec fd_gradient(const F& f, const Vec& z, double h = 1e-4) {
    Vec grad(z.size());
    Vec probe = z;
    for (int i = 0; i < z.size(); ++i) {
        probe[i] = z[i] + h;
        const double up = f(probe);
        probe[i] = z[i] - h;
        const double down = f(probe);
        probe[i] = z[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline double rel_error(const Vec& got, const Vec& want) {
    return (got - want).norm() / std::max(want.norm(), 1e-8);
}

inline std::string describe(double worst, double bound) {
    std::ostringstream os;
    os << "worst " << worst << " vs bound " << bound;
    return os.str();
}

}  // namespace checkdetail

// The named analytic-identity battery behind the check subcommand. Every
// entry is deterministic given the options seed.
inline std::vector<CheckResult> run_self_checks(const CheckOptions& opt = {}) {
    using namespace checkdetail;
    std::vector<CheckResult> results;
    const Schedule& sched = opt.schedule;
    const GmmWorld& world = opt.world;

    auto add = [&](const std::string& name, double worst, double bound) {
        results.push_back(CheckResult{name, worst <= bound, describe(worst, bound)});
    };

    // -- schedule -----------------------------------------------------------
    {
        double worst = std::abs(sample_lambda(sched, 0.0) - sched.lambda_max);
        worst = std::max(worst, std::abs(lambda_cdf(sched, sched.lambda_max)));
        add("schedule/endpoint-max", worst, 0.0);
    }
    {
        double worst = std::abs(sample_lambda(sched, 1.0) - sched.lambda_min);
        worst = std::max(worst, std::abs(lambda_cdf(sched, sched.lambda_min) - 1.0));
        add("schedule/endpoint-min", worst, 0.0);
    }
    {
        Schedule sym{-std::max(std::abs(sched.lambda_min), std::abs(sched.lambda_max)),
                     std::max(std::abs(sched.lambda_min), std::abs(sched.lambda_max))};
        add("schedule/median-symmetric", std::abs(sample_lambda(sym, 0.5)), 1e-12);
    }
    {
        Rng rng(opt.seed);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double u = rng.uniform();
            worst = std::max(worst, std::abs(lambda_cdf(sched, sample_lambda(sched, u)) - u));
            const double lambda =
                sched.lambda_min + rng.uniform() * (sched.lambda_max - sched.lambda_min);
            worst = std::max(worst,
                             std::abs(sample_lambda(sched, lambda_cdf(sched, lambda)) - lambda));
        }
        add("schedule/inverse-roundtrip", worst, 1e-10);
    }
    {
        bool ok = true;
        const int n = 2001;
        double prev_alpha = 0.0, prev_sigma = 1.0;
        for (int i = 0; i < n; ++i) {
            const double lambda =
                sched.lambda_min + (sched.lambda_max - sched.lambda_min) * i / (n - 1);
            const NoiseLevel lv = noise_level(sched, lambda);
            if (i > 0 && !(lv.alpha > prev_alpha && lv.sigma < prev_sigma)) ok = false;
            if (i > 0 && i < n - 1 && !(lv.alpha > 0 && lv.alpha < 1 && lv.sigma > 0 && lv.sigma < 1))
                ok = false;
            prev_alpha = lv.alpha;
            prev_sigma = lv.sigma;
        }
        results.push_back(CheckResult{"schedule/alpha-sigma-monotone", ok,
                                      ok ? "strictly monotone on 2001-point grid" : "violated"});
    }
    {
        Rng rng(opt.seed + 1);
        const int n = 100000;
        std::vector<double> u_values(n);
        for (int i = 0; i < n; ++i)
            u_values[static_cast<std::size_t>(i)] =
                lambda_cdf(sched, sample_lambda(sched, rng.uniform()));
        const double d = ks_statistic_uniform(std::move(u_values));
        const double p = kolmogorov_tail(std::sqrt(static_cast<double>(n)) * d);
        std::ostringstream os;
        os << "D = " << d << ", p = " << p << " (significance 0.01)";
        results.push_back(CheckResult{"schedule/lambda-ks", p > 0.01, os.str()});
    }

    // -- process ------------------------------------------------------------
    {
        Rng rng(opt.seed + 2);
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double lambda =
                sched.lambda_min + rng.uniform() * (sched.lambda_max - sched.lambda_min);
            const double gap = 1e-6 + rng.uniform() * (sched.lambda_max - lambda);
            const double lambda_prime = std::min(lambda + gap, sched.lambda_max);
            if (!(lambda < lambda_prime)) continue;
            const double tv = transition_variance(lambda, lambda_prime) *
                              (1.0 + opt.transition_variance_perturbation);
            const double ratio2 = alpha_squared_at(lambda) / alpha_squared_at(lambda_prime);
            const double lhs = tv + ratio2 * sigma_squared_at(lambda_prime);
            worst = std::max(worst,
                             std::abs(lhs - sigma_squared_at(lambda)) / sigma_squared_at(lambda));
        }
        add("process/marginal-composition", worst, 1e-12);
    }
    {
        Rng rng(opt.seed + 3);
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double lambda =
                sched.lambda_min + rng.uniform() * (sched.lambda_max - sched.lambda_min) * 0.5;
            const double lambda_prime =
                lambda + 1e-3 + rng.uniform() * (sched.lambda_max - lambda - 1e-3);
            const Vec x = rng.normal_vec(world.dims);
            // Mean of the posterior mean over z ~ q(z_lambda | x) is alpha' x.
            const Vec mean_z = alpha_at(lambda) * x;
            const GaussianParams p = posterior_params(Latent{mean_z, lambda}, x, lambda_prime);
            worst = std::max(worst, (p.mean - alpha_at(lambda_prime) * x).norm() /
                                        std::max(1.0, x.norm()));
            // Total variance law: tilde sigma^2 + (e^(l-l') alpha'/alpha)^2 sigma_l^2 = sigma'^2.
            const double carry = std::exp(lambda - lambda_prime) * alpha_at(lambda_prime) /
                                 alpha_at(lambda);
            const double total = p.variance + carry * carry * sigma_squared_at(lambda);
            worst = std::max(worst, std::abs(total - sigma_squared_at(lambda_prime)));
        }
        add("process/posterior-consistency", worst, 1e-12);
    }
    {
        // Empirical two-route moments: forward to lambda' then transition
        // down to lambda, against the direct marginal at lambda.
        Rng rng(opt.seed + 4);
        const double lambda = -1.5, lambda_prime = 2.0;
        const Vec x = (Vec(world.dims).setLinSpaced(world.dims, 0.4, 1.2));
        const int n = 100000;
        Mat draws(n, world.dims);
        const double alpha_ratio = alpha_at(lambda) / alpha_at(lambda_prime);
        const double step_sd = std::sqrt(transition_variance(lambda, lambda_prime));
        const NoiseLevel prime = NoiseLevel{lambda_prime, alpha_at(lambda_prime),
                                            sigma_at(lambda_prime)};
        for (int i = 0; i < n; ++i) {
            const Vec z_prime = prime.alpha * x + prime.sigma * rng.normal_vec(world.dims);
            draws.row(i) =
                (alpha_ratio * z_prime + step_sd * rng.normal_vec(world.dims)).transpose();
        }
        const Vec want_mean = alpha_at(lambda) * x;
        const double want_var = sigma_squared_at(lambda);
        const Vec got_mean = draws.colwise().mean().transpose();
        double worst = 0.0;
        const double mean_se = std::sqrt(want_var / n);
        for (int j = 0; j < world.dims; ++j)
            worst = std::max(worst, std::abs(got_mean[j] - want_mean[j]) / (3.0 * mean_se));
        const double var_se = want_var * std::sqrt(2.0 / (n - 1.0));
        for (int j = 0; j < world.dims; ++j) {
            const double got_var =
                (draws.col(j).array() - got_mean[j]).square().sum() / (n - 1.0);
            worst = std::max(worst, std::abs(got_var - want_var) / (3.0 * var_se));
        }
        add("process/moments-empirical-3se", worst, 1.0);
    }
    {
        Rng rng(opt.seed + 5);
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double lambda =
                sched.lambda_min + rng.uniform() * (sched.lambda_max - sched.lambda_min);
            const Vec x = 2.0 * rng.normal_vec(world.dims);
            const Vec eps = rng.normal_vec(world.dims);
            const Latent z = forward_marginal(x, noise_level(sched, lambda), eps);
            worst = std::max(worst, (x_from_eps(z, eps) - x).norm() / std::max(1.0, x.norm()));
        }
        add("process/eps-roundtrip", worst, 1e-9);
    }

    // -- oracle world -------------------------------------------------------
    auto random_probe = [&](Rng& rng) {
        const double lambda =
            sched.lambda_min + rng.uniform() * (sched.lambda_max - sched.lambda_min);
        const int c = rng.categorical(std::vector<double>(
            static_cast<std::size_t>(world.num_classes()), 1.0 / world.num_classes()));
        const auto& k = world.classes[static_cast<std::size_t>(c)];
        const double alpha = alpha_at(lambda);
        const double spread = std::sqrt(alpha * alpha * k.stddev * k.stddev +
                                        sigma_squared_at(lambda));
        const Vec z = alpha * k.mean + spread * rng.normal_vec(world.dims);
        return std::make_tuple(z, lambda, c);
    };
    {
        Rng rng(opt.seed + 6);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto [z, lambda, c] = random_probe(rng);
            const Vec fd = fd_gradient(
                [&](const Vec& p) { return log_cond_density(world, p, lambda, c); }, z);
            const Vec want = -sigma_at(lambda) * fd;
            worst = std::max(worst, rel_error(exact_cond_eps(world, Latent{z, lambda}, c), want));
        }
        add("oracle/cond-score-fd", worst, 1e-6);
    }
    {
        Rng rng(opt.seed + 7);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto [z, lambda, c] = random_probe(rng);
            (void)c;
            const Vec fd = fd_gradient(
                [&](const Vec& p) { return log_mixture_density(world, p, lambda); }, z);
            const Vec want = -sigma_at(lambda) * fd;
            worst = std::max(worst, rel_error(exact_uncond_eps(world, Latent{z, lambda}), want));
        }
        add("oracle/uncond-score-fd", worst, 1e-6);
    }
    {
        Rng rng(opt.seed + 8);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto [z, lambda, c] = random_probe(rng);
            const Vec fd = fd_gradient(
                [&](const Vec& p) {
                    return std::log(bayes_posterior(world, Latent{p, lambda})[c]);
                },
                z, 5e-5);
            const Vec got = classifier_grad(world, Latent{z, lambda}, c);
            // Absolute below gradient norm 1, relative above; a pure relative
            // criterion is dominated by differencing noise where the gradient
            // itself vanishes.
            worst = std::max(worst, (got - fd).norm() / std::max(1.0, fd.norm()));
        }
        add("oracle/classifier-grad-fd", worst, 1e-6);
    }
    {
        Rng rng(opt.seed + 9);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto [z, lambda, c] = random_probe(rng);
            (void)c;
            const Vec post = bayes_posterior(world, Latent{z, lambda});
            worst = std::max(worst, std::abs(post.sum() - 1.0));
            // Naive-weights route must agree with the log-sum-exp route.
            Vec naive(world.num_classes());
            for (int k = 0; k < world.num_classes(); ++k)
                naive[k] = world.classes[static_cast<std::size_t>(k)].prior *
                           std::exp(log_cond_density(world, z, lambda, k));
            naive /= naive.sum();
            worst = std::max(worst, (naive - post).cwiseAbs().maxCoeff());
        }
        add("oracle/posterior-normalization", worst, 1e-12);
    }

    // -- guidance equivalences ------------------------------------------------
    {
        Rng rng(opt.seed + 10);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const auto [z, lambda, c] = random_probe(rng);
            const double w = 5.0 * rng.uniform();
            const Latent zl{z, lambda};
            const Vec eps_c = exact_cond_eps(world, zl, c);
            const Vec eps_u = exact_uncond_eps(world, zl);
            const Vec via_cf = cf_guided_eps(eps_c, eps_u, w);
            const Vec via_classifier = classifier_guided_eps(
                eps_c, classifier_grad(world, zl, c), sigma_at(lambda), w);
            worst = std::max(worst,
                             (via_cf - via_classifier).norm() / std::max(1.0, via_cf.norm()));
        }
        add("guidance/cf-equals-classifier", worst, 1e-12);
    }
    {
        Rng rng(opt.seed + 11);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const auto [z, lambda, c] = random_probe(rng);
            const double w = 5.0 * rng.uniform();
            const Latent zl{z, lambda};
            const Vec eps_c = exact_cond_eps(world, zl, c);
            const Vec eps_u = exact_uncond_eps(world, zl);
            const Vec grad = classifier_grad(world, zl, c);
            const double sigma = sigma_at(lambda);
            const Vec from_uncond = classifier_guided_eps(eps_u, grad, sigma, w + 1.0);
            const Vec from_cond = classifier_guided_eps(eps_c, grad, sigma, w);
            worst = std::max(worst,
                             (from_uncond - from_cond).norm() / std::max(1.0, from_cond.norm()));
        }
        add("guidance/weight-shift", worst, 1e-12);
    }

    return results;
}

}  // namespace glab
