#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "glab/common.hpp"
#include "glab/denoiser.hpp"
#include "glab/errors.hpp"
#include "glab/gmm_world.hpp"
#include "glab/rng.hpp"
#include "glab/sampler.hpp"
#include "glab/schedule.hpp"

namespace glab {

// ---------------------------------------------------------------------------
// Score accuracy against the oracle

struct ProbeSpec {
    int strata = 8;        // lambda strata, uniform in the u variable
    int per_stratum = 128;
    std::uint64_t seed = 0;
};

struct ScoreMse {
    std::vector<double> per_stratum;
    double overall = 0.0;
};

// Mean squared eps-prediction error against the exact scores, probed at
// (z, lambda, c) with lambda stratified across the schedule and
// z ~ q(z_lambda | x), x ~ class c.
template <Denoiser D>
ScoreMse score_mse(const D& denoiser, const GmmWorld& world, const Schedule& schedule,
                   const ProbeSpec& probes = {}) {
    if (probes.strata < 1 || probes.per_stratum < 1)
        throw ConfigError("score_mse: probe counts must be >= 1");
    Rng rng(probes.seed);
    ScoreMse out;
    out.per_stratum.reserve(static_cast<std::size_t>(probes.strata));
    double total = 0.0;
    for (int s = 0; s < probes.strata; ++s) {
        double acc = 0.0;
        for (int i = 0; i < probes.per_stratum; ++i) {
            const double u = (s + rng.uniform()) / probes.strata;
            const double lambda = sample_lambda(schedule, u);
            const auto [x, c] = sample_data(world, rng);
            const NoiseLevel level = noise_level(schedule, lambda);
            const Latent z = forward_marginal(x, level, rng.normal_vec(world.dims));
            const Vec predicted = denoiser.predict_eps(z.z, lambda, Conditioning::of_class(c));
            const Vec exact = exact_cond_eps(world, z, c);
            acc += (predicted - exact).squaredNorm();
        }
        out.per_stratum.push_back(acc / probes.per_stratum);
        total += acc;
    }
    out.overall = total / (static_cast<double>(probes.strata) * probes.per_stratum);
    return out;
}

// ---------------------------------------------------------------------------
// Inception-score analog with the exact Bayes classifier

// exp of the mean KL from the empirical marginal class distribution to the
// per-sample Bayes posterior, evaluated in data space. Always >= 1.
inline double confidence_score(const LabeledSamples& samples, const GmmWorld& world) {
    if (samples.count() == 0) throw DomainError("confidence_score: empty sample set");
    const int n = samples.count();
    Mat posteriors(n, world.num_classes());
    for (int i = 0; i < n; ++i)
        posteriors.row(i) = bayes_posterior_data(world, samples.x.row(i).transpose()).transpose();
    const Vec marginal = posteriors.colwise().mean().transpose();
    double mean_kl = 0.0;
    for (int i = 0; i < n; ++i) {
        double kl = 0.0;
        for (int c = 0; c < world.num_classes(); ++c) {
            const double p = posteriors(i, c);
            if (p > 0.0) kl += p * (std::log(p) - std::log(marginal[c]));
        }
        mean_kl += kl;
    }
    return std::exp(mean_kl / n);
}

// Mean entropy (nats) of the per-sample Bayes class posterior; the
// diversity-side readout of the sweep. In [0, log num_classes].
inline double mean_posterior_entropy(const LabeledSamples& samples, const GmmWorld& world) {
    if (samples.count() == 0) throw DomainError("mean_posterior_entropy: empty sample set");
    double acc = 0.0;
    for (int i = 0; i < samples.count(); ++i) {
        const Vec p = bayes_posterior_data(world, samples.x.row(i).transpose());
        for (int c = 0; c < p.size(); ++c)
            if (p[c] > 0.0) acc -= p[c] * std::log(p[c]);
    }
    return acc / samples.count();
}

// ---------------------------------------------------------------------------
// Frechet distance between Gaussian fits, on raw data coordinates

struct FrechetResult {
    double value = 0.0;
    bool regularized = false;  // a degenerate covariance needed 1e-8 I added
};

namespace detail {

inline Mat spd_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(m);
    Vec vals = eig.eigenvalues();
    for (int i = 0; i < vals.size(); ++i) vals[i] = std::sqrt(std::max(vals[i], 0.0));
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

inline Mat sample_covariance(const Mat& points) {
    const Vec mean = points.colwise().mean().transpose();
    const Mat centered = points.rowwise() - mean.transpose();
    return centered.transpose() * centered / (static_cast<double>(points.rows()) - 1.0);
}

}  // namespace detail

// ||m_A - m_B||^2 + tr(S_A + S_B - 2 (S_A S_B)^(1/2)) from fitted moments.
// The cross term uses the symmetrized form (S_A^(1/2) S_B S_A^(1/2))^(1/2),
// diagonalized with a self-adjoint eigensolver.
inline FrechetResult frechet_distance(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols())
        throw ShapeError("frechet_distance: dimension mismatch " + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()));
    const int d = static_cast<int>(a.cols());
    if (a.rows() < d + 1 || b.rows() < d + 1)
        throw DomainError("frechet_distance: each set needs at least d + 1 = " +
                          std::to_string(d + 1) + " points");

    const Vec mean_a = a.colwise().mean().transpose();
    const Vec mean_b = b.colwise().mean().transpose();
    Mat cov_a = detail::sample_covariance(a);
    Mat cov_b = detail::sample_covariance(b);

    FrechetResult out;
    const double floor = 1e-12;
    auto degenerate = [&](const Mat& cov) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
        return eig.eigenvalues().minCoeff() <= floor;
    };
    if (degenerate(cov_a)) {
        cov_a += 1e-8 * Mat::Identity(d, d);
        out.regularized = true;
    }
    if (degenerate(cov_b)) {
        cov_b += 1e-8 * Mat::Identity(d, d);
        out.regularized = true;
    }

    const Mat root_a = detail::spd_sqrt(cov_a);
    const Mat cross = detail::spd_sqrt(root_a * cov_b * root_a);
    out.value = (mean_a - mean_b).squaredNorm() + (cov_a + cov_b - 2.0 * cross).trace();
    return out;
}

// ---------------------------------------------------------------------------
// Guidance-strength sweep

struct SweepRow {
    double w = 0.0;
    double confidence = 1.0;
    double frechet = 0.0;
    double class_entropy = 0.0;
    int n = 0;
    std::uint64_t seed = 0;
};

// One row per guidance strength. Every row reuses the same base seed for
// its chains and the same ground-truth reference sample, so rows differ
// only through w.
template <Denoiser D>
std::vector<SweepRow> sweep(const GmmWorld& world, const D& denoiser,
                            const std::vector<double>& strengths, const SamplerConfig& sampler_cfg,
                            int n, std::uint64_t seed,
                            GuidanceMode mode = GuidanceMode::kClassifierFree) {
    if (n < 1) throw ConfigError("sweep: n must be >= 1");
    Rng reference_rng(derive_stream_seed(seed, 0x9e3779b9ULL));
    Mat reference(n, world.dims);
    for (int i = 0; i < n; ++i)
        reference.row(i) = sample_data(world, reference_rng).first.transpose();

    std::vector<SweepRow> rows;
    rows.reserve(strengths.size());
    for (const double w : strengths) {
        GuidanceConfig guidance{mode, w};
        const LabeledSamples samples =
            sample_batch(denoiser, world, guidance, sampler_cfg, std::nullopt, n, seed);
        SweepRow row;
        row.w = w;
        row.confidence = confidence_score(samples, world);
        row.frechet = frechet_distance(samples.x, reference).value;
        row.class_entropy = mean_posterior_entropy(samples, world);
        row.n = n;
        row.seed = seed;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace glab
