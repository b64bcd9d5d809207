#include <catch2/catch.hpp>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "glab/denoiser.hpp"
#include "glab/metrics.hpp"
#include "glab/sampler.hpp"

using namespace glab;

namespace {

struct NanDenoiser {
    Vec predict_eps(const Vec& z, double, const Conditioning&) const {
        return Vec::Constant(z.size(), std::nan(""));
    }
    int data_dim() const { return 2; }
};

SamplerConfig make_config(int steps, double v = 0.3) {
    SamplerConfig cfg;
    cfg.steps = steps;
    cfg.v = v;
    return cfg;
}

}  // namespace

TEST_CASE("sampler config validation") {
    CHECK_THROWS_AS(make_config(1).validate(), ConfigError);
    CHECK_THROWS_AS(make_config(16, 1.5).validate(), ConfigError);
    CHECK_THROWS_AS(make_config(16, -0.1).validate(), ConfigError);
    CHECK_NOTHROW(make_config(2, 0.0).validate());
}

TEST_CASE("oracle sampling reproduces per-class moments", "[slow]") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const SamplerConfig cfg = make_config(1024);
    const GuidanceConfig guidance{GuidanceMode::kClassifierFree, 0.0};
    const int per_class = 10000;

    for (int c = 0; c < world.num_classes(); ++c) {
        const LabeledSamples batch =
            sample_batch(oracle, world, guidance, cfg, c, per_class, 1234 + c);
        const Vec mean = batch.x.colwise().mean().transpose();
        const auto& k = world.classes[static_cast<std::size_t>(c)];
        const double mean_se = k.stddev / std::sqrt(double(per_class));
        for (int j = 0; j < world.dims; ++j)
            CHECK(std::abs(mean[j] - k.mean[j]) <= 3.0 * mean_se);
        for (int j = 0; j < world.dims; ++j) {
            const double var =
                (batch.x.col(j).array() - mean[j]).square().sum() / (per_class - 1.0);
            CHECK(var == Approx(k.stddev * k.stddev).epsilon(0.05));
        }
    }
}

TEST_CASE("a near point-mass class collapses every sample onto its mean", "[slow]") {
    GmmWorld world;
    world.dims = 2;
    world.classes = {{(Vec(2) << -0.4, 1.1).finished(), 1e-6, 1.0}};
    const OracleDenoiser oracle(world);
    const LabeledSamples batch =
        sample_batch(oracle, world, GuidanceConfig{GuidanceMode::kClassifierFree, 0.0},
                     make_config(1024), 0, 500, 99);
    for (int i = 0; i < batch.count(); ++i)
        CHECK((batch.x.row(i).transpose() - world.classes[0].mean).norm() < 1e-2);
}

TEST_CASE("sampling is deterministic given the seed") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const SamplerConfig cfg = make_config(32);
    const GuidanceConfig guidance{GuidanceMode::kClassifierFree, 1.5};

    const LabeledSamples a = sample_batch(oracle, world, guidance, cfg, std::nullopt, 64, 42);
    const LabeledSamples b = sample_batch(oracle, world, guidance, cfg, std::nullopt, 64, 42);
    CHECK(a.labels == b.labels);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);

    const LabeledSamples c = sample_batch(oracle, world, guidance, cfg, std::nullopt, 64, 43);
    CHECK((a.x - c.x).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("batches are identical under any thread budget") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const SamplerConfig cfg = make_config(24);
    const GuidanceConfig guidance{GuidanceMode::kClassifierFree, 0.7};

    setenv("GUIDANCE_LAB_THREADS", "1", 1);
    const LabeledSamples serial =
        sample_batch(oracle, world, guidance, cfg, std::nullopt, 48, 17);
    setenv("GUIDANCE_LAB_THREADS", "4", 1);
    const LabeledSamples threaded =
        sample_batch(oracle, world, guidance, cfg, std::nullopt, 48, 17);
    unsetenv("GUIDANCE_LAB_THREADS");

    CHECK(serial.labels == threaded.labels);
    CHECK((serial.x - threaded.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empty batches are allowed") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const LabeledSamples batch =
        sample_batch(oracle, world, GuidanceConfig{GuidanceMode::kNone, 0.0}, make_config(8),
                     std::nullopt, 0, 7);
    CHECK(batch.count() == 0);
    CHECK(batch.dims() == 2);
}

TEST_CASE("the final step adds no noise") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const SamplerConfig cfg = make_config(16);
    Rng rng(5);
    std::vector<StepTrace> trace;
    ancestral_sample(oracle, &world, GuidanceConfig{GuidanceMode::kNone, 0.0}, cfg, 0, rng,
                     [&](const StepTrace& t) { trace.push_back(t); });
    REQUIRE(static_cast<int>(trace.size()) == cfg.steps);
    CHECK(trace.back().variance == 0.0);
    // d draws for z_1 plus d per transition; the T-th step consumes none.
    CHECK(rng.normal_draws() == static_cast<std::uint64_t>(world.dims * cfg.steps));
}

TEST_CASE("v selects between posterior and transition variances") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const auto grid = timestep_grid(Schedule{}, 16);

    for (const double v : {0.0, 1.0, 0.3}) {
        Rng rng(6);
        std::vector<StepTrace> trace;
        ancestral_sample(oracle, &world, GuidanceConfig{GuidanceMode::kNone, 0.0},
                         make_config(16, v), 0, rng,
                         [&](const StepTrace& t) { trace.push_back(t); });
        for (int t = 0; t + 1 < 16; ++t) {
            const double lambda = grid[static_cast<std::size_t>(t)];
            const double lambda_next = grid[static_cast<std::size_t>(t) + 1];
            const double posterior =
                -std::expm1(lambda - lambda_next) * sigma_squared_at(lambda_next);
            const double forward = transition_variance(lambda, lambda_next);
            const double used = trace[static_cast<std::size_t>(t)].variance;
            if (v == 0.0) CHECK(used == posterior);
            if (v == 1.0) CHECK(used == forward);
            if (v == 0.3) {
                CHECK(used >= std::min(posterior, forward));
                CHECK(used <= std::max(posterior, forward));
            }
        }
    }
}

TEST_CASE("mode none is bit-identical to classifier-free at w = 0") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const SamplerConfig cfg = make_config(48);
    Rng rng_a(23), rng_b(23);
    const Vec a = ancestral_sample(oracle, &world, GuidanceConfig{GuidanceMode::kNone, 0.0},
                                   cfg, 2, rng_a);
    const Vec b = ancestral_sample(oracle, &world,
                                   GuidanceConfig{GuidanceMode::kClassifierFree, 0.0}, cfg, 2,
                                   rng_b);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("classifier and classifier-free modes coincide for oracle scores") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const SamplerConfig cfg = make_config(64);
    for (const double w : {0.5, 2.0}) {
        Rng rng_a(11), rng_b(11);
        const Vec a = ancestral_sample(oracle, &world,
                                       GuidanceConfig{GuidanceMode::kClassifierFree, w}, cfg, 1,
                                       rng_a);
        const Vec b = ancestral_sample(oracle, &world,
                                       GuidanceConfig{GuidanceMode::kClassifier, w}, cfg, 1,
                                       rng_b);
        CHECK((a - b).norm() < 1e-8);
    }
}

TEST_CASE("classifier mode requires the world") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    Rng rng(3);
    CHECK_THROWS_AS(ancestral_sample(oracle, nullptr,
                                     GuidanceConfig{GuidanceMode::kClassifier, 1.0},
                                     make_config(8), 0, rng),
                    ConfigError);
}

TEST_CASE("non-finite predictions fail loudly with the step index") {
    const NanDenoiser bad;
    Rng rng(4);
    CHECK_THROWS_WITH(ancestral_sample(bad, nullptr, GuidanceConfig{GuidanceMode::kNone, 0.0},
                                       make_config(8), 0, rng),
                      Catch::Contains("step t = 1"));
}

TEST_CASE("guidance raises the confidence score", "[slow]") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const SamplerConfig cfg = make_config(128);

    const LabeledSamples low = sample_batch(
        oracle, world, GuidanceConfig{GuidanceMode::kClassifierFree, 0.0}, cfg, std::nullopt,
        1000, 2024);
    const LabeledSamples high = sample_batch(
        oracle, world, GuidanceConfig{GuidanceMode::kClassifierFree, 4.0}, cfg, std::nullopt,
        1000, 2024);
    CHECK(confidence_score(high, world) > confidence_score(low, world));
}

TEST_CASE("step-count refinement plateaus", "[slow]") {
    const GmmWorld world = triangle_world();
    const OracleDenoiser oracle(world);
    const GuidanceConfig guidance{GuidanceMode::kNone, 0.0};

    Rng ref_rng(31);
    Mat reference(10000, 2);
    for (int i = 0; i < reference.rows(); ++i)
        reference.row(i) = sample_data(world, ref_rng).first.transpose();

    const LabeledSamples coarse =
        sample_batch(oracle, world, guidance, make_config(1024), std::nullopt, 10000, 777);
    const LabeledSamples fine =
        sample_batch(oracle, world, guidance, make_config(4096), std::nullopt, 10000, 777);
    const double f_coarse = frechet_distance(coarse.x, reference).value;
    const double f_fine = frechet_distance(fine.x, reference).value;
    CHECK(std::abs(f_fine - f_coarse) < 0.2 * f_coarse);
}
