#include <catch2/catch.hpp>

#include "glab/guidance.hpp"
#include "glab/rng.hpp"

using namespace glab;

TEST_CASE("classifier-free mix") {
    const Vec eps_c = (Vec(2) << 1.0, 0.0).finished();
    const Vec eps_u = (Vec(2) << 0.0, 1.0).finished();

    SECTION("w = 0 returns the conditional prediction bit-exactly") {
        const Vec out = cf_guided_eps(eps_c, eps_u, 0.0);
        CHECK(out[0] == eps_c[0]);
        CHECK(out[1] == eps_c[1]);
    }
    SECTION("equal scores cancel for any strength") {
        for (const double w : {0.0, 0.5, 3.0, 10.0})
            CHECK((cf_guided_eps(eps_c, eps_c, w) - eps_c).norm() < 1e-14 * (1.0 + w));
    }
    SECTION("direct substitution at w = 2") {
        const Vec out = cf_guided_eps(eps_c, eps_u, 2.0);
        CHECK(out[0] == Approx(3.0));
        CHECK(out[1] == Approx(-2.0));
    }
    SECTION("affine in w") {
        Rng rng(1);
        for (int i = 0; i < 100; ++i) {
            const Vec a = rng.normal_vec(3), b = rng.normal_vec(3);
            const double w0 = 4.0 * rng.uniform(), w1 = 4.0 * rng.uniform();
            const double mid = 0.5 * (w0 + w1);
            const Vec interpolated =
                0.5 * (cf_guided_eps(a, b, w0) + cf_guided_eps(a, b, w1));
            CHECK((cf_guided_eps(a, b, mid) - interpolated).norm() < 1e-12);
        }
    }
    SECTION("dimension mismatch") {
        CHECK_THROWS_AS(cf_guided_eps(Vec::Zero(2), Vec::Zero(3), 1.0), ShapeError);
    }
}

TEST_CASE("classifier-guided mix") {
    const Vec eps_c = (Vec(2) << 0.4, -0.3).finished();
    const Vec grad = (Vec(2) << 0.2, 0.9).finished();

    SECTION("w = 0 and zero gradient are both identities") {
        CHECK((classifier_guided_eps(eps_c, grad, 0.7, 0.0) - eps_c).norm() == 0.0);
        CHECK((classifier_guided_eps(eps_c, Vec::Zero(2), 0.7, 3.0) - eps_c).norm() == 0.0);
    }
    SECTION("direct form") {
        const Vec out = classifier_guided_eps(eps_c, grad, 0.5, 2.0);
        CHECK(out[0] == Approx(0.4 - 2.0 * 0.5 * 0.2));
        CHECK(out[1] == Approx(-0.3 - 2.0 * 0.5 * 0.9));
    }
    SECTION("dimension mismatch") {
        CHECK_THROWS_AS(classifier_guided_eps(Vec::Zero(2), Vec::Zero(1), 0.5, 1.0),
                        ShapeError);
    }
}

TEST_CASE("guidance config validation") {
    GuidanceConfig cfg{GuidanceMode::kClassifierFree, -0.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.w = 0.0;
    CHECK_NOTHROW(cfg.validate());

    CHECK(guidance_mode_from_string("none") == GuidanceMode::kNone);
    CHECK(guidance_mode_from_string("classifier-free") == GuidanceMode::kClassifierFree);
    CHECK(guidance_mode_from_string("classifier") == GuidanceMode::kClassifier);
    CHECK_THROWS_AS(guidance_mode_from_string("stochastic"), ConfigError);
    CHECK(to_string(GuidanceMode::kClassifier) == "classifier");
}
