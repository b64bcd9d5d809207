#pragma once

#include <concepts>
#include <string>

#include "glab/common.hpp"
#include "glab/errors.hpp"
#include "glab/gmm_world.hpp"

namespace glab {

// Class label or the distinguished null token selecting the unconditional
// pathway of a denoiser.
struct Conditioning {
    static constexpr int kNull = -1;
    int value = kNull;

    static Conditioning null_token() { return Conditioning{kNull}; }
    static Conditioning of_class(int c) {
        if (c < 0) throw LookupError("conditioning class index must be >= 0");
        return Conditioning{c};
    }
    bool is_null() const { return value == kNull; }
    bool operator==(const Conditioning&) const = default;
};

// Anything that predicts the standardized noise from (z, lambda, c).
template <typename D>
concept Denoiser = requires(const D& d, const Vec& z, double lambda, const Conditioning& c) {
    { d.predict_eps(z, lambda, c) } -> std::convertible_to<Vec>;
    { d.data_dim() } -> std::convertible_to<int>;
};

// Exact scores of the mixture world; the reference denoiser every trained
// model is measured against.
class OracleDenoiser {
public:
    explicit OracleDenoiser(const GmmWorld& world) : world_(&world) {}

    Vec predict_eps(const Vec& z, double lambda, const Conditioning& c) const {
        const Latent zl{z, lambda};
        return c.is_null() ? exact_uncond_eps(*world_, zl)
                           : exact_cond_eps(*world_, zl, c.value);
    }

    int data_dim() const { return world_->dims; }
    const GmmWorld& world() const { return *world_; }

private:
    const GmmWorld* world_;
};

static_assert(Denoiser<OracleDenoiser>);

}  // namespace glab
