#pragma once

#include <string>

#include "glab/common.hpp"
#include "glab/errors.hpp"

namespace glab {

enum class GuidanceMode { kNone, kClassifierFree, kClassifier };

inline std::string to_string(GuidanceMode mode) {
    switch (mode) {
        case GuidanceMode::kNone: return "none";
        case GuidanceMode::kClassifierFree: return "classifier-free";
        case GuidanceMode::kClassifier: return "classifier";
    }
    return "?";
}

inline GuidanceMode guidance_mode_from_string(const std::string& s) {
    if (s == "none") return GuidanceMode::kNone;
    if (s == "classifier-free") return GuidanceMode::kClassifierFree;
    if (s == "classifier") return GuidanceMode::kClassifier;
    throw ConfigError("guidance.mode: unknown mode '" + s +
                      "' (expected none | classifier-free | classifier)");
}

struct GuidanceConfig {
    GuidanceMode mode = GuidanceMode::kClassifierFree;
    double w = 0.0;  // ignored when mode == kNone

    void validate() const {
        if (!(w >= 0.0)) throw ConfigError("guidance.w must be >= 0, got " + std::to_string(w));
    }
};

// Classifier-free mix: (1+w) eps_cond - w eps_uncond. Affine in w, so w = 0
// returns eps_cond bit-exactly.
inline Vec cf_guided_eps(const Vec& eps_cond, const Vec& eps_uncond, double w) {
    if (eps_cond.size() != eps_uncond.size())
        throw ShapeError("cf_guided_eps: conditional dim " + std::to_string(eps_cond.size()) +
                         " vs unconditional dim " + std::to_string(eps_uncond.size()));
    return (1.0 + w) * eps_cond - w * eps_uncond;
}

// Classifier guidance: eps_cond - w sigma grad log p(c|z).
inline Vec classifier_guided_eps(const Vec& eps_cond, const Vec& grad_log_p, double sigma,
                                 double w) {
    if (eps_cond.size() != grad_log_p.size())
        throw ShapeError("classifier_guided_eps: eps dim " + std::to_string(eps_cond.size()) +
                         " vs gradient dim " + std::to_string(grad_log_p.size()));
    return eps_cond - (w * sigma) * grad_log_p;
}

}  // namespace glab
