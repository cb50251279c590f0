#pragma once

// DPO, IPO, and SLiC preference losses with exact analytic gradients with
// respect to the trainable policy's logits.
//
// Batches reduce by (weighted) arithmetic mean. Weights default to uniform;
// weighted batches back the exact-expectation training mode, where each
// (x, y_w, y_l) cell carries its population probability.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spinlab/policy.hpp"

namespace spinlab {

struct DpoConfig {
    double beta = 0.1;
};

struct IpoConfig {
    double tau = 0.1;
};

struct SlicConfig {
    double delta = 1.0;
    double lambda = 0.1;  // lambda = 0 disables the reference-likelihood term
};

struct PreferenceTriplet {
    int prompt;
    std::int64_t winner;
    std::int64_t loser;
    std::optional<std::int64_t> reference;  // SLiC regularization answer
};

struct LossResult {
    double value;
    std::vector<double> grad;  // w.r.t. theta's logits
};

// Mean of -log sigmoid(beta * [log pi/ref(y_w) - log pi/ref(y_l)]).
LossResult dpo_loss(const TrainablePolicy& theta, const Policy& ref,
                    std::span<const PreferenceTriplet> batch, const DpoConfig& cfg,
                    std::span<const double> weights = {});

// Mean of (log-ratio margin - 1/(2 tau))^2.
LossResult ipo_loss(const TrainablePolicy& theta, const Policy& ref,
                    std::span<const PreferenceTriplet> batch, const IpoConfig& cfg,
                    std::span<const double> weights = {});

// Mean of max(0, delta - log pi(y_w) + log pi(y_l)) - lambda log pi(y_ref);
// the hinge subgradient at the kink is 0.
LossResult slic_loss(const TrainablePolicy& theta, std::span<const PreferenceTriplet> batch,
                     const SlicConfig& cfg, std::span<const double> weights = {});

enum class LossKind { dpo, ipo, slic };

struct LossSpec {
    LossKind kind = LossKind::dpo;
    IpoConfig ipo;
    SlicConfig slic;
};

// Dispatches on spec.kind; beta feeds the DPO configuration.
LossResult preference_loss(const LossSpec& spec, double beta, const TrainablePolicy& theta,
                           const Policy& ref, std::span<const PreferenceTriplet> batch,
                           std::span<const double> weights = {});

}  // namespace spinlab
