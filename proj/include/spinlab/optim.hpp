#pragma once

// Deterministic first-order minimization over logit tables, plus the
// independent central-difference gradient oracle.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spinlab/errors.hpp"

namespace spinlab {

struct OptimizerConfig {
    enum class Method { gradient, adam };
    Method method = Method::adam;
    double learning_rate = 1e-2;
    int epochs = 1;
    int batch_size = 0;      // 0 = full batch (minimize_batched only)
    double clip_norm = 0.0;  // 0 = off
    std::uint64_t seed = 0;  // drives minibatch shuffling

    void validate() const;
};

struct ObjectiveEval {
    double value;
    std::vector<double> grad;
};

using Objective = std::function<ObjectiveEval(std::span<const double>)>;
// Objective restricted to a subset of examples (for minibatch steps).
using BatchObjective =
    std::function<ObjectiveEval(std::span<const double>, std::span<const int>)>;

struct MinimizeResult {
    std::vector<double> params;
    // trace[k] = objective before step k, plus the final value; size epochs+1.
    std::vector<double> trace;
};

// One step per epoch on the full objective. Non-finite values or gradients
// raise RunError naming the epoch.
MinimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const OptimizerConfig& cfg);

// Minibatch epochs over num_examples examples (deterministic shuffle from
// cfg.seed; batch_size 0 or >= n degenerates to one full step per epoch and
// consumes no randomness). The trace records the full objective per epoch.
MinimizeResult minimize_batched(const BatchObjective& objective, int num_examples,
                                std::vector<double> init, const OptimizerConfig& cfg);

// Central differences (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> point, double eps);

// max_i |a_i - b_i| / max(floor, ||a||_inf, ||b||_inf)
double gradient_relative_error(std::span<const double> a, std::span<const double> b,
                               double floor = 1e-6);

}  // namespace spinlab
