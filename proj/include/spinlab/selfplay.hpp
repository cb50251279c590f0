#pragma once

// Iterated self-play fine-tuning: reference construction (geometric mixture
// with the base policy), opponent sampling over the iterate history (finite
// window or fictitious play), triplet gathering, and per-iteration loss
// minimization. run_vanilla_spin is a direct transcription of the plain
// self-play loop (reference = previous iterate, losers from it) kept
// independent of the mixture machinery so the two routes can be compared
// bit for bit.

#include <cstdint>
#include <optional>
#include <vector>

#include "spinlab/losses.hpp"
#include "spinlab/optim.hpp"
#include "spinlab/policy.hpp"
#include "spinlab/task.hpp"

namespace spinlab {

struct AlphaSpinConfig {
    double alpha = 0.95;
    double beta = 0.1;
    std::optional<int> history_len = 2;  // nullopt = infinite (fictitious play)
    int iterations = 2;                  // T; the loop runs t = 0..T
    int triplets_per_iter = 2000;
    int triplets_iter0 = 1000;
    // Replace sampled triplets by the full (x, y_w, y_l) enumeration weighted
    // by q(x) * data(y_w|x) * sampler(y_l|x).
    bool exact_expectation = false;
    OptimizerConfig optimizer{OptimizerConfig::Method::adam, 1e-2, 4, 64, 0.0, 0};
    std::uint64_t seed = 0;

    void validate() const;
};

// Iterate checkpoints plus the base policy; indices k < 0 resolve to base.
struct IterationHistory {
    std::shared_ptr<const TabularPolicy> base;
    std::vector<std::shared_ptr<const TabularPolicy>> checkpoints;

    const std::shared_ptr<const TabularPolicy>& at(int k) const {
        return k < 0 ? base : checkpoints[static_cast<std::size_t>(k)];
    }
    int next_iteration() const { return static_cast<int>(checkpoints.size()); }
};

// Exact normalized prev^alpha * base^(1-alpha) where prev is the latest
// iterate (base itself before iteration 0).
TabularPolicy build_reference(const IterationHistory& history, double alpha);

// Uniform mixture over the last h iterates (negative indices fold into a
// single base component), or over all previous iterates when h is infinite.
MixtureSampler loser_sampler(const IterationHistory& history, std::optional<int> history_len,
                             int iteration);

// n triplets: (x, y_w) uniform with replacement from the SFT set, y_l drawn
// from the sampler at x. with_ref fills y_ref with the SFT winner.
std::vector<PreferenceTriplet> gather_triplets(const SftDataset& sft,
                                               const MixtureSampler& sampler, int n, Rng& rng,
                                               bool with_ref = false);

// Full (x, y_w, y_l) enumeration with population weights; weights align with
// the returned triplets.
struct WeightedBatch {
    std::vector<PreferenceTriplet> triplets;
    std::vector<double> weights;
};
WeightedBatch exact_expectation_batch(const SyntheticTask& task, const MixtureSampler& sampler,
                                      bool with_ref = false);

struct IterationMetrics {
    int iteration;
    double mean_train_loss;  // objective over the gathered set after training
    double kl_data_model;    // E_x KL(data || model)
    double kl_model_base;    // E_x KL(model || base)
    double wall_seconds;
};

// How loser answers are produced each iteration.
enum class LoserSource {
    history_mixture,  // the h-window / fictitious-play sampler
    reference_exact,  // the reference policy itself, sampled exactly
};

struct SpinStepResult {
    std::shared_ptr<const TabularPolicy> policy;
    IterationMetrics metrics;
    std::vector<double> loss_trace;
};

// One iteration: build reference, gather triplets, minimize the preference
// loss from a warm start at the previous iterate, append the result.
SpinStepResult spin_iteration(IterationHistory& history, const AlphaSpinConfig& cfg,
                              const LossSpec& loss, const SyntheticTask& task,
                              const SftDataset& sft,
                              LoserSource source = LoserSource::history_mixture);

struct RunResult {
    IterationHistory history;
    std::vector<IterationMetrics> metrics;
    std::vector<std::vector<double>> loss_traces;
};

RunResult run_alpha_spin(const AlphaSpinConfig& cfg, const LossSpec& loss,
                         const SyntheticTask& task, const SftDataset& sft,
                         LoserSource source = LoserSource::history_mixture);

// Plain self-play loop (alpha = 1, h = 1 behavior) written directly against
// the previous iterate. Ignores cfg.alpha / cfg.history_len.
RunResult run_vanilla_spin(const AlphaSpinConfig& cfg, const LossSpec& loss,
                           const SyntheticTask& task, const SftDataset& sft);

// E_x KL(p || q) under the task's prompt distribution.
double mean_kl(const SyntheticTask& task, const Policy& p, const Policy& q);

}  // namespace spinlab
