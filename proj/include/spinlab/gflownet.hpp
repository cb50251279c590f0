#pragma once

// Sampling geometric mixtures of autoregressive policies.
//
// A geometric mixture of two token-factorized policies does not itself
// factorize over tokens (factorization_gap measures how far off the naive
// per-step normalization is), so a token-level sampler is trained instead:
// its terminating distribution is matched to the sequence-level mixture with
// a sub-trajectory flow-consistency loss.
//
// States are prefixes; every nonempty prefix is terminable by appending the
// terminator. With state flows substituted as F(s) = R(s)/q(term|s) for
// terminable s, a sub-trajectory s_i -> ... -> s_j contributes the residual
//
//   log[R(s_i) prod q(s_k+1|s_k) q(term|s_j)] - log[R(s_j) q(term|s_i)]
//
// The root is not terminable (answers have length >= 1), so pairs starting
// at the root use the target's exact partition value for F(root); this is
// what makes zero loss equivalent to sampling exactly proportional to R.

#include <cstdint>
#include <vector>

#include "spinlab/policy.hpp"
#include "spinlab/rng.hpp"

namespace spinlab {

// The trained sampler is an ordinary token-factorized policy.
using GFlowNetSampler = TokenPolicy;

// Target prev^alpha * base^(1-alpha) over a shared answer space. Partition
// values are computed once by enumeration.
class GfnTarget {
public:
    GfnTarget(TokenPolicy prev, TokenPolicy base, double alpha);

    const TokenPolicy& prev() const { return prev_; }
    const TokenPolicy& base() const { return base_; }
    double alpha() const { return alpha_; }
    const AnswerSpace& space() const { return prev_.space(); }
    int num_prompts() const { return prev_.num_prompts(); }

    // Unnormalized reward prev(y|x)^alpha * base(y|x)^(1-alpha).
    double reward(int prompt, std::int64_t answer) const;
    double log_reward(int prompt, std::int64_t answer) const;
    double log_partition(int prompt) const;
    // Normalized target distribution over all answers.
    std::vector<double> target_row(int prompt) const;

private:
    TokenPolicy prev_;
    TokenPolicy base_;
    double alpha_;
    std::vector<double> log_z_;
};

double gfn_reward(const GfnTarget& target, int prompt, std::int64_t answer);

// Total-variation distance between the exact sequence-level mixture and the
// sequence distribution of the naive sampler that normalizes the geometric
// mixture token-wise at every step.
double factorization_gap(const GfnTarget& target, int prompt);

struct SubTbConfig {
    double lambda_subtb = 0.9;  // in (0, 1]
    double learning_rate = 0.05;
    int epochs = 250;
    int trajectories_per_epoch = 20;
    double exploration_temperature = 2.0;
    double exploration_uniform = 0.1;  // per-step uniform action probability
    std::uint64_t seed = 0;

    void validate() const;
};

// A complete generation path: the answer's tokens; states are its prefixes
// plus the terminating step.
struct Trajectory {
    int prompt;
    std::vector<int> tokens;
};

struct SubTbResult {
    double value;
    std::vector<double> grad;  // w.r.t. sampler logits
};

// Lambda-weighted mean of squared residuals over all sub-trajectory index
// pairs of each trajectory, averaged over the batch.
SubTbResult subtb_loss(const GFlowNetSampler& sampler, const GfnTarget& target,
                       std::span<const Trajectory> trajectories, const SubTbConfig& cfg);

// Exact distribution over answers induced by the sampler's conditionals,
// computed by a prefix-tree walk.
std::vector<double> terminating_distribution(const GFlowNetSampler& sampler, int prompt);

// Sampler whose terminating distribution is exactly proportional to the
// target reward (row logits = subtree reward log-masses).
GFlowNetSampler exact_sampler(const GfnTarget& target);

// One exploratory rollout from the tempered, uniform-mixed sampler.
Trajectory sample_trajectory(const GFlowNetSampler& sampler, int prompt, const SubTbConfig& cfg,
                             Rng& rng);

struct GfnTrainingCurvePoint {
    int epoch;
    double subtb_loss;
    double tv_to_target;  // max over prompts
};

struct GfnTrainingResult {
    GFlowNetSampler sampler;
    std::vector<GfnTrainingCurvePoint> curve;
};

// Initializes at prev's conditionals, samples exploratory trajectories, and
// minimizes subtb_loss with Adam (one step per epoch batch).
GfnTrainingResult train_gflownet(const GfnTarget& target, const SubTbConfig& cfg);

}  // namespace spinlab
