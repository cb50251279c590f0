#pragma once

// Pairwise preference probabilities, reward learning, and the exact
// reward <-> policy correspondence of KL-regularized optimization.

#include <cstdint>
#include <span>
#include <vector>

#include "spinlab/policy.hpp"

namespace spinlab {

// Finite reward table r(x, y) over the same index structure as a
// TabularPolicy (values in nats when implied from policies).
class RewardFunction {
public:
    RewardFunction(AnswerSpace space, int num_prompts, std::vector<double> values);
    static RewardFunction zero(AnswerSpace space, int num_prompts);

    const AnswerSpace& space() const { return space_; }
    int num_prompts() const { return num_prompts_; }

    double value(int prompt, std::int64_t answer) const;
    std::span<const double> values() const { return values_; }
    std::span<const double> value_row(int prompt) const;

    RewardFunction with_values(std::vector<double> values) const;

private:
    AnswerSpace space_;
    int num_prompts_;
    std::vector<double> values_;
};

struct PreferencePair {
    int prompt;
    std::int64_t winner;
    std::int64_t loser;  // may equal winner
};

// Per-prompt partition values Z(x) of the closed-form policy.
struct PartitionReport {
    std::vector<double> z;
};

double sigmoid(double z);
double log_sigmoid(double z);

// Bradley-Terry probability of `y` being preferred over `y2`.
double bt_prob(const RewardFunction& r, int prompt, std::int64_t y, std::int64_t y2);

struct RewardMleResult {
    double loss;
    std::vector<double> grad;  // same layout as RewardFunction values
};

// Mean over pairs of -log sigmoid(r(x,y_w) - r(x,y_l)) with its exact
// gradient. Empty data is an ArgumentError.
RewardMleResult reward_mle_loss(const RewardFunction& r, std::span<const PreferencePair> data);

struct ClosedFormResult {
    TabularPolicy policy;
    PartitionReport partition;
};

// pi_r(y|x) = pi_ref(y|x) exp(r(x,y)/beta) / Z(x), computed by enumeration.
ClosedFormResult closed_form_policy(const Policy& ref, const RewardFunction& r, double beta);

// beta * log(pi(y|x) / pi_ref(y|x)). The per-prompt beta*log Z(x) constant is
// deliberately omitted; it cancels in every Bradley-Terry difference, and
// PartitionReport exposes Z when the absolute value is needed.
double implied_reward(const Policy& pi, const Policy& ref, double beta, int prompt,
                      std::int64_t answer);
RewardFunction implied_reward_table(const Policy& pi, const Policy& ref, double beta);

// E_x[ sum_y pi(y|x) r(x,y) - beta KL(pi(.|x) || ref(.|x)) ] under the given
// prompt distribution.
double kl_regularized_objective(const Policy& pi, const RewardFunction& r, double beta,
                                const Policy& ref, std::span<const double> prompt_weights);

}  // namespace spinlab
