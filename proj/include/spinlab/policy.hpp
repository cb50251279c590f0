#pragma once

// Exact conditional policies over finite prompt and answer spaces.
//
// Components:
//   - Policy: read interface (log_prob, sample, enumerate) shared by all
//     policy representations
//   - TrainablePolicy: adds a flat parameter view and analytic d log pi /
//     d logit accumulation, so losses and optimizers stay representation-
//     agnostic
//   - TabularPolicy: one logit per (prompt, answer); probabilities are the
//     per-prompt softmax
//   - TokenPolicy: autoregressive factorization with one logit row per
//     (prompt, prefix) over next tokens plus the terminator; length-L
//     prefixes force the terminator
//   - MixtureSampler: arithmetic mixture with exact probabilities and
//     per-draw component provenance
//   - geometric_mixture: exact normalized p^alpha * q^(1-alpha) by
//     enumeration
//
// Policies are immutable after construction and safe to share across
// threads; all probabilities are strictly positive (finite logits).

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "spinlab/rng.hpp"
#include "spinlab/vocab.hpp"

namespace spinlab {

class Policy {
public:
    virtual ~Policy() = default;

    virtual const AnswerSpace& space() const = 0;
    virtual int num_prompts() const = 0;

    virtual double log_prob(int prompt, std::int64_t answer) const = 0;
    virtual std::int64_t sample(int prompt, Rng& rng) const = 0;

protected:
    void check_prompt_index(int prompt) const;
};

// A weighted term c * d log pi(y|x) / d logits, used to batch gradient
// accumulation across a whole loss evaluation.
struct GradTerm {
    int prompt;
    std::int64_t answer;
    double coef;
};

class TrainablePolicy : public Policy {
public:
    virtual std::int64_t param_count() const = 0;
    virtual std::span<const double> params() const = 0;
    virtual std::unique_ptr<TrainablePolicy> with_params(std::vector<double> params) const = 0;

    // grad += coef * d log pi(answer|prompt) / d logits
    virtual void add_log_prob_grad(int prompt, std::int64_t answer, double coef,
                                   std::span<double> grad) const = 0;

    // Accumulates many terms at once; representations may aggregate smartly.
    virtual void add_log_prob_grad_batch(std::span<const GradTerm> terms,
                                         std::span<double> grad) const;
};

class TabularPolicy final : public TrainablePolicy {
public:
    // logits laid out row-major as [prompt][answer]; any finite values.
    TabularPolicy(AnswerSpace space, int num_prompts, std::vector<double> logits);

    static TabularPolicy uniform(AnswerSpace space, int num_prompts);
    // Near-point-mass on one answer (logit margin `margin`, default 1000).
    static TabularPolicy delta(AnswerSpace space, int num_prompts, std::int64_t answer,
                               double margin = 1000.0);
    // Logits = log(p); caller provides per-prompt probability rows.
    static TabularPolicy from_probs(AnswerSpace space, int num_prompts,
                                    const std::vector<double>& probs);

    const AnswerSpace& space() const override { return space_; }
    int num_prompts() const override { return num_prompts_; }

    double log_prob(int prompt, std::int64_t answer) const override;
    std::int64_t sample(int prompt, Rng& rng) const override;

    double prob(int prompt, std::int64_t answer) const;
    std::span<const double> prob_row(int prompt) const;
    std::span<const double> logit_row(int prompt) const;

    std::int64_t param_count() const override { return static_cast<std::int64_t>(logits_.size()); }
    std::span<const double> params() const override { return logits_; }
    std::unique_ptr<TrainablePolicy> with_params(std::vector<double> params) const override;
    void add_log_prob_grad(int prompt, std::int64_t answer, double coef,
                           std::span<double> grad) const override;
    void add_log_prob_grad_batch(std::span<const GradTerm> terms,
                                 std::span<double> grad) const override;

private:
    AnswerSpace space_;
    int num_prompts_;
    std::vector<double> logits_;     // [prompt][answer]
    std::vector<double> log_norms_;  // per-prompt logsumexp
    std::vector<double> probs_;      // [prompt][answer]
};

class TokenPolicy final : public TrainablePolicy {
public:
    // logits laid out as [prompt][prefix][token] with token column V meaning
    // the terminator. The terminator column of the root row is a dead
    // parameter: answers have length >= 1, so the root softmax runs over
    // ordinary tokens only.
    TokenPolicy(AnswerSpace space, int num_prompts, std::vector<double> logits);

    static TokenPolicy uniform(AnswerSpace space, int num_prompts);

    const AnswerSpace& space() const override { return space_; }
    int num_prompts() const override { return num_prompts_; }

    double log_prob(int prompt, std::int64_t answer) const override;
    std::int64_t sample(int prompt, Rng& rng) const override;

    int columns() const { return space_.vocab_size() + 1; }
    // Conditional probability of a step; token == vocab_size() means the
    // terminator (requires prefix length >= 1).
    double step_prob(int prompt, std::int64_t prefix_id, int token) const;
    double step_log_prob(int prompt, std::int64_t prefix_id, int token) const;
    std::span<const double> step_prob_row(int prompt, std::int64_t prefix_id) const;

    std::int64_t param_count() const override { return static_cast<std::int64_t>(logits_.size()); }
    std::span<const double> params() const override { return logits_; }
    std::unique_ptr<TrainablePolicy> with_params(std::vector<double> params) const override;
    void add_log_prob_grad(int prompt, std::int64_t answer, double coef,
                           std::span<double> grad) const override;

    // grad_row += coef_cols - step_probs * sum(coef_cols) for one prefix row;
    // shared by the sequence losses and the flow-matching loss.
    void add_row_grad(int prompt, std::int64_t prefix_id, std::span<const double> coef_cols,
                      std::span<double> grad) const;

    std::size_t row_offset(int prompt, std::int64_t prefix_id) const;

private:
    int legal_columns(std::int64_t prefix_id) const;

    AnswerSpace space_;
    int num_prompts_;
    std::vector<double> logits_;  // [prompt][prefix][V+1]
    std::vector<double> probs_;   // same layout; masked entries are 0
};

// --- free operations ---

// Exact sum_y p(y|x) log(p(y|x)/q(y|x)); requires matching spaces.
double kl_divergence(const Policy& p, const Policy& q, int prompt);

// All answer probabilities at one prompt, in answer-id order. Sums to 1
// within 1e-8; exp(log_prob) equals the returned entries.
std::vector<double> enumerate_answers(const Policy& policy, int prompt);

// Exact normalized p^alpha * q^(1-alpha), enumerated per prompt. The alpha=1
// and alpha=0 endpoints return the corresponding input exactly (bit-exact
// logits when the input is tabular).
TabularPolicy geometric_mixture(const Policy& p, const Policy& q, double alpha);

// Token-level conditionals matching an arbitrary policy's sequence
// distribution (prefix-mass ratios, computed by enumeration).
TokenPolicy induced_token_policy(const Policy& p);

double total_variation(std::span<const double> p, std::span<const double> q);

class MixtureSampler {
public:
    struct Draw {
        int component;
        std::int64_t answer;
    };

    // Weights must be nonnegative and sum to 1 within 1e-9 (ConfigError
    // otherwise). Components must share spaces and prompt counts.
    MixtureSampler(std::vector<std::shared_ptr<const Policy>> components,
                   std::vector<double> weights);

    int num_components() const { return static_cast<int>(components_.size()); }
    const Policy& component(int i) const { return *components_[static_cast<std::size_t>(i)]; }
    double weight(int i) const { return weights_[static_cast<std::size_t>(i)]; }

    // Exact mixture probability sum_i w_i pi_i(y|x).
    double prob(int prompt, std::int64_t answer) const;
    std::vector<double> prob_row(int prompt) const;

    // Component choice then a draw from it. A single-component mixture skips
    // the component draw (consumes no randomness for it).
    Draw draw(int prompt, Rng& rng) const;
    std::int64_t sample(int prompt, Rng& rng) const { return draw(prompt, rng).answer; }

    const AnswerSpace& space() const { return components_.front()->space(); }
    int num_prompts() const { return components_.front()->num_prompts(); }

private:
    std::vector<std::shared_ptr<const Policy>> components_;
    std::vector<double> weights_;
};

// Numerically stable helpers shared across modules.
double log_sum_exp(std::span<const double> xs);

}  // namespace spinlab
