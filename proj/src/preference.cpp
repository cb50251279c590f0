#include "spinlab/preference.hpp"

#include <cmath>

namespace spinlab {

RewardFunction::RewardFunction(AnswerSpace space, int num_prompts, std::vector<double> values)
    : space_(std::move(space)), num_prompts_(num_prompts), values_(std::move(values)) {
    if (num_prompts_ < 1) throw ConfigError("reward: num_prompts must be >= 1");
    if (static_cast<std::int64_t>(values_.size()) != space_.num_answers() * num_prompts_)
        throw ConfigError("reward: values size mismatch");
    for (double v : values_)
        if (!std::isfinite(v)) throw ConfigError("reward: values must be finite");
}

RewardFunction RewardFunction::zero(AnswerSpace space, int num_prompts) {
    std::vector<double> values(static_cast<std::size_t>(space.num_answers() * num_prompts), 0.0);
    return RewardFunction(std::move(space), num_prompts, std::move(values));
}

double RewardFunction::value(int prompt, std::int64_t answer) const {
    if (prompt < 0 || prompt >= num_prompts_) throw DomainError("reward: prompt id out of range");
    space_.check_answer(answer);
    return values_[static_cast<std::size_t>(prompt) * space_.num_answers() +
                   static_cast<std::size_t>(answer)];
}

std::span<const double> RewardFunction::value_row(int prompt) const {
    if (prompt < 0 || prompt >= num_prompts_) throw DomainError("reward: prompt id out of range");
    const std::int64_t n = space_.num_answers();
    return {values_.data() + static_cast<std::size_t>(prompt) * n, static_cast<std::size_t>(n)};
}

RewardFunction RewardFunction::with_values(std::vector<double> values) const {
    return RewardFunction(space_, num_prompts_, std::move(values));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_sigmoid(double z) {
    if (z >= 0.0) return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

double bt_prob(const RewardFunction& r, int prompt, std::int64_t y, std::int64_t y2) {
    return sigmoid(r.value(prompt, y) - r.value(prompt, y2));
}

RewardMleResult reward_mle_loss(const RewardFunction& r, std::span<const PreferencePair> data) {
    if (data.empty()) throw ArgumentError("reward_mle_loss: empty data");
    const std::int64_t n = r.space().num_answers();
    RewardMleResult out{0.0, std::vector<double>(r.values().size(), 0.0)};
    const double inv = 1.0 / static_cast<double>(data.size());
    for (const PreferencePair& pair : data) {
        const double margin = r.value(pair.prompt, pair.winner) - r.value(pair.prompt, pair.loser);
        out.loss -= log_sigmoid(margin) * inv;
        // d(-log sigmoid(m))/dm = sigmoid(m) - 1
        const double c = (sigmoid(margin) - 1.0) * inv;
        const std::size_t base = static_cast<std::size_t>(pair.prompt) * n;
        out.grad[base + static_cast<std::size_t>(pair.winner)] += c;
        out.grad[base + static_cast<std::size_t>(pair.loser)] -= c;
    }
    return out;
}

ClosedFormResult closed_form_policy(const Policy& ref, const RewardFunction& r, double beta) {
    if (!(beta > 0.0)) throw ConfigError("closed_form_policy: beta must be > 0");
    if (!ref.space().same_space(r.space()) || ref.num_prompts() != r.num_prompts())
        throw DomainError("closed_form_policy: reward/reference space mismatch");
    ref.space().check_enumerable();
    const std::int64_t n = ref.space().num_answers();
    const int P = ref.num_prompts();
    std::vector<double> logits(static_cast<std::size_t>(n * P));
    PartitionReport report;
    report.z.resize(static_cast<std::size_t>(P));
    for (int x = 0; x < P; ++x) {
        double* row = logits.data() + static_cast<std::size_t>(x) * n;
        for (std::int64_t y = 0; y < n; ++y)
            row[y] = ref.log_prob(x, y) + r.value(x, y) / beta;
        report.z[static_cast<std::size_t>(x)] =
            std::exp(log_sum_exp(std::span<const double>(row, static_cast<std::size_t>(n))));
    }
    return {TabularPolicy(ref.space(), P, std::move(logits)), std::move(report)};
}

double implied_reward(const Policy& pi, const Policy& ref, double beta, int prompt,
                      std::int64_t answer) {
    if (!(beta > 0.0)) throw ConfigError("implied_reward: beta must be > 0");
    return beta * (pi.log_prob(prompt, answer) - ref.log_prob(prompt, answer));
}

RewardFunction implied_reward_table(const Policy& pi, const Policy& ref, double beta) {
    if (!(beta > 0.0)) throw ConfigError("implied_reward: beta must be > 0");
    if (!pi.space().same_space(ref.space()) || pi.num_prompts() != ref.num_prompts())
        throw DomainError("implied_reward: space mismatch");
    pi.space().check_enumerable();
    const std::int64_t n = pi.space().num_answers();
    std::vector<double> values(static_cast<std::size_t>(n * pi.num_prompts()));
    for (int x = 0; x < pi.num_prompts(); ++x)
        for (std::int64_t y = 0; y < n; ++y)
            values[static_cast<std::size_t>(x * n + y)] =
                beta * (pi.log_prob(x, y) - ref.log_prob(x, y));
    return RewardFunction(pi.space(), pi.num_prompts(), std::move(values));
}

double kl_regularized_objective(const Policy& pi, const RewardFunction& r, double beta,
                                const Policy& ref, std::span<const double> prompt_weights) {
    if (!(beta > 0.0)) throw ConfigError("kl_regularized_objective: beta must be > 0");
    if (static_cast<int>(prompt_weights.size()) != pi.num_prompts())
        throw ArgumentError("kl_regularized_objective: prompt weight count mismatch");
    pi.space().check_enumerable();
    const std::int64_t n = pi.space().num_answers();
    double obj = 0.0;
    for (int x = 0; x < pi.num_prompts(); ++x) {
        if (prompt_weights[static_cast<std::size_t>(x)] == 0.0) continue;
        double expected_reward = 0.0;
        for (std::int64_t y = 0; y < n; ++y)
            expected_reward += std::exp(pi.log_prob(x, y)) * r.value(x, y);
        obj += prompt_weights[static_cast<std::size_t>(x)] *
               (expected_reward - beta * kl_divergence(pi, ref, x));
    }
    return obj;
}

}  // namespace spinlab
