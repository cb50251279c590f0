#include "spinlab/losses.hpp"

#include <cmath>

#include "spinlab/preference.hpp"

namespace spinlab {

namespace {

// Normalized batch weights (uniform when none are given).
std::vector<double> batch_weights(std::size_t n, std::span<const double> weights) {
    if (weights.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
    if (weights.size() != n) throw ArgumentError("loss: weight count does not match batch size");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ArgumentError("loss: weights must be nonnegative");
        sum += w;
    }
    if (!(sum > 0.0)) throw ArgumentError("loss: weights sum to zero");
    std::vector<double> out(weights.begin(), weights.end());
    for (double& w : out) w /= sum;
    return out;
}

}  // namespace

LossResult dpo_loss(const TrainablePolicy& theta, const Policy& ref,
                    std::span<const PreferenceTriplet> batch, const DpoConfig& cfg,
                    std::span<const double> weights) {
    if (batch.empty()) throw ArgumentError("dpo_loss: empty batch");
    if (!(cfg.beta > 0.0)) throw ConfigError("dpo_loss: beta must be > 0");
    const std::vector<double> w = batch_weights(batch.size(), weights);
    LossResult out{0.0, std::vector<double>(static_cast<std::size_t>(theta.param_count()), 0.0)};
    std::vector<GradTerm> terms;
    terms.reserve(batch.size() * 2);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const PreferenceTriplet& t = batch[i];
        const double margin =
            cfg.beta * ((theta.log_prob(t.prompt, t.winner) - ref.log_prob(t.prompt, t.winner)) -
                        (theta.log_prob(t.prompt, t.loser) - ref.log_prob(t.prompt, t.loser)));
        out.value -= w[i] * log_sigmoid(margin);
        const double c = w[i] * (sigmoid(margin) - 1.0) * cfg.beta;
        terms.push_back({t.prompt, t.winner, c});
        terms.push_back({t.prompt, t.loser, -c});
    }
    theta.add_log_prob_grad_batch(terms, out.grad);
    return out;
}

LossResult ipo_loss(const TrainablePolicy& theta, const Policy& ref,
                    std::span<const PreferenceTriplet> batch, const IpoConfig& cfg,
                    std::span<const double> weights) {
    if (batch.empty()) throw ArgumentError("ipo_loss: empty batch");
    if (!(cfg.tau > 0.0)) throw ConfigError("ipo_loss: tau must be > 0");
    const double target = 0.5 / cfg.tau;
    const std::vector<double> w = batch_weights(batch.size(), weights);
    LossResult out{0.0, std::vector<double>(static_cast<std::size_t>(theta.param_count()), 0.0)};
    std::vector<GradTerm> terms;
    terms.reserve(batch.size() * 2);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const PreferenceTriplet& t = batch[i];
        const double margin =
            (theta.log_prob(t.prompt, t.winner) - ref.log_prob(t.prompt, t.winner)) -
            (theta.log_prob(t.prompt, t.loser) - ref.log_prob(t.prompt, t.loser));
        const double resid = margin - target;
        out.value += w[i] * resid * resid;
        const double c = w[i] * 2.0 * resid;
        terms.push_back({t.prompt, t.winner, c});
        terms.push_back({t.prompt, t.loser, -c});
    }
    theta.add_log_prob_grad_batch(terms, out.grad);
    return out;
}

LossResult slic_loss(const TrainablePolicy& theta, std::span<const PreferenceTriplet> batch,
                     const SlicConfig& cfg, std::span<const double> weights) {
    if (batch.empty()) throw ArgumentError("slic_loss: empty batch");
    if (!(cfg.delta > 0.0)) throw ConfigError("slic_loss: delta must be > 0");
    if (!(cfg.lambda >= 0.0)) throw ConfigError("slic_loss: lambda must be >= 0");
    const std::vector<double> w = batch_weights(batch.size(), weights);
    LossResult out{0.0, std::vector<double>(static_cast<std::size_t>(theta.param_count()), 0.0)};
    std::vector<GradTerm> terms;
    terms.reserve(batch.size() * 3);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const PreferenceTriplet& t = batch[i];
        if (!t.reference) throw ArgumentError("slic_loss: triplet missing y_ref");
        const double margin = theta.log_prob(t.prompt, t.winner) - theta.log_prob(t.prompt, t.loser);
        const double gap = cfg.delta - margin;
        if (gap > 0.0) {  // hinge active; subgradient 0 exactly at the kink
            out.value += w[i] * gap;
            terms.push_back({t.prompt, t.winner, -w[i]});
            terms.push_back({t.prompt, t.loser, w[i]});
        }
        if (cfg.lambda != 0.0) {
            out.value -= w[i] * cfg.lambda * theta.log_prob(t.prompt, *t.reference);
            terms.push_back({t.prompt, *t.reference, -w[i] * cfg.lambda});
        }
    }
    theta.add_log_prob_grad_batch(terms, out.grad);
    return out;
}

LossResult preference_loss(const LossSpec& spec, double beta, const TrainablePolicy& theta,
                           const Policy& ref, std::span<const PreferenceTriplet> batch,
                           std::span<const double> weights) {
    switch (spec.kind) {
        case LossKind::dpo: return dpo_loss(theta, ref, batch, DpoConfig{beta}, weights);
        case LossKind::ipo: return ipo_loss(theta, ref, batch, spec.ipo, weights);
        case LossKind::slic: return slic_loss(theta, batch, spec.slic, weights);
    }
    throw ArgumentError("preference_loss: unknown loss kind");
}

}  // namespace spinlab
