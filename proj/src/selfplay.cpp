#include "spinlab/selfplay.hpp"

#include <chrono>
#include <cmath>

namespace spinlab {

void AlphaSpinConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("spin.alpha: must be in [0,1]");
    if (!(beta > 0.0)) throw ConfigError("spin.beta: must be > 0");
    if (history_len && *history_len < 1) throw ConfigError("spin.history_len: must be >= 1 or inf");
    if (iterations < 0) throw ConfigError("spin.iterations: must be >= 0");
    if (triplets_per_iter < 1) throw ConfigError("spin.triplets_per_iter: must be >= 1");
    if (triplets_iter0 < 1) throw ConfigError("spin.triplets_iter0: must be >= 1");
    if (triplets_iter0 > triplets_per_iter)
        throw ConfigError("spin.triplets_iter0: must be <= spin.triplets_per_iter");
    optimizer.validate();
}

TabularPolicy build_reference(const IterationHistory& history, double alpha) {
    const int t = history.next_iteration();
    return geometric_mixture(*history.at(t - 1), *history.base, alpha);
}

MixtureSampler loser_sampler(const IterationHistory& history, std::optional<int> history_len,
                             int iteration) {
    if (iteration < 0) throw ArgumentError("loser_sampler: iteration must be >= 0");
    std::vector<std::shared_ptr<const Policy>> components;
    std::vector<double> weights;
    if (!history_len) {
        // Fictitious play: uniform over all previous iterates, base before
        // the first iteration exists.
        if (iteration == 0) {
            components.push_back(history.base);
            weights.push_back(1.0);
        } else {
            for (int k = 0; k < iteration; ++k) {
                components.push_back(history.at(k));
                weights.push_back(1.0 / iteration);
            }
        }
    } else {
        const int h = *history_len;
        // Indices t-h .. t-1; all below zero collapse into one base component.
        const int negatives = std::max(0, h - iteration);
        if (negatives > 0) {
            components.push_back(history.base);
            weights.push_back(static_cast<double>(negatives) / h);
        }
        for (int k = std::max(0, iteration - h); k <= iteration - 1; ++k) {
            components.push_back(history.at(k));
            weights.push_back(1.0 / h);
        }
    }
    return MixtureSampler(std::move(components), std::move(weights));
}

std::vector<PreferenceTriplet> gather_triplets(const SftDataset& sft,
                                               const MixtureSampler& sampler, int n, Rng& rng,
                                               bool with_ref) {
    if (sft.empty()) throw ArgumentError("gather_triplets: empty SFT dataset");
    if (n < 1) throw ArgumentError("gather_triplets: n must be >= 1");
    std::vector<PreferenceTriplet> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const SftExample& ex = sft[static_cast<std::size_t>(rng.bounded(sft.size()))];
        const std::int64_t loser = sampler.sample(ex.prompt, rng);
        out.push_back({ex.prompt, ex.answer, loser,
                       with_ref ? std::optional<std::int64_t>(ex.answer) : std::nullopt});
    }
    return out;
}

WeightedBatch exact_expectation_batch(const SyntheticTask& task, const MixtureSampler& sampler,
                                      bool with_ref) {
    task.space.check_enumerable();
    const std::int64_t n = task.space.num_answers();
    const int P = task.data->num_prompts();
    WeightedBatch out;
    out.triplets.reserve(static_cast<std::size_t>(P * n * n));
    out.weights.reserve(out.triplets.capacity());
    for (int x = 0; x < P; ++x) {
        const double qx = task.prompt_weights[static_cast<std::size_t>(x)];
        const auto data_row = task.data->prob_row(x);
        const std::vector<double> loser_row = sampler.prob_row(x);
        for (std::int64_t yw = 0; yw < n; ++yw) {
            const double pw = qx * data_row[static_cast<std::size_t>(yw)];
            for (std::int64_t yl = 0; yl < n; ++yl) {
                out.triplets.push_back(
                    {x, yw, yl, with_ref ? std::optional<std::int64_t>(yw) : std::nullopt});
                out.weights.push_back(pw * loser_row[static_cast<std::size_t>(yl)]);
            }
        }
    }
    return out;
}

double mean_kl(const SyntheticTask& task, const Policy& p, const Policy& q) {
    double kl = 0.0;
    for (int x = 0; x < p.num_prompts(); ++x)
        kl += task.prompt_weights[static_cast<std::size_t>(x)] * kl_divergence(p, q, x);
    return kl;
}

namespace {

struct TrainedIterate {
    std::shared_ptr<const TabularPolicy> policy;
    std::vector<double> trace;
};

// Warm-starts at prev's logits and minimizes the preference loss on the
// gathered batch. Exact-expectation batches always take full steps.
TrainedIterate train_iterate(const AlphaSpinConfig& cfg, const LossSpec& loss,
                             const TabularPolicy& prev, const Policy& ref,
                             const WeightedBatch& batch, int iteration) {
    OptimizerConfig opt = cfg.optimizer;
    opt.seed = Rng::derive_seed(cfg.seed, Stream::optimizer, static_cast<std::uint64_t>(iteration));
    std::vector<double> init(prev.params().begin(), prev.params().end());
    const AnswerSpace& space = prev.space();
    const int prompts = prev.num_prompts();

    MinimizeResult result;
    if (!batch.weights.empty()) {
        const Objective objective = [&](std::span<const double> params) {
            TabularPolicy theta(space, prompts, std::vector<double>(params.begin(), params.end()));
            LossResult r = preference_loss(loss, cfg.beta, theta, ref, batch.triplets,
                                           batch.weights);
            return ObjectiveEval{r.value, std::move(r.grad)};
        };
        opt.batch_size = 0;
        result = minimize(objective, std::move(init), opt);
    } else {
        const BatchObjective objective = [&](std::span<const double> params,
                                             std::span<const int> idx) {
            TabularPolicy theta(space, prompts, std::vector<double>(params.begin(), params.end()));
            std::vector<PreferenceTriplet> sub;
            sub.reserve(idx.size());
            for (int i : idx) sub.push_back(batch.triplets[static_cast<std::size_t>(i)]);
            LossResult r = preference_loss(loss, cfg.beta, theta, ref, sub);
            return ObjectiveEval{r.value, std::move(r.grad)};
        };
        result = minimize_batched(objective, static_cast<int>(batch.triplets.size()),
                                  std::move(init), opt);
    }
    return {std::make_shared<TabularPolicy>(space, prompts, std::move(result.params)),
            std::move(result.trace)};
}

IterationMetrics make_metrics(const SyntheticTask& task, int iteration, double train_loss,
                              const TabularPolicy& policy, double wall_seconds) {
    return {iteration, train_loss, mean_kl(task, *task.data, policy),
            mean_kl(task, policy, *task.base), wall_seconds};
}

}  // namespace

SpinStepResult spin_iteration(IterationHistory& history, const AlphaSpinConfig& cfg,
                              const LossSpec& loss, const SyntheticTask& task,
                              const SftDataset& sft, LoserSource source) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const int t = history.next_iteration();
    const bool with_ref = loss.kind == LossKind::slic;

    const auto ref = std::make_shared<TabularPolicy>(build_reference(history, cfg.alpha));
    const MixtureSampler sampler =
        source == LoserSource::reference_exact
            ? MixtureSampler({ref}, {1.0})
            : loser_sampler(history, cfg.history_len, t);

    WeightedBatch batch;
    if (cfg.exact_expectation) {
        batch = exact_expectation_batch(task, sampler, with_ref);
    } else {
        Rng rng = Rng::substream(cfg.seed, Stream::gather, static_cast<std::uint64_t>(t));
        const int n = t == 0 ? cfg.triplets_iter0 : cfg.triplets_per_iter;
        batch.triplets = gather_triplets(sft, sampler, n, rng, with_ref);
    }

    TrainedIterate trained = train_iterate(cfg, loss, *history.at(t - 1), *ref, batch, t);
    history.checkpoints.push_back(trained.policy);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {trained.policy,
            make_metrics(task, t, trained.trace.back(), *trained.policy, wall),
            std::move(trained.trace)};
}

RunResult run_alpha_spin(const AlphaSpinConfig& cfg, const LossSpec& loss,
                         const SyntheticTask& task, const SftDataset& sft, LoserSource source) {
    cfg.validate();
    RunResult out;
    out.history.base = task.base;
    for (int t = 0; t <= cfg.iterations; ++t) {
        SpinStepResult step = spin_iteration(out.history, cfg, loss, task, sft, source);
        out.metrics.push_back(step.metrics);
        out.loss_traces.push_back(std::move(step.loss_trace));
    }
    return out;
}

RunResult run_vanilla_spin(const AlphaSpinConfig& cfg, const LossSpec& loss,
                           const SyntheticTask& task, const SftDataset& sft) {
    cfg.validate();
    const bool with_ref = loss.kind == LossKind::slic;
    RunResult out;
    out.history.base = task.base;
    for (int t = 0; t <= cfg.iterations; ++t) {
        const auto start = std::chrono::steady_clock::now();
        const std::shared_ptr<const TabularPolicy> ref = out.history.at(t - 1);

        WeightedBatch batch;
        if (cfg.exact_expectation) {
            const std::int64_t n = task.space.num_answers();
            for (int x = 0; x < ref->num_prompts(); ++x) {
                const double qx = task.prompt_weights[static_cast<std::size_t>(x)];
                const auto data_row = task.data->prob_row(x);
                const auto ref_row = ref->prob_row(x);
                for (std::int64_t yw = 0; yw < n; ++yw)
                    for (std::int64_t yl = 0; yl < n; ++yl) {
                        batch.triplets.push_back(
                            {x, yw, yl, with_ref ? std::optional<std::int64_t>(yw) : std::nullopt});
                        batch.weights.push_back(qx * data_row[static_cast<std::size_t>(yw)] *
                                                ref_row[static_cast<std::size_t>(yl)]);
                    }
            }
        } else {
            Rng rng = Rng::substream(cfg.seed, Stream::gather, static_cast<std::uint64_t>(t));
            const int n = t == 0 ? cfg.triplets_iter0 : cfg.triplets_per_iter;
            batch.triplets.reserve(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                const SftExample& ex = sft[static_cast<std::size_t>(rng.bounded(sft.size()))];
                const std::int64_t loser = ref->sample(ex.prompt, rng);
                batch.triplets.push_back(
                    {ex.prompt, ex.answer, loser,
                     with_ref ? std::optional<std::int64_t>(ex.answer) : std::nullopt});
            }
        }

        TrainedIterate trained = train_iterate(cfg, loss, *ref, *ref, batch, t);
        out.history.checkpoints.push_back(trained.policy);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.metrics.push_back(
            make_metrics(task, t, trained.trace.back(), *trained.policy, wall));
        out.loss_traces.push_back(std::move(trained.trace));
    }
    return out;
}

}  // namespace spinlab
