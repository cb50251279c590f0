#include "spinlab/gflownet.hpp"

#include <algorithm>
#include <cmath>

#include "spinlab/optim.hpp"

namespace spinlab {

GfnTarget::GfnTarget(TokenPolicy prev, TokenPolicy base, double alpha)
    : prev_(std::move(prev)), base_(std::move(base)), alpha_(alpha) {
    if (!prev_.space().same_space(base_.space()) || prev_.num_prompts() != base_.num_prompts())
        throw ConfigError("gfn target: policies must share spaces");
    if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) throw ConfigError("gfn target: alpha must be in [0,1]");
    space().check_enumerable();
    const std::int64_t n = space().num_answers();
    log_z_.resize(static_cast<std::size_t>(num_prompts()));
    std::vector<double> lr(static_cast<std::size_t>(n));
    for (int x = 0; x < num_prompts(); ++x) {
        for (std::int64_t y = 0; y < n; ++y) lr[static_cast<std::size_t>(y)] = log_reward(x, y);
        log_z_[static_cast<std::size_t>(x)] = log_sum_exp(lr);
    }
}

double GfnTarget::log_reward(int prompt, std::int64_t answer) const {
    return alpha_ * prev_.log_prob(prompt, answer) + (1.0 - alpha_) * base_.log_prob(prompt, answer);
}

double GfnTarget::reward(int prompt, std::int64_t answer) const {
    return std::exp(log_reward(prompt, answer));
}

double GfnTarget::log_partition(int prompt) const {
    if (prompt < 0 || prompt >= num_prompts()) throw DomainError("gfn target: prompt out of range");
    return log_z_[static_cast<std::size_t>(prompt)];
}

std::vector<double> GfnTarget::target_row(int prompt) const {
    const std::int64_t n = space().num_answers();
    std::vector<double> out(static_cast<std::size_t>(n));
    const double lz = log_partition(prompt);
    for (std::int64_t y = 0; y < n; ++y)
        out[static_cast<std::size_t>(y)] = std::exp(log_reward(prompt, y) - lz);
    return out;
}

double gfn_reward(const GfnTarget& target, int prompt, std::int64_t answer) {
    return target.reward(prompt, answer);
}

double factorization_gap(const GfnTarget& target, int prompt) {
    const AnswerSpace& space = target.space();
    space.check_enumerable();
    const int V = space.vocab_size();
    const std::int64_t rows = space.num_prefixes();
    // Naive sampler: geometric-mix each conditional row, renormalize locally.
    std::vector<double> logits(static_cast<std::size_t>(rows * (V + 1)), 0.0);
    for (std::int64_t s = 0; s < rows; ++s) {
        const int cols = s == 0 ? V : V + 1;
        for (int a = 0; a < cols; ++a)
            logits[static_cast<std::size_t>(s * (V + 1) + a)] =
                target.alpha() * target.prev().step_log_prob(prompt, s, a) +
                (1.0 - target.alpha()) * target.base().step_log_prob(prompt, s, a);
    }
    // Single-prompt policy over the same space evaluates the naive product.
    TokenPolicy naive(space, 1, std::move(logits));
    const std::int64_t n = space.num_answers();
    std::vector<double> naive_row(static_cast<std::size_t>(n));
    for (std::int64_t y = 0; y < n; ++y)
        naive_row[static_cast<std::size_t>(y)] = std::exp(naive.log_prob(0, y));
    return total_variation(target.target_row(prompt), naive_row);
}

void SubTbConfig::validate() const {
    if (!(lambda_subtb > 0.0 && lambda_subtb <= 1.0))
        throw ConfigError("gfn.lambda_subtb: must be in (0,1]");
    if (!(learning_rate > 0.0)) throw ConfigError("gfn.learning_rate: must be > 0");
    if (epochs < 1) throw ConfigError("gfn.epochs: must be >= 1");
    if (trajectories_per_epoch < 1) throw ConfigError("gfn.trajectories_per_epoch: must be >= 1");
    if (!(exploration_temperature > 0.0))
        throw ConfigError("gfn.exploration_temperature: must be > 0");
    if (!(exploration_uniform >= 0.0 && exploration_uniform <= 1.0))
        throw ConfigError("gfn.exploration_uniform: must be in [0,1]");
}

namespace {

void check_trajectory(const AnswerSpace& space, int num_prompts, const Trajectory& traj) {
    if (traj.prompt < 0 || traj.prompt >= num_prompts)
        throw ArgumentError("subtb_loss: trajectory prompt out of range");
    const int n = static_cast<int>(traj.tokens.size());
    if (n < 1 || n > space.max_len())
        throw ArgumentError("subtb_loss: trajectory length out of range");
    for (int t : traj.tokens)
        if (t < 0 || t >= space.vocab_size())
            throw ArgumentError("subtb_loss: trajectory token out of range");
}

}  // namespace

SubTbResult subtb_loss(const GFlowNetSampler& sampler, const GfnTarget& target,
                       std::span<const Trajectory> trajectories, const SubTbConfig& cfg) {
    cfg.validate();
    if (trajectories.empty()) throw ArgumentError("subtb_loss: empty trajectory batch");
    if (!sampler.space().same_space(target.space()) ||
        sampler.num_prompts() != target.num_prompts())
        throw ArgumentError("subtb_loss: sampler/target space mismatch");
    const AnswerSpace& space = sampler.space();
    const int V = space.vocab_size();
    const int L = space.max_len();

    SubTbResult out{0.0, std::vector<double>(static_cast<std::size_t>(sampler.param_count()), 0.0)};
    const double batch_inv = 1.0 / static_cast<double>(trajectories.size());

    for (const Trajectory& traj : trajectories) {
        check_trajectory(space, sampler.num_prompts(), traj);
        const int x = traj.prompt;
        const int n = static_cast<int>(traj.tokens.size());

        // Per-state bookkeeping along the path: prefix ids (lengths 0..n-1;
        // the full sequence has a row only if shorter than L), step and
        // termination log-probabilities, state flows.
        std::vector<std::int64_t> prefix_ids(static_cast<std::size_t>(n));
        std::vector<double> step_lp(static_cast<std::size_t>(n));
        std::vector<double> term_lp(static_cast<std::size_t>(n) + 1, 0.0);  // index = state
        std::vector<double> log_flow(static_cast<std::size_t>(n) + 1);

        log_flow[0] = target.log_partition(x);
        std::vector<int> walk;
        walk.reserve(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            prefix_ids[static_cast<std::size_t>(k)] = space.prefix_id(walk);
            step_lp[static_cast<std::size_t>(k)] =
                sampler.step_log_prob(x, prefix_ids[static_cast<std::size_t>(k)], traj.tokens[static_cast<std::size_t>(k)]);
            walk.push_back(traj.tokens[static_cast<std::size_t>(k)]);
            const std::int64_t state_answer = space.answer_id(walk);
            const double lr = target.log_reward(x, state_answer);
            if (static_cast<int>(walk.size()) < L) {
                term_lp[static_cast<std::size_t>(k) + 1] =
                    sampler.step_log_prob(x, space.prefix_id(walk), V);
            }  // at length L the terminator is forced: log prob 0
            log_flow[static_cast<std::size_t>(k) + 1] = lr - term_lp[static_cast<std::size_t>(k) + 1];
        }

        // Residuals over all pairs i < j; accumulate per-term coefficients
        // c = 2 w r so each row's softmax backward pass runs once.
        double weight_sum = 0.0;
        for (int i = 0; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j) weight_sum += std::pow(cfg.lambda_subtb, j - i);

        std::vector<double> step_coef(static_cast<std::size_t>(n), 0.0);
        std::vector<double> term_coef(static_cast<std::size_t>(n) + 1, 0.0);
        double traj_loss = 0.0;
        for (int i = 0; i < n; ++i) {
            double cum = 0.0;  // sum of step log-probs i..j-1, built incrementally
            for (int j = i + 1; j <= n; ++j) {
                cum += step_lp[static_cast<std::size_t>(j - 1)];
                const double resid = log_flow[static_cast<std::size_t>(i)] + cum -
                                     log_flow[static_cast<std::size_t>(j)];
                const double w = std::pow(cfg.lambda_subtb, j - i) / weight_sum;
                traj_loss += w * resid * resid;
                const double c = batch_inv * 2.0 * w * resid;
                for (int k = i; k < j; ++k) step_coef[static_cast<std::size_t>(k)] += c;
                // d resid / d term_lp[j] = +1 (flow in the denominator),
                // d resid / d term_lp[i] = -1 (i >= 1 only; F(root) is fixed).
                term_coef[static_cast<std::size_t>(j)] += c;
                if (i >= 1) term_coef[static_cast<std::size_t>(i)] -= c;
            }
        }
        out.value += batch_inv * traj_loss;

        std::vector<double> coefs(static_cast<std::size_t>(V) + 1);
        walk.clear();
        for (int k = 0; k < n; ++k) {
            std::fill(coefs.begin(), coefs.end(), 0.0);
            coefs[static_cast<std::size_t>(traj.tokens[static_cast<std::size_t>(k)])] =
                step_coef[static_cast<std::size_t>(k)];
            // The state's own termination column shares this row.
            if (k >= 1 && k < L)
                coefs[static_cast<std::size_t>(V)] = term_coef[static_cast<std::size_t>(k)];
            if (step_coef[static_cast<std::size_t>(k)] != 0.0 ||
                (k >= 1 && term_coef[static_cast<std::size_t>(k)] != 0.0))
                sampler.add_row_grad(x, prefix_ids[static_cast<std::size_t>(k)], coefs, out.grad);
            walk.push_back(traj.tokens[static_cast<std::size_t>(k)]);
        }
        if (n < L && term_coef[static_cast<std::size_t>(n)] != 0.0) {
            std::fill(coefs.begin(), coefs.end(), 0.0);
            coefs[static_cast<std::size_t>(V)] = term_coef[static_cast<std::size_t>(n)];
            sampler.add_row_grad(x, space.prefix_id(walk), coefs, out.grad);
        }
    }
    return out;
}

std::vector<double> terminating_distribution(const GFlowNetSampler& sampler, int prompt) {
    const AnswerSpace& space = sampler.space();
    space.check_enumerable();
    const int V = space.vocab_size();
    const int L = space.max_len();
    const std::int64_t n = space.num_answers();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    // Depth-first over the prefix tree, carrying the reach probability.
    std::vector<int> prefix;
    const auto walk = [&](auto&& self, double reach) -> void {
        const std::int64_t pid = space.prefix_id(prefix);
        const auto row = sampler.step_prob_row(prompt, pid);
        for (int a = 0; a < V; ++a) {
            const double p = reach * row[static_cast<std::size_t>(a)];
            prefix.push_back(a);
            if (static_cast<int>(prefix.size()) == L) {
                out[static_cast<std::size_t>(space.answer_id(prefix))] += p;  // forced stop
            } else {
                const std::int64_t cid = space.prefix_id(prefix);
                out[static_cast<std::size_t>(space.answer_id(prefix))] +=
                    p * sampler.step_prob(prompt, cid, V);
                self(self, p);
            }
            prefix.pop_back();
        }
    };
    walk(walk, 1.0);
    return out;
}

GFlowNetSampler exact_sampler(const GfnTarget& target) {
    const AnswerSpace& space = target.space();
    const int V = space.vocab_size();
    const int L = space.max_len();
    const std::int64_t rows = space.num_prefixes();
    const std::int64_t cols = V + 1;
    std::vector<double> logits(static_cast<std::size_t>(rows * cols * target.num_prompts()), 0.0);
    // Row logits = subtree reward log-masses; softmax gives the conditionals
    // of the normalized reward distribution.
    for (int x = 0; x < target.num_prompts(); ++x) {
        std::vector<double> prefix_mass(static_cast<std::size_t>(rows));
        for (std::int64_t s = rows - 1; s >= 0; --s) {
            const std::vector<int> toks = space.prefix_tokens(s);
            const int len = static_cast<int>(toks.size());
            const std::size_t off =
                static_cast<std::size_t>((static_cast<std::int64_t>(x) * rows + s) * cols);
            std::vector<int> child(toks.begin(), toks.end());
            child.push_back(0);
            std::vector<double> parts;
            parts.reserve(static_cast<std::size_t>(V) + 1);
            for (int a = 0; a < V; ++a) {
                child.back() = a;
                const double mass =
                    len + 1 == L
                        ? target.log_reward(x, space.answer_id(child))
                        : prefix_mass[static_cast<std::size_t>(space.prefix_id(child))];
                logits[off + static_cast<std::size_t>(a)] = mass;
                parts.push_back(mass);
            }
            if (len >= 1) {
                const double own = target.log_reward(x, space.answer_id(toks));
                logits[off + static_cast<std::size_t>(V)] = own;
                parts.push_back(own);
            }
            prefix_mass[static_cast<std::size_t>(s)] = log_sum_exp(parts);
        }
    }
    return GFlowNetSampler(space, target.num_prompts(), std::move(logits));
}

Trajectory sample_trajectory(const GFlowNetSampler& sampler, int prompt, const SubTbConfig& cfg,
                             Rng& rng) {
    const AnswerSpace& space = sampler.space();
    const int V = space.vocab_size();
    const int L = space.max_len();
    Trajectory traj{prompt, {}};
    std::vector<double> probs(static_cast<std::size_t>(V) + 1);
    for (int k = 0; k < L; ++k) {
        const std::int64_t pid = space.prefix_id(traj.tokens);
        const auto row = sampler.step_prob_row(prompt, pid);
        const int legal = static_cast<int>(row.size());
        int choice;
        if (rng.uniform() < cfg.exploration_uniform) {
            choice = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(legal)));
        } else {
            // Tempered conditionals.
            double sum = 0.0;
            for (int a = 0; a < legal; ++a) {
                probs[static_cast<std::size_t>(a)] =
                    std::pow(row[static_cast<std::size_t>(a)], 1.0 / cfg.exploration_temperature);
                sum += probs[static_cast<std::size_t>(a)];
            }
            for (int a = 0; a < legal; ++a) probs[static_cast<std::size_t>(a)] /= sum;
            choice = rng.categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(legal)));
        }
        if (choice == V) break;  // terminator (never offered at the root)
        traj.tokens.push_back(choice);
    }
    return traj;
}

GfnTrainingResult train_gflownet(const GfnTarget& target, const SubTbConfig& cfg) {
    cfg.validate();
    const AnswerSpace& space = target.space();
    const int P = target.num_prompts();

    OptimizerConfig opt;
    opt.method = OptimizerConfig::Method::adam;
    opt.learning_rate = cfg.learning_rate;
    opt.epochs = 1;

    std::vector<double> params(target.prev().params().begin(), target.prev().params().end());
    Rng rng = Rng::substream(cfg.seed, Stream::gfn_train);

    GfnTrainingResult out{GFlowNetSampler(space, P, params), {}};
    out.curve.reserve(static_cast<std::size_t>(cfg.epochs));

    const auto tv_to_target = [&](const GFlowNetSampler& s) {
        double worst = 0.0;
        for (int x = 0; x < P; ++x)
            worst = std::max(worst,
                             total_variation(terminating_distribution(s, x), target.target_row(x)));
        return worst;
    };

    // Reuse one Adam state across epochs: drive minimize() one step at a time
    // would reset moments, so the stepper lives here via minimize's config...
    // Instead run a plain Adam loop.
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        GFlowNetSampler sampler(space, P, params);
        std::vector<Trajectory> batch;
        batch.reserve(static_cast<std::size_t>(cfg.trajectories_per_epoch));
        for (int i = 0; i < cfg.trajectories_per_epoch; ++i) {
            const int x = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(P)));
            batch.push_back(sample_trajectory(sampler, x, cfg, rng));
        }
        SubTbResult loss = subtb_loss(sampler, target, batch, cfg);
        if (!std::isfinite(loss.value))
            throw RunError("train_gflownet: non-finite loss at epoch " + std::to_string(epoch));
        for (double g : loss.grad)
            if (!std::isfinite(g))
                throw RunError("train_gflownet: non-finite gradient at epoch " +
                               std::to_string(epoch));
        const double c1 = 1.0 - std::pow(b1, epoch + 1);
        const double c2 = 1.0 - std::pow(b2, epoch + 1);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * loss.grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * loss.grad[i] * loss.grad[i];
            params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
        GFlowNetSampler next(space, P, params);
        out.curve.push_back({epoch, loss.value, tv_to_target(next)});
        out.sampler = std::move(next);
    }
    return out;
}

}  // namespace spinlab
