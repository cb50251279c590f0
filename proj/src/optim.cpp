#include "spinlab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "spinlab/rng.hpp"

namespace spinlab {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("optim.learning_rate: must be > 0");
    if (epochs < 1) throw ConfigError("optim.epochs: must be >= 1");
    if (batch_size < 0) throw ConfigError("optim.batch_size: must be >= 0");
    if (clip_norm < 0.0) throw ConfigError("optim.clip_norm: must be >= 0");
}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

class Stepper {
public:
    Stepper(const OptimizerConfig& cfg, std::size_t dim)
        : cfg_(cfg), m_(dim, 0.0), v_(dim, 0.0) {}

    void apply(std::vector<double>& params, std::vector<double>& grad) {
        if (cfg_.clip_norm > 0.0) {
            double sq = 0.0;
            for (double g : grad) sq += g * g;
            const double norm = std::sqrt(sq);
            if (norm > cfg_.clip_norm)
                for (double& g : grad) g *= cfg_.clip_norm / norm;
        }
        if (cfg_.method == OptimizerConfig::Method::gradient) {
            for (std::size_t i = 0; i < params.size(); ++i)
                params[i] -= cfg_.learning_rate * grad[i];
            return;
        }
        ++step_;
        const double c1 = 1.0 - std::pow(kAdamBeta1, step_);
        const double c2 = 1.0 - std::pow(kAdamBeta2, step_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = kAdamBeta1 * m_[i] + (1.0 - kAdamBeta1) * grad[i];
            v_[i] = kAdamBeta2 * v_[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
            params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kAdamEps);
        }
    }

private:
    const OptimizerConfig& cfg_;
    std::vector<double> m_, v_;
    int step_ = 0;
};

void check_finite(const ObjectiveEval& eval, const std::string& where) {
    if (!std::isfinite(eval.value)) throw RunError("optimizer: non-finite loss at " + where);
    for (double g : eval.grad)
        if (!std::isfinite(g)) throw RunError("optimizer: non-finite gradient at " + where);
}

}  // namespace

MinimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const OptimizerConfig& cfg) {
    cfg.validate();
    MinimizeResult out{std::move(init), {}};
    out.trace.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
    Stepper stepper(cfg, out.params.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        ObjectiveEval eval = objective(out.params);
        check_finite(eval, "epoch " + std::to_string(epoch));
        out.trace.push_back(eval.value);
        stepper.apply(out.params, eval.grad);
    }
    ObjectiveEval final_eval = objective(out.params);
    check_finite(final_eval, "final evaluation");
    out.trace.push_back(final_eval.value);
    return out;
}

MinimizeResult minimize_batched(const BatchObjective& objective, int num_examples,
                                std::vector<double> init, const OptimizerConfig& cfg) {
    cfg.validate();
    if (num_examples < 1) throw ArgumentError("minimize_batched: no examples");
    std::vector<int> all(static_cast<std::size_t>(num_examples));
    for (int i = 0; i < num_examples; ++i) all[static_cast<std::size_t>(i)] = i;

    MinimizeResult out{std::move(init), {}};
    out.trace.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
    Stepper stepper(cfg, out.params.size());
    const bool full = cfg.batch_size == 0 || cfg.batch_size >= num_examples;
    Rng rng = Rng::substream(cfg.seed, Stream::optimizer);

    {
        ObjectiveEval eval = objective(out.params, all);
        check_finite(eval, "warm start");
        out.trace.push_back(eval.value);
    }
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::string where = "epoch " + std::to_string(epoch);
        if (full) {
            ObjectiveEval eval = objective(out.params, all);
            check_finite(eval, where);
            stepper.apply(out.params, eval.grad);
        } else {
            const std::vector<int> order = shuffled_indices(num_examples, rng);
            for (int start = 0; start < num_examples; start += cfg.batch_size) {
                const int len = std::min(cfg.batch_size, num_examples - start);
                std::span<const int> batch(order.data() + start, static_cast<std::size_t>(len));
                ObjectiveEval eval = objective(out.params, batch);
                check_finite(eval, where);
                stepper.apply(out.params, eval.grad);
            }
        }
        ObjectiveEval eval = objective(out.params, all);
        check_finite(eval, where + " (post)");
        out.trace.push_back(eval.value);
    }
    return out;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> point, double eps) {
    if (!(eps > 0.0)) throw ArgumentError("finite_diff_grad: eps must be > 0");
    std::vector<double> x(point.begin(), point.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + eps;
        const double hi = f(x);
        x[i] = orig - eps;
        const double lo = f(x);
        x[i] = orig;
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return grad;
}

double gradient_relative_error(std::span<const double> a, std::span<const double> b,
                               double floor) {
    double scale = floor;
    for (double x : a) scale = std::max(scale, std::abs(x));
    for (double x : b) scale = std::max(scale, std::abs(x));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst / scale;
}

}  // namespace spinlab
