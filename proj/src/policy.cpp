#include "spinlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <unordered_map>

namespace spinlab {

double log_sum_exp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

void Policy::check_prompt_index(int prompt) const {
    if (prompt < 0 || prompt >= num_prompts())
        throw DomainError("prompt id out of range: " + std::to_string(prompt));
}

void TrainablePolicy::add_log_prob_grad_batch(std::span<const GradTerm> terms,
                                              std::span<double> grad) const {
    for (const GradTerm& t : terms) add_log_prob_grad(t.prompt, t.answer, t.coef, grad);
}

// --- TabularPolicy ---

static void check_finite_table(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw ConfigError(std::string(what) + ": entries must be finite");
}

TabularPolicy::TabularPolicy(AnswerSpace space, int num_prompts, std::vector<double> logits)
    : space_(std::move(space)), num_prompts_(num_prompts), logits_(std::move(logits)) {
    if (num_prompts_ < 1) throw ConfigError("tabular policy: num_prompts must be >= 1");
    const std::int64_t n = space_.num_answers();
    if (static_cast<std::int64_t>(logits_.size()) != n * num_prompts_)
        throw ConfigError("tabular policy: logits size mismatch");
    check_finite_table(logits_, "tabular policy logits");
    log_norms_.resize(static_cast<std::size_t>(num_prompts_));
    probs_.resize(logits_.size());
    for (int x = 0; x < num_prompts_; ++x) {
        std::span<const double> row(logits_.data() + static_cast<std::size_t>(x) * n,
                                    static_cast<std::size_t>(n));
        const double lse = log_sum_exp(row);
        log_norms_[static_cast<std::size_t>(x)] = lse;
        double* p = probs_.data() + static_cast<std::size_t>(x) * n;
        for (std::int64_t y = 0; y < n; ++y) p[y] = std::exp(row[static_cast<std::size_t>(y)] - lse);
    }
}

TabularPolicy TabularPolicy::uniform(AnswerSpace space, int num_prompts) {
    std::vector<double> logits(
        static_cast<std::size_t>(space.num_answers() * num_prompts), 0.0);
    return TabularPolicy(std::move(space), num_prompts, std::move(logits));
}

TabularPolicy TabularPolicy::delta(AnswerSpace space, int num_prompts, std::int64_t answer,
                                   double margin) {
    space.check_answer(answer);
    const std::int64_t n = space.num_answers();
    std::vector<double> logits(static_cast<std::size_t>(n * num_prompts), -margin);
    for (int x = 0; x < num_prompts; ++x)
        logits[static_cast<std::size_t>(x * n + answer)] = 0.0;
    return TabularPolicy(std::move(space), num_prompts, std::move(logits));
}

TabularPolicy TabularPolicy::from_probs(AnswerSpace space, int num_prompts,
                                        const std::vector<double>& probs) {
    std::vector<double> logits(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!(probs[i] > 0.0)) throw ConfigError("tabular policy: probabilities must be positive");
        logits[i] = std::log(probs[i]);
    }
    return TabularPolicy(std::move(space), num_prompts, std::move(logits));
}

double TabularPolicy::log_prob(int prompt, std::int64_t answer) const {
    check_prompt_index(prompt);
    space_.check_answer(answer);
    return logits_[static_cast<std::size_t>(prompt) * space_.num_answers() +
                   static_cast<std::size_t>(answer)] -
           log_norms_[static_cast<std::size_t>(prompt)];
}

double TabularPolicy::prob(int prompt, std::int64_t answer) const {
    check_prompt_index(prompt);
    space_.check_answer(answer);
    return probs_[static_cast<std::size_t>(prompt) * space_.num_answers() +
                  static_cast<std::size_t>(answer)];
}

std::span<const double> TabularPolicy::prob_row(int prompt) const {
    check_prompt_index(prompt);
    const std::int64_t n = space_.num_answers();
    return {probs_.data() + static_cast<std::size_t>(prompt) * n, static_cast<std::size_t>(n)};
}

std::span<const double> TabularPolicy::logit_row(int prompt) const {
    check_prompt_index(prompt);
    const std::int64_t n = space_.num_answers();
    return {logits_.data() + static_cast<std::size_t>(prompt) * n, static_cast<std::size_t>(n)};
}

std::int64_t TabularPolicy::sample(int prompt, Rng& rng) const {
    return rng.categorical(prob_row(prompt));
}

std::unique_ptr<TrainablePolicy> TabularPolicy::with_params(std::vector<double> params) const {
    return std::make_unique<TabularPolicy>(space_, num_prompts_, std::move(params));
}

void TabularPolicy::add_log_prob_grad(int prompt, std::int64_t answer, double coef,
                                      std::span<double> grad) const {
    check_prompt_index(prompt);
    space_.check_answer(answer);
    const std::int64_t n = space_.num_answers();
    double* g = grad.data() + static_cast<std::size_t>(prompt) * n;
    const double* p = probs_.data() + static_cast<std::size_t>(prompt) * n;
    for (std::int64_t a = 0; a < n; ++a) g[a] -= coef * p[a];
    g[answer] += coef;
}

void TabularPolicy::add_log_prob_grad_batch(std::span<const GradTerm> terms,
                                            std::span<double> grad) const {
    // sum_i c_i (delta_{a,y_i} - pi(a|x_i)) reduces to one softmax pass per
    // prompt once the delta coefficients and per-prompt totals are pooled.
    const std::int64_t n = space_.num_answers();
    std::vector<double> delta(grad.size(), 0.0);
    std::vector<double> prompt_total(static_cast<std::size_t>(num_prompts_), 0.0);
    std::vector<char> touched(static_cast<std::size_t>(num_prompts_), 0);
    for (const GradTerm& t : terms) {
        check_prompt_index(t.prompt);
        space_.check_answer(t.answer);
        delta[static_cast<std::size_t>(t.prompt) * n + static_cast<std::size_t>(t.answer)] +=
            t.coef;
        prompt_total[static_cast<std::size_t>(t.prompt)] += t.coef;
        touched[static_cast<std::size_t>(t.prompt)] = 1;
    }
    for (int x = 0; x < num_prompts_; ++x) {
        if (!touched[static_cast<std::size_t>(x)]) continue;
        const double total = prompt_total[static_cast<std::size_t>(x)];
        const double* p = probs_.data() + static_cast<std::size_t>(x) * n;
        const double* d = delta.data() + static_cast<std::size_t>(x) * n;
        double* g = grad.data() + static_cast<std::size_t>(x) * n;
        for (std::int64_t a = 0; a < n; ++a) g[a] += d[a] - total * p[a];
    }
}

// --- TokenPolicy ---

TokenPolicy::TokenPolicy(AnswerSpace space, int num_prompts, std::vector<double> logits)
    : space_(std::move(space)), num_prompts_(num_prompts), logits_(std::move(logits)) {
    if (num_prompts_ < 1) throw ConfigError("token policy: num_prompts must be >= 1");
    const std::int64_t rows = space_.num_prefixes();
    const std::int64_t cols = space_.vocab_size() + 1;
    if (static_cast<std::int64_t>(logits_.size()) != rows * cols * num_prompts_)
        throw ConfigError("token policy: logits size mismatch");
    check_finite_table(logits_, "token policy logits");
    probs_.assign(logits_.size(), 0.0);
    for (int x = 0; x < num_prompts_; ++x) {
        for (std::int64_t s = 0; s < rows; ++s) {
            const std::size_t off = row_offset(x, s);
            const int legal = legal_columns(s);
            std::span<const double> row(logits_.data() + off, static_cast<std::size_t>(legal));
            const double lse = log_sum_exp(row);
            for (int a = 0; a < legal; ++a)
                probs_[off + static_cast<std::size_t>(a)] = std::exp(row[static_cast<std::size_t>(a)] - lse);
        }
    }
}

TokenPolicy TokenPolicy::uniform(AnswerSpace space, int num_prompts) {
    const std::int64_t sz = space.num_prefixes() * (space.vocab_size() + 1) * num_prompts;
    return TokenPolicy(std::move(space), num_prompts, std::vector<double>(static_cast<std::size_t>(sz), 0.0));
}

int TokenPolicy::legal_columns(std::int64_t prefix_id) const {
    // Root cannot terminate (answers have length >= 1); other prefixes may.
    return prefix_id == 0 ? space_.vocab_size() : space_.vocab_size() + 1;
}

std::size_t TokenPolicy::row_offset(int prompt, std::int64_t prefix_id) const {
    const std::int64_t rows = space_.num_prefixes();
    const std::int64_t cols = space_.vocab_size() + 1;
    return static_cast<std::size_t>((static_cast<std::int64_t>(prompt) * rows + prefix_id) * cols);
}

double TokenPolicy::step_prob(int prompt, std::int64_t prefix_id, int token) const {
    check_prompt_index(prompt);
    if (prefix_id < 0 || prefix_id >= space_.num_prefixes())
        throw DomainError("prefix id out of range");
    if (token < 0 || token >= legal_columns(prefix_id))
        throw DomainError("token id out of range for prefix");
    return probs_[row_offset(prompt, prefix_id) + static_cast<std::size_t>(token)];
}

double TokenPolicy::step_log_prob(int prompt, std::int64_t prefix_id, int token) const {
    return std::log(step_prob(prompt, prefix_id, token));
}

std::span<const double> TokenPolicy::step_prob_row(int prompt, std::int64_t prefix_id) const {
    check_prompt_index(prompt);
    if (prefix_id < 0 || prefix_id >= space_.num_prefixes())
        throw DomainError("prefix id out of range");
    return {probs_.data() + row_offset(prompt, prefix_id),
            static_cast<std::size_t>(legal_columns(prefix_id))};
}

double TokenPolicy::log_prob(int prompt, std::int64_t answer) const {
    check_prompt_index(prompt);
    const std::vector<int> toks = space_.answer_tokens(answer);
    double lp = 0.0;
    std::vector<int> prefix;
    prefix.reserve(toks.size());
    for (int t : toks) {
        const std::int64_t pid = space_.prefix_id(prefix);
        lp += std::log(probs_[row_offset(prompt, pid) + static_cast<std::size_t>(t)]);
        prefix.push_back(t);
    }
    if (static_cast<int>(toks.size()) < space_.max_len()) {
        const std::int64_t pid = space_.prefix_id(prefix);
        lp += std::log(probs_[row_offset(prompt, pid) + static_cast<std::size_t>(space_.vocab_size())]);
    }
    return lp;
}

std::int64_t TokenPolicy::sample(int prompt, Rng& rng) const {
    check_prompt_index(prompt);
    std::vector<int> prefix;
    for (int k = 0; k < space_.max_len(); ++k) {
        const std::int64_t pid = space_.prefix_id(prefix);
        const int choice = rng.categorical(step_prob_row(prompt, pid));
        if (choice == space_.vocab_size()) break;  // terminator
        prefix.push_back(choice);
    }
    return space_.answer_id(prefix);
}

std::unique_ptr<TrainablePolicy> TokenPolicy::with_params(std::vector<double> params) const {
    return std::make_unique<TokenPolicy>(space_, num_prompts_, std::move(params));
}

void TokenPolicy::add_row_grad(int prompt, std::int64_t prefix_id,
                               std::span<const double> coef_cols, std::span<double> grad) const {
    const std::size_t off = row_offset(prompt, prefix_id);
    const int legal = legal_columns(prefix_id);
    double total = 0.0;
    for (int a = 0; a < legal; ++a) total += coef_cols[static_cast<std::size_t>(a)];
    const double* p = probs_.data() + off;
    double* g = grad.data() + off;
    for (int a = 0; a < legal; ++a)
        g[a] += coef_cols[static_cast<std::size_t>(a)] - total * p[a];
}

void TokenPolicy::add_log_prob_grad(int prompt, std::int64_t answer, double coef,
                                    std::span<double> grad) const {
    check_prompt_index(prompt);
    const std::vector<int> toks = space_.answer_tokens(answer);
    std::vector<double> coefs(static_cast<std::size_t>(columns()));
    std::vector<int> prefix;
    prefix.reserve(toks.size());
    for (int t : toks) {
        const std::int64_t pid = space_.prefix_id(prefix);
        std::fill(coefs.begin(), coefs.end(), 0.0);
        coefs[static_cast<std::size_t>(t)] = coef;
        add_row_grad(prompt, pid, coefs, grad);
        prefix.push_back(t);
    }
    if (static_cast<int>(toks.size()) < space_.max_len()) {
        const std::int64_t pid = space_.prefix_id(prefix);
        std::fill(coefs.begin(), coefs.end(), 0.0);
        coefs[static_cast<std::size_t>(space_.vocab_size())] = coef;
        add_row_grad(prompt, pid, coefs, grad);
    }
}

// --- free operations ---

double kl_divergence(const Policy& p, const Policy& q, int prompt) {
    if (!p.space().same_space(q.space())) throw DomainError("kl_divergence: space mismatch");
    p.space().check_enumerable();
    const std::int64_t n = p.space().num_answers();
    double kl = 0.0;
    for (std::int64_t y = 0; y < n; ++y) {
        const double lp = p.log_prob(prompt, y);
        kl += std::exp(lp) * (lp - q.log_prob(prompt, y));
    }
    return kl;
}

std::vector<double> enumerate_answers(const Policy& policy, int prompt) {
    policy.space().check_enumerable();
    const std::int64_t n = policy.space().num_answers();
    if (const auto* tab = dynamic_cast<const TabularPolicy*>(&policy)) {
        auto row = tab->prob_row(prompt);
        return {row.begin(), row.end()};
    }
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (std::int64_t y = 0; y < n; ++y)
        probs[static_cast<std::size_t>(y)] = std::exp(policy.log_prob(prompt, y));
    return probs;
}

TabularPolicy geometric_mixture(const Policy& p, const Policy& q, double alpha) {
    if (!p.space().same_space(q.space()) || p.num_prompts() != q.num_prompts())
        throw DomainError("geometric_mixture: policies must share spaces");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("geometric_mixture: alpha must be in [0,1]");
    const auto materialize = [](const Policy& pol) {
        if (const auto* tab = dynamic_cast<const TabularPolicy*>(&pol))
            return TabularPolicy(*tab);  // bit-exact logits
        pol.space().check_enumerable();
        const std::int64_t n = pol.space().num_answers();
        std::vector<double> logits(static_cast<std::size_t>(n * pol.num_prompts()));
        for (int x = 0; x < pol.num_prompts(); ++x)
            for (std::int64_t y = 0; y < n; ++y)
                logits[static_cast<std::size_t>(x * n + y)] = pol.log_prob(x, y);
        return TabularPolicy(pol.space(), pol.num_prompts(), std::move(logits));
    };
    if (alpha == 1.0) return materialize(p);
    if (alpha == 0.0) return materialize(q);
    p.space().check_enumerable();
    const std::int64_t n = p.space().num_answers();
    std::vector<double> logits(static_cast<std::size_t>(n * p.num_prompts()));
    for (int x = 0; x < p.num_prompts(); ++x)
        for (std::int64_t y = 0; y < n; ++y)
            logits[static_cast<std::size_t>(x * n + y)] =
                alpha * p.log_prob(x, y) + (1.0 - alpha) * q.log_prob(x, y);
    return TabularPolicy(p.space(), p.num_prompts(), std::move(logits));
}

TokenPolicy induced_token_policy(const Policy& p) {
    const AnswerSpace& space = p.space();
    space.check_enumerable();
    const int V = space.vocab_size();
    const int L = space.max_len();
    const std::int64_t rows = space.num_prefixes();
    const std::int64_t cols = V + 1;
    std::vector<double> logits(static_cast<std::size_t>(rows * cols * p.num_prompts()), 0.0);
    // Subtree log-mass per state: mass(s) = p(s if it is an answer) +
    // sum_a mass(s+a). Row logits are the child log-masses (terminator column
    // = log p(s)); the row softmax then yields the exact conditionals.
    for (int x = 0; x < p.num_prompts(); ++x) {
        const std::int64_t n = space.num_answers();
        std::vector<double> alog(static_cast<std::size_t>(n));
        for (std::int64_t y = 0; y < n; ++y) alog[static_cast<std::size_t>(y)] = p.log_prob(x, y);
        std::vector<double> prefix_mass(static_cast<std::size_t>(rows));
        // Lengths walked downward so child masses are ready before parents.
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
                const double child_mass =
                    len + 1 == L ? alog[static_cast<std::size_t>(space.answer_id(child))]
                                 : prefix_mass[static_cast<std::size_t>(space.prefix_id(child))];
                logits[off + static_cast<std::size_t>(a)] = child_mass;
                parts.push_back(child_mass);
            }
            if (len >= 1) {
                const double own = alog[static_cast<std::size_t>(space.answer_id(toks))];
                logits[off + static_cast<std::size_t>(V)] = own;
                parts.push_back(own);
            }
            prefix_mass[static_cast<std::size_t>(s)] = log_sum_exp(parts);
        }
    }
    return TokenPolicy(space, p.num_prompts(), std::move(logits));
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
    return 0.5 * tv;
}

// --- MixtureSampler ---

MixtureSampler::MixtureSampler(std::vector<std::shared_ptr<const Policy>> components,
                               std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
    if (components_.empty() || components_.size() != weights_.size())
        throw ConfigError("mixture: components/weights size mismatch");
    double sum = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw ConfigError("mixture: weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("mixture: weights must sum to 1 (got " + std::to_string(sum) + ")");
    const auto& s0 = components_.front()->space();
    const int p0 = components_.front()->num_prompts();
    for (const auto& c : components_)
        if (!c->space().same_space(s0) || c->num_prompts() != p0)
            throw ConfigError("mixture: components must share spaces");
}

double MixtureSampler::prob(int prompt, std::int64_t answer) const {
    double p = 0.0;
    for (std::size_t i = 0; i < components_.size(); ++i)
        p += weights_[i] * std::exp(components_[i]->log_prob(prompt, answer));
    return p;
}

std::vector<double> MixtureSampler::prob_row(int prompt) const {
    const std::int64_t n = space().num_answers();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const std::vector<double> probs = enumerate_answers(*components_[i], prompt);
        for (std::int64_t y = 0; y < n; ++y)
            out[static_cast<std::size_t>(y)] += weights_[i] * probs[static_cast<std::size_t>(y)];
    }
    return out;
}

MixtureSampler::Draw MixtureSampler::draw(int prompt, Rng& rng) const {
    int comp = 0;
    if (components_.size() > 1) comp = rng.categorical(weights_);
    return {comp, components_[static_cast<std::size_t>(comp)]->sample(prompt, rng)};
}

}  // namespace spinlab
