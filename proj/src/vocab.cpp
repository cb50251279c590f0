#include "spinlab/vocab.hpp"

#include <cstdlib>
#include <unordered_set>

namespace spinlab {

std::int64_t enumeration_cap() {
    if (const char* env = std::getenv("SPINLAB_ENUM_CAP")) {
        char* end = nullptr;
        long long v = std::strtoll(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::int64_t>(v);
        throw ConfigError("SPINLAB_ENUM_CAP: not a positive integer: " + std::string(env));
    }
    return 20000;
}

Vocab::Vocab(std::vector<std::string> toks, std::string term)
    : tokens(std::move(toks)), terminator(std::move(term)) {
    if (tokens.size() < 2) throw ConfigError("vocab: needs at least 2 tokens");
    std::unordered_set<std::string> seen;
    for (const auto& t : tokens) {
        if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos)
            throw ConfigError("vocab: token empty or contains whitespace: '" + t + "'");
        if (!seen.insert(t).second) throw ConfigError("vocab: duplicate token '" + t + "'");
        if (t == terminator) throw ConfigError("vocab: terminator collides with token '" + t + "'");
    }
    if (terminator.empty() || terminator.find_first_of(" \t\r\n") != std::string::npos)
        throw ConfigError("vocab: bad terminator");
}

AnswerSpace::AnswerSpace(Vocab vocab, int max_len)
    : vocab_(std::move(vocab)), max_len_(max_len) {
    if (max_len_ < 1) throw ConfigError("answer space: max_len must be >= 1");
    const std::int64_t v = vocab_.size();
    // Guard against overflow while accumulating the geometric sums.
    const std::int64_t hard_cap = std::int64_t{1} << 40;
    answer_offset_.assign(static_cast<std::size_t>(max_len_) + 1, 0);
    prefix_offset_.assign(static_cast<std::size_t>(max_len_), 0);
    std::int64_t block = 1;  // V^(l-1) while walking lengths
    num_answers_ = 0;
    num_prefixes_ = 0;
    for (int l = 1; l <= max_len_; ++l) {
        prefix_offset_[l - 1] = num_prefixes_;
        num_prefixes_ += block;  // prefixes of length l-1
        block *= v;
        answer_offset_[l] = num_answers_;
        num_answers_ += block;  // answers of length l
        if (num_answers_ > hard_cap) throw ConfigError("answer space: size overflow");
    }
}

AnswerSpace AnswerSpace::flat(int n) {
    std::vector<std::string> toks;
    toks.reserve(n);
    for (int i = 0; i < n; ++i) toks.push_back("a" + std::to_string(i));
    return AnswerSpace(Vocab(std::move(toks), "$"), 1);
}

void AnswerSpace::check_enumerable() const {
    const std::int64_t cap = enumeration_cap();
    if (num_answers_ > cap)
        throw CapacityError("enumeration cap exceeded: " + std::to_string(num_answers_) +
                            " answers > cap " + std::to_string(cap));
}

int AnswerSpace::answer_length(std::int64_t answer_id) const {
    check_answer(answer_id);
    int l = 1;
    while (l < max_len_ && answer_id >= answer_offset_[l + 1]) ++l;
    return l;
}

std::vector<int> AnswerSpace::answer_tokens(std::int64_t answer_id) const {
    const int l = answer_length(answer_id);
    std::int64_t rem = answer_id - answer_offset_[l];
    std::vector<int> toks(static_cast<std::size_t>(l));
    const std::int64_t v = vocab_.size();
    for (int k = l - 1; k >= 0; --k) {
        toks[k] = static_cast<int>(rem % v);
        rem /= v;
    }
    return toks;
}

std::int64_t AnswerSpace::answer_id(std::span<const int> tokens) const {
    const int l = static_cast<int>(tokens.size());
    if (l < 1 || l > max_len_) throw DomainError("answer length out of range");
    std::int64_t idx = 0;
    for (int t : tokens) {
        if (t < 0 || t >= vocab_.size()) throw DomainError("answer token id out of range");
        idx = idx * vocab_.size() + t;
    }
    return answer_offset_[l] + idx;
}

int AnswerSpace::prefix_length(std::int64_t prefix_id) const {
    if (prefix_id < 0 || prefix_id >= num_prefixes_) throw DomainError("prefix id out of range");
    int l = 0;
    while (l + 1 < max_len_ && prefix_id >= prefix_offset_[l + 1]) ++l;
    return l;
}

std::vector<int> AnswerSpace::prefix_tokens(std::int64_t prefix_id) const {
    const int l = prefix_length(prefix_id);
    std::int64_t rem = prefix_id - prefix_offset_[l];
    std::vector<int> toks(static_cast<std::size_t>(l));
    const std::int64_t v = vocab_.size();
    for (int k = l - 1; k >= 0; --k) {
        toks[k] = static_cast<int>(rem % v);
        rem /= v;
    }
    return toks;
}

std::int64_t AnswerSpace::prefix_id(std::span<const int> tokens) const {
    const int l = static_cast<int>(tokens.size());
    if (l < 0 || l >= max_len_) throw DomainError("prefix length out of range");
    std::int64_t idx = 0;
    for (int t : tokens) {
        if (t < 0 || t >= vocab_.size()) throw DomainError("prefix token id out of range");
        idx = idx * vocab_.size() + t;
    }
    return prefix_offset_[l] + idx;
}

std::string AnswerSpace::answer_text(std::int64_t answer_id) const {
    std::string out;
    for (int t : answer_tokens(answer_id)) out += vocab_.tokens[static_cast<std::size_t>(t)];
    return out;
}

bool AnswerSpace::same_space(const AnswerSpace& other) const {
    return max_len_ == other.max_len_ && vocab_.tokens == other.vocab_.tokens &&
           vocab_.terminator == other.vocab_.terminator;
}

void AnswerSpace::check_answer(std::int64_t answer_id) const {
    if (answer_id < 0 || answer_id >= num_answers_)
        throw DomainError("answer id out of range: " + std::to_string(answer_id));
}

}  // namespace spinlab
