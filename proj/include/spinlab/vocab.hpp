#pragma once

// Answer alphabets and the enumerable space of token sequences.
//
// An AnswerSpace over a vocabulary of V ordinary tokens with maximum length L
// contains every sequence of 1..L tokens; a terminator token is appended
// implicitly when a sequence ends before length L. Answers and prefixes are
// identified by dense ids in length-major, base-V lexicographic order, so the
// whole space can be enumerated, indexed, and summed over exactly.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spinlab/errors.hpp"

namespace spinlab {

// Per-prompt enumeration cap; SPINLAB_ENUM_CAP overrides the default 20000.
std::int64_t enumeration_cap();

struct Vocab {
    std::vector<std::string> tokens;  // ordinary tokens, ids 0..V-1
    std::string terminator;

    Vocab(std::vector<std::string> toks, std::string term);

    int size() const { return static_cast<int>(tokens.size()); }
};

class AnswerSpace {
public:
    AnswerSpace(Vocab vocab, int max_len);

    // n single-token answers named a0..a{n-1}; handy for unstructured tables.
    static AnswerSpace flat(int n);

    const Vocab& vocab() const { return vocab_; }
    int vocab_size() const { return vocab_.size(); }
    int max_len() const { return max_len_; }

    // |Y| = V + V^2 + ... + V^L
    std::int64_t num_answers() const { return num_answers_; }
    // Number of proper prefixes (lengths 0..L-1), including the empty root.
    std::int64_t num_prefixes() const { return num_prefixes_; }

    // Throws CapacityError if |Y| exceeds the enumeration cap.
    void check_enumerable() const;

    int answer_length(std::int64_t answer_id) const;
    std::vector<int> answer_tokens(std::int64_t answer_id) const;
    std::int64_t answer_id(std::span<const int> tokens) const;

    // Prefix ids cover lengths 0..L-1 only (length-L states have no choices).
    int prefix_length(std::int64_t prefix_id) const;
    std::vector<int> prefix_tokens(std::int64_t prefix_id) const;
    std::int64_t prefix_id(std::span<const int> tokens) const;

    // Joined token text of an answer, e.g. "aba".
    std::string answer_text(std::int64_t answer_id) const;

    bool same_space(const AnswerSpace& other) const;

    void check_answer(std::int64_t answer_id) const;

private:
    Vocab vocab_;
    int max_len_;
    std::int64_t num_answers_;
    std::int64_t num_prefixes_;
    std::vector<std::int64_t> answer_offset_;  // block start per length 1..L
    std::vector<std::int64_t> prefix_offset_;  // block start per length 0..L-1
};

}  // namespace spinlab
