#pragma once

// Synthetic task generation: random strictly-positive data/base policies over
// a shared answer space, a prompt distribution, and SFT sampling.

#include <cstdint>
#include <memory>
#include <vector>

#include "spinlab/policy.hpp"
#include "spinlab/rng.hpp"

namespace spinlab {

struct TaskSpec {
    int num_prompts = 8;
    int vocab_size = 4;
    int max_len = 3;
    double logit_scale = 1.0;
    // Extra logit noise (this scale) added to the data policy only; 0 keeps
    // data and base as independent draws at logit_scale.
    double separation = 1.5;

    void validate() const;
};

struct SyntheticTask {
    AnswerSpace space;
    std::vector<double> prompt_weights;  // q(x), uniform by default
    std::shared_ptr<const TabularPolicy> data;   // generates winner answers
    std::shared_ptr<const TabularPolicy> base;   // starting policy
};

// Deterministic under (spec, seed): base logits ~ logit_scale * N(0,1),
// data logits ~ logit_scale * N(0,1) + separation * N(0,1).
SyntheticTask generate_task(const TaskSpec& spec, std::uint64_t seed);

struct SftExample {
    int prompt;
    std::int64_t answer;
};
using SftDataset = std::vector<SftExample>;

// size draws of (x ~ q, y ~ data(.|x)).
SftDataset make_sft_dataset(const SyntheticTask& task, int size, std::uint64_t seed);

}  // namespace spinlab
