#include "spinlab/task.hpp"

namespace spinlab {

void TaskSpec::validate() const {
    if (num_prompts < 1) throw ConfigError("task.num_prompts: must be >= 1");
    if (vocab_size < 2) throw ConfigError("task.vocab_size: must be >= 2");
    if (max_len < 1) throw ConfigError("task.max_len: must be >= 1");
    if (!(logit_scale >= 0.0)) throw ConfigError("task.logit_scale: must be >= 0");
    if (!(separation >= 0.0)) throw ConfigError("task.separation: must be >= 0");
}

namespace {

Vocab default_vocab(int size) {
    static const char* letters = "abcdefghijklmnopqrstuvwxyz";
    std::vector<std::string> toks;
    toks.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        if (i < 26) toks.emplace_back(1, letters[i]);
        else toks.push_back("t" + std::to_string(i));
    }
    return Vocab(std::move(toks), "$");
}

}  // namespace

SyntheticTask generate_task(const TaskSpec& spec, std::uint64_t seed) {
    spec.validate();
    AnswerSpace space(default_vocab(spec.vocab_size), spec.max_len);
    space.check_enumerable();
    const std::int64_t n = space.num_answers();
    const std::size_t table = static_cast<std::size_t>(n * spec.num_prompts);

    Rng rng_base = Rng::substream(seed, Stream::task_base);
    std::vector<double> base_logits(table);
    for (double& v : base_logits) v = spec.logit_scale * rng_base.normal();

    Rng rng_data = Rng::substream(seed, Stream::task_data);
    std::vector<double> data_logits(table);
    for (double& v : data_logits)
        v = spec.logit_scale * rng_data.normal() + spec.separation * rng_data.normal();

    SyntheticTask task{
        space,
        std::vector<double>(static_cast<std::size_t>(spec.num_prompts),
                            1.0 / spec.num_prompts),
        std::make_shared<TabularPolicy>(space, spec.num_prompts, std::move(data_logits)),
        std::make_shared<TabularPolicy>(space, spec.num_prompts, std::move(base_logits)),
    };
    return task;
}

SftDataset make_sft_dataset(const SyntheticTask& task, int size, std::uint64_t seed) {
    if (size < 1) throw ConfigError("task.sft_size: must be >= 1");
    Rng rng = Rng::substream(seed, Stream::sft);
    SftDataset out;
    out.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        const int x = rng.categorical(task.prompt_weights);
        out.push_back({x, task.data->sample(x, rng)});
    }
    return out;
}

}  // namespace spinlab
