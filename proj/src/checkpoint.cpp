#include "spinlab/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spinlab/util.hpp"

namespace spinlab {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

const char* kind_name(CheckpointKind k) {
    switch (k) {
        case CheckpointKind::tabular: return "tabular";
        case CheckpointKind::token: return "token";
        case CheckpointKind::reward: return "reward";
    }
    return "?";
}

std::string render(CheckpointKind kind, const AnswerSpace& space, int prompts,
                   std::span<const double> values) {
    std::ostringstream out;
    out << "spinlab-checkpoint 1 " << kind_name(kind) << "\n";
    out << "vocab " << space.vocab_size();
    for (const auto& t : space.vocab().tokens) out << ' ' << t;
    out << "\nterminator " << space.vocab().terminator << "\n";
    out << "max_len " << space.max_len() << "\n";
    out << "prompts " << prompts << "\n";
    out << "values " << values.size() << "\n";
    for (double v : values) out << format_double(v) << "\n";
    return out.str();
}

struct Parsed {
    CheckpointKind kind;
    AnswerSpace space;
    int prompts;
    std::vector<double> values;
};

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw ParseError("checkpoint " + path + ": " + why);
}

Parsed parse(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open");
    std::string magic, kind_str;
    int version = 0;
    if (!(in >> magic >> version >> kind_str) || magic != "spinlab-checkpoint")
        fail(path, "bad header");
    if (version != 1) fail(path, "unsupported format version " + std::to_string(version));
    CheckpointKind kind;
    if (kind_str == "tabular") kind = CheckpointKind::tabular;
    else if (kind_str == "token") kind = CheckpointKind::token;
    else if (kind_str == "reward") kind = CheckpointKind::reward;
    else fail(path, "unknown kind '" + kind_str + "'");

    std::string key;
    int vocab_size = 0;
    if (!(in >> key >> vocab_size) || key != "vocab" || vocab_size < 2) fail(path, "bad vocab line");
    std::vector<std::string> tokens(static_cast<std::size_t>(vocab_size));
    for (auto& t : tokens)
        if (!(in >> t)) fail(path, "truncated vocab listing");
    std::string terminator;
    if (!(in >> key >> terminator) || key != "terminator") fail(path, "bad terminator line");
    int max_len = 0;
    if (!(in >> key >> max_len) || key != "max_len" || max_len < 1) fail(path, "bad max_len line");
    int prompts = 0;
    if (!(in >> key >> prompts) || key != "prompts" || prompts < 1) fail(path, "bad prompts line");
    std::int64_t count = 0;
    if (!(in >> key >> count) || key != "values" || count < 0) fail(path, "bad values line");

    AnswerSpace space(Vocab(std::move(tokens), std::move(terminator)), max_len);
    const std::int64_t expected =
        kind == CheckpointKind::token ? space.num_prefixes() * (space.vocab_size() + 1) * prompts
                                      : space.num_answers() * prompts;
    if (count != expected)
        fail(path, "value count " + std::to_string(count) + " does not match shape (expected " +
                       std::to_string(expected) + ")");

    std::vector<double> values(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(in >> tok)) fail(path, "truncated at value " + std::to_string(i));
        char* end = nullptr;
        values[static_cast<std::size_t>(i)] = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') fail(path, "bad value '" + tok + "'");
    }
    std::string extra;
    if (in >> extra) fail(path, "trailing content '" + extra + "'");
    return {kind, std::move(space), prompts, std::move(values)};
}

}  // namespace

void save_checkpoint(const std::string& path, const TabularPolicy& policy) {
    write_file_atomic(path,
                      render(CheckpointKind::tabular, policy.space(), policy.num_prompts(),
                             policy.params()));
}

void save_checkpoint(const std::string& path, const TokenPolicy& policy) {
    write_file_atomic(path, render(CheckpointKind::token, policy.space(), policy.num_prompts(),
                                   policy.params()));
}

void save_checkpoint(const std::string& path, const RewardFunction& reward) {
    write_file_atomic(path, render(CheckpointKind::reward, reward.space(), reward.num_prompts(),
                                   reward.values()));
}

CheckpointKind peek_checkpoint_kind(const std::string& path) {
    return parse(path).kind;
}

TabularPolicy load_tabular_checkpoint(const std::string& path) {
    Parsed p = parse(path);
    if (p.kind != CheckpointKind::tabular) fail(path, "expected kind tabular");
    return TabularPolicy(std::move(p.space), p.prompts, std::move(p.values));
}

TokenPolicy load_token_checkpoint(const std::string& path) {
    Parsed p = parse(path);
    if (p.kind != CheckpointKind::token) fail(path, "expected kind token");
    return TokenPolicy(std::move(p.space), p.prompts, std::move(p.values));
}

RewardFunction load_reward_checkpoint(const std::string& path) {
    Parsed p = parse(path);
    if (p.kind != CheckpointKind::reward) fail(path, "expected kind reward");
    return RewardFunction(std::move(p.space), p.prompts, std::move(p.values));
}

}  // namespace spinlab
