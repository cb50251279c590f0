#pragma once

// Versioned UTF-8 checkpoint format shared by policies and reward tables.
//
//   spinlab-checkpoint 1 <tabular|token|reward>
//   vocab <V> <token...>
//   terminator <token>
//   max_len <L>
//   prompts <P>
//   values <N>
//   <one value per line, %.17g>   (round-trip exact)
//
// Value order is row-major: tabular/reward tables are [prompt][answer];
// token tables are [prompt][prefix][token] with column V the terminator
// (the root row's terminator column is stored but ignored by evaluation).

#include <string>

#include "spinlab/policy.hpp"
#include "spinlab/preference.hpp"

namespace spinlab {

void save_checkpoint(const std::string& path, const TabularPolicy& policy);
void save_checkpoint(const std::string& path, const TokenPolicy& policy);
void save_checkpoint(const std::string& path, const RewardFunction& reward);

enum class CheckpointKind { tabular, token, reward };
CheckpointKind peek_checkpoint_kind(const std::string& path);

TabularPolicy load_tabular_checkpoint(const std::string& path);
TokenPolicy load_token_checkpoint(const std::string& path);
RewardFunction load_reward_checkpoint(const std::string& path);

// 17 significant digits; parses back to the identical double.
std::string format_double(double v);

}  // namespace spinlab
