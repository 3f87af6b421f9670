#ifndef CONCEPTSEG_CONFIG_HPP
#define CONCEPTSEG_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "conceptseg/episode.hpp"
#include "conceptseg/rewards.hpp"
#include "conceptseg/trainer.hpp"

namespace conceptseg {

// Every field has a default; a fully defaulted config reproduces the
// acceptance runs exactly in 64-bit mode.
struct RunConfig {
  std::uint64_t seed = 42;
  int k = 2;
  int l2 = 8;
  int channels = 16;
  int pool_hidden = 32;
  int group_size = 8;
  double beta = 0.04;
  double theta = 0.5;
  int objects_per_scene = 4;
  int episodes = 64;
  int holdout_episodes = 32;
  std::string families;  // comma-separated filter; empty selects all
  int stage1_steps = 500;
  double stage1_lr = 0.5;
  int stage1_batch = 8;
  int stage2_steps = 2000;
  double stage2_lr = 0.05;
  bool reward_format = true;
  bool reward_mask = true;
  bool reward_meta = true;
  bool seg_all_trajectories = true;
  bool reshuffle_per_epoch = false;
  std::string router_mode = "adaptive";  // direct | reason | adaptive
  std::string dataset_dir;
  std::string checkpoint_path;
  std::string init_checkpoint;
  std::string report_prefix;
  std::string trace_path;
  std::string sweep_l2 = "1,8,16";
  std::string sweep_k = "1,2";
};

// Throws ConfigError listing the offending field and the allowed values.
void validate(const RunConfig& cfg);

std::vector<RuleFamily> selected_families(const RunConfig& cfg);

RewardConfig reward_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
EpisodeConfig episode_config(const RunConfig& cfg);

// Deterministic dataset: families round-robin, episode i seeded by
// seed + seed_offset + i.
std::vector<Episode> generate_dataset(const RunConfig& cfg, std::uint64_t seed_offset,
                                      int count);

std::vector<int> parse_int_list(const std::string& csv);

}  // namespace conceptseg

#endif
