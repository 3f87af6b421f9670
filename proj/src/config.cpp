#include "conceptseg/config.hpp"

#include <sstream>

namespace conceptseg {

void validate(const RunConfig& cfg) {
  if (cfg.k < 1 || cfg.k > 3)
    throw ConfigError("k = " + std::to_string(cfg.k) + " invalid; allowed values: 1, 2, 3");
  if (cfg.l2 < 1) throw ConfigError("l2 must be >= 1");
  if (cfg.channels < 4) throw ConfigError("channels must be >= 4");
  if (cfg.pool_hidden < 1) throw ConfigError("pool_hidden must be >= 1");
  if (cfg.group_size < 2) throw ConfigError("group_size must be >= 2");
  if (cfg.beta < 0.0) throw ConfigError("beta must be >= 0");
  if (cfg.theta <= 0.0 || cfg.theta >= 1.0) throw ConfigError("theta must lie in (0, 1)");
  if (cfg.objects_per_scene < 2 || cfg.objects_per_scene > 8)
    throw ConfigError("objects_per_scene = " + std::to_string(cfg.objects_per_scene) +
                      " invalid; allowed range: [2, 8]");
  if (cfg.episodes < 1) throw ConfigError("episodes must be >= 1");
  if (cfg.holdout_episodes < 0) throw ConfigError("holdout_episodes must be >= 0");
  if (cfg.stage1_steps < 0 || cfg.stage2_steps < 0) throw ConfigError("steps must be >= 0");
  if (cfg.stage1_batch < 1) throw ConfigError("stage1_batch must be >= 1");
  if (cfg.stage1_lr <= 0.0 || cfg.stage2_lr <= 0.0) throw ConfigError("step sizes must be > 0");
  if (cfg.router_mode != "direct" && cfg.router_mode != "reason" &&
      cfg.router_mode != "adaptive")
    throw ConfigError("router_mode = '" + cfg.router_mode +
                      "' invalid; allowed values: direct, reason, adaptive");
  selected_families(cfg);  // validates the family names
}

std::vector<RuleFamily> selected_families(const RunConfig& cfg) {
  std::vector<RuleFamily> fams;
  if (cfg.families.empty()) {
    for (int i = 0; i < kRuleFamilyCount; ++i) fams.push_back(static_cast<RuleFamily>(i));
  } else {
    std::istringstream ss(cfg.families);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      const auto f = family_from_name(name);
      if (!f.has_value())
        throw ConfigError("unknown rule family '" + name + "'; allowed: CI_attribute, "
                          "CD_saliency, CD_camouflage, CD_anomaly, CR_consistency, "
                          "CR_difference, CR_logical, CR_moved");
      fams.push_back(*f);
    }
    if (fams.empty()) throw ConfigError("families filter selected nothing");
  }
  if (cfg.k == 1) {
    // Families that need at least two reference tiles drop out of 1x1 runs.
    std::vector<RuleFamily> kept;
    for (RuleFamily f : fams)
      if (f != RuleFamily::CrConsistency && f != RuleFamily::CrMoved) kept.push_back(f);
    if (kept.empty())
      throw ConfigError("selected families all require k >= 2 reference tiles");
    return kept;
  }
  return fams;
}

RewardConfig reward_config(const RunConfig& cfg) {
  RewardConfig r;
  r.w_format = cfg.reward_format ? 1.0 : 0.0;
  r.w_mask = cfg.reward_mask ? 1.0 : 0.0;
  r.w_meta = cfg.reward_meta ? 1.0 : 0.0;
  return r;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.seed = cfg.seed;
  t.group_size = cfg.group_size;
  t.beta = cfg.beta;
  t.theta = cfg.theta;
  t.stage1_lr = cfg.stage1_lr;
  t.stage1_batch = cfg.stage1_batch;
  t.stage2_lr = cfg.stage2_lr;
  t.rewards = reward_config(cfg);
  t.seg_all_trajectories = cfg.seg_all_trajectories;
  t.model = ModelConfig{cfg.l2, cfg.channels, cfg.pool_hidden};
  return t;
}

EpisodeConfig episode_config(const RunConfig& cfg) {
  EpisodeConfig e;
  e.k = cfg.k;
  e.scene.n_objects = cfg.objects_per_scene;
  return e;
}

std::vector<Episode> generate_dataset(const RunConfig& cfg, std::uint64_t seed_offset,
                                      int count) {
  const std::vector<RuleFamily> fams = selected_families(cfg);
  const EpisodeConfig ecfg = episode_config(cfg);
  std::vector<Episode> out(static_cast<std::size_t>(count));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < count; ++i) {
    const RuleFamily fam = fams[static_cast<std::size_t>(i) % fams.size()];
    const std::uint64_t ep_seed = cfg.seed + seed_offset + static_cast<std::uint64_t>(i);
    out[static_cast<std::size_t>(i)] = build_episode(make_rule(fam, ep_seed), cfg.k, ep_seed, ecfg);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::istringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("bad integer list entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

}  // namespace conceptseg
