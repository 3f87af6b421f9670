#ifndef CONCEPTSEG_TRAINER_HPP
#define CONCEPTSEG_TRAINER_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "conceptseg/ctm.hpp"
#include "conceptseg/mask_head.hpp"
#include "conceptseg/policy.hpp"

namespace conceptseg {

// Model dimensions shared by every parameter group.
struct ModelConfig {
  int l2 = 8;
  int c = 16;
  int pool_hidden = 32;
};

// Fresh parameter store: policy, CTM, text embeddings and mask head, all
// deterministically initialized from the seed.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Episode with its cached policy features and query pixel tensor.
struct PreparedEpisode {
  Episode episode;
  EpisodeFeatures features;
  Tensor query_features;  // HW x 5
  Tensor query_lifted;    // HW x kLiftedPixelDim, cached for the mask head
  EpisodeGroundTruth gt;
};

PreparedEpisode prepare_episode(Episode e);
std::vector<PreparedEpisode> prepare_all(std::vector<Episode> episodes);

struct TrainConfig {
  std::uint64_t seed = 42;
  int group_size = 8;
  double beta = 0.04;
  double theta = 0.5;
  double stage1_lr = 0.5;
  int stage1_batch = 8;
  double stage2_lr = 0.05;
  RewardConfig rewards;
  bool seg_all_trajectories = true;
  ModelConfig model;
};

// One supervised warm-up step on a minibatch: teacher-forced prompt through
// translate -> assemble -> predict, dice+focal loss, update restricted to the
// CTM, text-embedding and mask-head parameters.
double stage1_step(ParamStore& params, std::span<const PreparedEpisode* const> batch,
                   const TrainConfig& cfg);

struct Stage2Stats {
  double policy_term = 0.0;
  double kl_term = 0.0;
  double seg_term = 0.0;
  double mean_r_format = 0.0;
  double mean_r_mask = 0.0;
  double mean_r_meta = 0.0;
  double mean_r_uni = 0.0;
  double adv_std = 0.0;
};

// One reinforcement step on a single episode: sample a group, score unified
// rewards, group-normalized advantages, KL to the reference policy, plus the
// segmentation loss on each trajectory's decoded mask.
Stage2Stats stage2_step(ParamStore& params, const ParamStore& ref_params,
                        const PreparedEpisode& ep, const TrainConfig& cfg, int step);

// Mean thresholded IoU of the teacher-forced decode over the episodes (the
// stage I fit measure).
double stage1_mask_iou(const ParamStore& params, std::span<const PreparedEpisode> episodes,
                       const TrainConfig& cfg);

// Fraction of episodes whose greedy target choice matches the oracle.
double selection_accuracy(const ParamStore& params, std::span<const PreparedEpisode> episodes);

}  // namespace conceptseg

#endif
