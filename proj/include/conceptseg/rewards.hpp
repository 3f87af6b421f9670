#ifndef CONCEPTSEG_REWARDS_HPP
#define CONCEPTSEG_REWARDS_HPP

#include <string>

#include "conceptseg/geometry.hpp"
#include "conceptseg/response.hpp"

namespace conceptseg {

// Per-trajectory reward components; r_uni is their exact sum.
struct RewardBreakdown {
  double r_format = 0.0;
  double r_mask = 0.0;
  double r_meta = 0.0;
  double r_uni = 0.0;
};

// Ablation switches for the reward pool. Default weights of 1 reproduce the
// plain unweighted sum; the named rows of the reward ablation zero components.
struct RewardConfig {
  double w_format = 1.0;
  double w_mask = 1.0;
  double w_meta = 1.0;

  static RewardConfig all() { return {}; }
  static RewardConfig without_meta() { return {1.0, 1.0, 0.0}; }
  static RewardConfig without_mask() { return {1.0, 0.0, 1.0}; }
  // "w/o box & meta": no box-coupled component survives.
  static RewardConfig without_box_meta() { return {1.0, 1.0, 0.0}; }
};

// Ground truth needed to score one trajectory. check_degenerate marks the
// 1x1 mosaic where no proxy tile exists and the check IoU is fixed at 1.
struct EpisodeGroundTruth {
  BoxN gt_check;
  BoxN gt_box;
  MaskGrid gt_mask;
  bool check_degenerate = false;
};

double mask_reward(const MaskGrid& pred, const MaskGrid& gt, double theta);

// Product of the target-box IoU and the proxy-check IoU.
double meta_reward(const BoxN& p_box, const BoxN& gt_box, const BoxN& p_check,
                   const BoxN& gt_check);

// Scores a serialized trajectory. A parse failure zeroes every component.
// pred_mask is the mask decoded under the trajectory's prompt; pass nullptr
// when no decode is available (scores r_mask = 0).
RewardBreakdown unified_reward(const std::string& text, const EpisodeGroundTruth& gt,
                               const MaskGrid* pred_mask, double theta,
                               const RewardConfig& cfg = RewardConfig::all());

}  // namespace conceptseg

#endif
