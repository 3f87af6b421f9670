#include "conceptseg/rewards.hpp"

namespace conceptseg {

double mask_reward(const MaskGrid& pred, const MaskGrid& gt, double theta) {
  return mask_iou(pred, gt, theta);
}

double meta_reward(const BoxN& p_box, const BoxN& gt_box, const BoxN& p_check,
                   const BoxN& gt_check) {
  return box_iou(p_box, gt_box) * box_iou(p_check, gt_check);
}

RewardBreakdown unified_reward(const std::string& text, const EpisodeGroundTruth& gt,
                               const MaskGrid* pred_mask, double theta,
                               const RewardConfig& cfg) {
  RewardBreakdown b;
  const ParseOutcome parsed = parse_response(text);
  b.r_format = cfg.w_format * (parsed.ok ? 1.0 : 0.0);
  if (parsed.ok) {
    const double check_iou =
        gt.check_degenerate ? 1.0 : box_iou(parsed.response.check, gt.gt_check);
    b.r_meta = cfg.w_meta * box_iou(parsed.response.bbox, gt.gt_box) * check_iou;
    if (pred_mask != nullptr) b.r_mask = cfg.w_mask * mask_iou(*pred_mask, gt.gt_mask, theta);
  }
  b.r_uni = b.r_format + b.r_mask + b.r_meta;
  return b;
}

}  // namespace conceptseg
