#ifndef CONCEPTSEG_METRICS_HPP
#define CONCEPTSEG_METRICS_HPP

#include "conceptseg/geometry.hpp"

namespace conceptseg {

// Per-sample scores, all in [0,1]. mae and ber are fractions here; report
// emission scales to percent.
struct SampleMetrics {
  double mae = 0.0;
  double ber = 0.0;
  double iou = 0.0;
  double dice = 0.0;
  double wfm = 0.0;
  double sm = 0.0;
};

// MAE on the soft prediction; BER/IoU/Dice on binarize(pred, theta); weighted
// F-measure and S-measure on the soft prediction with the canonical constants
// (Gaussian 7x7 sigma 5, importance decay ln(0.5)/5, alpha 0.5).
SampleMetrics sample_metrics(const MaskGrid& pred, const MaskGrid& gt, double theta);
// Serial reference, kept for tests and the benchmark; bitwise identical.
SampleMetrics sample_metrics_serial(const MaskGrid& pred, const MaskGrid& gt, double theta);

// Mergeable dataset-level aggregate. merge() is commutative and agrees with
// sequential accumulation to rounding.
struct MetricAccumulator {
  long n = 0;
  double sum_mae = 0.0, sum_ber = 0.0, sum_iou = 0.0, sum_dice = 0.0;
  double sum_wfm = 0.0, sum_sm = 0.0;
  double cum_intersection = 0.0;
  double cum_union = 0.0;
};

void accumulate(MetricAccumulator& acc, const SampleMetrics& s, double intersection,
                double union_);
MetricAccumulator merge(const MetricAccumulator& a, const MetricAccumulator& b);

// Finalized dataset metrics; mIoU and gIoU are both the mean of per-sample
// foreground IoUs, cIoU is cumulative intersection over cumulative union.
struct DatasetMetrics {
  long n = 0;
  double mae = 0.0, ber = 0.0, wfm = 0.0, sm = 0.0;
  double miou = 0.0, mdice = 0.0, giou = 0.0, ciou = 0.0;
};

DatasetMetrics finalize(const MetricAccumulator& acc);

}  // namespace conceptseg

#endif
