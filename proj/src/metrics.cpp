#include "conceptseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace conceptseg {

namespace {

constexpr double kEps = 2.220446049250313e-16;  // DBL_EPSILON, the MATLAB eps
constexpr double kWfmDecay = -0.13862943611198905;  // ln(0.5)/5

void require_same_shape(const MaskGrid& a, const MaskGrid& b) {
  if (!a.same_shape(b))
    throw ContractError("sample_metrics: dimension mismatch, " + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height));
}

// Row partial sums folded in row order: fixed reduction order regardless of
// the thread count.
double ordered_sum(const std::vector<double>& row_partials) {
  double acc = 0.0;
  for (double v : row_partials) acc += v;
  return acc;
}

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

Confusion confusion(const MaskGrid& pred, const MaskGrid& gt, double theta) {
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.values[i] >= theta;
    const bool g = gt.values[i] != 0.0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

// 7x7 truncated Gaussian, sigma 5, normalized to sum 1.
const std::vector<double>& gaussian7() {
  static const std::vector<double> k = [] {
    std::vector<double> v(49);
    double total = 0.0;
    for (int y = -3; y <= 3; ++y)
      for (int x = -3; x <= 3; ++x) {
        const double g = std::exp(-(x * x + y * y) / (2.0 * 25.0));
        v[static_cast<std::size_t>((y + 3) * 7 + (x + 3))] = g;
        total += g;
      }
    for (double& e : v) e /= total;
    return v;
  }();
  return k;
}

// Exact Euclidean distance transform against the foreground, with the index
// of the nearest foreground pixel. Brute force per pixel; ties resolve to the
// lowest row-major foreground index.
void distance_to_foreground(const MaskGrid& gt, std::vector<double>& dist,
                            std::vector<int>& nearest, bool parallel) {
  const int w = gt.width, h = gt.height;
  std::vector<int> fg;
  for (int i = 0; i < w * h; ++i)
    if (gt.values[static_cast<std::size_t>(i)] != 0.0) fg.push_back(i);
  dist.assign(static_cast<std::size_t>(w) * h, 0.0);
  nearest.assign(static_cast<std::size_t>(w) * h, -1);
  if (fg.empty()) return;

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (gt.values[static_cast<std::size_t>(i)] != 0.0) {
        nearest[static_cast<std::size_t>(i)] = i;
        continue;
      }
      long best = std::numeric_limits<long>::max();
      int best_i = -1;
      for (int f : fg) {
        const int fx = f % w, fy = f / w;
        const long d2 = static_cast<long>(fx - x) * (fx - x) + static_cast<long>(fy - y) * (fy - y);
        if (d2 < best) {
          best = d2;
          best_i = f;
        }
      }
      dist[static_cast<std::size_t>(i)] = std::sqrt(static_cast<double>(best));
      nearest[static_cast<std::size_t>(i)] = best_i;
    }
  }
  (void)parallel;
}

// Weighted F-measure with beta^2 = 1. Empty ground truth scores 1 when the
// prediction is also empty, 0 otherwise.
double weighted_fmeasure(const MaskGrid& pred, const MaskGrid& gt, bool parallel) {
  const int w = gt.width, h = gt.height;
  const std::size_t size = gt.size();

  long fg_count = 0;
  for (std::size_t i = 0; i < size; ++i)
    if (gt.values[i] != 0.0) ++fg_count;
  if (fg_count == 0) {
    for (std::size_t i = 0; i < size; ++i)
      if (pred.values[i] != 0.0) return 0.0;
    return 1.0;
  }

  std::vector<double> dist;
  std::vector<int> nearest;
  distance_to_foreground(gt, dist, nearest, parallel);

  std::vector<double> e(size), et(size);
  for (std::size_t i = 0; i < size; ++i) {
    e[i] = std::abs(pred.values[i] - gt.values[i]);
    et[i] = e[i];
  }
  for (std::size_t i = 0; i < size; ++i)
    if (gt.values[i] == 0.0) et[i] = e[static_cast<std::size_t>(nearest[i])];

  // Dependency weighting: truncated Gaussian, zero padded at the border.
  const std::vector<double>& kern = gaussian7();
  std::vector<double> ea(size);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -3; dy <= 3; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -3; dx <= 3; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          acc += kern[static_cast<std::size_t>((dy + 3) * 7 + (dx + 3))] *
                 et[static_cast<std::size_t>(yy) * w + xx];
        }
      }
      ea[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  (void)parallel;

  std::vector<double> fg_row(static_cast<std::size_t>(h), 0.0);
  std::vector<double> bg_row(static_cast<std::size_t>(h), 0.0);
  for (int y = 0; y < h; ++y) {
    double fg_acc = 0.0, bg_acc = 0.0;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (gt.values[i] != 0.0) {
        const double err = (ea[i] < e[i]) ? ea[i] : e[i];
        fg_acc += err;  // importance weight 1 on foreground
      } else {
        const double b = 2.0 - std::exp(kWfmDecay * dist[i]);
        bg_acc += ea[i] * b;
      }
    }
    fg_row[static_cast<std::size_t>(y)] = fg_acc;
    bg_row[static_cast<std::size_t>(y)] = bg_acc;
  }
  const double fg_err = ordered_sum(fg_row);
  const double bg_err = ordered_sum(bg_row);

  const double tpw = static_cast<double>(fg_count) - fg_err;
  const double fpw = bg_err;
  const double recall = 1.0 - fg_err / static_cast<double>(fg_count);
  const double precision = tpw / (kEps + tpw + fpw);
  const double f = 2.0 * recall * precision / (kEps + recall + precision);
  return std::clamp(f, 0.0, 1.0);
}

double sample_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double object_score(const std::vector<double>& vals) {
  if (vals.empty()) return 0.0;
  const double x = sample_mean(vals);
  return 2.0 * x / (x * x + 1.0 + sample_std(vals) + kEps);
}

double s_object(const MaskGrid& pred, const MaskGrid& gt) {
  std::vector<double> fg_vals, bg_vals;
  long fg_count = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.values[i] != 0.0) {
      fg_vals.push_back(pred.values[i]);
      ++fg_count;
    } else {
      bg_vals.push_back(1.0 - pred.values[i]);
    }
  }
  const double u = static_cast<double>(fg_count) / static_cast<double>(gt.size());
  return u * object_score(fg_vals) + (1.0 - u) * object_score(bg_vals);
}

// Region-wise structural similarity used inside the S-measure.
double region_ssim(const MaskGrid& pred, const MaskGrid& gt, int x0, int y0, int x1, int y1) {
  const long n = static_cast<long>(x1 - x0) * (y1 - y0);
  if (n <= 0) return 1.0;
  double sx = 0.0, sy = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      sx += pred.at(x, y);
      sy += gt.at(x, y);
    }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double dx = pred.at(x, y) - mx;
      const double dy = gt.at(x, y) - my;
      vx += dx * dx;
      vy += dy * dy;
      cov += dx * dy;
    }
  const double denom = static_cast<double>(n) - 1.0;
  if (denom > 0.0) {
    vx /= denom;
    vy /= denom;
    cov /= denom;
  }
  const double alpha = 4.0 * mx * my * cov;
  const double beta = (mx * mx + my * my) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

double s_region(const MaskGrid& pred, const MaskGrid& gt) {
  const int w = gt.width, h = gt.height;
  long area = 0;
  double cx = 0.0, cy = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gt.at(x, y) != 0.0) {
        ++area;
        cx += x + 1;  // centroid in 1-based coordinates, as in the reference code
        cy += y + 1;
      }
  int split_x, split_y;
  if (area == 0) {
    split_x = static_cast<int>(std::lround(w / 2.0));
    split_y = static_cast<int>(std::lround(h / 2.0));
  } else {
    split_x = static_cast<int>(std::lround(cx / static_cast<double>(area)));
    split_y = static_cast<int>(std::lround(cy / static_cast<double>(area)));
  }
  split_x = std::clamp(split_x, 1, w);
  split_y = std::clamp(split_y, 1, h);

  const double total = static_cast<double>(w) * h;
  const double w1 = static_cast<double>(split_x) * split_y / total;
  const double w2 = static_cast<double>(w - split_x) * split_y / total;
  const double w3 = static_cast<double>(split_x) * (h - split_y) / total;
  const double w4 = 1.0 - w1 - w2 - w3;

  return w1 * region_ssim(pred, gt, 0, 0, split_x, split_y) +
         w2 * region_ssim(pred, gt, split_x, 0, w, split_y) +
         w3 * region_ssim(pred, gt, 0, split_y, split_x, h) +
         w4 * region_ssim(pred, gt, split_x, split_y, w, h);
}

// S-measure with alpha = 0.5; all-zero ground truth falls back to
// 1 - mean(pred), all-one to mean(pred).
double s_measure(const MaskGrid& pred, const MaskGrid& gt) {
  long fg = 0;
  for (double v : gt.values) fg += v != 0.0 ? 1 : 0;
  double mean_pred = 0.0;
  for (double v : pred.values) mean_pred += v;
  mean_pred /= static_cast<double>(pred.size());

  if (fg == 0) return 1.0 - mean_pred;
  if (static_cast<std::size_t>(fg) == gt.size()) return mean_pred;
  const double s = 0.5 * s_object(pred, gt) + 0.5 * s_region(pred, gt);
  return std::clamp(s, 0.0, 1.0);
}

SampleMetrics compute(const MaskGrid& pred, const MaskGrid& gt, double theta, bool parallel) {
  require_same_shape(pred, gt);
  for (double v : gt.values)
    if (v != 0.0 && v != 1.0)
      throw ContractError("sample_metrics: ground truth must be binary");

  SampleMetrics s;

  std::vector<double> mae_row(static_cast<std::size_t>(gt.height), 0.0);
  for (int y = 0; y < gt.height; ++y) {
    double acc = 0.0;
    for (int x = 0; x < gt.width; ++x) acc += std::abs(pred.at(x, y) - gt.at(x, y));
    mae_row[static_cast<std::size_t>(y)] = acc;
  }
  s.mae = ordered_sum(mae_row) / static_cast<double>(gt.size());

  const Confusion c = confusion(pred, gt, theta);
  const long inter = c.tp;
  const long uni = c.tp + c.fp + c.fn;
  s.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  s.dice = uni == 0 ? 1.0
                    : 2.0 * static_cast<double>(c.tp) /
                          static_cast<double>(2 * c.tp + c.fp + c.fn);
  double fnr = 0.0, fpr = 0.0;  // absent classes contribute 0
  if (c.tp + c.fn > 0) fnr = static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) fpr = static_cast<double>(c.fp) / static_cast<double>(c.tn + c.fp);
  s.ber = 0.5 * (fnr + fpr);

  s.wfm = weighted_fmeasure(pred, gt, parallel);
  s.sm = s_measure(pred, gt);
  return s;
}

}  // namespace

SampleMetrics sample_metrics(const MaskGrid& pred, const MaskGrid& gt, double theta) {
  return compute(pred, gt, theta, true);
}

SampleMetrics sample_metrics_serial(const MaskGrid& pred, const MaskGrid& gt, double theta) {
  return compute(pred, gt, theta, false);
}

void accumulate(MetricAccumulator& acc, const SampleMetrics& s, double intersection,
                double union_) {
  if (intersection > union_)
    throw ContractError("accumulate: intersection exceeds union");
  ++acc.n;
  acc.sum_mae += s.mae;
  acc.sum_ber += s.ber;
  acc.sum_iou += s.iou;
  acc.sum_dice += s.dice;
  acc.sum_wfm += s.wfm;
  acc.sum_sm += s.sm;
  acc.cum_intersection += intersection;
  acc.cum_union += union_;
}

MetricAccumulator merge(const MetricAccumulator& a, const MetricAccumulator& b) {
  MetricAccumulator m;
  m.n = a.n + b.n;
  m.sum_mae = a.sum_mae + b.sum_mae;
  m.sum_ber = a.sum_ber + b.sum_ber;
  m.sum_iou = a.sum_iou + b.sum_iou;
  m.sum_dice = a.sum_dice + b.sum_dice;
  m.sum_wfm = a.sum_wfm + b.sum_wfm;
  m.sum_sm = a.sum_sm + b.sum_sm;
  m.cum_intersection = a.cum_intersection + b.cum_intersection;
  m.cum_union = a.cum_union + b.cum_union;
  return m;
}

DatasetMetrics finalize(const MetricAccumulator& acc) {
  DatasetMetrics d;
  d.n = acc.n;
  if (acc.n > 0) {
    const double n = static_cast<double>(acc.n);
    d.mae = acc.sum_mae / n;
    d.ber = acc.sum_ber / n;
    d.wfm = acc.sum_wfm / n;
    d.sm = acc.sum_sm / n;
    d.miou = acc.sum_iou / n;
    d.mdice = acc.sum_dice / n;
    d.giou = acc.sum_iou / n;
  }
  d.ciou = acc.cum_union == 0.0 ? 1.0 : acc.cum_intersection / acc.cum_union;
  return d;
}

}  // namespace conceptseg
