#include "conceptseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace conceptseg {

double snap4(double v) { return std::nearbyint(v * 1e4) / 1e4; }

BoxN snap4(const BoxN& b) { return BoxN{snap4(b.x1), snap4(b.y1), snap4(b.x2), snap4(b.y2)}; }

MaskGrid binarize(const MaskGrid& m, double theta) {
  MaskGrid out(m.width, m.height);
  for (std::size_t i = 0; i < m.size(); ++i) out.values[i] = m.values[i] >= theta ? 1.0 : 0.0;
  return out;
}

double box_iou(const BoxN& a, const BoxN& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

MaskOverlap mask_overlap(const MaskGrid& pred, const MaskGrid& gt, double theta) {
  if (!pred.same_shape(gt))
    throw ContractError("mask_overlap: dimension mismatch, " + std::to_string(pred.width) + "x" +
                        std::to_string(pred.height) + " vs " + std::to_string(gt.width) + "x" +
                        std::to_string(gt.height));
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.values[i] >= theta;
    const bool g = gt.values[i] != 0.0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  return MaskOverlap{static_cast<double>(inter), static_cast<double>(uni)};
}

double mask_iou(const MaskGrid& pred, const MaskGrid& gt, double theta) {
  const MaskOverlap o = mask_overlap(pred, gt, theta);
  if (o.union_ == 0.0) return 1.0;  // both empty: agreement on absence
  return o.intersection / o.union_;
}

MosaicLayout make_mosaic(int k, int proxy_index) {
  if (k < 1) throw ContractError("make_mosaic: k must be >= 1");
  MosaicLayout layout;
  layout.k = k;
  const int n = k * k;
  if (proxy_index >= n)
    throw ContractError("make_mosaic: proxy index " + std::to_string(proxy_index) +
                        " out of range for " + std::to_string(n) + " tiles");
  layout.tile_rects.reserve(static_cast<std::size_t>(n));
  for (int row = 0; row < k; ++row)
    for (int col = 0; col < k; ++col)
      layout.tile_rects.push_back(BoxN{static_cast<double>(col) / k, static_cast<double>(row) / k,
                                       static_cast<double>(col + 1) / k,
                                       static_cast<double>(row + 1) / k});
  for (int i = 0; i < n; ++i) {
    if (i == proxy_index)
      layout.proxy_indices.push_back(i);
    else
      layout.support_indices.push_back(i);
  }
  return layout;
}

namespace {

const BoxN& tile_rect(const MosaicLayout& layout, int tile) {
  if (tile < 0 || tile >= layout.tiles())
    throw ContractError("mosaic: tile " + std::to_string(tile) + " out of range for k=" +
                        std::to_string(layout.k));
  return layout.tile_rects[static_cast<std::size_t>(tile)];
}

}  // namespace

BoxN to_global(const MosaicLayout& layout, int tile, const BoxN& local_box) {
  const BoxN& r = tile_rect(layout, tile);
  return BoxN{r.x1 + local_box.x1 * r.width(), r.y1 + local_box.y1 * r.height(),
              r.x1 + local_box.x2 * r.width(), r.y1 + local_box.y2 * r.height()};
}

BoxN to_local(const MosaicLayout& layout, int tile, const BoxN& global_box) {
  const BoxN& r = tile_rect(layout, tile);
  const double slack = 1e-9;
  if (global_box.x1 < r.x1 - slack || global_box.x2 > r.x2 + slack ||
      global_box.y1 < r.y1 - slack || global_box.y2 > r.y2 + slack)
    throw ContractError("to_local: box crosses the boundary of tile " + std::to_string(tile));
  return BoxN{(global_box.x1 - r.x1) / r.width(), (global_box.y1 - r.y1) / r.height(),
              (global_box.x2 - r.x1) / r.width(), (global_box.y2 - r.y1) / r.height()};
}

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double soft_box_value(const BoxN& b, double px, double py, double temp) {
  return sigmoid((px - b.x1) / temp) * sigmoid((b.x2 - px) / temp) *
         sigmoid((py - b.y1) / temp) * sigmoid((b.y2 - py) / temp);
}

}  // namespace

MaskGrid rasterize_soft_box_serial(const BoxN& b, int w, int h, double temp) {
  if (temp <= 0.0) throw ContractError("rasterize_soft_box: temp must be positive");
  MaskGrid out(w, h);
  for (int y = 0; y < h; ++y) {
    const double py = (y + 0.5) / h;
    for (int x = 0; x < w; ++x) out.at(x, y) = soft_box_value(b, (x + 0.5) / w, py, temp);
  }
  return out;
}

MaskGrid rasterize_soft_box(const BoxN& b, int w, int h, double temp) {
  if (temp <= 0.0) throw ContractError("rasterize_soft_box: temp must be positive");
  MaskGrid out(w, h);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (static_cast<long>(w) * h >= 4096)
#endif
  for (int y = 0; y < h; ++y) {
    const double py = (y + 0.5) / h;
    for (int x = 0; x < w; ++x) out.at(x, y) = soft_box_value(b, (x + 0.5) / w, py, temp);
  }
  return out;
}

}  // namespace conceptseg
