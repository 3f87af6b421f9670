#ifndef CONCEPTSEG_GEOMETRY_HPP
#define CONCEPTSEG_GEOMETRY_HPP

#include <cstddef>
#include <vector>

#include "conceptseg/errors.hpp"

namespace conceptseg {

// Axis-aligned box in normalized [0,1] canvas coordinates, (x1,y1) top-left,
// (x2,y2) bottom-right. Degenerate (zero-area) boxes are legal.
struct BoxN {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const {
    return 0.0 <= x1 && x1 <= x2 && x2 <= 1.0 && 0.0 <= y1 && y1 <= y2 && y2 <= 1.0;
  }
  bool operator==(const BoxN&) const = default;
};

// Rounds to the nearest multiple of 1e-4, matching the template's 4-decimal
// serialization so emitted boxes reparse to bit-identical values.
BoxN snap4(const BoxN& b);
double snap4(double v);

// Per-pixel grid with values in [0,1]; binary masks use exactly {0,1}.
// Pixel (x, y) has its center at ((x+0.5)/width, (y+0.5)/height).
struct MaskGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  MaskGrid() = default;
  MaskGrid(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
  bool same_shape(const MaskGrid& o) const { return width == o.width && height == o.height; }
};

// Threshold at theta (>= theta maps to 1). Idempotent on its own output.
MaskGrid binarize(const MaskGrid& m, double theta);

double box_iou(const BoxN& a, const BoxN& b);

// |binary(p) ∩ g| / |binary(p) ∪ g|; 1.0 when both masks are empty.
double mask_iou(const MaskGrid& pred, const MaskGrid& gt, double theta);

// Intersection/union pixel counts after thresholding pred; used by the
// cumulative-IoU accumulator.
struct MaskOverlap {
  double intersection = 0.0;
  double union_ = 0.0;
};
MaskOverlap mask_overlap(const MaskGrid& pred, const MaskGrid& gt, double theta);

// K x K equal subdivision of the unit canvas. Tile index runs row-major from
// the top-left. Support and proxy indices partition the tile set.
struct MosaicLayout {
  int k = 1;
  std::vector<BoxN> tile_rects;
  std::vector<int> support_indices;
  std::vector<int> proxy_indices;

  int tiles() const { return k * k; }
};

// proxy_index < 0 means no proxy tile (the k = 1 degenerate mosaic).
MosaicLayout make_mosaic(int k, int proxy_index);

BoxN to_global(const MosaicLayout& layout, int tile, const BoxN& local_box);
BoxN to_local(const MosaicLayout& layout, int tile, const BoxN& global_box);

// Soft box indicator: product of four sigmoids at pixel centers,
// differentiable in the box coordinates. Serial reference plus the
// OpenMP-parallel version used in production paths.
MaskGrid rasterize_soft_box_serial(const BoxN& b, int w, int h, double temp);
MaskGrid rasterize_soft_box(const BoxN& b, int w, int h, double temp);

}  // namespace conceptseg

#endif
