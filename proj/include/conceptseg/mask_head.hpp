#ifndef CONCEPTSEG_MASK_HEAD_HPP
#define CONCEPTSEG_MASK_HEAD_HPP

#include "conceptseg/geometry.hpp"
#include "conceptseg/params.hpp"
#include "conceptseg/rng.hpp"

namespace conceptseg {

// Toy promptable mask head: per-pixel embeddings dotted against a pooled
// prompt vector, plus a presence score read from the maximum logit.
//
// The pixel projection lifts (r, g, b, x, y) to a fixed quadratic monomial
// basis before its trainable layer, so color- and position-matching scores
// are linearly reachable.
struct MaskHeadConfig {
  int feature_dim = 5;   // r, g, b, norm-x, norm-y
  int c = 16;            // embedding width shared with the prompt
  int pool_hidden = 32;  // hidden width of the prompt-pooling perceptron
  double logit_clamp = 20.0;
};

constexpr int kLiftedPixelDim = 15;  // monomials of the 5 raw channels up to degree 2

// Quadratic monomial lift of an HW x 5 feature tensor.
Tensor lift_pixel_features(const Tensor& features);

void init_mask_head_params(ParamStore& store, const MaskHeadConfig& cfg, Rng& rng);

struct MaskHeadNodes {
  NodeRef pix_w, pix_b, pool_w1, pool_b1, pool_w2, pool_b2;
};
MaskHeadNodes bind_mask_head(const BoundParams& bound);

struct MaskPrediction {
  NodeRef logits;    // HW x 1, clamped to +-logit_clamp
  NodeRef soft;      // HW x 1 in (0,1)
  NodeRef presence;  // 1 x 1, sigmoid of the max logit
};

// Trainable half of the pixel projection; lifted_features is the constant
// HW x kLiftedPixelDim node. Shared across every prompt for the same scene.
NodeRef pixel_embedding(Graph& g, NodeRef lifted_features, const MaskHeadNodes& head);

// Decodes one prompt against a precomputed pixel embedding.
MaskPrediction mask_from_prompt(Graph& g, NodeRef prompt_rows, NodeRef pixel_emb,
                                const MaskHeadNodes& head, const MaskHeadConfig& cfg);

// One-shot decode. prompt_rows: (L2 + T) x C; scene_features: HW x F with
// normalized pixel coordinates in the last two channels.
MaskPrediction predict_mask(Graph& g, NodeRef prompt_rows, NodeRef scene_features,
                            const MaskHeadNodes& head, const MaskHeadConfig& cfg);

// Dice (epsilon 1) plus focal (gamma 2, alpha 0.25, mean over pixels) on the
// soft prediction against a binary ground truth.
NodeRef seg_loss(Graph& g, NodeRef soft_mask, const MaskGrid& gt);

// Copies an HW x 1 node value into a mask grid.
MaskGrid to_mask_grid(const Tensor& column, int width, int height);

}  // namespace conceptseg

#endif
