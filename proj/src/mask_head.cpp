#include "conceptseg/mask_head.hpp"

#include <cmath>

namespace conceptseg {

Tensor lift_pixel_features(const Tensor& features) {
  if (features.cols != 5)
    throw ContractError("lift_pixel_features: expected HWx5, got " + features.shape_str());
  Tensor out(features.rows, kLiftedPixelDim);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const double r = features.at(i, 0), g = features.at(i, 1), b = features.at(i, 2);
    const double x = features.at(i, 3), y = features.at(i, 4);
    double* o = &out.data[i * kLiftedPixelDim];
    o[0] = r;
    o[1] = g;
    o[2] = b;
    o[3] = x;
    o[4] = y;
    o[5] = r * r;
    o[6] = g * g;
    o[7] = b * b;
    o[8] = r * g;
    o[9] = r * b;
    o[10] = g * b;
    o[11] = x * x;
    o[12] = y * y;
    o[13] = x * y;
    o[14] = 1.0;
  }
  return out;
}

void init_mask_head_params(ParamStore& store, const MaskHeadConfig& cfg, Rng& rng) {
  auto mk = [&](std::size_t rows, std::size_t cols, double range) {
    Tensor t = Tensor::random_uniform(rows, cols, range, rng);
    t.requires_grad = true;
    return t;
  };
  const std::size_t c = static_cast<std::size_t>(cfg.c);
  const std::size_t p = static_cast<std::size_t>(cfg.pool_hidden);
  store.add("mask.pix_w", mk(kLiftedPixelDim, c, 1.0 / std::sqrt(double(kLiftedPixelDim))));
  store.add("mask.pix_b", mk(1, c, 0.1));
  store.add("mask.pool_w1", mk(c, p, 1.0 / std::sqrt(static_cast<double>(c))));
  store.add("mask.pool_b1", mk(1, p, 0.1));
  store.add("mask.pool_w2", mk(p, c, 1.0 / std::sqrt(static_cast<double>(p))));
  store.add("mask.pool_b2", mk(1, c, 0.1));
}

MaskHeadNodes bind_mask_head(const BoundParams& bound) {
  return MaskHeadNodes{bound.at("mask.pix_w"),   bound.at("mask.pix_b"),
                       bound.at("mask.pool_w1"), bound.at("mask.pool_b1"),
                       bound.at("mask.pool_w2"), bound.at("mask.pool_b2")};
}

NodeRef pixel_embedding(Graph& g, NodeRef lifted_features, const MaskHeadNodes& head) {
  const Tensor& lifted = g.value(lifted_features);
  if (lifted.cols != static_cast<std::size_t>(kLiftedPixelDim))
    throw ContractError("pixel_embedding: expected lifted width " +
                        std::to_string(kLiftedPixelDim) + ", got " + lifted.shape_str());
  return g.tanh(g.add_row_bias(g.matmul(lifted_features, head.pix_w), head.pix_b));
}

MaskPrediction mask_from_prompt(Graph& g, NodeRef prompt_rows, NodeRef pixel_emb,
                                const MaskHeadNodes& head, const MaskHeadConfig& cfg) {
  NodeRef pooled_in = g.mean_rows(prompt_rows);
  NodeRef hidden = g.tanh(g.add_row_bias(g.matmul(pooled_in, head.pool_w1), head.pool_b1));
  NodeRef pooled = g.add_row_bias(g.matmul(hidden, head.pool_w2), head.pool_b2);

  MaskPrediction out;
  out.logits =
      g.clamp(g.matmul(pixel_emb, g.transpose(pooled)), -cfg.logit_clamp, cfg.logit_clamp);
  out.soft = g.sigmoid(out.logits);
  out.presence = g.sigmoid(g.max_all(out.logits));
  return out;
}

MaskPrediction predict_mask(Graph& g, NodeRef prompt_rows, NodeRef scene_features,
                            const MaskHeadNodes& head, const MaskHeadConfig& cfg) {
  const Tensor& feat = g.value(scene_features);
  if (feat.cols != static_cast<std::size_t>(cfg.feature_dim))
    throw ContractError("predict_mask: features " + feat.shape_str() + " expect width " +
                        std::to_string(cfg.feature_dim));
  NodeRef lifted = g.constant(lift_pixel_features(feat));
  return mask_from_prompt(g, prompt_rows, pixel_embedding(g, lifted, head), head, cfg);
}

NodeRef seg_loss(Graph& g, NodeRef soft_mask, const MaskGrid& gt) {
  const Tensor& p = g.value(soft_mask);
  if (p.rows != gt.size() || p.cols != 1)
    throw ContractError("seg_loss: prediction " + p.shape_str() + " does not match mask " +
                        std::to_string(gt.width) + "x" + std::to_string(gt.height));

  Tensor gt_col(gt.size(), 1);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double v = gt.values[i];
    if (v != 0.0 && v != 1.0) throw ContractError("seg_loss: ground truth must be binary");
    gt_col.data[i] = v;
  }
  NodeRef gt_node = g.constant(gt_col);
  NodeRef ones = g.constant(Tensor(gt.size(), 1, 1.0));

  // Dice with epsilon 1.
  NodeRef num = g.add_const(g.scale(g.sum(g.mul(soft_mask, gt_node)), 2.0), 1.0);
  NodeRef den = g.add_const(g.add(g.sum(soft_mask), g.sum(gt_node)), 1.0);
  NodeRef dice = g.add_const(g.scale(g.div(num, den), -1.0), 1.0);

  // Focal, gamma 2, alpha 0.25.
  NodeRef one_minus_p = g.sub(ones, soft_mask);
  NodeRef one_minus_g = g.sub(ones, gt_node);
  NodeRef pos = g.mul(gt_node, g.mul(g.mul(one_minus_p, one_minus_p),
                                     g.scale(g.log(soft_mask), -1.0)));
  NodeRef neg = g.mul(one_minus_g,
                      g.mul(g.mul(soft_mask, soft_mask), g.scale(g.log(one_minus_p), -1.0)));
  NodeRef focal = g.mean(g.add(g.scale(pos, 0.25), g.scale(neg, 0.75)));

  return g.add(dice, focal);
}

MaskGrid to_mask_grid(const Tensor& column, int width, int height) {
  if (column.rows != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) ||
      column.cols != 1)
    throw ContractError("to_mask_grid: " + column.shape_str() + " does not fit " +
                        std::to_string(width) + "x" + std::to_string(height));
  MaskGrid m(width, height);
  m.values = column.data;
  return m;
}

}  // namespace conceptseg
