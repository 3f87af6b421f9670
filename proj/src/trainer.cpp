#include "conceptseg/trainer.hpp"

#include <cmath>

namespace conceptseg {

namespace {

const std::vector<std::string> kStage1Prefixes = {"ctm.", "text.", "mask."};
const std::vector<std::string> kStage2Prefixes = {"policy.", "ctm.", "text.", "mask."};

MaskHeadConfig mask_cfg_for(const ModelConfig& m) {
  MaskHeadConfig cfg;
  cfg.c = m.c;
  cfg.pool_hidden = m.pool_hidden;
  return cfg;
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParamStore store;
  Rng rng(seed, {0x1417ULL});
  init_policy_params(store, PolicyConfig{cfg.c}, AnswerVocab::standard(), rng);
  init_ctm_params(store, CtmConfig{cfg.l2, cfg.c}, rng);
  init_text_params(store, TextVocab::standard(), cfg.c, rng);
  init_mask_head_params(store, mask_cfg_for(cfg), rng);
  return store;
}

PreparedEpisode prepare_episode(Episode e) {
  PreparedEpisode p;
  p.features = featurize(e, AnswerVocab::standard());
  p.query_features = scene_features(e.query);
  p.query_lifted = lift_pixel_features(p.query_features);
  p.gt = e.ground_truth();
  p.episode = std::move(e);
  return p;
}

std::vector<PreparedEpisode> prepare_all(std::vector<Episode> episodes) {
  std::vector<PreparedEpisode> out(episodes.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::size_t i = 0; i < episodes.size(); ++i)
    out[i] = prepare_episode(std::move(episodes[i]));
  return out;
}

double stage1_step(ParamStore& params, std::span<const PreparedEpisode* const> batch,
                   const TrainConfig& cfg) {
  if (batch.empty()) throw ContractError("stage1_step: empty batch");
  const TextVocab text_vocab = TextVocab::standard();
  const MaskHeadConfig mask_cfg = mask_cfg_for(cfg.model);

  Graph g;
  const BoundParams bound = bind_params(g, params);
  const PolicyNodes policy = bind_policy(bound);
  const CtmNodes ctm = bind_ctm(bound);
  const MaskHeadNodes head = bind_mask_head(bound);
  const NodeRef text_table = bound.at("text.embed");

  NodeRef total{-1};
  for (const PreparedEpisode* ep : batch) {
    NodeRef h = policy_hidden(g, g.constant(ep->features.descriptors), policy);
    NodeRef z = translate(g, h, ctm).z;
    NodeRef e_text = embed_text(g, text_table, text_vocab, ep->episode.gt_answer);
    NodeRef prompt = assemble_prompt(g, z, e_text);
    NodeRef pix = pixel_embedding(g, g.constant(ep->query_lifted), head);
    const MaskPrediction pred = mask_from_prompt(g, prompt, pix, head, mask_cfg);
    NodeRef loss = seg_loss(g, pred.soft, ep->gt.gt_mask);
    total = total.valid() ? g.add(total, loss) : loss;
  }
  total = g.scale(total, 1.0 / static_cast<double>(batch.size()));

  const double loss_value = g.value(total).data[0];
  if (!std::isfinite(loss_value)) throw NumericalError("stage1_step: non-finite loss");
  g.backward(total);
  sgd_update(params, g, bound, kStage1Prefixes, cfg.stage1_lr);
  return loss_value;
}

Stage2Stats stage2_step(ParamStore& params, const ParamStore& ref_params,
                        const PreparedEpisode& ep, const TrainConfig& cfg, int step) {
  const TextVocab text_vocab = TextVocab::standard();
  const AnswerVocab answer_vocab = AnswerVocab::standard();
  const MaskHeadConfig mask_cfg = mask_cfg_for(cfg.model);
  const int g_size = cfg.group_size;

  GroupBatch group =
      sample_group(ep.features, params, g_size,
                   Rng(cfg.seed, {0x57a6e2ULL, static_cast<std::uint64_t>(step)}).next_u64());

  Graph g;
  const BoundParams bound = bind_params(g, params);
  const PolicyNodes policy = bind_policy(bound);
  const CtmNodes ctm = bind_ctm(bound);
  const MaskHeadNodes head = bind_mask_head(bound);
  const NodeRef text_table = bound.at("text.embed");

  const PolicyForward fwd = policy_forward(g, ep.features, g.constant(ep.features.descriptors), policy);
  NodeRef z = translate(g, fwd.hidden, ctm).z;
  NodeRef pix = pixel_embedding(g, g.constant(ep.query_lifted), head);

  Stage2Stats stats;
  std::vector<double> rewards;
  std::vector<NodeRef> seg_nodes, logp_nodes;
  for (Trajectory& traj : group.trajectories) {
    NodeRef e_text = embed_text(g, text_table, text_vocab,
                                answer_vocab.phrases[static_cast<std::size_t>(traj.choices.answer)]);
    NodeRef prompt = assemble_prompt(g, z, e_text);
    const MaskPrediction pred = mask_from_prompt(g, prompt, pix, head, mask_cfg);
    const MaskGrid decoded =
        to_mask_grid(g.value(pred.soft), ep.episode.query.width, ep.episode.query.height);
    traj.breakdown = unified_reward(traj.text, ep.gt, &decoded, cfg.theta, cfg.rewards);
    rewards.push_back(traj.breakdown.r_uni);
    seg_nodes.push_back(seg_loss(g, pred.soft, ep.gt.gt_mask));
    logp_nodes.push_back(trajectory_log_prob(g, fwd, policy, ep.features, traj.choices));

    stats.mean_r_format += traj.breakdown.r_format;
    stats.mean_r_mask += traj.breakdown.r_mask;
    stats.mean_r_meta += traj.breakdown.r_meta;
    stats.mean_r_uni += traj.breakdown.r_uni;
  }
  const double inv_g = 1.0 / static_cast<double>(g_size);
  stats.mean_r_format *= inv_g;
  stats.mean_r_mask *= inv_g;
  stats.mean_r_meta *= inv_g;
  stats.mean_r_uni *= inv_g;

  group.advantages = group_advantages(rewards);
  double adv_sq = 0.0;
  for (double a : group.advantages) adv_sq += a * a;
  stats.adv_std = std::sqrt(adv_sq * inv_g);

  // -(1/G) sum_i a_i log pi(tau_i)
  NodeRef policy_term{-1};
  for (int i = 0; i < g_size; ++i) {
    const double a = group.advantages[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    NodeRef term = g.scale(logp_nodes[static_cast<std::size_t>(i)], -a * inv_g);
    policy_term = policy_term.valid() ? g.add(policy_term, term) : term;
  }

  // beta * mean_i (exp(d) - d - 1), d = log pi_ref - log pi_theta.
  NodeRef kl_term{-1};
  for (int i = 0; i < g_size; ++i) {
    const double lp_ref =
        log_prob_value(ep.features, ref_params, group.trajectories[static_cast<std::size_t>(i)].choices);
    NodeRef delta = g.sub(g.constant(Tensor::scalar(lp_ref)), logp_nodes[static_cast<std::size_t>(i)]);
    NodeRef k3 = g.add_const(g.sub(g.exp(delta), delta), -1.0);
    kl_term = kl_term.valid() ? g.add(kl_term, k3) : k3;
  }
  kl_term = g.scale(kl_term, cfg.beta * inv_g);

  NodeRef seg_term{-1};
  if (cfg.seg_all_trajectories) {
    for (NodeRef s : seg_nodes) seg_term = seg_term.valid() ? g.add(seg_term, s) : s;
    seg_term = g.scale(seg_term, inv_g);
  } else {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rewards.size(); ++i)
      if (rewards[i] > rewards[best]) best = i;
    seg_term = seg_nodes[best];
  }

  NodeRef total = g.add(kl_term, seg_term);
  if (policy_term.valid()) total = g.add(total, policy_term);

  const double total_value = g.value(total).data[0];
  if (!std::isfinite(total_value))
    throw NumericalError("stage2_step: non-finite objective at step " + std::to_string(step));
  g.backward(total);
  sgd_update(params, g, bound, kStage2Prefixes, cfg.stage2_lr);

  stats.policy_term = policy_term.valid() ? g.value(policy_term).data[0] : 0.0;
  stats.kl_term = g.value(kl_term).data[0];
  stats.seg_term = g.value(seg_term).data[0];
  return stats;
}

double stage1_mask_iou(const ParamStore& params, std::span<const PreparedEpisode> episodes,
                       const TrainConfig& cfg) {
  if (episodes.empty()) return 0.0;
  const TextVocab text_vocab = TextVocab::standard();
  const MaskHeadConfig mask_cfg = mask_cfg_for(cfg.model);
  std::vector<double> ious(episodes.size(), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const PreparedEpisode& ep = episodes[i];
    Graph g;
    const BoundParams bound = bind_params(g, params);
    NodeRef h = policy_hidden(g, g.constant(ep.features.descriptors), bind_policy(bound));
    NodeRef z = translate(g, h, bind_ctm(bound)).z;
    NodeRef e_text = embed_text(g, bound.at("text.embed"), text_vocab, ep.episode.gt_answer);
    NodeRef prompt = assemble_prompt(g, z, e_text);
    const MaskHeadNodes head = bind_mask_head(bound);
    const MaskPrediction pred = mask_from_prompt(
        g, prompt, pixel_embedding(g, g.constant(ep.query_lifted), head), head, mask_cfg);
    const MaskGrid decoded =
        to_mask_grid(g.value(pred.soft), ep.episode.query.width, ep.episode.query.height);
    ious[i] = mask_iou(decoded, ep.gt.gt_mask, cfg.theta);
  }
  double acc = 0.0;
  for (double v : ious) acc += v;
  return acc / static_cast<double>(episodes.size());
}

double selection_accuracy(const ParamStore& params, std::span<const PreparedEpisode> episodes) {
  if (episodes.empty()) return 0.0;
  std::vector<char> hit(episodes.size(), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Trajectory t = greedy_trajectory(episodes[i].features, params);
    hit[i] = t.choices.target == episodes[i].features.gt_target_choice ? 1 : 0;
  }
  long n = 0;
  for (char h : hit) n += h;
  return static_cast<double>(n) / static_cast<double>(episodes.size());
}

}  // namespace conceptseg
