#include "conceptseg/eval.hpp"

#include <map>

namespace conceptseg {

RouterMode router_mode_from_name(const std::string& name) {
  if (name == "direct") return RouterMode::Direct;
  if (name == "reason") return RouterMode::Reason;
  if (name == "adaptive") return RouterMode::Adaptive;
  throw ConfigError("unknown router mode '" + name + "'");
}

const char* router_mode_name(RouterMode m) {
  switch (m) {
    case RouterMode::Direct: return "direct";
    case RouterMode::Reason: return "reason";
    case RouterMode::Adaptive: return "adaptive";
  }
  return "?";
}

namespace {

struct Decode {
  MaskGrid mask;
  double presence = 0.0;
};

// Direct path: the mask head prompted by the instruction's text embeddings
// alone; the presence score gates the router.
Decode decode_direct(const ParamStore& params, const PreparedEpisode& ep,
                     const TrainConfig& cfg) {
  Graph g;
  const BoundParams bound = bind_params(g, params);
  const MaskHeadConfig mask_cfg{5, cfg.model.c, cfg.model.pool_hidden, 20.0};
  NodeRef e_text =
      embed_text(g, bound.at("text.embed"), TextVocab::standard(), ep.features.instruction);
  const MaskPrediction pred =
      mask_from_prompt(g, e_text, pixel_embedding(g, g.constant(ep.query_lifted), bind_mask_head(bound)), bind_mask_head(bound), mask_cfg);
  Decode d;
  d.mask = to_mask_grid(g.value(pred.soft), ep.episode.query.width, ep.episode.query.height);
  d.presence = g.value(pred.presence).data[0];
  return d;
}

// Reasoning path: greedy trajectory, translated concept groups plus the
// answer embedding as the prompt.
Decode decode_reason(const ParamStore& params, const PreparedEpisode& ep, const TrainConfig& cfg,
                     const Trajectory& greedy) {
  Graph g;
  const BoundParams bound = bind_params(g, params);
  const MaskHeadConfig mask_cfg{5, cfg.model.c, cfg.model.pool_hidden, 20.0};
  NodeRef h = policy_hidden(g, g.constant(ep.features.descriptors), bind_policy(bound));
  NodeRef z = translate(g, h, bind_ctm(bound)).z;
  const AnswerVocab vocab = AnswerVocab::standard();
  NodeRef e_text = embed_text(g, bound.at("text.embed"), TextVocab::standard(),
                              vocab.phrases[static_cast<std::size_t>(greedy.choices.answer)]);
  const MaskHeadNodes head = bind_mask_head(bound);
  const MaskPrediction pred =
      mask_from_prompt(g, assemble_prompt(g, z, e_text),
                       pixel_embedding(g, g.constant(ep.query_lifted), head), head, mask_cfg);
  Decode d;
  d.mask = to_mask_grid(g.value(pred.soft), ep.episode.query.width, ep.episode.query.height);
  d.presence = g.value(pred.presence).data[0];
  return d;
}

}  // namespace

EpisodeEval eval_episode(const ParamStore& params, const PreparedEpisode& ep, RouterMode mode,
                         const TrainConfig& cfg) {
  EpisodeEval out;
  out.family = ep.episode.rule.family;

  const Decode direct = decode_direct(params, ep, cfg);
  out.presence = direct.presence;

  bool use_direct;
  switch (mode) {
    case RouterMode::Direct: use_direct = true; break;
    case RouterMode::Reason: use_direct = false; break;
    case RouterMode::Adaptive:
      use_direct = route(direct.presence, ep.features.instruction).path == RoutePath::Direct;
      break;
    default: use_direct = false; break;
  }
  out.routed_direct = use_direct;

  const Trajectory greedy = greedy_trajectory(ep.features, params);
  out.target_correct = greedy.choices.target == ep.features.gt_target_choice;
  out.check_correct =
      ep.features.proxy_rows.empty() || greedy.choices.check == ep.features.gt_check_choice;

  const MaskGrid* mask = &direct.mask;
  Decode reason;
  if (!use_direct) {
    reason = decode_reason(params, ep, cfg, greedy);
    mask = &reason.mask;
  }

  out.metrics = sample_metrics(*mask, ep.gt.gt_mask, cfg.theta);
  const MaskOverlap ov = mask_overlap(*mask, ep.gt.gt_mask, cfg.theta);
  out.intersection = ov.intersection;
  out.union_ = ov.union_;
  return out;
}

EvalReport evaluate(const ParamStore& params, std::span<const PreparedEpisode> episodes,
                    RouterMode mode, const TrainConfig& cfg) {
  std::vector<EpisodeEval> records(episodes.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::size_t i = 0; i < episodes.size(); ++i)
    records[i] = eval_episode(params, episodes[i], mode, cfg);

  struct FamilyAgg {
    MetricAccumulator acc;
    long n = 0, direct = 0, target_ok = 0, check_ok = 0;
  };
  std::map<int, FamilyAgg> by_family;
  MetricAccumulator overall;
  long n_direct = 0, n_target_ok = 0;
  for (const EpisodeEval& r : records) {
    FamilyAgg& fa = by_family[static_cast<int>(r.family)];
    accumulate(fa.acc, r.metrics, r.intersection, r.union_);
    accumulate(overall, r.metrics, r.intersection, r.union_);
    ++fa.n;
    fa.direct += r.routed_direct ? 1 : 0;
    fa.target_ok += r.target_correct ? 1 : 0;
    fa.check_ok += r.check_correct ? 1 : 0;
    n_direct += r.routed_direct ? 1 : 0;
    n_target_ok += r.target_correct ? 1 : 0;
  }

  EvalReport report;
  for (const auto& [fam, agg] : by_family) {
    FamilyReport fr;
    fr.family = static_cast<RuleFamily>(fam);
    fr.n = agg.n;
    fr.metrics = finalize(agg.acc);
    fr.routing_rate = static_cast<double>(agg.direct) / static_cast<double>(agg.n);
    fr.target_accuracy = static_cast<double>(agg.target_ok) / static_cast<double>(agg.n);
    fr.check_accuracy = static_cast<double>(agg.check_ok) / static_cast<double>(agg.n);
    report.families.push_back(fr);
  }
  report.overall = finalize(overall);
  report.n = static_cast<long>(records.size());
  if (report.n > 0) {
    report.routing_rate = static_cast<double>(n_direct) / static_cast<double>(report.n);
    report.target_accuracy = static_cast<double>(n_target_ok) / static_cast<double>(report.n);
  }
  return report;
}

}  // namespace conceptseg
