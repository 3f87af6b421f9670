#include "conceptseg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace conceptseg {

namespace {

constexpr const char* kThinkText =
    "compare the annotated tiles, induce the shared rule, verify it on the withheld tile, "
    "then locate the matching object in the query";

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

bool instruction_has_word(const std::string& instruction, const std::string& word) {
  std::istringstream ss(instruction);
  std::string tok;
  while (ss >> tok)
    if (tok == word) return true;
  return false;
}

struct ClassKey {
  int shape;
  int palette;
  bool operator<(const ClassKey& o) const {
    return shape != o.shape ? shape < o.shape : palette < o.palette;
  }
};

ClassKey key_of(const SceneObject& o) {
  return ClassKey{o.shape == ObjectShape::Rect ? 0 : 1, o.palette_id};
}

// Fractional rank in [0,1]; the largest value maps to 1.
double rank_of(const std::vector<double>& values, std::size_t i) {
  if (values.size() < 2) return 0.5;
  int below = 0;
  for (std::size_t j = 0; j < values.size(); ++j)
    if (j != i && (values[j] < values[i] || (values[j] == values[i] && j < i))) ++below;
  return static_cast<double>(below) / static_cast<double>(values.size() - 1);
}

}  // namespace

void init_policy_params(ParamStore& store, const PolicyConfig& cfg, const AnswerVocab& vocab,
                        Rng& rng) {
  const std::size_t d = kDescriptorDim;
  const std::size_t c = static_cast<std::size_t>(cfg.c);
  auto mk = [&](std::size_t r_, std::size_t c_, double range) {
    Tensor t = Tensor::random_uniform(r_, c_, range, rng);
    t.requires_grad = true;
    return t;
  };
  store.add("policy.enc_w", mk(d, c, 1.0 / std::sqrt(static_cast<double>(d))));
  store.add("policy.enc_b", mk(1, c, 0.05));
  store.add("policy.check_v", mk(c, 1, 1.0 / std::sqrt(static_cast<double>(c))));
  store.add("policy.target_v", mk(c, 1, 1.0 / std::sqrt(static_cast<double>(c))));
  store.add("policy.ans_w", mk(c, c, 1.0 / std::sqrt(static_cast<double>(c))));
  store.add("policy.ans_e",
            mk(static_cast<std::size_t>(vocab.size()), c, 1.0 / std::sqrt(static_cast<double>(c))));
  Tensor tags(1, kTagCount, 0.0);
  tags.requires_grad = true;
  store.add("policy.tag_logits", std::move(tags));
}

EpisodeFeatures featurize(const Episode& e, const AnswerVocab& vocab) {
  EpisodeFeatures f;
  f.instruction = e.instruction;

  const int n_tiles = static_cast<int>(e.tiles.size());
  const std::vector<double> cues_raw = instruction_cues(e.instruction);
  std::vector<double> cues = cues_raw;
  bool color_cue = false;
  for (const PaletteColor& c : palette())
    if (instruction_has_word(e.instruction, c.name)) color_cue = true;
  cues[0] = color_cue ? 1.0 : 0.0;

  // Class statistics across the episode.
  std::map<ClassKey, int> ref_tiles_with;  // number of reference tiles containing the class
  std::map<ClassKey, int> scenes_with;     // number of scenes (tiles + query) containing it
  auto collect = [](const Scene& s) {
    std::map<ClassKey, int> counts;
    for (const SceneObject& o : s.objects) ++counts[key_of(o)];
    return counts;
  };
  std::vector<std::map<ClassKey, int>> tile_counts;
  for (const Scene& t : e.tiles) tile_counts.push_back(collect(t));
  const std::map<ClassKey, int> query_counts = collect(e.query);
  for (const auto& counts : tile_counts)
    for (const auto& [k, n] : counts) {
      ++ref_tiles_with[k];
      ++scenes_with[k];
    }
  for (const auto& [k, n] : query_counts) ++scenes_with[k];

  // Displacement per class between the first two tiles, when well-defined.
  std::map<ClassKey, double> moved_dist;
  if (n_tiles >= 2) {
    const Scene& a = e.tiles[0];
    const Scene& b = e.tiles[1];
    for (const SceneObject& oa : a.objects) {
      const ClassKey k = key_of(oa);
      const int ib = b.find_class(ObjectClass{oa.shape, oa.palette_id});
      if (ib < 0) continue;
      const BoxN& bb = b.objects[static_cast<std::size_t>(ib)].box;
      const double dx = ((oa.box.x1 + oa.box.x2) - (bb.x1 + bb.x2)) / 2.0;
      const double dy = ((oa.box.y1 + oa.box.y2) - (bb.y1 + bb.y2)) / 2.0;
      moved_dist[k] = std::sqrt(dx * dx + dy * dy);
    }
  }

  std::vector<std::vector<double>> rows;
  auto add_scene = [&](const Scene& s, int scene_index) {
    const bool is_query = scene_index < 0;
    const bool is_proxy = !is_query && scene_index == e.proxy_tile;
    const std::map<ClassKey, int> own_counts = collect(s);
    bool scene_has_repeat = false;
    for (const auto& [k, n] : own_counts)
      if (n >= 2) scene_has_repeat = true;

    std::vector<double> areas, contrasts;
    for (const SceneObject& o : s.objects) {
      areas.push_back(o.box.area());
      contrasts.push_back(o.contrast);
    }

    for (const SceneObject& o : s.objects) {
      const ClassKey k = key_of(o);
      const std::size_t slot = static_cast<std::size_t>(o.id);
      const double n_obj = static_cast<double>(s.objects.size());

      bool annotated = false;
      for (const SupportAnnotation& ann : e.support_annotations)
        if (!is_query && ann.tile == scene_index && ann.object_id == o.id) annotated = true;

      const double class_frac = own_counts.at(k) / n_obj;
      const double tiles_frac =
          n_tiles > 0 ? static_cast<double>(ref_tiles_with[k]) / n_tiles : 0.0;
      const bool in_all_refs = n_tiles > 0 && ref_tiles_with[k] == n_tiles;
      const int other_scenes = scenes_with[k] - 1;  // beyond this object's own scene
      const bool unique_in_episode = other_scenes == 0 && own_counts.at(k) == 1;
      const double mdist = moved_dist.count(k) ? std::min(moved_dist[k] / 0.5, 1.0) : 0.0;
      const double area_rank = rank_of(areas, slot);
      const double contrast_rank = rank_of(contrasts, slot);
      const bool singleton = own_counts.at(k) == 1 && scene_has_repeat;
      const bool color_match =
          color_cue &&
          instruction_has_word(e.instruction, palette()[static_cast<std::size_t>(o.palette_id)].name);

      double cue_match = 0.0;
      if (cues[0] != 0.0) cue_match += color_match ? 1.0 : 0.0;
      if (cues[1] != 0.0) cue_match += contrast_rank;
      if (cues[2] != 0.0) cue_match += 1.0 - contrast_rank;
      if (cues[3] != 0.0) cue_match += singleton ? 1.0 : 0.0;
      if (cues[4] != 0.0) cue_match += in_all_refs ? 1.0 : 0.0;
      if (cues[5] != 0.0) cue_match += unique_in_episode ? 1.0 : 0.0;
      if (cues[6] > 0.0) cue_match += area_rank;
      if (cues[6] < 0.0) cue_match += 1.0 - area_rank;
      if (cues[7] != 0.0) cue_match += mdist > 1e-6 ? 1.0 : 0.0;

      std::vector<double> row = {
          o.shape == ObjectShape::Rect ? 1.0 : 0.0,
          o.shape == ObjectShape::Disc ? 1.0 : 0.0,
          o.color[0],
          o.color[1],
          o.color[2],
          o.contrast,
          (o.box.x1 + o.box.x2) / 2.0,
          (o.box.y1 + o.box.y2) / 2.0,
          o.box.width(),
          o.box.height(),
          o.box.area(),
          (!is_query && !is_proxy) ? 1.0 : 0.0,
          is_proxy ? 1.0 : 0.0,
          is_query ? 1.0 : 0.0,
          annotated ? 1.0 : 0.0,
          class_frac,
          tiles_frac,
          in_all_refs ? 1.0 : 0.0,
          unique_in_episode ? 1.0 : 0.0,
          mdist,
          area_rank,
          contrast_rank,
          color_match ? 1.0 : 0.0,
          cue_match,
          1.0,
      };
      for (int ci = 0; ci < kRuleFamilyCount; ++ci) row.push_back(cues[static_cast<std::size_t>(ci)]);
      if (static_cast<int>(row.size()) != kDescriptorDim)
        throw ContractError("featurize: descriptor width drifted");

      const int row_id = static_cast<int>(rows.size());
      rows.push_back(std::move(row));
      if (is_proxy) {
        f.proxy_rows.push_back(row_id);
        f.proxy_boxes_global.push_back(snap4(to_global(e.layout, scene_index, o.box)));
        if (o.id == e.gt_check_object)
          f.gt_check_choice = static_cast<int>(f.proxy_rows.size()) - 1;
      }
      if (is_query) {
        f.query_rows.push_back(row_id);
        f.query_boxes.push_back(o.box);
        if (o.id == e.gt_target_object)
          f.gt_target_choice = static_cast<int>(f.query_rows.size()) - 1;
      }
    }
  };

  for (int t = 0; t < n_tiles; ++t) add_scene(e.tiles[static_cast<std::size_t>(t)], t);
  add_scene(e.query, -1);

  f.descriptors = Tensor(rows.size(), kDescriptorDim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < static_cast<std::size_t>(kDescriptorDim); ++j)
      f.descriptors.at(i, j) = rows[i][j];

  const SceneObject& target = e.query.objects[static_cast<std::size_t>(e.gt_target_object)];
  f.gt_answer_id = vocab.id_of(target.palette_id, target.shape);
  return f;
}

PolicyNodes bind_policy(const BoundParams& bound) {
  return PolicyNodes{bound.at("policy.enc_w"),   bound.at("policy.enc_b"),
                     bound.at("policy.check_v"), bound.at("policy.target_v"),
                     bound.at("policy.ans_w"),   bound.at("policy.ans_e"),
                     bound.at("policy.tag_logits")};
}

NodeRef policy_hidden(Graph& g, NodeRef descriptors, const PolicyNodes& p) {
  return g.tanh(g.add_row_bias(g.matmul(descriptors, p.enc_w), p.enc_b));
}

PolicyForward policy_forward(Graph& g, const EpisodeFeatures& f, NodeRef descriptors,
                             const PolicyNodes& p) {
  if (f.query_rows.size() < 2)
    throw ContractError("policy_forward: episode needs at least 2 query candidates");
  PolicyForward fwd;
  fwd.hidden = policy_hidden(g, descriptors, p);
  if (!f.proxy_rows.empty()) {
    NodeRef hp = g.gather_rows(fwd.hidden, f.proxy_rows);
    fwd.check_logp = g.log_softmax_rows(g.transpose(g.matmul(hp, p.check_v)));
    fwd.has_check = true;
  }
  NodeRef hq = g.gather_rows(fwd.hidden, f.query_rows);
  fwd.target_logp = g.log_softmax_rows(g.transpose(g.matmul(hq, p.target_v)));
  NodeRef a = g.tanh(g.matmul(hq, p.ans_w));
  fwd.answer_logp_rows = g.log_softmax_rows(g.matmul(a, g.transpose(p.ans_e)));
  return fwd;
}

namespace {

std::vector<double> probs_from_logp_row(const Tensor& logp, std::size_t row) {
  std::vector<double> p(logp.cols);
  for (std::size_t j = 0; j < logp.cols; ++j) p[j] = std::exp(logp.at(row, j));
  return p;
}

double tag_terms_log_prob(const Tensor& tag_logits, const std::array<bool, kTagCount>& tag_ok) {
  double lp = 0.0;
  for (int t = 0; t < kTagCount; ++t) {
    const double z = tag_logits.data[static_cast<std::size_t>(t)];
    lp += tag_ok[static_cast<std::size_t>(t)] ? stable_log_sigmoid(z) : stable_log_sigmoid(-z);
  }
  return lp;
}

struct EvalForward {
  Graph g;
  PolicyForward fwd;
  Tensor tag_logits;
};

EvalForward eval_forward(const EpisodeFeatures& f, const ParamStore& params) {
  EvalForward ef;
  const BoundParams bound = bind_params(ef.g, params);
  const PolicyNodes p = bind_policy(bound);
  Tensor desc = f.descriptors;
  desc.requires_grad = false;
  ef.fwd = policy_forward(ef.g, f, ef.g.constant(desc), p);
  ef.tag_logits = params.at("policy.tag_logits");
  return ef;
}

}  // namespace

GroupBatch sample_group(const EpisodeFeatures& f, const ParamStore& params, int group_size,
                        std::uint64_t seed) {
  if (group_size < 2) throw ContractError("sample_group: G must be >= 2");
  const AnswerVocab vocab = AnswerVocab::standard();
  EvalForward ef = eval_forward(f, params);

  GroupBatch batch;
  for (int i = 0; i < group_size; ++i) {
    Rng rng(seed, {0x7a37ULL, static_cast<std::uint64_t>(i)});
    TrajectoryChoices c;
    if (ef.fwd.has_check) {
      const std::vector<double> pc = probs_from_logp_row(ef.g.value(ef.fwd.check_logp), 0);
      c.check = rng.categorical(pc);
    }
    const std::vector<double> pt = probs_from_logp_row(ef.g.value(ef.fwd.target_logp), 0);
    c.target = rng.categorical(pt);
    const std::vector<double> pa =
        probs_from_logp_row(ef.g.value(ef.fwd.answer_logp_rows), static_cast<std::size_t>(c.target));
    c.answer = rng.categorical(pa);
    for (int t = 0; t < kTagCount; ++t)
      c.tag_ok[static_cast<std::size_t>(t)] =
          rng.bernoulli(stable_sigmoid(ef.tag_logits.data[static_cast<std::size_t>(t)]));

    Trajectory traj;
    traj.choices = c;
    traj.text = trajectory_text(f, c, vocab);
    double lp = 0.0;
    if (ef.fwd.has_check)
      lp += ef.g.value(ef.fwd.check_logp).at(0, static_cast<std::size_t>(c.check));
    lp += ef.g.value(ef.fwd.target_logp).at(0, static_cast<std::size_t>(c.target));
    lp += ef.g.value(ef.fwd.answer_logp_rows)
              .at(static_cast<std::size_t>(c.target), static_cast<std::size_t>(c.answer));
    lp += tag_terms_log_prob(ef.tag_logits, c.tag_ok);
    traj.log_prob = lp;
    batch.trajectories.push_back(std::move(traj));
  }
  return batch;
}

Trajectory greedy_trajectory(const EpisodeFeatures& f, const ParamStore& params) {
  const AnswerVocab vocab = AnswerVocab::standard();
  EvalForward ef = eval_forward(f, params);

  auto argmax_row = [](const Tensor& t, std::size_t row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < t.cols; ++j)
      if (t.at(row, j) > t.at(row, best)) best = j;
    return static_cast<int>(best);
  };

  TrajectoryChoices c;
  if (ef.fwd.has_check) c.check = argmax_row(ef.g.value(ef.fwd.check_logp), 0);
  c.target = argmax_row(ef.g.value(ef.fwd.target_logp), 0);
  c.answer = argmax_row(ef.g.value(ef.fwd.answer_logp_rows), static_cast<std::size_t>(c.target));

  Trajectory traj;
  traj.choices = c;
  traj.text = trajectory_text(f, c, vocab);
  traj.log_prob = log_prob_value(f, params, c);
  return traj;
}

NodeRef trajectory_log_prob(Graph& g, const PolicyForward& fwd, const PolicyNodes& p,
                            const EpisodeFeatures& f, const TrajectoryChoices& choices) {
  if (choices.target < 0 || static_cast<std::size_t>(choices.target) >= f.query_rows.size())
    throw ContractError("trajectory_log_prob: invalid target choice");
  NodeRef lp = g.select(fwd.target_logp, 0, static_cast<std::size_t>(choices.target));
  if (fwd.has_check) {
    if (choices.check < 0 || static_cast<std::size_t>(choices.check) >= f.proxy_rows.size())
      throw ContractError("trajectory_log_prob: invalid check choice");
    lp = g.add(lp, g.select(fwd.check_logp, 0, static_cast<std::size_t>(choices.check)));
  }
  const Tensor& arows = g.value(fwd.answer_logp_rows);
  if (choices.answer < 0 || static_cast<std::size_t>(choices.answer) >= arows.cols)
    throw ContractError("trajectory_log_prob: invalid answer choice");
  lp = g.add(lp, g.select(fwd.answer_logp_rows, static_cast<std::size_t>(choices.target),
                          static_cast<std::size_t>(choices.answer)));
  for (int t = 0; t < kTagCount; ++t) {
    NodeRef z = g.select(p.tag_logits, 0, static_cast<std::size_t>(t));
    if (!choices.tag_ok[static_cast<std::size_t>(t)]) z = g.scale(z, -1.0);
    lp = g.add(lp, g.log_sigmoid(z));
  }
  return lp;
}

double log_prob_value(const EpisodeFeatures& f, const ParamStore& params,
                      const TrajectoryChoices& choices) {
  EvalForward ef = eval_forward(f, params);
  double lp = 0.0;
  if (ef.fwd.has_check)
    lp += ef.g.value(ef.fwd.check_logp).at(0, static_cast<std::size_t>(choices.check));
  lp += ef.g.value(ef.fwd.target_logp).at(0, static_cast<std::size_t>(choices.target));
  lp += ef.g.value(ef.fwd.answer_logp_rows)
            .at(static_cast<std::size_t>(choices.target), static_cast<std::size_t>(choices.answer));
  lp += tag_terms_log_prob(ef.tag_logits, choices.tag_ok);
  return lp;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  const std::size_t n = rewards.size();
  if (n < 2) throw ContractError("group_advantages: G must be >= 2");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std_pop = std::sqrt(var / static_cast<double>(n));
  std::vector<double> a(n, 0.0);
  if (std_pop < 1e-8) return a;
  for (std::size_t i = 0; i < n; ++i) a[i] = (rewards[i] - mean) / (std_pop + 1e-6);
  return a;
}

double kl_penalty(const ParamStore& params, const ParamStore& ref_params,
                  const TrajectoryChoices& choices, const EpisodeFeatures& f) {
  const double delta = log_prob_value(f, ref_params, choices) - log_prob_value(f, params, choices);
  const double k3 = std::exp(delta) - delta - 1.0;
  return std::max(k3, 0.0);
}

std::string trajectory_text(const EpisodeFeatures& f, const TrajectoryChoices& choices,
                            const AnswerVocab& vocab) {
  StructuredResponse r;
  r.think = kThinkText;
  r.rule = "select the object matching: " + f.instruction;
  r.check = choices.check >= 0 ? f.proxy_boxes_global[static_cast<std::size_t>(choices.check)]
                               : BoxN{0.0, 0.0, 1.0, 1.0};
  r.bbox = f.query_boxes[static_cast<std::size_t>(choices.target)];
  r.answer = vocab.phrases[static_cast<std::size_t>(choices.answer)];
  std::string text = serialize_response(r);

  static const char* open_tags[kTagCount] = {"<think>", "<rule>", "<check>", "<bbox>",
                                             "<answer>"};
  static const char* close_tags[kTagCount] = {"</think>", "</rule>", "</check>", "</bbox>",
                                              "</answer>"};
  for (int t = kTagCount - 1; t >= 0; --t) {
    if (choices.tag_ok[static_cast<std::size_t>(t)]) continue;
    const std::size_t open = text.find(open_tags[t]);
    const std::size_t close = text.find(close_tags[t]);
    if (open == std::string::npos || close == std::string::npos) continue;
    text.erase(open, close + std::string(close_tags[t]).size() - open);
  }
  return text;
}

}  // namespace conceptseg
