#ifndef CONCEPTSEG_POLICY_HPP
#define CONCEPTSEG_POLICY_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "conceptseg/ctm.hpp"
#include "conceptseg/episode.hpp"
#include "conceptseg/params.hpp"

namespace conceptseg {

constexpr int kTagCount = 5;  // think, rule, check, bbox, answer

// Per-object descriptor width: shape(2) + rgb(3) + contrast + geometry(5) +
// roles(3) + annotated + relational(7) + instruction match(2) + bias +
// instruction cues(8).
constexpr int kDescriptorDim = 33;

struct PolicyConfig {
  int c = 16;  // hidden width, shared with the CTM channel dimension
};

// policy.enc_w/enc_b: the episode encoder; policy.check_v / policy.target_v:
// candidate scoring heads; policy.ans_w / policy.ans_e: the answer head;
// policy.tag_logits: one Bernoulli logit per template tag.
void init_policy_params(ParamStore& store, const PolicyConfig& cfg, const AnswerVocab& vocab,
                        Rng& rng);

// Episode flattened for the policy: one descriptor row per object across all
// mosaic tiles and the query scene.
struct EpisodeFeatures {
  Tensor descriptors;  // L1 x kDescriptorDim
  std::vector<int> proxy_rows;
  std::vector<int> query_rows;
  std::vector<BoxN> proxy_boxes_global;  // aligned with proxy_rows, snapped
  std::vector<BoxN> query_boxes;         // aligned with query_rows
  int gt_check_choice = -1;              // index into proxy_rows, -1 when degenerate
  int gt_target_choice = -1;             // index into query_rows
  int gt_answer_id = -1;
  std::string instruction;
};

EpisodeFeatures featurize(const Episode& e, const AnswerVocab& vocab);

struct TrajectoryChoices {
  int check = -1;  // index into proxy_rows; -1 on the 1x1 mosaic
  int target = -1;
  int answer = -1;
  std::array<bool, kTagCount> tag_ok{true, true, true, true, true};
};

struct Trajectory {
  TrajectoryChoices choices;
  std::string text;
  double log_prob = 0.0;
  RewardBreakdown breakdown;
};

struct GroupBatch {
  std::vector<Trajectory> trajectories;
  std::vector<double> advantages;
};

struct PolicyNodes {
  NodeRef enc_w, enc_b, check_v, target_v, ans_w, ans_e, tag_logits;
};
PolicyNodes bind_policy(const BoundParams& bound);

// H = tanh(descriptors * enc_w + enc_b): the hidden states consumed by both
// the choice heads and the CTM.
NodeRef policy_hidden(Graph& g, NodeRef descriptors, const PolicyNodes& p);

// Forward pass pieces shared by sampling, log-prob and greedy decoding.
struct PolicyForward {
  NodeRef hidden;             // L1 x C
  NodeRef check_logp;         // 1 x n_proxy (invalid when no proxy)
  NodeRef target_logp;        // 1 x n_query
  NodeRef answer_logp_rows;   // n_query x V, row j = answer dist given target j
  bool has_check = false;
};
PolicyForward policy_forward(Graph& g, const EpisodeFeatures& f, NodeRef descriptors,
                             const PolicyNodes& p);

// G independent trajectories; deterministic given (params, episode, seed).
GroupBatch sample_group(const EpisodeFeatures& f, const ParamStore& params, int group_size,
                        std::uint64_t seed);

// Greedy (argmax) trajectory used at evaluation time.
Trajectory greedy_trajectory(const EpisodeFeatures& f, const ParamStore& params);

// Differentiable log-probability of the recorded choices.
NodeRef trajectory_log_prob(Graph& g, const PolicyForward& fwd, const PolicyNodes& p,
                            const EpisodeFeatures& f, const TrajectoryChoices& choices);

// Plain value of the log-probability under the given parameters.
double log_prob_value(const EpisodeFeatures& f, const ParamStore& params,
                      const TrajectoryChoices& choices);

// a_i = (r_i - mean) / (population std + 1e-6); all zeros when the group is
// degenerate.
std::vector<double> group_advantages(const std::vector<double>& rewards);

// k3 estimator exp(d) - d - 1 with d = log pi_ref - log pi_theta.
double kl_penalty(const ParamStore& params, const ParamStore& ref_params,
                  const TrajectoryChoices& choices, const EpisodeFeatures& f);

// Serializes the choices into template text; failed tag draws excise the
// corresponding tag section.
std::string trajectory_text(const EpisodeFeatures& f, const TrajectoryChoices& choices,
                            const AnswerVocab& vocab);

}  // namespace conceptseg

#endif
