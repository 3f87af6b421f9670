#ifndef CONCEPTSEG_EVAL_HPP
#define CONCEPTSEG_EVAL_HPP

#include <string>
#include <vector>

#include "conceptseg/metrics.hpp"
#include "conceptseg/router.hpp"
#include "conceptseg/trainer.hpp"

namespace conceptseg {

enum class RouterMode { Direct, Reason, Adaptive };

RouterMode router_mode_from_name(const std::string& name);
const char* router_mode_name(RouterMode m);

struct FamilyReport {
  RuleFamily family = RuleFamily::CdSaliency;
  long n = 0;
  DatasetMetrics metrics;
  double routing_rate = 0.0;  // fraction of samples taking the direct path
  double target_accuracy = 0.0;
  double check_accuracy = 0.0;
};

struct EvalReport {
  std::vector<FamilyReport> families;
  DatasetMetrics overall;
  long n = 0;
  double routing_rate = 0.0;
  double target_accuracy = 0.0;
};

// Per-episode record; exposed so the harnesses can shard and merge.
struct EpisodeEval {
  RuleFamily family = RuleFamily::CdSaliency;
  SampleMetrics metrics;
  double intersection = 0.0;
  double union_ = 0.0;
  bool routed_direct = false;
  bool target_correct = false;
  bool check_correct = false;
  double presence = 0.0;
};

EpisodeEval eval_episode(const ParamStore& params, const PreparedEpisode& ep, RouterMode mode,
                         const TrainConfig& cfg);

// Parallel map over the episodes, accumulators folded in episode order.
EvalReport evaluate(const ParamStore& params, std::span<const PreparedEpisode> episodes,
                    RouterMode mode, const TrainConfig& cfg);

}  // namespace conceptseg

#endif
