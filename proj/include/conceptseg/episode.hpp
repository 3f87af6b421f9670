#ifndef CONCEPTSEG_EPISODE_HPP
#define CONCEPTSEG_EPISODE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "conceptseg/rewards.hpp"
#include "conceptseg/rules.hpp"
#include "conceptseg/scene.hpp"

namespace conceptseg {

struct EpisodeConfig {
  int k = 2;
  SceneSpec scene;
  double cd_jitter = 0.06;       // color jitter for the contrast families
  double contrast_gap = 0.045;   // min pairwise contrast separation
  double moved_min_shift = 0.25; // min center displacement of the moved class
};

struct SupportAnnotation {
  int tile = 0;
  int object_id = 0;
  BoxN box_global;  // snapped global-mosaic coordinates
};

// One split-reference task instance. Support tiles carry annotations, the
// proxy tile's target is withheld, the query scene is the actual task.
struct Episode {
  MosaicLayout layout;
  std::vector<Scene> tiles;
  Scene query;
  TaskRule rule;
  std::string instruction;
  std::vector<SupportAnnotation> support_annotations;
  int proxy_tile = -1;  // -1 for the 1x1 mosaic
  BoxN gt_check;        // global coords; (0,0,1,1) when degenerate
  int gt_check_object = -1;
  BoxN gt_box;  // query coords
  int gt_target_object = -1;
  std::string gt_answer;  // "<color> <shape>"
  std::uint64_t seed = 0;

  RuleContext context() const {
    return RuleContext{std::span<const Scene>(tiles.data(), tiles.size()), &query};
  }
  MaskGrid target_mask() const { return object_mask(query, gt_target_object); }
  EpisodeGroundTruth ground_truth() const;
};

Episode build_episode(const TaskRule& rule, int k, std::uint64_t seed,
                      const EpisodeConfig& cfg);

// Samples family parameters (color, largest/smallest) deterministically.
TaskRule make_rule(RuleFamily family, std::uint64_t seed);

// Instruction phrase bank; word counts span 1-8 across the bank.
std::string instruction_for(const TaskRule& rule, Rng& rng);

// Family cue detection used by the policy's instruction features; index
// order matches RuleFamily.
std::vector<double> instruction_cues(const std::string& instruction);

// Answer phrases over (color, shape); the policy's categorical answer space.
struct AnswerVocab {
  std::vector<std::string> phrases;

  int id_of(int palette_id, ObjectShape shape) const;
  int size() const { return static_cast<int>(phrases.size()); }
  static AnswerVocab standard();
};

// Exhaustive enumeration of the episode's rule family; counts the rules
// consistent with every support annotation.
int consistent_rule_count(const Episode& e);

}  // namespace conceptseg

#endif
