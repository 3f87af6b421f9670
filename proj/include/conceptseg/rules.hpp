#ifndef CONCEPTSEG_RULES_HPP
#define CONCEPTSEG_RULES_HPP

#include <optional>
#include <span>
#include <string>

#include "conceptseg/scene.hpp"

namespace conceptseg {

// The three-level taxonomy realized as synthetic rule families.
enum class RuleFamily {
  CiAttribute,    // identity from a named color
  CdSaliency,     // maximum contrast against the background
  CdCamouflage,   // minimum contrast
  CdAnomaly,      // the object breaking the repeated (shape, color) pattern
  CrConsistency,  // the class present in every reference tile
  CrDifference,   // the object whose class appears nowhere else
  CrLogical,      // largest / smallest area
  CrMoved,        // the class displaced between two designated tiles
};

constexpr int kRuleFamilyCount = 8;

const char* family_name(RuleFamily f);
std::optional<RuleFamily> family_from_name(const std::string& name);

struct TaskRule {
  RuleFamily family = RuleFamily::CdSaliency;
  int attr_palette = -1;        // CiAttribute
  bool logical_largest = true;  // CrLogical
  int moved_tile_a = 0;         // CrMoved designated pair
  int moved_tile_b = 1;
};

// Scenes the oracle may be asked about. scene_index in [0, tiles) addresses a
// reference tile, -1 addresses the query.
struct RuleContext {
  std::span<const Scene> reference_tiles;
  const Scene* query = nullptr;
};

// Total, deterministic target resolution; ties break to the lowest object id.
// Throws ContractError when the rule does not admit the context.
int rule_oracle(const TaskRule& rule, const RuleContext& ctx, int scene_index);

// The class displaced between the designated tiles (CrMoved); exposed for
// featurization. Returns nullopt when no unique displaced class exists.
std::optional<ObjectClass> moved_class(const RuleContext& ctx, int tile_a, int tile_b);

}  // namespace conceptseg

#endif
