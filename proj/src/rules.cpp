#include "conceptseg/rules.hpp"

#include <cmath>
#include <vector>

namespace conceptseg {

const char* family_name(RuleFamily f) {
  switch (f) {
    case RuleFamily::CiAttribute: return "CI_attribute";
    case RuleFamily::CdSaliency: return "CD_saliency";
    case RuleFamily::CdCamouflage: return "CD_camouflage";
    case RuleFamily::CdAnomaly: return "CD_anomaly";
    case RuleFamily::CrConsistency: return "CR_consistency";
    case RuleFamily::CrDifference: return "CR_difference";
    case RuleFamily::CrLogical: return "CR_logical";
    case RuleFamily::CrMoved: return "CR_moved";
  }
  return "?";
}

std::optional<RuleFamily> family_from_name(const std::string& name) {
  for (int i = 0; i < kRuleFamilyCount; ++i) {
    const RuleFamily f = static_cast<RuleFamily>(i);
    if (name == family_name(f)) return f;
  }
  return std::nullopt;
}

namespace {

const Scene& scene_at(const RuleContext& ctx, int scene_index) {
  if (scene_index == -1) {
    if (!ctx.query) throw ContractError("rule_oracle: context has no query scene");
    return *ctx.query;
  }
  if (scene_index < 0 || static_cast<std::size_t>(scene_index) >= ctx.reference_tiles.size())
    throw ContractError("rule_oracle: scene index " + std::to_string(scene_index) +
                        " out of range");
  return ctx.reference_tiles[static_cast<std::size_t>(scene_index)];
}

int argmax_contrast(const Scene& s, bool largest) {
  int best = 0;
  for (std::size_t i = 1; i < s.objects.size(); ++i) {
    const double v = s.objects[i].contrast;
    const double b = s.objects[static_cast<std::size_t>(best)].contrast;
    if (largest ? v > b : v < b) best = static_cast<int>(i);
  }
  return best;
}

int argmax_area(const Scene& s, bool largest) {
  int best = 0;
  for (std::size_t i = 1; i < s.objects.size(); ++i) {
    const double v = s.objects[i].box.area();
    const double b = s.objects[static_cast<std::size_t>(best)].box.area();
    if (largest ? v > b : v < b) best = static_cast<int>(i);
  }
  return best;
}

std::vector<ObjectClass> scene_classes(const Scene& s) {
  std::vector<ObjectClass> classes;
  for (const SceneObject& o : s.objects) classes.push_back(ObjectClass{o.shape, o.palette_id});
  return classes;
}

int class_count(const Scene& s, const ObjectClass& c) {
  int n = 0;
  for (const SceneObject& o : s.objects)
    if (ObjectClass{o.shape, o.palette_id} == c) ++n;
  return n;
}

// All scenes of the episode in a fixed order: reference tiles then query.
std::vector<const Scene*> all_scenes(const RuleContext& ctx) {
  std::vector<const Scene*> scenes;
  for (const Scene& s : ctx.reference_tiles) scenes.push_back(&s);
  if (ctx.query) scenes.push_back(ctx.query);
  return scenes;
}

}  // namespace

std::optional<ObjectClass> moved_class(const RuleContext& ctx, int tile_a, int tile_b) {
  if (tile_a < 0 || tile_b < 0 ||
      static_cast<std::size_t>(tile_a) >= ctx.reference_tiles.size() ||
      static_cast<std::size_t>(tile_b) >= ctx.reference_tiles.size())
    return std::nullopt;
  const Scene& a = ctx.reference_tiles[static_cast<std::size_t>(tile_a)];
  const Scene& b = ctx.reference_tiles[static_cast<std::size_t>(tile_b)];
  std::optional<ObjectClass> moved;
  for (const SceneObject& oa : a.objects) {
    const ObjectClass c{oa.shape, oa.palette_id};
    if (class_count(a, c) != 1 || class_count(b, c) != 1) return std::nullopt;
    const SceneObject& ob = b.objects[static_cast<std::size_t>(b.find_class(c))];
    const double dx = (oa.box.x1 + oa.box.x2) - (ob.box.x1 + ob.box.x2);
    const double dy = (oa.box.y1 + oa.box.y2) - (ob.box.y1 + ob.box.y2);
    if (std::sqrt(dx * dx + dy * dy) / 2.0 > 1e-9) {
      if (moved.has_value()) return std::nullopt;  // more than one class moved
      moved = c;
    }
  }
  return moved;
}

int rule_oracle(const TaskRule& rule, const RuleContext& ctx, int scene_index) {
  const Scene& s = scene_at(ctx, scene_index);
  if (s.objects.empty()) throw ContractError("rule_oracle: scene has no objects");

  switch (rule.family) {
    case RuleFamily::CiAttribute: {
      for (const SceneObject& o : s.objects)
        if (o.palette_id == rule.attr_palette) return o.id;
      throw ContractError("rule_oracle: scene lacks the named color");
    }
    case RuleFamily::CdSaliency:
      return argmax_contrast(s, true);
    case RuleFamily::CdCamouflage:
      return argmax_contrast(s, false);
    case RuleFamily::CdAnomaly: {
      bool has_repeat = false;
      for (const SceneObject& o : s.objects)
        if (class_count(s, ObjectClass{o.shape, o.palette_id}) >= 2) has_repeat = true;
      if (!has_repeat) throw ContractError("rule_oracle: no repeated pattern to break");
      for (const SceneObject& o : s.objects)
        if (class_count(s, ObjectClass{o.shape, o.palette_id}) == 1) return o.id;
      throw ContractError("rule_oracle: no pattern-breaking object");
    }
    case RuleFamily::CrConsistency: {
      if (ctx.reference_tiles.size() < 2)
        throw ContractError("rule_oracle: consistency needs at least 2 reference tiles");
      std::optional<ObjectClass> shared;
      for (const ObjectClass& c : scene_classes(ctx.reference_tiles[0])) {
        bool everywhere = true;
        for (const Scene& tile : ctx.reference_tiles)
          if (!tile.has_class(c)) everywhere = false;
        if (everywhere) {
          if (shared.has_value() && !(*shared == c))
            throw ContractError("rule_oracle: ambiguous shared class");
          shared = c;
        }
      }
      if (!shared.has_value()) throw ContractError("rule_oracle: no shared class");
      const int id = s.find_class(*shared);
      if (id < 0) throw ContractError("rule_oracle: scene lacks the shared class");
      return id;
    }
    case RuleFamily::CrDifference: {
      const std::vector<const Scene*> scenes = all_scenes(ctx);
      if (scenes.size() < 2)
        throw ContractError("rule_oracle: difference needs at least 2 scenes");
      for (const SceneObject& o : s.objects) {
        const ObjectClass c{o.shape, o.palette_id};
        bool elsewhere = false;
        for (const Scene* other : scenes)
          if (other != &s && other->has_class(c)) elsewhere = true;
        if (!elsewhere) return o.id;
      }
      throw ContractError("rule_oracle: every class appears elsewhere");
    }
    case RuleFamily::CrLogical:
      return argmax_area(s, rule.logical_largest);
    case RuleFamily::CrMoved: {
      const std::optional<ObjectClass> m = moved_class(ctx, rule.moved_tile_a, rule.moved_tile_b);
      if (!m.has_value())
        throw ContractError("rule_oracle: no unique displaced class between designated tiles");
      const int id = s.find_class(*m);
      if (id < 0) throw ContractError("rule_oracle: scene lacks the displaced class");
      return id;
    }
  }
  throw ContractError("rule_oracle: unknown family");
}

}  // namespace conceptseg
