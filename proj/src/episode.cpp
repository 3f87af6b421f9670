#include "conceptseg/episode.hpp"

#include <algorithm>
#include <cmath>

namespace conceptseg {

namespace {

constexpr int kMaxSceneRetries = 200;

int palette_size() { return static_cast<int>(palette().size()); }

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
}

std::vector<int> distinct_palettes(int n, Rng& rng, int forced_first = -1) {
  std::vector<int> pool;
  for (int i = 0; i < palette_size(); ++i)
    if (i != forced_first) pool.push_back(i);
  shuffle(pool, rng);
  std::vector<int> out;
  if (forced_first >= 0) out.push_back(forced_first);
  for (int i = 0; static_cast<int>(out.size()) < n; ++i) out.push_back(pool[static_cast<std::size_t>(i)]);
  return out;
}

ObjectShape rand_shape(Rng& rng) {
  return rng.bernoulli(0.5) ? ObjectShape::Rect : ObjectShape::Disc;
}

std::vector<ObjectClass> all_classes() {
  std::vector<ObjectClass> v;
  for (int p = 0; p < palette_size(); ++p) {
    v.push_back(ObjectClass{ObjectShape::Rect, p});
    v.push_back(ObjectClass{ObjectShape::Disc, p});
  }
  return v;
}

bool contrasts_separated(const Scene& s, double gap) {
  for (std::size_t i = 0; i < s.objects.size(); ++i)
    for (std::size_t j = i + 1; j < s.objects.size(); ++j)
      if (std::abs(s.objects[i].contrast - s.objects[j].contrast) < gap) return false;
  return true;
}

Scene build_contrast_scene(const EpisodeConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < kMaxSceneRetries; ++attempt) {
    std::vector<ObjectBlueprint> bps;
    for (int i = 0; i < cfg.scene.n_objects; ++i) {
      ObjectBlueprint bp;
      bp.shape = rand_shape(rng);
      bp.palette_id = rng.uniform_int(palette_size());
      bp.jitter = cfg.cd_jitter;
      bps.push_back(bp);
    }
    Scene s = build_scene(cfg.scene, bps, random_background(rng), rng);
    if (contrasts_separated(s, cfg.contrast_gap)) return s;
  }
  throw GenerationError("build_episode: could not separate contrasts");
}

Scene build_class_scene(const EpisodeConfig& cfg, const std::vector<ObjectClass>& classes,
                        Rng& rng) {
  std::vector<ObjectBlueprint> bps;
  for (const ObjectClass& c : classes) {
    ObjectBlueprint bp;
    bp.shape = c.shape;
    bp.palette_id = c.palette_id;
    bps.push_back(bp);
  }
  return build_scene(cfg.scene, bps, random_background(rng), rng);
}

// Distinct-size ladder for the area rules: geometric spacing keeps every
// pairwise area ratio bounded away from 1.
Scene build_area_scene(const EpisodeConfig& cfg, Rng& rng) {
  const int n = cfg.scene.n_objects;
  const double lo = cfg.scene.min_box_size;
  const double hi = cfg.scene.max_box_size;
  const double ratio = n > 1 ? std::pow(hi / lo, 1.0 / (n - 1)) : 1.0;
  std::vector<int> palettes = distinct_palettes(n, rng);
  std::vector<ObjectBlueprint> bps;
  for (int i = 0; i < n; ++i) {
    ObjectBlueprint bp;
    bp.shape = rand_shape(rng);
    bp.palette_id = palettes[static_cast<std::size_t>(i)];
    const double size = lo * std::pow(ratio, static_cast<double>(i));
    bp.min_size = size * 0.98;
    bp.max_size = size * 1.02;
    bps.push_back(bp);
  }
  shuffle(bps, rng);
  return build_scene(cfg.scene, bps, random_background(rng), rng);
}

}  // namespace

EpisodeGroundTruth Episode::ground_truth() const {
  EpisodeGroundTruth gt;
  gt.gt_check = gt_check;
  gt.gt_box = gt_box;
  gt.gt_mask = target_mask();
  gt.check_degenerate = proxy_tile < 0;
  return gt;
}

TaskRule make_rule(RuleFamily family, std::uint64_t seed) {
  Rng rng(seed, {0x521eULL, static_cast<std::uint64_t>(family)});
  TaskRule r;
  r.family = family;
  if (family == RuleFamily::CiAttribute) r.attr_palette = rng.uniform_int(palette_size());
  if (family == RuleFamily::CrLogical) r.logical_largest = rng.bernoulli(0.5);
  return r;
}

std::string instruction_for(const TaskRule& rule, Rng& rng) {
  switch (rule.family) {
    case RuleFamily::CiAttribute: {
      const std::string color = palette()[static_cast<std::size_t>(rule.attr_palette)].name;
      switch (rng.uniform_int(3)) {
        case 0: return color;
        case 1: return color + " object";
        default: return "the " + color + " object";
      }
    }
    case RuleFamily::CdSaliency:
      return "the object that stands out most";
    case RuleFamily::CdCamouflage:
      return "the object hidden against the background";
    case RuleFamily::CdAnomaly:
      return rng.bernoulli(0.5) ? "the odd one out"
                                : "the object that breaks the repeated pattern";
    case RuleFamily::CrConsistency:
      return "the object class present in every tile";
    case RuleFamily::CrDifference:
      return "the object missing from all reference tiles";
    case RuleFamily::CrLogical:
      return rule.logical_largest ? "the largest object of them all"
                                  : "the smallest object of them all";
    case RuleFamily::CrMoved:
      return "the object that moved between the two frames";
  }
  throw ContractError("instruction_for: unknown family");
}

std::vector<double> instruction_cues(const std::string& instruction) {
  auto has = [&](const char* w) { return instruction.find(w) != std::string::npos; };
  std::vector<double> cues(static_cast<std::size_t>(kRuleFamilyCount), 0.0);
  // CiAttribute announces itself through the color word, not a cue slot.
  cues[1] = has("stands") || has("salient") ? 1.0 : 0.0;
  cues[2] = has("hidden") || has("camouflaged") ? 1.0 : 0.0;
  cues[3] = has("odd") || has("breaks") ? 1.0 : 0.0;
  cues[4] = has("every") ? 1.0 : 0.0;
  cues[5] = has("missing") ? 1.0 : 0.0;
  cues[6] = has("largest") ? 1.0 : has("smallest") ? -1.0 : 0.0;
  cues[7] = has("moved") ? 1.0 : 0.0;
  return cues;
}

int AnswerVocab::id_of(int palette_id, ObjectShape shape) const {
  return palette_id * 2 + (shape == ObjectShape::Disc ? 1 : 0);
}

AnswerVocab AnswerVocab::standard() {
  AnswerVocab v;
  for (const PaletteColor& c : palette()) {
    v.phrases.push_back(std::string(c.name) + " rect");
    v.phrases.push_back(std::string(c.name) + " disc");
  }
  return v;
}

namespace {

struct EpisodeScenes {
  std::vector<Scene> tiles;
  Scene query;
};

EpisodeScenes build_scenes(const TaskRule& rule, int k, const EpisodeConfig& cfg, Rng& rng) {
  const int n_tiles = k * k;
  const int n_scenes = n_tiles + 1;  // query last
  const int n_obj = cfg.scene.n_objects;
  EpisodeScenes out;

  switch (rule.family) {
    case RuleFamily::CiAttribute: {
      for (int s = 0; s < n_scenes; ++s) {
        std::vector<int> palettes = distinct_palettes(n_obj, rng, rule.attr_palette);
        std::vector<ObjectClass> classes;
        for (int p : palettes) classes.push_back(ObjectClass{rand_shape(rng), p});
        shuffle(classes, rng);
        Scene scene = build_class_scene(cfg, classes, rng);
        if (s < n_tiles)
          out.tiles.push_back(std::move(scene));
        else
          out.query = std::move(scene);
      }
      return out;
    }
    case RuleFamily::CdSaliency:
    case RuleFamily::CdCamouflage: {
      for (int s = 0; s < n_scenes; ++s) {
        Scene scene = build_contrast_scene(cfg, rng);
        if (s < n_tiles)
          out.tiles.push_back(std::move(scene));
        else
          out.query = std::move(scene);
      }
      return out;
    }
    case RuleFamily::CdAnomaly: {
      for (int s = 0; s < n_scenes; ++s) {
        const ObjectClass base{rand_shape(rng), rng.uniform_int(palette_size())};
        ObjectClass odd = base;
        while (odd == base) odd = ObjectClass{rand_shape(rng), rng.uniform_int(palette_size())};
        std::vector<ObjectClass> classes(static_cast<std::size_t>(n_obj - 1), base);
        classes.push_back(odd);
        shuffle(classes, rng);
        Scene scene = build_class_scene(cfg, classes, rng);
        if (s < n_tiles)
          out.tiles.push_back(std::move(scene));
        else
          out.query = std::move(scene);
      }
      return out;
    }
    case RuleFamily::CrConsistency: {
      for (int attempt = 0; attempt < kMaxSceneRetries; ++attempt) {
        std::vector<ObjectClass> pool = all_classes();
        shuffle(pool, rng);
        const ObjectClass shared = pool.back();
        pool.pop_back();
        EpisodeScenes candidate;
        for (int s = 0; s < n_scenes; ++s) {
          std::vector<ObjectClass> classes{shared};
          shuffle(pool, rng);
          for (int i = 0; i < n_obj - 1; ++i) classes.push_back(pool[static_cast<std::size_t>(i)]);
          shuffle(classes, rng);
          Scene scene = build_class_scene(cfg, classes, rng);
          if (s < n_tiles)
            candidate.tiles.push_back(std::move(scene));
          else
            candidate.query = std::move(scene);
        }
        // The shared class must be the only one present in every tile.
        int common = 0;
        for (const ObjectClass& c : all_classes()) {
          bool everywhere = true;
          for (const Scene& t : candidate.tiles)
            if (!t.has_class(c)) everywhere = false;
          if (everywhere && candidate.query.has_class(c)) ++common;
        }
        if (common == 1) return candidate;
      }
      throw GenerationError("build_episode: consistency construction failed");
    }
    case RuleFamily::CrDifference: {
      std::vector<ObjectClass> pool = all_classes();
      shuffle(pool, rng);
      if (static_cast<int>(pool.size()) < (n_obj - 1) + n_scenes)
        throw GenerationError("build_episode: class pool too small for difference");
      std::vector<ObjectClass> common(pool.begin(), pool.begin() + (n_obj - 1));
      for (int s = 0; s < n_scenes; ++s) {
        std::vector<ObjectClass> classes = common;
        classes.push_back(pool[static_cast<std::size_t>(n_obj - 1 + s)]);
        shuffle(classes, rng);
        Scene scene = build_class_scene(cfg, classes, rng);
        if (s < n_tiles)
          out.tiles.push_back(std::move(scene));
        else
          out.query = std::move(scene);
      }
      return out;
    }
    case RuleFamily::CrLogical: {
      for (int s = 0; s < n_scenes; ++s) {
        Scene scene = build_area_scene(cfg, rng);
        if (s < n_tiles)
          out.tiles.push_back(std::move(scene));
        else
          out.query = std::move(scene);
      }
      return out;
    }
    case RuleFamily::CrMoved: {
      if (k < 2) throw ContractError("build_episode: CR_moved needs a k >= 2 mosaic");
      std::vector<int> palettes = distinct_palettes(n_obj, rng);
      std::vector<ObjectClass> classes;
      for (int p : palettes) classes.push_back(ObjectClass{rand_shape(rng), p});
      const ObjectClass moved = classes[static_cast<std::size_t>(rng.uniform_int(n_obj))];

      for (int attempt = 0; attempt < kMaxSceneRetries; ++attempt) {
        EpisodeScenes candidate;
        std::vector<ObjectClass> order_a = classes;
        shuffle(order_a, rng);
        Scene tile_a = build_class_scene(cfg, order_a, rng);

        // Same boxes as the first designated tile except the moved class.
        std::vector<ObjectBlueprint> bps;
        for (const SceneObject& o : tile_a.objects) {
          ObjectBlueprint bp;
          bp.shape = o.shape;
          bp.palette_id = o.palette_id;
          if (!(ObjectClass{o.shape, o.palette_id} == moved)) bp.fixed_box = o.box;
          const double sz = std::max(o.box.width(), o.box.height());
          bp.min_size = sz * 0.98;
          bp.max_size = sz * 1.02;
          bps.push_back(bp);
        }
        Scene tile_b;
        try {
          tile_b = build_scene(cfg.scene, bps, tile_a.background, rng);
        } catch (const GenerationError&) {
          continue;
        }
        const int ia = tile_a.find_class(moved);
        const int ib = tile_b.find_class(moved);
        const BoxN& ba = tile_a.objects[static_cast<std::size_t>(ia)].box;
        const BoxN& bb = tile_b.objects[static_cast<std::size_t>(ib)].box;
        const double dx = ((ba.x1 + ba.x2) - (bb.x1 + bb.x2)) / 2.0;
        const double dy = ((ba.y1 + ba.y2) - (bb.y1 + bb.y2)) / 2.0;
        if (std::sqrt(dx * dx + dy * dy) < cfg.moved_min_shift) continue;

        candidate.tiles.push_back(std::move(tile_a));
        candidate.tiles.push_back(std::move(tile_b));
        for (int s = 2; s < n_tiles; ++s) {
          std::vector<ObjectClass> order = classes;
          shuffle(order, rng);
          candidate.tiles.push_back(build_class_scene(cfg, order, rng));
        }
        std::vector<ObjectClass> order_q = classes;
        shuffle(order_q, rng);
        candidate.query = build_class_scene(cfg, order_q, rng);
        return candidate;
      }
      throw GenerationError("build_episode: moved construction failed");
    }
  }
  throw ContractError("build_episode: unknown family");
}

}  // namespace

Episode build_episode(const TaskRule& rule, int k, std::uint64_t seed,
                      const EpisodeConfig& cfg) {
  if (k < 1 || k > 3) throw ContractError("build_episode: k must lie in {1, 2, 3}");
  Rng rng(seed, {0xe9150deULL, static_cast<std::uint64_t>(rule.family),
                 static_cast<std::uint64_t>(k)});

  Episode e;
  e.rule = rule;
  e.seed = seed;
  const int n_tiles = k * k;
  e.proxy_tile = k >= 2 ? rng.uniform_int(n_tiles) : -1;
  e.layout = make_mosaic(k, e.proxy_tile);

  EpisodeScenes scenes = build_scenes(rule, k, cfg, rng);
  e.tiles = std::move(scenes.tiles);
  e.query = std::move(scenes.query);

  const RuleContext ctx = e.context();
  for (int t = 0; t < n_tiles; ++t) {
    if (t == e.proxy_tile) continue;
    const int oid = rule_oracle(rule, ctx, t);
    const BoxN local = e.tiles[static_cast<std::size_t>(t)].objects[static_cast<std::size_t>(oid)].box;
    e.support_annotations.push_back(SupportAnnotation{t, oid, snap4(to_global(e.layout, t, local))});
  }
  if (e.proxy_tile >= 0) {
    e.gt_check_object = rule_oracle(rule, ctx, e.proxy_tile);
    const BoxN local =
        e.tiles[static_cast<std::size_t>(e.proxy_tile)].objects[static_cast<std::size_t>(e.gt_check_object)].box;
    e.gt_check = snap4(to_global(e.layout, e.proxy_tile, local));
  } else {
    e.gt_check = BoxN{0.0, 0.0, 1.0, 1.0};
  }

  e.gt_target_object = rule_oracle(rule, ctx, -1);
  const SceneObject& target = e.query.objects[static_cast<std::size_t>(e.gt_target_object)];
  e.gt_box = target.box;
  e.gt_answer = std::string(palette()[static_cast<std::size_t>(target.palette_id)].name) + " " +
                shape_word(target.shape);
  e.instruction = instruction_for(rule, rng);

  if (consistent_rule_count(e) != 1)
    throw ContractError("build_episode: episode admits more than one rule");
  return e;
}

int consistent_rule_count(const Episode& e) {
  const RuleContext ctx = e.context();

  auto consistent = [&](const TaskRule& candidate) {
    for (const SupportAnnotation& ann : e.support_annotations) {
      int got;
      try {
        got = rule_oracle(candidate, ctx, ann.tile);
      } catch (const ContractError&) {
        return false;
      }
      if (got != ann.object_id) return false;
    }
    return true;
  };

  switch (e.rule.family) {
    case RuleFamily::CiAttribute: {
      int count = 0;
      for (int p = 0; p < palette_size(); ++p) {
        TaskRule r = e.rule;
        r.attr_palette = p;
        // A color absent from some scene cannot be the rule.
        bool admissible = e.query.find_class(ObjectClass{ObjectShape::Rect, p}) >= 0 ||
                          e.query.find_class(ObjectClass{ObjectShape::Disc, p}) >= 0;
        for (const Scene& t : e.tiles) {
          bool present = false;
          for (const SceneObject& o : t.objects)
            if (o.palette_id == p) present = true;
          if (!present) admissible = false;
        }
        if (admissible && consistent(r)) ++count;
      }
      return count;
    }
    case RuleFamily::CrLogical: {
      int count = 0;
      for (bool largest : {true, false}) {
        TaskRule r = e.rule;
        r.logical_largest = largest;
        if (consistent(r)) ++count;
      }
      return count;
    }
    case RuleFamily::CrConsistency: {
      // Candidate rules are "pick the instance of class c"; consistency with
      // the annotations singles out the shared class.
      int count = 0;
      for (const ObjectClass& c : all_classes()) {
        bool ok = !e.support_annotations.empty();
        for (const SupportAnnotation& ann : e.support_annotations) {
          const Scene& t = e.tiles[static_cast<std::size_t>(ann.tile)];
          ok = ok && t.find_class(c) == ann.object_id;
        }
        if (ok) ++count;
      }
      return count;
    }
    case RuleFamily::CrMoved: {
      int count = 0;
      for (const ObjectClass& c : all_classes()) {
        bool ok = !e.support_annotations.empty();
        for (const SupportAnnotation& ann : e.support_annotations) {
          const Scene& t = e.tiles[static_cast<std::size_t>(ann.tile)];
          ok = ok && t.find_class(c) == ann.object_id;
        }
        if (ok) ++count;
      }
      return count;
    }
    case RuleFamily::CdSaliency:
    case RuleFamily::CdCamouflage:
    case RuleFamily::CdAnomaly:
    case RuleFamily::CrDifference:
      // Singleton families.
      return consistent(e.rule) ? 1 : 0;
  }
  return 0;
}

}  // namespace conceptseg
