#ifndef CONCEPTSEG_SCENE_HPP
#define CONCEPTSEG_SCENE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conceptseg/geometry.hpp"
#include "conceptseg/rng.hpp"
#include "conceptseg/tensor.hpp"

namespace conceptseg {

enum class ObjectShape { Rect, Disc };

const char* shape_word(ObjectShape s);

// Named color palette. Luminances are spread out so contrast-based rules
// stay separable.
struct PaletteColor {
  const char* name;
  std::array<double, 3> rgb;
};
const std::vector<PaletteColor>& palette();
double luminance(const std::array<double, 3>& rgb);

struct SceneObject {
  int id = 0;
  BoxN box;  // snapped to the 4-decimal grid
  ObjectShape shape = ObjectShape::Rect;
  std::array<double, 3> color{};
  double contrast = 0.0;  // |luminance(color) - luminance(background)|
  int palette_id = 0;
};

// (shape, palette) pair; the class identity used by the rule families.
struct ObjectClass {
  ObjectShape shape = ObjectShape::Rect;
  int palette_id = 0;
  bool operator==(const ObjectClass&) const = default;
};

struct Scene {
  int width = 64;
  int height = 64;
  std::array<double, 3> background{};
  std::vector<SceneObject> objects;

  ObjectClass class_of(int object_id) const {
    const SceneObject& o = objects[static_cast<std::size_t>(object_id)];
    return ObjectClass{o.shape, o.palette_id};
  }
  bool has_class(const ObjectClass& c) const;
  // Lowest-id instance of the class, or -1.
  int find_class(const ObjectClass& c) const;
};

struct SceneSpec {
  int width = 64;
  int height = 64;
  int min_objects = 2;
  int max_objects = 8;
  int n_objects = 4;
  double min_separation = 0.02;
  double min_box_size = 0.14;
  double max_box_size = 0.32;
  double color_jitter = 0.0;
  bool palette_with_replacement = false;
};

// One object request for the scene builder.
struct ObjectBlueprint {
  ObjectShape shape = ObjectShape::Rect;
  int palette_id = 0;
  double jitter = 0.0;
  double min_size = 0.0;  // 0 means use the spec bounds
  double max_size = 0.0;
  std::optional<BoxN> fixed_box;
};

// Places the blueprinted objects with rejection sampling; throws
// GenerationError after 1000 failed placement attempts.
Scene build_scene(const SceneSpec& spec, const std::vector<ObjectBlueprint>& blueprints,
                  const std::array<double, 3>& background, Rng& rng);

std::array<double, 3> random_background(Rng& rng);

// Deterministic generic scene: random shapes and palette entries per the
// spec's flags.
Scene gen_scene(const SceneSpec& spec, std::uint64_t seed);

// Pixel-membership mask of one object (rect fills its box, disc fills the
// inscribed ellipse), evaluated at pixel centers.
MaskGrid object_mask(const Scene& scene, int object_id);

// HW x 5 feature tensor: rendered rgb plus normalized pixel coordinates.
Tensor scene_features(const Scene& scene);

}  // namespace conceptseg

#endif
