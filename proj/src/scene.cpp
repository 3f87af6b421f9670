#include "conceptseg/scene.hpp"

#include <algorithm>
#include <cmath>

namespace conceptseg {

const char* shape_word(ObjectShape s) { return s == ObjectShape::Rect ? "rect" : "disc"; }

const std::vector<PaletteColor>& palette() {
  static const std::vector<PaletteColor> p = {
      {"red", {0.90, 0.10, 0.10}},    {"green", {0.10, 0.85, 0.10}},
      {"blue", {0.10, 0.10, 0.90}},   {"yellow", {0.95, 0.90, 0.10}},
      {"cyan", {0.10, 0.90, 0.90}},   {"magenta", {0.90, 0.10, 0.70}},
      {"orange", {0.95, 0.50, 0.05}}, {"purple", {0.45, 0.05, 0.75}},
  };
  return p;
}

double luminance(const std::array<double, 3>& rgb) {
  return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
}

bool Scene::has_class(const ObjectClass& c) const { return find_class(c) >= 0; }

int Scene::find_class(const ObjectClass& c) const {
  for (const SceneObject& o : objects)
    if (ObjectClass{o.shape, o.palette_id} == c) return o.id;
  return -1;
}

namespace {

bool separated(const BoxN& a, const BoxN& b, double gap) {
  return a.x2 + gap <= b.x1 || b.x2 + gap <= a.x1 || a.y2 + gap <= b.y1 || b.y2 + gap <= a.y1;
}

void validate_spec(const SceneSpec& spec, std::size_t n) {
  if (spec.min_objects < 2 || spec.max_objects > 8 || spec.min_objects > spec.max_objects)
    throw ContractError("SceneSpec: object count bounds must lie within [2, 8]");
  if (n < static_cast<std::size_t>(spec.min_objects) ||
      n > static_cast<std::size_t>(spec.max_objects))
    throw ContractError("SceneSpec: " + std::to_string(n) + " objects outside [" +
                        std::to_string(spec.min_objects) + ", " +
                        std::to_string(spec.max_objects) + "]");
}

}  // namespace

std::array<double, 3> random_background(Rng& rng) {
  const double base = rng.uniform(0.38, 0.62);
  return {std::clamp(base + rng.uniform(-0.04, 0.04), 0.0, 1.0),
          std::clamp(base + rng.uniform(-0.04, 0.04), 0.0, 1.0),
          std::clamp(base + rng.uniform(-0.04, 0.04), 0.0, 1.0)};
}

Scene build_scene(const SceneSpec& spec, const std::vector<ObjectBlueprint>& blueprints,
                  const std::array<double, 3>& background, Rng& rng) {
  validate_spec(spec, blueprints.size());

  Scene scene;
  scene.width = spec.width;
  scene.height = spec.height;
  scene.background = background;
  const double bg_lum = luminance(background);

  std::vector<BoxN> placed;
  for (std::size_t i = 0; i < blueprints.size(); ++i) {
    const ObjectBlueprint& bp = blueprints[i];
    BoxN box;
    if (bp.fixed_box.has_value()) {
      box = *bp.fixed_box;
      for (const BoxN& other : placed)
        if (!separated(box, other, spec.min_separation))
          throw GenerationError("build_scene: fixed box overlaps a placed object");
    } else {
      const double lo = bp.min_size > 0.0 ? bp.min_size : spec.min_box_size;
      const double hi = bp.max_size > 0.0 ? bp.max_size : spec.max_box_size;
      bool ok = false;
      for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
        const double w = rng.uniform(lo, hi);
        const double h = rng.uniform(lo, hi);
        const double x1 = rng.uniform(0.01, 0.99 - w);
        const double y1 = rng.uniform(0.01, 0.99 - h);
        box = snap4(BoxN{x1, y1, x1 + w, y1 + h});
        ok = true;
        for (const BoxN& other : placed)
          if (!separated(box, other, spec.min_separation)) ok = false;
      }
      if (!ok)
        throw GenerationError("build_scene: failed to place object " + std::to_string(i) +
                              " after 1000 attempts");
    }
    placed.push_back(box);

    SceneObject obj;
    obj.id = static_cast<int>(i);
    obj.box = box;
    obj.shape = bp.shape;
    obj.palette_id = bp.palette_id;
    obj.color = palette()[static_cast<std::size_t>(bp.palette_id)].rgb;
    if (bp.jitter > 0.0)
      for (double& c : obj.color)
        c = std::clamp(c + rng.uniform(-bp.jitter, bp.jitter), 0.0, 1.0);
    obj.contrast = std::abs(luminance(obj.color) - bg_lum);
    scene.objects.push_back(obj);
  }
  return scene;
}

Scene gen_scene(const SceneSpec& spec, std::uint64_t seed) {
  Rng rng(seed, {0x5ce11eULL});
  const int palette_size = static_cast<int>(palette().size());
  const int n = spec.n_objects;
  validate_spec(spec, static_cast<std::size_t>(n));

  std::vector<int> palette_ids;
  if (spec.palette_with_replacement) {
    for (int i = 0; i < n; ++i) palette_ids.push_back(rng.uniform_int(palette_size));
  } else {
    std::vector<int> pool(static_cast<std::size_t>(palette_size));
    for (int i = 0; i < palette_size; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < n; ++i) {
      const int j = rng.uniform_int(static_cast<int>(pool.size()));
      palette_ids.push_back(pool[static_cast<std::size_t>(j)]);
      pool.erase(pool.begin() + j);
    }
  }

  std::vector<ObjectBlueprint> bps;
  for (int i = 0; i < n; ++i) {
    ObjectBlueprint bp;
    bp.shape = rng.bernoulli(0.5) ? ObjectShape::Rect : ObjectShape::Disc;
    bp.palette_id = palette_ids[static_cast<std::size_t>(i)];
    bp.jitter = spec.color_jitter;
    bps.push_back(bp);
  }
  return build_scene(spec, bps, random_background(rng), rng);
}

namespace {

bool inside_object(const SceneObject& o, double px, double py) {
  if (px < o.box.x1 || px > o.box.x2 || py < o.box.y1 || py > o.box.y2) return false;
  if (o.shape == ObjectShape::Rect) return true;
  const double rx = o.box.width() / 2.0;
  const double ry = o.box.height() / 2.0;
  if (rx <= 0.0 || ry <= 0.0) return false;
  const double dx = (px - (o.box.x1 + rx)) / rx;
  const double dy = (py - (o.box.y1 + ry)) / ry;
  return dx * dx + dy * dy <= 1.0;
}

}  // namespace

MaskGrid object_mask(const Scene& scene, int object_id) {
  if (object_id < 0 || static_cast<std::size_t>(object_id) >= scene.objects.size())
    throw ContractError("object_mask: object " + std::to_string(object_id) + " out of range");
  const SceneObject& o = scene.objects[static_cast<std::size_t>(object_id)];
  MaskGrid m(scene.width, scene.height);
  for (int y = 0; y < scene.height; ++y) {
    const double py = (y + 0.5) / scene.height;
    for (int x = 0; x < scene.width; ++x)
      if (inside_object(o, (x + 0.5) / scene.width, py)) m.at(x, y) = 1.0;
  }
  return m;
}

Tensor scene_features(const Scene& scene) {
  const std::size_t hw = static_cast<std::size_t>(scene.width) * scene.height;
  Tensor feat(hw, 5);
  for (int y = 0; y < scene.height; ++y) {
    const double py = (y + 0.5) / scene.height;
    for (int x = 0; x < scene.width; ++x) {
      const double px = (x + 0.5) / scene.width;
      const std::array<double, 3>* color = &scene.background;
      for (const SceneObject& o : scene.objects)
        if (inside_object(o, px, py)) {
          color = &o.color;
          break;
        }
      const std::size_t row = static_cast<std::size_t>(y) * scene.width + x;
      feat.at(row, 0) = (*color)[0];
      feat.at(row, 1) = (*color)[1];
      feat.at(row, 2) = (*color)[2];
      feat.at(row, 3) = px;
      feat.at(row, 4) = py;
    }
  }
  return feat;
}

}  // namespace conceptseg
