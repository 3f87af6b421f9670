#include "conceptseg/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

namespace conceptseg {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json box_to_json(const BoxN& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

BoxN box_from_json(const json& j) {
  return BoxN{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
              j.at(3).get<double>()};
}

ordered_json scene_to_json(const Scene& s) {
  ordered_json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["background"] = ordered_json::array({s.background[0], s.background[1], s.background[2]});
  ordered_json objs = ordered_json::array();
  for (const SceneObject& o : s.objects) {
    ordered_json oj;
    oj["id"] = o.id;
    oj["box"] = box_to_json(o.box);
    oj["shape"] = shape_word(o.shape);
    oj["color"] = ordered_json::array({o.color[0], o.color[1], o.color[2]});
    oj["contrast"] = o.contrast;
    oj["palette"] = o.palette_id;
    objs.push_back(std::move(oj));
  }
  j["objects"] = std::move(objs);
  return j;
}

Scene scene_from_json(const json& j) {
  Scene s;
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  for (int i = 0; i < 3; ++i) s.background[static_cast<std::size_t>(i)] = j.at("background").at(i).get<double>();
  for (const json& oj : j.at("objects")) {
    SceneObject o;
    o.id = oj.at("id").get<int>();
    o.box = box_from_json(oj.at("box"));
    o.shape = oj.at("shape").get<std::string>() == "rect" ? ObjectShape::Rect : ObjectShape::Disc;
    for (int i = 0; i < 3; ++i) o.color[static_cast<std::size_t>(i)] = oj.at("color").at(i).get<double>();
    o.contrast = oj.at("contrast").get<double>();
    o.palette_id = oj.at("palette").get<int>();
    s.objects.push_back(o);
  }
  return s;
}

}  // namespace

ordered_json episode_to_json(const Episode& e) {
  ordered_json j;
  j["seed"] = e.seed;
  j["k"] = e.layout.k;
  j["proxy_tile"] = e.proxy_tile;
  ordered_json rule;
  rule["family"] = family_name(e.rule.family);
  rule["attr_palette"] = e.rule.attr_palette;
  rule["logical_largest"] = e.rule.logical_largest;
  rule["moved_tile_a"] = e.rule.moved_tile_a;
  rule["moved_tile_b"] = e.rule.moved_tile_b;
  j["rule"] = std::move(rule);
  j["instruction"] = e.instruction;
  ordered_json tiles = ordered_json::array();
  for (const Scene& t : e.tiles) tiles.push_back(scene_to_json(t));
  j["tiles"] = std::move(tiles);
  j["query"] = scene_to_json(e.query);
  ordered_json anns = ordered_json::array();
  for (const SupportAnnotation& a : e.support_annotations) {
    ordered_json aj;
    aj["tile"] = a.tile;
    aj["object_id"] = a.object_id;
    aj["box_global"] = box_to_json(a.box_global);
    anns.push_back(std::move(aj));
  }
  j["support_annotations"] = std::move(anns);
  j["gt_check"] = box_to_json(e.gt_check);
  j["gt_check_object"] = e.gt_check_object;
  j["gt_box"] = box_to_json(e.gt_box);
  j["gt_target_object"] = e.gt_target_object;
  j["gt_answer"] = e.gt_answer;
  return j;
}

Episode episode_from_json(const json& j) {
  Episode e;
  e.seed = j.at("seed").get<std::uint64_t>();
  const int k = j.at("k").get<int>();
  e.proxy_tile = j.at("proxy_tile").get<int>();
  e.layout = make_mosaic(k, e.proxy_tile);
  const json& rule = j.at("rule");
  const auto fam = family_from_name(rule.at("family").get<std::string>());
  if (!fam.has_value()) throw IoError("episode: unknown family in file");
  e.rule.family = *fam;
  e.rule.attr_palette = rule.at("attr_palette").get<int>();
  e.rule.logical_largest = rule.at("logical_largest").get<bool>();
  e.rule.moved_tile_a = rule.at("moved_tile_a").get<int>();
  e.rule.moved_tile_b = rule.at("moved_tile_b").get<int>();
  e.instruction = j.at("instruction").get<std::string>();
  for (const json& t : j.at("tiles")) e.tiles.push_back(scene_from_json(t));
  e.query = scene_from_json(j.at("query"));
  for (const json& aj : j.at("support_annotations")) {
    SupportAnnotation a;
    a.tile = aj.at("tile").get<int>();
    a.object_id = aj.at("object_id").get<int>();
    a.box_global = box_from_json(aj.at("box_global"));
    e.support_annotations.push_back(a);
  }
  e.gt_check = box_from_json(j.at("gt_check"));
  e.gt_check_object = j.at("gt_check_object").get<int>();
  e.gt_box = box_from_json(j.at("gt_box"));
  e.gt_target_object = j.at("gt_target_object").get<int>();
  e.gt_answer = j.at("gt_answer").get<std::string>();
  return e;
}

void write_dataset(const std::vector<Episode>& episodes, const std::string& dir,
                   const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("write_dataset: cannot create " + dir + ": " + ec.message());

  std::map<std::string, int> family_counts;
  ordered_json files = ordered_json::array();
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "ep_%04zu.json", i);
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_dataset: cannot open " + path);
    out << episode_to_json(episodes[i]).dump(2) << "\n";
    if (!out) throw IoError("write_dataset: write failed for " + path);
    ++family_counts[family_name(episodes[i].rule.family)];
    files.push_back(name);
  }

  ordered_json manifest;
  manifest["version"] = 1;
  manifest["count"] = episodes.size();
  ordered_json fam;
  for (const auto& [name, n] : family_counts) fam[name] = n;
  manifest["families"] = std::move(fam);
  ordered_json gen;
  gen["seed"] = cfg.seed;
  gen["k"] = cfg.k;
  gen["objects_per_scene"] = cfg.objects_per_scene;
  gen["families_filter"] = cfg.families;
  manifest["generator"] = std::move(gen);
  manifest["files"] = std::move(files);
  const std::string mpath = dir + "/manifest.json";
  std::ofstream out(mpath, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_dataset: cannot open " + mpath);
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("write_dataset: write failed for " + mpath);
}

std::vector<Episode> load_dataset(const std::string& dir) {
  const std::string mpath = dir + "/manifest.json";
  std::ifstream min(mpath, std::ios::binary);
  if (!min) throw IoError("load_dataset: cannot open " + mpath);
  json manifest;
  min >> manifest;
  std::vector<Episode> episodes;
  for (const json& name : manifest.at("files")) {
    const std::string path = dir + "/" + name.get<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_dataset: cannot open " + path);
    json j;
    in >> j;
    episodes.push_back(episode_from_json(j));
  }
  return episodes;
}

}  // namespace conceptseg
