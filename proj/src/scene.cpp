#include "svqa/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "svqa/rng.hpp"

namespace svqa {

namespace {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string> kSizes = {"small", "large"};
const std::vector<std::string> kColors = {"gray",  "red",    "blue", "green",
                                          "brown", "purple", "cyan", "yellow"};
const std::vector<std::string> kMaterials = {"rubber", "metal"};
const std::vector<std::string> kShapes = {"cube", "sphere", "cylinder"};
const std::vector<std::string> kProperties = {"size", "color", "material", "shape"};

int index_of(const std::vector<std::string>& words, std::string_view w) {
  for (size_t i = 0; i < words.size(); ++i)
    if (words[i] == w) return static_cast<int>(i);
  return -1;
}

int checked_value(Property prop, const std::string& word) {
  int v = value_index(prop, word);
  if (v < 0)
    throw std::invalid_argument("unknown " + to_word(prop) + " word: " + word);
  return v;
}

}  // namespace

const std::vector<std::string>& size_words() { return kSizes; }
const std::vector<std::string>& color_words() { return kColors; }
const std::vector<std::string>& material_words() { return kMaterials; }
const std::vector<std::string>& shape_words() { return kShapes; }
const std::vector<std::string>& property_words() { return kProperties; }

const std::vector<std::string>& property_values(Property prop) {
  switch (prop) {
    case Property::size: return kSizes;
    case Property::color: return kColors;
    case Property::material: return kMaterials;
    case Property::shape: return kShapes;
  }
  throw std::logic_error("bad property");
}

int property_cardinality(Property prop) {
  return static_cast<int>(property_values(prop).size());
}

std::string to_word(Size v) { return kSizes[static_cast<int>(v)]; }
std::string to_word(Color v) { return kColors[static_cast<int>(v)]; }
std::string to_word(Material v) { return kMaterials[static_cast<int>(v)]; }
std::string to_word(Shape v) { return kShapes[static_cast<int>(v)]; }
std::string to_word(Property v) { return kProperties[static_cast<int>(v)]; }

std::string to_word(Direction v) {
  switch (v) {
    case Direction::left: return "left";
    case Direction::right: return "right";
    case Direction::front: return "front";
    case Direction::behind: return "behind";
  }
  throw std::logic_error("bad direction");
}

std::string to_word(Split v) {
  switch (v) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw std::logic_error("bad split");
}

int value_index(Property prop, std::string_view word) {
  return index_of(property_values(prop), word);
}

Property property_from_word(std::string_view word) {
  int i = index_of(kProperties, word);
  if (i < 0) throw std::invalid_argument("unknown property word: " + std::string(word));
  return static_cast<Property>(i);
}

Split split_from_word(std::string_view word) {
  if (word == "train") return Split::train;
  if (word == "val") return Split::val;
  if (word == "test") return Split::test;
  throw std::invalid_argument("unknown split word: " + std::string(word));
}

int ObjectAttributes::value(Property prop) const {
  switch (prop) {
    case Property::size: return static_cast<int>(size);
    case Property::color: return static_cast<int>(color);
    case Property::material: return static_cast<int>(material);
    case Property::shape: return static_cast<int>(shape);
  }
  throw std::logic_error("bad property");
}

std::string ObjectAttributes::word(Property prop) const {
  return property_values(prop)[value(prop)];
}

const SceneObject& Scene::object(int id) const {
  if (id < 0 || id >= static_cast<int>(objects.size()))
    throw std::out_of_range("unknown object id " + std::to_string(id) +
                            " in scene " + std::to_string(scene_index));
  return objects[id];
}

Scene sample_scene(uint64_t rng_seed, int scene_index, int min_objects,
                   int max_objects, Split split) {
  if (min_objects < 3 || max_objects > kMaxSceneObjects || min_objects > max_objects)
    throw std::invalid_argument("object count bounds must satisfy 3 <= min <= max <= 10");

  Rng rng(Rng::derive({rng_seed, static_cast<uint64_t>(scene_index), hash_str64("scene")}));
  Scene scene;
  scene.scene_index = scene_index;
  scene.split = split;

  const int count = rng.uniform_int(min_objects, max_objects);
  // Positions are drawn on a 0.01 grid over [-3, 3]; requiring at least two
  // grid steps between any pair on each axis keeps every pairwise gap > 0.01,
  // so all four spatial relations are always well defined.
  std::vector<int> xs, ys;
  for (int i = 0; i < count; ++i) {
    int gx = 0, gy = 0;
    for (;;) {
      gx = rng.uniform_int(-300, 300);
      bool ok = true;
      for (int prev : xs)
        if (std::abs(prev - gx) < 2) { ok = false; break; }
      if (ok) break;
    }
    for (;;) {
      gy = rng.uniform_int(-300, 300);
      bool ok = true;
      for (int prev : ys)
        if (std::abs(prev - gy) < 2) { ok = false; break; }
      if (ok) break;
    }
    xs.push_back(gx);
    ys.push_back(gy);

    SceneObject obj;
    obj.id = i;
    obj.attrs.size = static_cast<Size>(rng.below(kNumSizes));
    obj.attrs.color = static_cast<Color>(rng.below(kNumColors));
    obj.attrs.material = static_cast<Material>(rng.below(kNumMaterials));
    obj.attrs.shape = static_cast<Shape>(rng.below(kNumShapes));
    obj.position[0] = gx / 100.0;
    obj.position[1] = gy / 100.0;
    obj.position[2] = obj.attrs.size == Size::small ? 0.35 : 0.7;
    scene.objects.push_back(obj);
  }
  return scene;
}

std::vector<int> spatial_set(const Scene& scene, int anchor_id, Direction dir) {
  const SceneObject& anchor = scene.object(anchor_id);
  std::vector<int> out;
  for (const SceneObject& obj : scene.objects) {
    if (obj.id == anchor_id) continue;
    bool related = false;
    switch (dir) {
      case Direction::left: related = obj.position[0] < anchor.position[0]; break;
      case Direction::right: related = obj.position[0] > anchor.position[0]; break;
      case Direction::front: related = obj.position[1] < anchor.position[1]; break;
      case Direction::behind: related = obj.position[1] > anchor.position[1]; break;
    }
    if (related) out.push_back(obj.id);
  }
  return out;
}

std::vector<int> match_set(const Scene& scene, int anchor_id, Property prop) {
  const SceneObject& anchor = scene.object(anchor_id);
  std::vector<int> out;
  for (const SceneObject& obj : scene.objects) {
    if (obj.id == anchor_id) continue;
    if (obj.attrs.value(prop) == anchor.attrs.value(prop)) out.push_back(obj.id);
  }
  return out;
}

std::string scenes_to_json(const SceneFileInfo& info, const std::vector<Scene>& scenes) {
  ordered_json root;
  root["info"]["split"] = info.split;
  root["info"]["seed"] = info.seed;
  root["scenes"] = ordered_json::array();
  for (const Scene& scene : scenes) {
    ordered_json js;
    js["image_index"] = scene.scene_index;
    js["objects"] = ordered_json::array();
    for (const SceneObject& obj : scene.objects) {
      ordered_json jo;
      jo["shape"] = to_word(obj.attrs.shape);
      jo["color"] = to_word(obj.attrs.color);
      jo["size"] = to_word(obj.attrs.size);
      jo["material"] = to_word(obj.attrs.material);
      jo["3d_coords"] = {obj.position[0], obj.position[1], obj.position[2]};
      js["objects"].push_back(std::move(jo));
    }
    root["scenes"].push_back(std::move(js));
  }
  return root.dump(2) + "\n";
}

void write_scenes_file(const std::string& path, const SceneFileInfo& info,
                       const std::vector<Scene>& scenes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << scenes_to_json(info, scenes);
}

std::vector<Scene> scenes_from_json(const std::string& text, SceneFileInfo* info) {
  const auto root = nlohmann::json::parse(text);
  SceneFileInfo parsed;
  if (root.contains("info")) {
    parsed.split = root["info"].value("split", "val");
    parsed.seed = root["info"].value("seed", 0ull);
  }
  if (info) *info = parsed;

  std::vector<Scene> scenes;
  for (const auto& js : root.at("scenes")) {
    Scene scene;
    scene.scene_index = js.at("image_index").get<int>();
    scene.split = split_from_word(parsed.split);
    int id = 0;
    for (const auto& jo : js.at("objects")) {
      SceneObject obj;
      obj.id = id++;
      obj.attrs.shape = static_cast<Shape>(checked_value(Property::shape, jo.at("shape").get<std::string>()));
      obj.attrs.color = static_cast<Color>(checked_value(Property::color, jo.at("color").get<std::string>()));
      obj.attrs.size = static_cast<Size>(checked_value(Property::size, jo.at("size").get<std::string>()));
      obj.attrs.material = static_cast<Material>(checked_value(Property::material, jo.at("material").get<std::string>()));
      const auto& coords = jo.at("3d_coords");
      obj.position = {coords.at(0).get<double>(), coords.at(1).get<double>(),
                      coords.at(2).get<double>()};
      scene.objects.push_back(obj);
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<Scene> read_scenes_file(const std::string& path, SceneFileInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return scenes_from_json(text, info);
}

}  // namespace svqa
