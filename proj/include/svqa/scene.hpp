#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace svqa {

enum class Size : uint8_t { small, large };
enum class Color : uint8_t { gray, red, blue, green, brown, purple, cyan, yellow };
enum class Material : uint8_t { rubber, metal };
enum class Shape : uint8_t { cube, sphere, cylinder };
enum class Property : uint8_t { size, color, material, shape };
enum class Direction : uint8_t { left, right, front, behind };
enum class Split : uint8_t { train, val, test };

inline constexpr int kNumSizes = 2;
inline constexpr int kNumColors = 8;
inline constexpr int kNumMaterials = 2;
inline constexpr int kNumShapes = 3;
inline constexpr int kNumProperties = 4;
inline constexpr int kMaxSceneObjects = 10;

const std::vector<std::string>& size_words();
const std::vector<std::string>& color_words();
const std::vector<std::string>& material_words();
const std::vector<std::string>& shape_words();
const std::vector<std::string>& property_words();
const std::vector<std::string>& property_values(Property prop);
int property_cardinality(Property prop);

std::string to_word(Size v);
std::string to_word(Color v);
std::string to_word(Material v);
std::string to_word(Shape v);
std::string to_word(Property v);
std::string to_word(Direction v);
std::string to_word(Split v);

// Parsers return -1 / throw on unknown words depending on the caller's needs.
int value_index(Property prop, std::string_view word);  // -1 if unknown
Property property_from_word(std::string_view word);     // throws
Split split_from_word(std::string_view word);           // throws

struct ObjectAttributes {
  Size size = Size::small;
  Color color = Color::gray;
  Material material = Material::rubber;
  Shape shape = Shape::cube;

  int value(Property prop) const;
  std::string word(Property prop) const;
  bool operator==(const ObjectAttributes&) const = default;
};

struct SceneObject {
  int id = 0;  // position within Scene::objects
  ObjectAttributes attrs;
  std::array<double, 3> position{0.0, 0.0, 0.0};
};

struct Scene {
  int scene_index = 0;  // serialized as image_index
  Split split = Split::val;
  std::vector<SceneObject> objects;

  const SceneObject& object(int id) const;  // throws on unknown id
};

// Deterministic in (rng_seed, scene_index): repeated calls agree and distinct
// indices give independent streams. Pairwise x and y gaps always exceed 0.01.
Scene sample_scene(uint64_t rng_seed, int scene_index, int min_objects,
                   int max_objects, Split split = Split::val);

// Objects strictly related to the anchor, anchor excluded, ids ascending.
// left/right compare x; front/behind compare y (front = smaller y).
std::vector<int> spatial_set(const Scene& scene, int anchor_id, Direction dir);

// Objects sharing the anchor's value of `prop`, anchor excluded, ids ascending.
std::vector<int> match_set(const Scene& scene, int anchor_id, Property prop);

struct SceneFileInfo {
  std::string split = "val";
  uint64_t seed = 0;
};

std::string scenes_to_json(const SceneFileInfo& info, const std::vector<Scene>& scenes);
void write_scenes_file(const std::string& path, const SceneFileInfo& info,
                       const std::vector<Scene>& scenes);
std::vector<Scene> read_scenes_file(const std::string& path, SceneFileInfo* info = nullptr);
std::vector<Scene> scenes_from_json(const std::string& text, SceneFileInfo* info = nullptr);

}  // namespace svqa
