#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <set>

#include "doctest.h"
#include "svqa/rng.hpp"
#include "svqa/scene.hpp"

using namespace svqa;

namespace {

Scene fixed_scene(const std::vector<std::array<double, 2>>& xy) {
  Scene scene;
  for (size_t i = 0; i < xy.size(); ++i) {
    SceneObject o;
    o.id = int(i);
    o.position = {xy[i][0], xy[i][1], 0.35};
    scene.objects.push_back(o);
  }
  return scene;
}

}  // namespace

TEST_CASE("forced cardinality") {
  const Scene s = sample_scene(7, 0, 3, 3);
  CHECK(s.objects.size() == 3);
  CHECK(s.scene_index == 0);
}

TEST_CASE("determinism") {
  const Scene a = sample_scene(7, 0, 3, 10);
  const Scene b = sample_scene(7, 0, 3, 10);
  CHECK(scenes_to_json({}, {a}) == scenes_to_json({}, {b}));
}

TEST_CASE("distinct indices differ") {
  const Scene a = sample_scene(7, 0, 3, 10);
  const Scene b = sample_scene(7, 1, 3, 10);
  CHECK(scenes_to_json({}, {a}) != scenes_to_json({}, {b}));
}

TEST_CASE("invalid bounds") {
  CHECK_THROWS(sample_scene(1, 0, 2, 5));
  CHECK_THROWS(sample_scene(1, 0, 3, 11));
  CHECK_THROWS(sample_scene(1, 0, 7, 4));
}

TEST_CASE("attribute marginals over 10000 scenes") {
  std::map<std::string, long> colors;
  long total = 0;
  for (int i = 0; i < 10000; ++i) {
    const Scene s = sample_scene(1, i, 3, 10);
    for (const SceneObject& o : s.objects) {
      ++colors[to_word(o.attrs.color)];
      ++total;
    }
  }
  CHECK(colors.size() == 8);
  for (const auto& [word, n] : colors) {
    const double freq = double(n) / double(total);
    INFO(word, " ", freq);
    CHECK(freq >= 0.115);
    CHECK(freq <= 0.135);
  }
}

TEST_CASE("pairwise separation and coordinate ranges") {
  for (int i = 0; i < 200; ++i) {
    const Scene s = sample_scene(11, i, 3, 10);
    for (const SceneObject& a : s.objects) {
      CHECK(a.position[0] >= -3.0);
      CHECK(a.position[0] <= 3.0);
      CHECK(a.position[2] == (a.attrs.size == Size::small ? 0.35 : 0.7));
      for (const SceneObject& b : s.objects) {
        if (a.id >= b.id) continue;
        CHECK(std::abs(a.position[0] - b.position[0]) > 0.01);
        CHECK(std::abs(a.position[1] - b.position[1]) > 0.01);
      }
    }
  }
}

TEST_CASE("object count spans the requested range") {
  std::set<size_t> seen;
  for (int i = 0; i < 500; ++i) seen.insert(sample_scene(3, i, 3, 10).objects.size());
  CHECK(*seen.begin() == 3);
  CHECK(*seen.rbegin() == 10);
}

TEST_CASE("spatial sets on fixed coordinates") {
  // x increasing with id, y decreasing with id
  const Scene s = fixed_scene({{0.0, 2.0}, {0.5, 1.5}, {1.0, 1.0}, {1.5, 0.5}, {2.0, 0.0}});
  for (int anchor = 0; anchor < 5; ++anchor) {
    std::vector<int> left, right, front, behind;
    for (const SceneObject& o : s.objects) {
      if (o.id == anchor) continue;
      if (o.position[0] < s.objects[size_t(anchor)].position[0]) left.push_back(o.id);
      if (o.position[0] > s.objects[size_t(anchor)].position[0]) right.push_back(o.id);
      if (o.position[1] < s.objects[size_t(anchor)].position[1]) front.push_back(o.id);
      if (o.position[1] > s.objects[size_t(anchor)].position[1]) behind.push_back(o.id);
    }
    CHECK(spatial_set(s, anchor, Direction::left) == left);
    CHECK(spatial_set(s, anchor, Direction::right) == right);
    CHECK(spatial_set(s, anchor, Direction::front) == front);
    CHECK(spatial_set(s, anchor, Direction::behind) == behind);
  }
  CHECK(spatial_set(s, 0, Direction::left).empty());
  CHECK(spatial_set(s, 4, Direction::right).empty());
}

TEST_CASE("spatial partitions and inverses") {
  for (int i = 0; i < 50; ++i) {
    const Scene s = sample_scene(5, i, 3, 10);
    const int n = int(s.objects.size());
    for (int a = 0; a < n; ++a) {
      const std::vector<int> left = spatial_set(s, a, Direction::left);
      const std::vector<int> right = spatial_set(s, a, Direction::right);
      std::set<int> both(left.begin(), left.end());
      both.insert(right.begin(), right.end());
      CHECK(int(both.size()) == n - 1);
      CHECK(both.count(a) == 0);
      for (int b : left) {
        const std::vector<int> r = spatial_set(s, b, Direction::right);
        CHECK(std::count(r.begin(), r.end(), a) == 1);
      }
      const std::vector<int> front = spatial_set(s, a, Direction::front);
      for (int b : front) {
        const std::vector<int> back = spatial_set(s, b, Direction::behind);
        CHECK(std::count(back.begin(), back.end(), a) == 1);
      }
    }
  }
}

TEST_CASE("match sets") {
  Scene lonely = fixed_scene({{0.0, 0.0}});
  for (int p = 0; p < kNumProperties; ++p)
    CHECK(match_set(lonely, 0, Property(p)).empty());

  Scene same = fixed_scene({{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}});
  for (SceneObject& o : same.objects) o.attrs.color = Color::red;
  CHECK(match_set(same, 1, Property::color) == std::vector<int>{0, 2});

  for (int i = 0; i < 50; ++i) {
    const Scene s = sample_scene(9, i, 8, 8);
    for (const SceneObject& a : s.objects)
      for (int p = 0; p < kNumProperties; ++p) {
        std::vector<int> expected;
        for (const SceneObject& o : s.objects)
          if (o.id != a.id && o.attrs.value(Property(p)) == a.attrs.value(Property(p)))
            expected.push_back(o.id);
        CHECK(match_set(s, a.id, Property(p)) == expected);
      }
  }
}

TEST_CASE("match symmetry") {
  for (int i = 0; i < 50; ++i) {
    const Scene s = sample_scene(13, i, 3, 10);
    for (const SceneObject& a : s.objects)
      for (int p = 0; p < kNumProperties; ++p)
        for (int b : match_set(s, a.id, Property(p))) {
          const std::vector<int> back = match_set(s, b, Property(p));
          CHECK(std::count(back.begin(), back.end(), a.id) == 1);
        }
  }
}

TEST_CASE("unknown anchor") {
  const Scene s = sample_scene(1, 0, 3, 3);
  CHECK_THROWS(spatial_set(s, 17, Direction::left));
  CHECK_THROWS(match_set(s, -1, Property::color));
}

TEST_CASE("scene file round trip and field names") {
  std::vector<Scene> scenes;
  for (int i = 0; i < 5; ++i) scenes.push_back(sample_scene(21, i, 3, 10));
  const std::string text = scenes_to_json({"val", 21}, scenes);
  CHECK(text.find("\"info\"") != std::string::npos);
  CHECK(text.find("\"split\"") != std::string::npos);
  CHECK(text.find("\"image_index\"") != std::string::npos);
  CHECK(text.find("\"3d_coords\"") != std::string::npos);
  CHECK(text.find("\"material\"") != std::string::npos);

  SceneFileInfo info;
  const std::vector<Scene> back = scenes_from_json(text, &info);
  CHECK(info.split == "val");
  CHECK(info.seed == 21);
  CHECK(scenes_to_json({info.split, info.seed}, back) == text);
}
