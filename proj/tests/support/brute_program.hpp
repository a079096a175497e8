#pragma once

// Test-side oracle. Evaluates programs by exhaustive scans over raw scene
// fields, sharing no evaluation code with the library executor, and grows
// random well-typed program trees for differential testing.

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "svqa/dsl.hpp"
#include "svqa/rng.hpp"
#include "svqa/scene.hpp"

namespace svqa::brute {

struct BruteUnique {};  // thrown marker, distinct from the library's exception

struct NodeValue {
  char tag = 's';  // s=set r=ref a=attribute i=integer b=boolean
  std::set<int> ids;
  int ref = -1;
  std::string attr;
  long integer = -1;
  bool boolean = false;
};

struct BruteResult {
  std::vector<NodeValue> nodes;
  std::string answer;
};

inline std::string brute_attr(const SceneObject& o, const std::string& prop) {
  if (prop == "size") return to_word(o.attrs.size);
  if (prop == "color") return to_word(o.attrs.color);
  if (prop == "material") return to_word(o.attrs.material);
  if (prop == "shape") return to_word(o.attrs.shape);
  throw std::runtime_error("brute: unknown property " + prop);
}

// Evaluates every node; `override_node` >= 0 replaces that node's computed
// value with the full object set before any consumer sees it.
inline BruteResult brute_evaluate(const Program& program, const Scene& scene,
                                  int override_node = -1) {
  BruteResult result;
  result.nodes.resize(program.nodes.size());
  for (size_t i = 0; i < program.nodes.size(); ++i) {
    const ProgramNode& node = program.nodes[i];
    const std::string& f = node.function;
    NodeValue& v = result.nodes[i];
    auto in = [&](size_t k) -> const NodeValue& {
      return result.nodes[size_t(node.inputs.at(k))];
    };

    if (f == "scene") {
      v.tag = 's';
      for (const SceneObject& o : scene.objects) v.ids.insert(o.id);
    } else if (f.rfind("filter_", 0) == 0) {
      const size_t bracket = f.find('[');
      const std::string prop = f.substr(7, bracket - 7);
      const std::string value = f.substr(bracket + 1, f.size() - bracket - 2);
      v.tag = 's';
      for (int id : in(0).ids)
        if (brute_attr(scene.object(id), prop) == value) v.ids.insert(id);
    } else if (f == "unique") {
      if (in(0).ids.size() != 1) throw BruteUnique{};
      v.tag = 'r';
      v.ref = *in(0).ids.begin();
    } else if (f.rfind("relate[", 0) == 0) {
      const std::string dir = f.substr(7, f.size() - 8);
      const SceneObject& a = scene.object(in(0).ref);
      v.tag = 's';
      for (const SceneObject& o : scene.objects) {
        if (o.id == a.id) continue;
        bool keep = false;
        if (dir == "left") keep = o.position[0] < a.position[0];
        else if (dir == "right") keep = o.position[0] > a.position[0];
        else if (dir == "front") keep = o.position[1] < a.position[1];
        else if (dir == "behind") keep = o.position[1] > a.position[1];
        else throw std::runtime_error("brute: unknown direction " + dir);
        if (keep) v.ids.insert(o.id);
      }
    } else if (f.rfind("same_", 0) == 0) {
      const std::string prop = f.substr(5);
      const SceneObject& a = scene.object(in(0).ref);
      v.tag = 's';
      for (const SceneObject& o : scene.objects)
        if (o.id != a.id && brute_attr(o, prop) == brute_attr(a, prop)) v.ids.insert(o.id);
    } else if (f == "union") {
      v.tag = 's';
      v.ids = in(0).ids;
      v.ids.insert(in(1).ids.begin(), in(1).ids.end());
    } else if (f == "intersect") {
      v.tag = 's';
      for (int id : in(0).ids)
        if (in(1).ids.count(id)) v.ids.insert(id);
    } else if (f == "count") {
      v.tag = 'i';
      v.integer = long(in(0).ids.size());
    } else if (f == "exist") {
      v.tag = 'b';
      v.boolean = !in(0).ids.empty();
    } else if (f.rfind("query_", 0) == 0) {
      v.tag = 'a';
      v.attr = brute_attr(scene.object(in(0).ref), f.substr(6));
    } else if (f == "equal_integer") {
      v.tag = 'b';
      v.boolean = in(0).integer == in(1).integer;
    } else if (f == "greater_than") {
      v.tag = 'b';
      v.boolean = in(0).integer > in(1).integer;
    } else if (f == "less_than") {
      v.tag = 'b';
      v.boolean = in(0).integer < in(1).integer;
    } else if (f.rfind("equal_", 0) == 0) {
      const std::string prop = f.substr(6);
      v.tag = 'b';
      v.boolean = brute_attr(scene.object(in(0).ref), prop) ==
                  brute_attr(scene.object(in(1).ref), prop);
    } else {
      throw std::runtime_error("brute: unknown function " + f);
    }

    if (int(i) == override_node) {
      v.tag = 's';
      v.ids.clear();
      for (const SceneObject& o : scene.objects) v.ids.insert(o.id);
    }
  }

  const NodeValue& root = result.nodes.back();
  if (root.tag == 'b') result.answer = root.boolean ? "yes" : "no";
  else if (root.tag == 'i') result.answer = std::to_string(root.integer);
  else if (root.tag == 'a') result.answer = root.attr;
  else throw std::runtime_error("brute: root is not a scalar");
  return result;
}

// Degeneracy per the documented semantics: some relation node whose output
// transitively feeds a unique can be bypassed with the full object set
// without changing the answer or raising.
inline bool brute_is_degenerate(const Program& program, const Scene& scene) {
  const size_t n = program.nodes.size();
  std::vector<int> consumer(n, -1);
  for (size_t i = 0; i < n; ++i)
    for (int input : program.nodes[i].inputs) consumer[size_t(input)] = int(i);
  const BruteResult base = brute_evaluate(program, scene);
  for (size_t i = 0; i < n; ++i) {
    const std::string& f = program.nodes[i].function;
    if (f.rfind("relate[", 0) != 0 && f.rfind("same_", 0) != 0) continue;
    bool feeds_unique = false;
    for (int c = consumer[i]; c != -1; c = consumer[size_t(c)])
      if (program.nodes[size_t(c)].function == "unique") feeds_unique = true;
    if (!feeds_unique) continue;
    try {
      if (brute_evaluate(program, scene, int(i)).answer == base.answer) return true;
    } catch (const BruteUnique&) {
    }
  }
  return false;
}

// Random well-typed program tree, emitted in topological order (post-order,
// root last, every non-root consumed exactly once). Depth counts nested
// expression levels and never exceeds `max_depth`.
class RandomProgram {
 public:
  static Program build(Rng& rng, int max_depth) {
    RandomProgram g{rng};
    g.root(max_depth);
    return std::move(g.program_);
  }

 private:
  explicit RandomProgram(Rng& rng) : rng_(rng) {}

  int emit(std::string function, std::vector<int> inputs) {
    program_.nodes.push_back({std::move(function), std::move(inputs)});
    return int(program_.nodes.size()) - 1;
  }

  std::string random_property() { return rng_.pick(property_words()); }

  int set_expr(int depth) {
    if (depth <= 1) return emit("scene", {});
    switch (rng_.below(6)) {
      case 0: return emit("scene", {});
      case 1: {
        const std::string prop = random_property();
        const std::string value = rng_.pick(property_values(property_from_word(prop)));
        return emit("filter_" + prop + "[" + value + "]", {set_expr(depth - 1)});
      }
      case 2: {
        static const char* dirs[] = {"left", "right", "front", "behind"};
        return emit(std::string("relate[") + dirs[rng_.below(4)] + "]",
                    {ref_expr(depth - 1)});
      }
      case 3: return emit("same_" + random_property(), {ref_expr(depth - 1)});
      case 4: {
        const int a = set_expr(depth - 1), b = set_expr(depth - 1);
        return emit("union", {a, b});
      }
      default: {
        const int a = set_expr(depth - 1), b = set_expr(depth - 1);
        return emit("intersect", {a, b});
      }
    }
  }

  int ref_expr(int depth) { return emit("unique", {set_expr(depth - 1)}); }

  void root(int max_depth) {
    switch (rng_.below(7)) {
      case 0: emit("count", {set_expr(max_depth - 1)}); break;
      case 1: emit("exist", {set_expr(max_depth - 1)}); break;
      case 2: emit("query_" + random_property(), {ref_expr(max_depth - 1)}); break;
      case 3: {
        const std::string prop = random_property();
        const int a = ref_expr(max_depth - 1), b = ref_expr(max_depth - 1);
        emit("equal_" + prop, {a, b});
        break;
      }
      case 4: {
        const int a = int_expr(max_depth - 1), b = int_expr(max_depth - 1);
        emit("equal_integer", {a, b});
        break;
      }
      case 5: {
        const int a = int_expr(max_depth - 1), b = int_expr(max_depth - 1);
        emit("greater_than", {a, b});
        break;
      }
      default: {
        const int a = int_expr(max_depth - 1), b = int_expr(max_depth - 1);
        emit("less_than", {a, b});
        break;
      }
    }
  }

  int int_expr(int depth) { return emit("count", {set_expr(depth - 1)}); }

  Rng& rng_;
  Program program_;
};

// Random different linearization of the same tree: repeatedly appends a
// uniformly chosen node whose inputs are already placed.
inline Program shuffle_topological(const Program& program, Rng& rng) {
  const size_t n = program.nodes.size();
  std::vector<int> pending(n, 0);
  for (size_t i = 0; i < n; ++i) pending[i] = int(program.nodes[i].inputs.size());
  std::vector<std::vector<int>> consumers(n);
  for (size_t i = 0; i < n; ++i)
    for (int input : program.nodes[i].inputs) consumers[size_t(input)].push_back(int(i));

  std::vector<int> ready;
  for (size_t i = 0; i < n; ++i)
    if (pending[i] == 0) ready.push_back(int(i));

  Program out;
  std::vector<int> new_index(n, -1);
  while (!ready.empty()) {
    const size_t pick = size_t(rng.below(uint64_t(ready.size())));
    const int old = ready[pick];
    ready[pick] = ready.back();
    ready.pop_back();
    std::vector<int> inputs;
    for (int input : program.nodes[size_t(old)].inputs)
      inputs.push_back(new_index[size_t(input)]);
    new_index[size_t(old)] = int(out.nodes.size());
    out.nodes.push_back({program.nodes[size_t(old)].function, std::move(inputs)});
    for (int c : consumers[size_t(old)])
      if (--pending[size_t(c)] == 0) ready.push_back(c);
  }
  return out;
}

}  // namespace svqa::brute
