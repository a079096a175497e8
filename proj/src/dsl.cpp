#include "svqa/dsl.hpp"

#include <fstream>
#include <functional>
#include <unordered_map>

#include "json.hpp"

namespace svqa {

namespace {

const ValueKind kSet{Kind::object_set, std::nullopt};
const ValueKind kRef{Kind::object_ref, std::nullopt};
const ValueKind kInt{Kind::integer, std::nullopt};
const ValueKind kBool{Kind::boolean, std::nullopt};

ValueKind attr_kind(Property p) { return ValueKind{Kind::attribute, p}; }

std::vector<FunctionToken> build_catalog() {
  std::vector<FunctionToken> t;

  FunctionToken scene{"scene", 0, {}, kSet};
  scene.op = OpCode::scene;
  t.push_back(scene);

  for (int p = 0; p < kNumProperties; ++p) {
    auto prop = static_cast<Property>(p);
    const auto& values = property_values(prop);
    for (size_t v = 0; v < values.size(); ++v) {
      FunctionToken f{"filter_" + to_word(prop) + "[" + values[v] + "]", 1, {kSet}, kSet};
      f.op = OpCode::filter;
      f.prop = prop;
      f.filter_value = static_cast<int>(v);
      t.push_back(f);
    }
  }

  FunctionToken unique{"unique", 1, {kSet}, kRef};
  unique.op = OpCode::unique;
  t.push_back(unique);

  for (Direction d : {Direction::left, Direction::right, Direction::front, Direction::behind}) {
    FunctionToken r{"relate[" + to_word(d) + "]", 1, {kRef}, kSet};
    r.op = OpCode::relate;
    r.dir = d;
    t.push_back(r);
  }

  for (int p = 0; p < kNumProperties; ++p) {
    auto prop = static_cast<Property>(p);
    FunctionToken s{"same_" + to_word(prop), 1, {kRef}, kSet};
    s.op = OpCode::same;
    s.prop = prop;
    t.push_back(s);
  }

  FunctionToken uni{"union", 2, {kSet, kSet}, kSet};
  uni.op = OpCode::set_union;
  t.push_back(uni);
  FunctionToken inter{"intersect", 2, {kSet, kSet}, kSet};
  inter.op = OpCode::set_intersect;
  t.push_back(inter);

  FunctionToken count{"count", 1, {kSet}, kInt};
  count.op = OpCode::count;
  t.push_back(count);
  FunctionToken exist{"exist", 1, {kSet}, kBool};
  exist.op = OpCode::exist;
  t.push_back(exist);

  for (int p = 0; p < kNumProperties; ++p) {
    auto prop = static_cast<Property>(p);
    FunctionToken q{"query_" + to_word(prop), 1, {kRef}, attr_kind(prop)};
    q.op = OpCode::query;
    q.prop = prop;
    t.push_back(q);
  }

  for (int p = 0; p < kNumProperties; ++p) {
    auto prop = static_cast<Property>(p);
    FunctionToken e{"equal_" + to_word(prop), 2, {kRef, kRef}, kBool};
    e.op = OpCode::equal_attr;
    e.prop = prop;
    t.push_back(e);
  }

  FunctionToken eq{"equal_integer", 2, {kInt, kInt}, kBool};
  eq.op = OpCode::equal_int;
  t.push_back(eq);
  FunctionToken gt{"greater_than", 2, {kInt, kInt}, kBool};
  gt.op = OpCode::greater_int;
  t.push_back(gt);
  FunctionToken lt{"less_than", 2, {kInt, kInt}, kBool};
  lt.op = OpCode::less_int;
  t.push_back(lt);

  return t;
}

const std::unordered_map<std::string_view, const FunctionToken*>& token_index() {
  static const auto* index = [] {
    auto* m = new std::unordered_map<std::string_view, const FunctionToken*>();
    for (const FunctionToken& tok : catalog()) (*m)[tok.name] = &tok;
    return m;
  }();
  return *index;
}

}  // namespace

std::string to_string(const ValueKind& k) {
  switch (k.kind) {
    case Kind::object_set: return "ObjectSet";
    case Kind::object_ref: return "ObjectRef";
    case Kind::integer: return "Integer";
    case Kind::boolean: return "Boolean";
    case Kind::attribute:
      return "Attribute(" + (k.attr ? to_word(*k.attr) : std::string("?")) + ")";
  }
  return "?";
}

const std::vector<FunctionToken>& catalog() {
  static const std::vector<FunctionToken> tokens = build_catalog();
  return tokens;
}

const FunctionToken* find_token(std::string_view name) {
  const auto& index = token_index();
  auto it = index.find(name);
  return it == index.end() ? nullptr : it->second;
}

TypedProgram validate(const Program& program) {
  const int n = static_cast<int>(program.nodes.size());
  if (n == 0) throw ValidationError("empty program");

  TypedProgram typed;
  typed.program = program;
  typed.tokens.resize(n);
  typed.kinds.resize(n);
  std::vector<int> consumers(n, 0);

  for (int i = 0; i < n; ++i) {
    const ProgramNode& node = program.nodes[i];
    const FunctionToken* tok = find_token(node.function);
    if (!tok)
      throw ValidationError("node " + std::to_string(i) + ": unknown function '" +
                            node.function + "'");
    if (static_cast<int>(node.inputs.size()) != tok->arity)
      throw ValidationError("node " + std::to_string(i) + ": '" + node.function +
                            "' expects " + std::to_string(tok->arity) + " inputs, got " +
                            std::to_string(node.inputs.size()));
    for (size_t a = 0; a < node.inputs.size(); ++a) {
      const int src = node.inputs[a];
      if (src < 0 || src >= i)
        throw ValidationError("node " + std::to_string(i) +
                              ": input references position " + std::to_string(src) +
                              ", which is not an earlier node");
      if (!(typed.kinds[src] == tok->input_kinds[a]))
        throw ValidationError("node " + std::to_string(i) + ": argument " +
                              std::to_string(a) + " of '" + node.function + "' has kind " +
                              to_string(typed.kinds[src]) + ", expected " +
                              to_string(tok->input_kinds[a]));
      consumers[src] += 1;
    }
    typed.tokens[i] = tok;
    typed.kinds[i] = tok->output_kind;
  }

  for (int i = 0; i < n - 1; ++i) {
    if (consumers[i] == 0)
      throw ValidationError("node " + std::to_string(i) + ": unused (only the final node may be the root)");
    if (consumers[i] > 1)
      throw ValidationError("node " + std::to_string(i) + ": consumed " +
                            std::to_string(consumers[i]) + " times; programs must be trees");
  }

  const Kind root = typed.kinds[n - 1].kind;
  if (root != Kind::integer && root != Kind::boolean && root != Kind::attribute)
    throw ValidationError("node " + std::to_string(n - 1) + ": root kind " +
                          to_string(typed.kinds[n - 1]) +
                          " is not an answer kind (Integer, Boolean, or Attribute)");
  return typed;
}

std::string program_to_json(const Program& program, int indent) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const ProgramNode& node : program.nodes) {
    nlohmann::ordered_json jn;
    jn["function"] = node.function;
    jn["inputs"] = node.inputs;
    arr.push_back(std::move(jn));
  }
  return arr.dump(indent);
}

Program program_from_json(const std::string& text) {
  const auto arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw std::invalid_argument("program JSON must be an array of nodes");
  Program p;
  for (const auto& jn : arr) {
    ProgramNode node;
    node.function = jn.at("function").get<std::string>();
    node.inputs = jn.at("inputs").get<std::vector<int>>();
    p.nodes.push_back(std::move(node));
  }
  return p;
}

Program program_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return program_from_json(text);
}

namespace {

void canonical_tree(const Program& p, int node, std::string& out) {
  out += p.nodes[node].function;
  if (!p.nodes[node].inputs.empty()) {
    out += '(';
    for (size_t a = 0; a < p.nodes[node].inputs.size(); ++a) {
      if (a) out += ',';
      canonical_tree(p, p.nodes[node].inputs[a], out);
    }
    out += ')';
  }
}

}  // namespace

bool programs_isomorphic(const Program& a, const Program& b) {
  if (a.nodes.empty() || b.nodes.empty()) return a.nodes.empty() == b.nodes.empty();
  if (a.nodes.size() != b.nodes.size()) return false;
  std::string ca, cb;
  canonical_tree(a, static_cast<int>(a.nodes.size()) - 1, ca);
  canonical_tree(b, static_cast<int>(b.nodes.size()) - 1, cb);
  return ca == cb;
}

}  // namespace svqa
