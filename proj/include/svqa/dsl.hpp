#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svqa/scene.hpp"

namespace svqa {

enum class Kind : uint8_t { object_set, object_ref, attribute, integer, boolean };

struct ValueKind {
  Kind kind = Kind::object_set;
  // Set only for kind == attribute (which property the value belongs to).
  std::optional<Property> attr;

  bool operator==(const ValueKind&) const = default;
};

std::string to_string(const ValueKind& k);

// Executor dispatch tag; every catalog token carries one.
enum class OpCode : uint8_t {
  scene,
  filter,
  unique,
  relate,
  same,
  set_union,
  set_intersect,
  count,
  exist,
  query,
  equal_attr,
  equal_int,
  greater_int,
  less_int,
};

struct FunctionToken {
  std::string name;  // e.g. "filter_color[brown]", "relate[left]"
  int arity = 0;
  std::vector<ValueKind> input_kinds;
  ValueKind output_kind;

  OpCode op = OpCode::scene;
  Property prop = Property::size;  // filter / same / query / equal_attr
  int filter_value = 0;            // filter only
  Direction dir = Direction::left; // relate only
};

// All function tokens: scene, 15 value filters, unique, 4 relate directions,
// 4 same-property matchers, union/intersect, count, exist, 4 attribute
// queries, 4 attribute comparisons, and the integer comparisons.
const std::vector<FunctionToken>& catalog();
const FunctionToken* find_token(std::string_view name);  // nullptr if unknown

struct ProgramNode {
  std::string function;
  std::vector<int> inputs;  // indices of earlier nodes

  bool operator==(const ProgramNode&) const = default;
};

// Topologically ordered tree with the root last. Every node except the root
// is consumed by exactly one later node.
struct Program {
  std::vector<ProgramNode> nodes;

  bool operator==(const Program&) const = default;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TypedProgram {
  Program program;
  std::vector<const FunctionToken*> tokens;  // per node
  std::vector<ValueKind> kinds;              // per node output kind
};

// Checks token names, arities, topological references, the single-consumer
// tree property, input kinds, and the root kind (integer/boolean/attribute).
// Throws ValidationError naming the offending node.
TypedProgram validate(const Program& program);

std::string program_to_json(const Program& program, int indent = -1);
Program program_from_json(const std::string& text);
Program program_from_file(const std::string& path);

// Order-preserving tree equality, ignoring how the tree was linearized.
bool programs_isomorphic(const Program& a, const Program& b);

}  // namespace svqa
