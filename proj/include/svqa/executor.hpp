#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "svqa/dsl.hpp"
#include "svqa/scene.hpp"

namespace svqa {

// Raised when `unique` receives a set with cardinality != 1. This is an
// execution error, not an answer; generation rejects such candidates.
class UniqueViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Intermediate value of one program node. Object sets are bitmasks over the
// scene's object ids (scenes hold at most 10 objects).
struct Value {
  Kind kind = Kind::object_set;
  uint32_t set = 0;       // object_set
  int ref = -1;           // object_ref
  int integer = 0;        // integer
  bool boolean = false;   // boolean
  Property attr_prop = Property::size;  // attribute
  int attr_value = 0;                   // attribute
};

// Booleans render as yes/no, integers as decimal digits, attributes as the
// canonical attribute word.
std::string render_answer(const Value& value);

// Evaluates the program bottom-up against the scene and renders the root.
std::string execute(const TypedProgram& program, const Scene& scene);

// As `execute`, but the node at `override_node` produces `override_set`
// instead of its own output. Used by the degeneracy check.
std::string execute_with_override(const TypedProgram& program, const Scene& scene,
                                  int override_node, uint32_t override_set);

// True iff some relation node (relate[*] or same_*) that feeds a unique
// downstream can be bypassed by the full object set with the rendered answer
// unchanged and no UniqueViolation raised: the relation then contributes
// nothing to identifying the referent. Relations feeding only exist/count are
// exempt (existence is monotone in the bypassed set, so bypass invariance
// would not indicate redundancy). Requires that the unmodified program
// executes.
bool is_degenerate(const TypedProgram& program, const Scene& scene);

}  // namespace svqa
