#pragma once

#include <map>
#include <string>
#include <vector>

#include "svqa/dsl.hpp"
#include "svqa/rng.hpp"
#include "svqa/scene.hpp"

namespace svqa {

// One element of a surface pattern. Slots are written <Z> <C> <M> <S> (object
// groups, numbered from 1; <Z2> is group 2's size slot), <R>/<R2> (spatial
// phrases), <A> (matched property), <Q> (queried property). "<S>s" marks a
// pluralized noun slot. Square brackets delimit optional segments, each kept
// or dropped independently with probability 1/2 at render time.
struct PatternItem {
  enum class Type : uint8_t { word, punct, slot } type = Type::word;
  std::string text;        // word / punct literal
  char slot_kind = 0;      // 'Z','C','M','S','R','A','Q'
  int slot_index = 1;      // group number or relation number
  bool plural = false;     // noun slots only
  int optional_group = -1; // -1 = mandatory
};

struct SkeletonNode {
  enum class Op : uint8_t {
    scene,         // no inputs
    filter_group,  // expands to 0..4 filter_* nodes for the group's bound slots
    unique,
    relate,        // direction taken from relation slot r_index
    same,          // property taken from the A binding
    query,         // property taken from the Q binding
    equal,         // property taken from the Q binding
    set_union,
    set_intersect,
    count,
    exist,
  };
  Op op = Op::scene;
  int group = 0;    // filter_group
  int r_index = 1;  // relate
  std::vector<int> inputs;
};

enum class AnswerKind : uint8_t { boolean_answer, integer_answer, attribute_answer };

struct Template {
  std::string family;
  std::string pattern_text;  // source form, kept for inspection and JSON round trips
  std::vector<PatternItem> pattern;
  std::vector<SkeletonNode> skeleton;
  AnswerKind answer_kind = AnswerKind::boolean_answer;

  int group_count = 0;
  std::vector<int> relation_slots;  // relation numbers referenced by the pattern
  bool has_matched_property = false;  // <A> present
  bool has_queried_property = false;  // <Q> present
  bool counting = false;              // root is count
  // Group whose filters apply to the same_<A> output (-1 when no matching RE).
  // Bindings keep this group's A-valued adjective empty so the matched
  // property is never stated outright.
  int matching_target_group = -1;
};

// A full assignment of surface words to a template's slots. Empty strings
// mean "slot left blank" (allowed for size/color/material adjectives).
// Nouns bind "thing"/"object" (no shape constraint) or a singular shape word.
struct SlotBinding {
  struct Group {
    std::string size, color, material, noun;
  };
  std::vector<Group> groups;             // index 0 = group 1
  std::map<int, std::string> relations;  // relation number -> canonical phrase
  std::string matched_property;          // <A>
  std::string queried_property;          // <Q>
};

// The seven generalization-test families plus their seven baseline
// counterparts (suffix "_base"), in canonical order.
const std::vector<Template>& builtin_templates();

// Extra family recognized by the parser: attribute queries about an object
// matched by property ("There is another ...; what is its <Q>?").
const Template& auxiliary_query_template();

// builtin_templates() plus the auxiliary family.
const std::vector<Template>& parser_templates();

const Template& find_template(std::string_view family);  // throws if unknown

Template template_from_json(const std::string& text);
std::string template_to_json(const Template& tpl, int indent = -1);
std::vector<Template> load_templates_file(const std::string& path);

// Canonical spatial phrases ("left of", "right of", "in front of", "behind")
// and their directions.
const std::vector<std::pair<std::string, Direction>>& relation_phrases();
Direction direction_from_phrase(std::string_view phrase);  // throws

// Stage one of binding construction: draws the matched/queried properties
// uniformly; when the queried object is itself the matched referent the draw
// enforces Q != A (otherwise the question text would force the answer).
void fill_properties(const Template& tpl, SlotBinding& binding, Rng& rng);

// True when (A, Q) is drawable by fill_properties for this template.
bool properties_admissible(const Template& tpl, const std::string& matched,
                           const std::string& queried);

// Renders the question text. Optional segments are kept or dropped with
// probability 1/2 each; everything else is deterministic in the binding.
// Throws std::invalid_argument naming the first unbound slot.
std::string render_text(const Template& tpl, const SlotBinding& binding, Rng& rng);

// Expands the skeleton into a concrete program. Group filters expand in
// size, color, material, shape order; blank adjectives and the bare nouns
// "thing"/"object" contribute no filter node.
Program instantiate_program(const Template& tpl, const SlotBinding& binding);

}  // namespace svqa
