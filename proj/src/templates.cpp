#include "svqa/templates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace svqa {

namespace {

using Op = SkeletonNode::Op;

SkeletonNode sk_scene() { return {Op::scene, 0, 1, {}}; }
SkeletonNode sk_fg(int group, int in) { return {Op::filter_group, group, 1, {in}}; }
SkeletonNode sk_uniq(int in) { return {Op::unique, 0, 1, {in}}; }
SkeletonNode sk_relate(int r, int in) { return {Op::relate, 0, r, {in}}; }
SkeletonNode sk_same(int in) { return {Op::same, 0, 1, {in}}; }
SkeletonNode sk_query(int in) { return {Op::query, 0, 1, {in}}; }
SkeletonNode sk_equal(int a, int b) { return {Op::equal, 0, 1, {a, b}}; }
SkeletonNode sk_union(int a, int b) { return {Op::set_union, 0, 1, {a, b}}; }
SkeletonNode sk_intersect(int a, int b) { return {Op::set_intersect, 0, 1, {a, b}}; }
SkeletonNode sk_count(int in) { return {Op::count, 0, 1, {in}}; }
SkeletonNode sk_exist(int in) { return {Op::exist, 0, 1, {in}}; }

bool is_punct_char(char c) { return c == ';' || c == '?' || c == '.' || c == ','; }

std::vector<PatternItem> parse_pattern(const std::string& text) {
  std::vector<PatternItem> items;
  int optional_group = -1;
  int next_group_id = 0;

  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) { ++i; continue; }
    if (text[i] == '[') {
      if (optional_group >= 0) throw std::invalid_argument("nested optional segment in pattern");
      optional_group = next_group_id++;
      ++i;
      continue;
    }
    if (text[i] == ']') {
      if (optional_group < 0) throw std::invalid_argument("unmatched ']' in pattern");
      optional_group = -1;
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != ']') ++j;
    std::string raw = text.substr(i, j - i);
    i = j;

    // Peel trailing punctuation into separate items emitted after the token.
    std::string punct;
    while (!raw.empty() && is_punct_char(raw.back())) {
      punct.insert(punct.begin(), raw.back());
      raw.pop_back();
    }

    if (!raw.empty()) {
      PatternItem item;
      item.optional_group = optional_group;
      if (raw.front() == '<') {
        bool plural = false;
        std::string inner;
        size_t close = raw.find('>');
        if (close == std::string::npos)
          throw std::invalid_argument("unterminated slot marker: " + raw);
        inner = raw.substr(1, close - 1);
        std::string suffix = raw.substr(close + 1);
        if (suffix == "s") plural = true;
        else if (!suffix.empty())
          throw std::invalid_argument("unexpected slot suffix: " + raw);
        if (inner.empty()) throw std::invalid_argument("empty slot marker");
        item.type = PatternItem::Type::slot;
        item.slot_kind = inner[0];
        item.slot_index = inner.size() > 1 ? std::stoi(inner.substr(1)) : 1;
        item.plural = plural;
        if (std::string("ZCMSRAQ").find(item.slot_kind) == std::string::npos)
          throw std::invalid_argument("unknown slot kind: " + raw);
      } else {
        item.type = PatternItem::Type::word;
        item.text = raw;
      }
      items.push_back(std::move(item));
    }
    for (char c : punct) {
      PatternItem p;
      p.type = PatternItem::Type::punct;
      p.text = std::string(1, c);
      p.optional_group = optional_group;
      items.push_back(std::move(p));
    }
  }
  if (optional_group >= 0) throw std::invalid_argument("unterminated optional segment");
  return items;
}

// Follows the same_<A> output through set operations to the group whose
// filters consume it.
int find_matching_target(const std::vector<SkeletonNode>& skeleton) {
  int at = -1;
  for (size_t i = 0; i < skeleton.size(); ++i)
    if (skeleton[i].op == Op::same) at = static_cast<int>(i);
  if (at < 0) return -1;
  for (;;) {
    int consumer = -1;
    for (size_t i = 0; i < skeleton.size(); ++i) {
      for (int in : skeleton[i].inputs)
        if (in == at) consumer = static_cast<int>(i);
    }
    if (consumer < 0) return -1;
    const SkeletonNode& node = skeleton[consumer];
    if (node.op == Op::filter_group) return node.group;
    if (node.op == Op::set_union || node.op == Op::set_intersect) { at = consumer; continue; }
    return -1;
  }
}

Template make_template(std::string family, std::string text, AnswerKind kind,
                       std::vector<SkeletonNode> skeleton) {
  Template tpl;
  tpl.family = std::move(family);
  tpl.pattern_text = std::move(text);
  tpl.pattern = parse_pattern(tpl.pattern_text);
  tpl.skeleton = std::move(skeleton);
  tpl.answer_kind = kind;

  for (const PatternItem& item : tpl.pattern) {
    if (item.type != PatternItem::Type::slot) continue;
    switch (item.slot_kind) {
      case 'Z': case 'C': case 'M': case 'S':
        tpl.group_count = std::max(tpl.group_count, item.slot_index);
        break;
      case 'R':
        if (std::find(tpl.relation_slots.begin(), tpl.relation_slots.end(),
                      item.slot_index) == tpl.relation_slots.end())
          tpl.relation_slots.push_back(item.slot_index);
        break;
      case 'A': tpl.has_matched_property = true; break;
      case 'Q': tpl.has_queried_property = true; break;
    }
  }
  std::sort(tpl.relation_slots.begin(), tpl.relation_slots.end());
  tpl.counting = !tpl.skeleton.empty() && tpl.skeleton.back().op == Op::count;
  tpl.matching_target_group = find_matching_target(tpl.skeleton);
  return tpl;
}

std::vector<Template> build_builtins() {
  std::vector<Template> t;

  t.push_back(make_template(
      "embed_spa_mat",
      "Is there a <Z> <C> <M> <S> that is the same <A> as the <Z2> <C2> <M2> <S2> "
      "<R> the <Z3> <C3> <M3> <S3>?",
      AnswerKind::boolean_answer,
      {sk_scene(), sk_fg(3, 0), sk_uniq(1), sk_relate(1, 2), sk_fg(2, 3), sk_uniq(4),
       sk_same(5), sk_fg(1, 6), sk_exist(7)}));

  t.push_back(make_template(
      "embed_mat_spa",
      "Is there a <Z> <C> <M> <S> <R> the <Z2> <C2> <M2> <S2> that is the same <A> "
      "as <Z3> <C3> <M3> <S3>?",
      AnswerKind::boolean_answer,
      {sk_scene(), sk_fg(3, 0), sk_uniq(1), sk_same(2), sk_fg(2, 3), sk_uniq(4),
       sk_relate(1, 5), sk_fg(1, 6), sk_exist(7)}));

  t.push_back(make_template(
      "compare_mat",
      "There is another <Z> <C> <M> <S> that is the same <A> as the <Z2> <C2> <M2> "
      "<S2>; does it have the same <Q> as the <Z3> <C3> <M3> <S3>?",
      AnswerKind::boolean_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_same(2), sk_fg(1, 3), sk_uniq(4),
       sk_scene(), sk_fg(3, 6), sk_uniq(7), sk_equal(5, 8)}));

  t.push_back(make_template(
      "compare_mat_spa",
      "There is another <Z> <C> <M> <S> that is the same <A> as the <Z2> <C2> <M2> "
      "<S2>; does it have the same <Q> as the <Z3> <C3> <M3> <S3> [that is] <R2> the "
      "<Z4> <C4> <M4> <S4>?",
      AnswerKind::boolean_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_same(2), sk_fg(1, 3), sk_uniq(4),
       sk_scene(), sk_fg(4, 6), sk_uniq(7), sk_relate(2, 8), sk_fg(3, 9), sk_uniq(10),
       sk_equal(5, 11)}));

  t.push_back(make_template(
      "and_mat_spa",
      "What is the <Q> of the <Z> <C> <M> <S> that is <R2> the <Z2> <C2> <M2> <S2> "
      "and is the same <A> as the <Z3> <C3> <M3> <S3>?",
      AnswerKind::attribute_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_relate(2, 2), sk_scene(), sk_fg(3, 4),
       sk_uniq(5), sk_same(6), sk_intersect(3, 7), sk_fg(1, 8), sk_uniq(9),
       sk_query(10)}));

  t.push_back(make_template(
      "or_mat",
      "How many things are [either] <Z> <C> <M> <S>s or <Z2> <C2> <M2> <S2>s that "
      "are the same <A> as the <Z3> <C3> <M3> <S3>?",
      AnswerKind::integer_answer,
      {sk_scene(), sk_fg(1, 0), sk_scene(), sk_fg(3, 2), sk_uniq(3), sk_same(4),
       sk_fg(2, 5), sk_union(1, 6), sk_count(7)}));

  t.push_back(make_template(
      "or_mat_spa",
      "How many things are [either] <Z> <C> <M> <S>s [that are] <R> the <Z2> <C2> "
      "<M2> <S2> or <Z3> <C3> <M3> <S3>s that are the same <A> as the <Z4> <C4> "
      "<M4> <S4>?",
      AnswerKind::integer_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_relate(1, 2), sk_fg(1, 3), sk_scene(),
       sk_fg(4, 5), sk_uniq(6), sk_same(7), sk_fg(3, 8), sk_union(4, 9),
       sk_count(10)}));

  const std::string embed_base_text =
      "Is there a <Z> <C> <M> <S> [that is] <R> the <Z2> <C2> <M2> <S2> [that is] "
      "<R2> the <Z3> <C3> <M3> <S3>?";
  const std::vector<SkeletonNode> embed_base_skel = {
      sk_scene(), sk_fg(3, 0), sk_uniq(1), sk_relate(2, 2), sk_fg(2, 3), sk_uniq(4),
      sk_relate(1, 5), sk_fg(1, 6), sk_exist(7)};
  t.push_back(make_template("embed_spa_mat_base", embed_base_text,
                            AnswerKind::boolean_answer, embed_base_skel));
  t.push_back(make_template("embed_mat_spa_base", embed_base_text,
                            AnswerKind::boolean_answer, embed_base_skel));

  t.push_back(make_template(
      "compare_mat_base",
      "There is a <Z> <C> <M> <S> [that is] <R> the <Z2> <C2> <M2> <S2>; does it "
      "have the same <Q> as the <Z3> <C3> <M3> <S3>?",
      AnswerKind::boolean_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_relate(1, 2), sk_fg(1, 3), sk_uniq(4),
       sk_scene(), sk_fg(3, 6), sk_uniq(7), sk_equal(5, 8)}));

  t.push_back(make_template(
      "compare_mat_spa_base",
      "There is a <Z> <C> <M> <S> [that is] <R> the <Z2> <C2> <M2> <S2>; does it "
      "have the same <Q> as the <Z3> <C3> <M3> <S3> [that is] <R2> the <Z4> <C4> "
      "<M4> <S4>?",
      AnswerKind::boolean_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_relate(1, 2), sk_fg(1, 3), sk_uniq(4),
       sk_scene(), sk_fg(4, 6), sk_uniq(7), sk_relate(2, 8), sk_fg(3, 9), sk_uniq(10),
       sk_equal(5, 11)}));

  t.push_back(make_template(
      "and_mat_spa_base",
      "What is the <Q> of the <Z> <C> <M> <S> that is [both] <R> the <Z2> <C2> <M2> "
      "<S2> and <R2> the <Z3> <C3> <M3> <S3>?",
      AnswerKind::attribute_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_relate(1, 2), sk_scene(), sk_fg(3, 4),
       sk_uniq(5), sk_relate(2, 6), sk_intersect(3, 7), sk_fg(1, 8), sk_uniq(9),
       sk_query(10)}));

  t.push_back(make_template(
      "or_mat_base",
      "How many things are [either] <Z> <C> <M> <S>s or <Z2> <C2> <M2> <S2>s [that "
      "are] <R> the <Z3> <C3> <M3> <S3>?",
      AnswerKind::integer_answer,
      {sk_scene(), sk_fg(1, 0), sk_scene(), sk_fg(3, 2), sk_uniq(3), sk_relate(1, 4),
       sk_fg(2, 5), sk_union(1, 6), sk_count(7)}));

  t.push_back(make_template(
      "or_mat_spa_base",
      "How many things are [either] <Z> <C> <M> <S>s [that are] <R> the <Z2> <C2> "
      "<M2> <S2> or <Z3> <C3> <M3> <S3>s [that are] <R2> the <Z4> <C4> <M4> <S4>?",
      AnswerKind::integer_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_relate(1, 2), sk_fg(1, 3), sk_scene(),
       sk_fg(4, 5), sk_uniq(6), sk_relate(2, 7), sk_fg(3, 8), sk_union(4, 9),
       sk_count(10)}));

  return t;
}

const std::string kVowels = "aeiou";

std::string pluralize(const std::string& noun) {
  static const std::map<std::string, std::string> table = {
      {"thing", "things"}, {"object", "objects"}, {"cube", "cubes"},
      {"sphere", "spheres"}, {"cylinder", "cylinders"}};
  auto it = table.find(noun);
  if (it == table.end()) throw std::invalid_argument("no plural form for: " + noun);
  return it->second;
}

}  // namespace

const std::vector<Template>& builtin_templates() {
  static const std::vector<Template> templates = build_builtins();
  return templates;
}

const Template& auxiliary_query_template() {
  static const Template tpl = make_template(
      "query_mat",
      "There is another <Z> <C> <M> <S> that is the same <A> as the <Z2> <C2> <M2> "
      "<S2>; what is its <Q>?",
      AnswerKind::attribute_answer,
      {sk_scene(), sk_fg(2, 0), sk_uniq(1), sk_same(2), sk_fg(1, 3), sk_uniq(4),
       sk_query(5)});
  return tpl;
}

const std::vector<Template>& parser_templates() {
  static const std::vector<Template> templates = [] {
    std::vector<Template> all = builtin_templates();
    all.push_back(auxiliary_query_template());
    return all;
  }();
  return templates;
}

const Template& find_template(std::string_view family) {
  for (const Template& tpl : parser_templates())
    if (tpl.family == family) return tpl;
  throw std::invalid_argument("unknown template family: " + std::string(family));
}

const std::vector<std::pair<std::string, Direction>>& relation_phrases() {
  static const std::vector<std::pair<std::string, Direction>> phrases = {
      {"left of", Direction::left},
      {"right of", Direction::right},
      {"in front of", Direction::front},
      {"behind", Direction::behind}};
  return phrases;
}

Direction direction_from_phrase(std::string_view phrase) {
  for (const auto& [text, dir] : relation_phrases())
    if (text == phrase) return dir;
  throw std::invalid_argument("unknown spatial phrase: " + std::string(phrase));
}

bool properties_admissible(const Template& tpl, const std::string& matched,
                           const std::string& queried) {
  bool has_query = false, has_same = false;
  for (const SkeletonNode& node : tpl.skeleton) {
    has_query |= node.op == Op::query;
    has_same |= node.op == Op::same;
  }
  // When the queried object is itself the matched referent, Q = A would make
  // the question text force the answer.
  if (has_query && has_same && matched == queried) return false;
  return true;
}

void fill_properties(const Template& tpl, SlotBinding& binding, Rng& rng) {
  if (!tpl.has_matched_property && !tpl.has_queried_property) return;
  const auto& props = property_words();
  for (;;) {
    std::string a = tpl.has_matched_property ? props[rng.below(props.size())] : "";
    std::string q = tpl.has_queried_property ? props[rng.below(props.size())] : "";
    if (!properties_admissible(tpl, a, q)) continue;
    binding.matched_property = a;
    binding.queried_property = q;
    return;
  }
}

namespace {

const SlotBinding::Group& group_at(const Template& tpl, const SlotBinding& binding,
                                   int index) {
  if (index > static_cast<int>(binding.groups.size()))
    throw std::invalid_argument("unbound slot group " + std::to_string(index) +
                                " in template " + tpl.family);
  return binding.groups[index - 1];
}

std::string slot_value(const Template& tpl, const SlotBinding& binding,
                       const PatternItem& item) {
  switch (item.slot_kind) {
    case 'Z': return group_at(tpl, binding, item.slot_index).size;
    case 'C': return group_at(tpl, binding, item.slot_index).color;
    case 'M': return group_at(tpl, binding, item.slot_index).material;
    case 'S': {
      const std::string& noun = group_at(tpl, binding, item.slot_index).noun;
      if (noun.empty())
        throw std::invalid_argument("unbound slot <S" +
                                    std::to_string(item.slot_index) + ">");
      return item.plural ? pluralize(noun) : noun;
    }
    case 'R': {
      auto it = binding.relations.find(item.slot_index);
      if (it == binding.relations.end() || it->second.empty())
        throw std::invalid_argument("unbound slot <R" +
                                    std::to_string(item.slot_index) + ">");
      return it->second;
    }
    case 'A':
      if (binding.matched_property.empty())
        throw std::invalid_argument("unbound slot <A>");
      return binding.matched_property;
    case 'Q':
      if (binding.queried_property.empty())
        throw std::invalid_argument("unbound slot <Q>");
      return binding.queried_property;
  }
  throw std::logic_error("bad slot kind");
}

}  // namespace

std::string render_text(const Template& tpl, const SlotBinding& binding, Rng& rng) {
  // One keep/drop draw per optional segment, in order of appearance.
  int max_group = -1;
  for (const PatternItem& item : tpl.pattern)
    max_group = std::max(max_group, item.optional_group);
  std::vector<bool> keep(static_cast<size_t>(max_group) + 1);
  for (int g = 0; g <= max_group; ++g) keep[g] = rng.flip();

  std::vector<std::string> words;
  std::string punct_tail;
  for (const PatternItem& item : tpl.pattern) {
    if (item.optional_group >= 0 && !keep[item.optional_group]) continue;
    std::string piece;
    switch (item.type) {
      case PatternItem::Type::word: piece = item.text; break;
      case PatternItem::Type::slot: piece = slot_value(tpl, binding, item); break;
      case PatternItem::Type::punct:
        if (words.empty()) throw std::logic_error("pattern starts with punctuation");
        words.back() += item.text;
        continue;
    }
    if (piece.empty()) continue;  // blank adjective slot
    words.push_back(std::move(piece));
  }

  // Article agreement: "a" -> "an" before a vowel-initial word.
  for (size_t i = 0; i + 1 < words.size(); ++i)
    if (words[i] == "a" && kVowels.find(words[i + 1][0]) != std::string::npos)
      words[i] = "an";

  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

Program instantiate_program(const Template& tpl, const SlotBinding& binding) {
  Program prog;
  std::vector<int> result_of(tpl.skeleton.size());  // program node producing each skeleton output

  auto emit = [&prog](std::string name, std::vector<int> inputs) {
    prog.nodes.push_back({std::move(name), std::move(inputs)});
    return static_cast<int>(prog.nodes.size()) - 1;
  };

  for (size_t i = 0; i < tpl.skeleton.size(); ++i) {
    const SkeletonNode& node = tpl.skeleton[i];
    std::vector<int> in;
    in.reserve(node.inputs.size());
    for (int s : node.inputs) in.push_back(result_of[s]);

    switch (node.op) {
      case Op::scene:
        result_of[i] = emit("scene", {});
        break;
      case Op::filter_group: {
        const SlotBinding::Group& group = group_at(tpl, binding, node.group);
        int cur = in[0];
        if (!group.size.empty()) cur = emit("filter_size[" + group.size + "]", {cur});
        if (!group.color.empty()) cur = emit("filter_color[" + group.color + "]", {cur});
        if (!group.material.empty())
          cur = emit("filter_material[" + group.material + "]", {cur});
        if (group.noun.empty())
          throw std::invalid_argument("unbound slot <S" + std::to_string(node.group) + ">");
        if (group.noun != "thing" && group.noun != "object")
          cur = emit("filter_shape[" + group.noun + "]", {cur});
        result_of[i] = cur;
        break;
      }
      case Op::unique:
        result_of[i] = emit("unique", in);
        break;
      case Op::relate: {
        auto it = binding.relations.find(node.r_index);
        if (it == binding.relations.end())
          throw std::invalid_argument("unbound slot <R" + std::to_string(node.r_index) + ">");
        result_of[i] = emit("relate[" + to_word(direction_from_phrase(it->second)) + "]", in);
        break;
      }
      case Op::same:
        if (binding.matched_property.empty())
          throw std::invalid_argument("unbound slot <A>");
        result_of[i] = emit("same_" + binding.matched_property, in);
        break;
      case Op::query:
        if (binding.queried_property.empty())
          throw std::invalid_argument("unbound slot <Q>");
        result_of[i] = emit("query_" + binding.queried_property, in);
        break;
      case Op::equal:
        if (binding.queried_property.empty())
          throw std::invalid_argument("unbound slot <Q>");
        result_of[i] = emit("equal_" + binding.queried_property, in);
        break;
      case Op::set_union:
        result_of[i] = emit("union", in);
        break;
      case Op::set_intersect:
        result_of[i] = emit("intersect", in);
        break;
      case Op::count:
        result_of[i] = emit("count", in);
        break;
      case Op::exist:
        result_of[i] = emit("exist", in);
        break;
    }
  }
  return prog;
}

namespace {

std::string answer_kind_word(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::boolean_answer: return "boolean";
    case AnswerKind::integer_answer: return "integer";
    case AnswerKind::attribute_answer: return "attribute";
  }
  throw std::logic_error("bad answer kind");
}

AnswerKind answer_kind_from_word(const std::string& word) {
  if (word == "boolean") return AnswerKind::boolean_answer;
  if (word == "integer") return AnswerKind::integer_answer;
  if (word == "attribute") return AnswerKind::attribute_answer;
  throw std::invalid_argument("unknown answer kind: " + word);
}

std::string op_word(Op op) {
  switch (op) {
    case Op::scene: return "scene";
    case Op::filter_group: return "filter_group";
    case Op::unique: return "unique";
    case Op::relate: return "relate";
    case Op::same: return "same";
    case Op::query: return "query";
    case Op::equal: return "equal";
    case Op::set_union: return "union";
    case Op::set_intersect: return "intersect";
    case Op::count: return "count";
    case Op::exist: return "exist";
  }
  throw std::logic_error("bad skeleton op");
}

Op op_from_word(const std::string& word) {
  static const std::map<std::string, Op> table = {
      {"scene", Op::scene},   {"filter_group", Op::filter_group},
      {"unique", Op::unique}, {"relate", Op::relate},
      {"same", Op::same},     {"query", Op::query},
      {"equal", Op::equal},   {"union", Op::set_union},
      {"intersect", Op::set_intersect}, {"count", Op::count},
      {"exist", Op::exist}};
  auto it = table.find(word);
  if (it == table.end()) throw std::invalid_argument("unknown skeleton op: " + word);
  return it->second;
}

}  // namespace

std::string template_to_json(const Template& tpl, int indent) {
  nlohmann::ordered_json jt;
  jt["family"] = tpl.family;
  jt["answer_kind"] = answer_kind_word(tpl.answer_kind);
  jt["text"] = tpl.pattern_text;
  jt["skeleton"] = nlohmann::ordered_json::array();
  for (const SkeletonNode& node : tpl.skeleton) {
    nlohmann::ordered_json jn;
    jn["op"] = op_word(node.op);
    if (node.op == Op::filter_group) jn["group"] = node.group;
    if (node.op == Op::relate) jn["relation"] = node.r_index;
    jn["inputs"] = node.inputs;
    jt["skeleton"].push_back(std::move(jn));
  }
  return jt.dump(indent);
}

Template template_from_json(const std::string& text) {
  const auto jt = nlohmann::json::parse(text);
  std::vector<SkeletonNode> skeleton;
  for (const auto& jn : jt.at("skeleton")) {
    SkeletonNode node;
    node.op = op_from_word(jn.at("op").get<std::string>());
    node.group = jn.value("group", 0);
    node.r_index = jn.value("relation", 1);
    node.inputs = jn.at("inputs").get<std::vector<int>>();
    skeleton.push_back(std::move(node));
  }
  return make_template(jt.at("family").get<std::string>(),
                       jt.at("text").get<std::string>(),
                       answer_kind_from_word(jt.at("answer_kind").get<std::string>()),
                       std::move(skeleton));
}

std::vector<Template> load_templates_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  const auto root = nlohmann::json::parse(in);
  std::vector<Template> out;
  for (const auto& jt : root) out.push_back(template_from_json(jt.dump()));
  return out;
}

}  // namespace svqa
