#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <string>

#include "brute_program.hpp"
#include "doctest.h"
#include "json.hpp"
#include "svqa/dsl.hpp"
#include "svqa/rng.hpp"

using namespace svqa;

namespace {

Program p1() {
  return Program{{{"scene", {}},
                  {"filter_color[brown]", {0}},
                  {"filter_shape[cube]", {1}},
                  {"unique", {2}},
                  {"same_size", {3}},
                  {"filter_shape[cube]", {4}},
                  {"unique", {5}},
                  {"query_color", {6}}}};
}

Program p2() {
  return Program{{{"scene", {}},
                  {"filter_color[yellow]", {0}},
                  {"unique", {1}},
                  {"relate[front]", {2}},
                  {"unique", {3}},
                  {"scene", {}},
                  {"filter_shape[cylinder]", {5}},
                  {"unique", {6}},
                  {"equal_color", {4, 7}}}};
}

std::string thrown_message(const Program& program) {
  try {
    validate(program);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("catalog contents") {
  CHECK(catalog().size() == 40);

  const FunctionToken* brown = find_token("filter_color[brown]");
  REQUIRE(brown != nullptr);
  CHECK(brown->arity == 1);
  CHECK(brown->input_kinds[0].kind == Kind::object_set);
  CHECK(brown->output_kind.kind == Kind::object_set);

  const FunctionToken* same = find_token("same_size");
  REQUIRE(same != nullptr);
  CHECK(same->input_kinds[0].kind == Kind::object_ref);
  CHECK(same->output_kind.kind == Kind::object_set);

  int color_filters = 0;
  for (const FunctionToken& t : catalog())
    if (t.name.rfind("filter_color[", 0) == 0) ++color_filters;
  CHECK(color_filters == 8);

  CHECK(find_token("scene")->arity == 0);
  CHECK(find_token("union")->arity == 2);
  CHECK(find_token("equal_integer")->input_kinds[0].kind == Kind::integer);
  CHECK(find_token("flavor") == nullptr);
}

TEST_CASE("validate accepts the example programs") {
  const TypedProgram t1 = validate(p1());
  CHECK(t1.kinds.back().kind == Kind::attribute);
  const TypedProgram t2 = validate(p2());
  CHECK(t2.kinds.back().kind == Kind::boolean);
}

TEST_CASE("validate diagnostics") {
  CHECK(thrown_message(Program{}).find("empty") != std::string::npos);

  // equal_color over two sets: kind mismatch
  Program sets{{{"scene", {}},
                {"filter_color[red]", {0}},
                {"scene", {}},
                {"filter_color[blue]", {2}},
                {"equal_color", {1, 3}}}};
  CHECK_THROWS_AS(validate(sets), ValidationError);

  // forward reference
  Program forward{{{"exist", {1}}, {"scene", {}}}};
  CHECK_THROWS_AS(validate(forward), ValidationError);

  // shared node: tree violation
  Program shared{{{"scene", {}},
                  {"unique", {0}},
                  {"same_size", {1}},
                  {"union", {0, 2}},
                  {"exist", {3}}}};
  CHECK_THROWS_AS(validate(shared), ValidationError);

  // arity mismatch
  Program arity{{{"scene", {}}, {"scene", {}}, {"count", {0, 1}}}};
  CHECK_THROWS_AS(validate(arity), ValidationError);

  // unknown token
  Program unknown{{{"scene", {}}, {"filter_flavor[sweet]", {0}}, {"exist", {1}}}};
  CHECK_THROWS_AS(validate(unknown), ValidationError);

  // non-scalar root
  Program setroot{{{"scene", {}}, {"filter_color[red]", {0}}}};
  CHECK_THROWS_AS(validate(setroot), ValidationError);

  // unconsumed node
  Program dangling{{{"scene", {}}, {"scene", {}}, {"exist", {1}}}};
  CHECK_THROWS_AS(validate(dangling), ValidationError);
}

TEST_CASE("serialization round trip") {
  Rng rng(404);
  for (int i = 0; i < 1000; ++i) {
    const Program p = brute::RandomProgram::build(rng, 2 + int(rng.below(11)));
    CHECK(program_from_json(program_to_json(p)) == p);
  }
}

TEST_CASE("single node serialization") {
  const Program p{{{"scene", {}}}};
  const nlohmann::json j = nlohmann::json::parse(program_to_json(p));
  REQUIRE(j.size() == 1);
  CHECK(j[0]["function"] == "scene");
  CHECK(j[0]["inputs"].empty());
}

TEST_CASE("malformed program text") {
  CHECK_THROWS(program_from_json("not json"));
  CHECK_THROWS(program_from_json("{\"function\": \"scene\"}"));  // not an array
}

TEST_CASE("hand-written program file matches the in-code tree") {
  // Two chained referring expressions joined by same_size, eight nodes in
  // total, query_color at the root.
  const char* text = R"([
    {"function": "scene", "inputs": []},
    {"function": "filter_color[brown]", "inputs": [0]},
    {"function": "filter_shape[cube]", "inputs": [1]},
    {"function": "unique", "inputs": [2]},
    {"function": "same_size", "inputs": [3]},
    {"function": "filter_shape[cube]", "inputs": [4]},
    {"function": "unique", "inputs": [5]},
    {"function": "query_color", "inputs": [6]}
  ])";
  std::ofstream("p1.json") << text;
  const Program p = program_from_file("p1.json");
  CHECK(p.nodes.size() == 8);
  CHECK(p.nodes.back().function == "query_color");
  CHECK(p == p1());
  validate(p);
}

TEST_CASE("tree isomorphism") {
  Rng rng(77);
  CHECK(programs_isomorphic(p1(), p1()));
  CHECK(!programs_isomorphic(p1(), p2()));
  for (int i = 0; i < 200; ++i) {
    const Program p = brute::RandomProgram::build(rng, 2 + int(rng.below(11)));
    const Program q = brute::shuffle_topological(p, rng);
    CHECK(programs_isomorphic(p, q));
    validate(q);
  }

  // same tokens, different wiring
  Program a{{{"scene", {}},
             {"filter_color[red]", {0}},
             {"filter_size[small]", {1}},
             {"exist", {2}}}};
  Program b{{{"scene", {}},
             {"filter_size[small]", {0}},
             {"filter_color[red]", {1}},
             {"exist", {2}}}};
  CHECK(!programs_isomorphic(a, b));
}

TEST_CASE("validate rejects kind-violating token swaps") {
  Rng rng(505);
  int checked = 0;
  for (int i = 0; i < 5000 && checked < 100; ++i) {
    Program p = brute::RandomProgram::build(rng, 2 + int(rng.below(11)));
    if (p.nodes.size() < 2) continue;
    // Swapping the root can stay legal (any scalar kind is a valid root), so
    // only rewire interior nodes where the consumer pins the expected kind.
    const size_t at = size_t(rng.below(uint64_t(p.nodes.size() - 1)));
    const FunctionToken* original = find_token(p.nodes[at].function);
    const FunctionToken& swapped = catalog()[size_t(rng.below(uint64_t(catalog().size())))];
    if (swapped.output_kind == original->output_kind ||
        swapped.arity != original->arity)
      continue;
    p.nodes[at].function = swapped.name;
    CHECK_THROWS_AS(validate(p), ValidationError);
    ++checked;
  }
  CHECK(checked == 100);
}
