#include "svqa/executor.hpp"

#include <bit>

namespace svqa {

namespace {

uint32_t full_mask(const Scene& scene) {
  return (1u << scene.objects.size()) - 1u;
}

Value eval_node(const FunctionToken& tok, const ProgramNode& node,
                const std::vector<Value>& slots, const Scene& scene) {
  Value out;
  out.kind = tok.output_kind.kind;
  switch (tok.op) {
    case OpCode::scene:
      out.set = full_mask(scene);
      break;
    case OpCode::filter: {
      uint32_t result = 0;
      uint32_t in = slots[node.inputs[0]].set;
      while (in) {
        const int id = std::countr_zero(in);
        in &= in - 1;
        if (scene.objects[id].attrs.value(tok.prop) == tok.filter_value)
          result |= 1u << id;
      }
      out.set = result;
      break;
    }
    case OpCode::unique: {
      const uint32_t in = slots[node.inputs[0]].set;
      if (std::popcount(in) != 1)
        throw UniqueViolation("unique applied to a set of size " +
                              std::to_string(std::popcount(in)));
      out.ref = std::countr_zero(in);
      break;
    }
    case OpCode::relate: {
      const SceneObject& anchor = scene.objects[slots[node.inputs[0]].ref];
      uint32_t result = 0;
      for (const SceneObject& obj : scene.objects) {
        if (obj.id == anchor.id) continue;
        bool related = false;
        switch (tok.dir) {
          case Direction::left: related = obj.position[0] < anchor.position[0]; break;
          case Direction::right: related = obj.position[0] > anchor.position[0]; break;
          case Direction::front: related = obj.position[1] < anchor.position[1]; break;
          case Direction::behind: related = obj.position[1] > anchor.position[1]; break;
        }
        if (related) result |= 1u << obj.id;
      }
      out.set = result;
      break;
    }
    case OpCode::same: {
      const SceneObject& anchor = scene.objects[slots[node.inputs[0]].ref];
      uint32_t result = 0;
      for (const SceneObject& obj : scene.objects) {
        if (obj.id == anchor.id) continue;
        if (obj.attrs.value(tok.prop) == anchor.attrs.value(tok.prop))
          result |= 1u << obj.id;
      }
      out.set = result;
      break;
    }
    case OpCode::set_union:
      out.set = slots[node.inputs[0]].set | slots[node.inputs[1]].set;
      break;
    case OpCode::set_intersect:
      out.set = slots[node.inputs[0]].set & slots[node.inputs[1]].set;
      break;
    case OpCode::count:
      out.integer = std::popcount(slots[node.inputs[0]].set);
      break;
    case OpCode::exist:
      out.boolean = slots[node.inputs[0]].set != 0;
      break;
    case OpCode::query: {
      const SceneObject& obj = scene.objects[slots[node.inputs[0]].ref];
      out.attr_prop = tok.prop;
      out.attr_value = obj.attrs.value(tok.prop);
      break;
    }
    case OpCode::equal_attr: {
      const SceneObject& a = scene.objects[slots[node.inputs[0]].ref];
      const SceneObject& b = scene.objects[slots[node.inputs[1]].ref];
      out.boolean = a.attrs.value(tok.prop) == b.attrs.value(tok.prop);
      break;
    }
    case OpCode::equal_int:
      out.boolean = slots[node.inputs[0]].integer == slots[node.inputs[1]].integer;
      break;
    case OpCode::greater_int:
      out.boolean = slots[node.inputs[0]].integer > slots[node.inputs[1]].integer;
      break;
    case OpCode::less_int:
      out.boolean = slots[node.inputs[0]].integer < slots[node.inputs[1]].integer;
      break;
  }
  return out;
}

std::string run(const TypedProgram& program, const Scene& scene,
                int override_node, uint32_t override_set) {
  const auto& nodes = program.program.nodes;
  std::vector<Value> slots(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    slots[i] = eval_node(*program.tokens[i], nodes[i], slots, scene);
    if (static_cast<int>(i) == override_node) slots[i].set = override_set;
  }
  return render_answer(slots.back());
}

}  // namespace

std::string render_answer(const Value& value) {
  switch (value.kind) {
    case Kind::boolean: return value.boolean ? "yes" : "no";
    case Kind::integer: return std::to_string(value.integer);
    case Kind::attribute: return property_values(value.attr_prop)[value.attr_value];
    default:
      throw std::logic_error("only Integer, Boolean, and Attribute values render as answers");
  }
}

std::string execute(const TypedProgram& program, const Scene& scene) {
  return run(program, scene, -1, 0);
}

std::string execute_with_override(const TypedProgram& program, const Scene& scene,
                                  int override_node, uint32_t override_set) {
  return run(program, scene, override_node, override_set);
}

bool is_degenerate(const TypedProgram& program, const Scene& scene) {
  const auto& nodes = program.program.nodes;
  // consumer[i] = position of the node that takes node i as input (tree shape).
  std::vector<int> consumer(nodes.size(), -1);
  for (size_t i = 0; i < nodes.size(); ++i)
    for (int in : nodes[i].inputs) consumer[size_t(in)] = static_cast<int>(i);

  // The check covers relations inside referring expressions: relation nodes
  // whose output flows into a unique. Relations feeding only exist/count roots
  // constrain the answer, not the identification of a referent, and existence
  // is monotone in the bypassed set, so bypassing them proves nothing.
  auto feeds_unique = [&](size_t i) {
    for (int c = consumer[i]; c != -1; c = consumer[size_t(c)]) {
      if (program.tokens[size_t(c)]->op == OpCode::unique) return true;
    }
    return false;
  };

  const std::string original = execute(program, scene);
  for (size_t i = 0; i < program.tokens.size(); ++i) {
    const OpCode op = program.tokens[i]->op;
    if (op != OpCode::relate && op != OpCode::same) continue;
    if (!feeds_unique(i)) continue;
    try {
      if (execute_with_override(program, scene, static_cast<int>(i), full_mask(scene)) ==
          original)
        return true;
    } catch (const UniqueViolation&) {
      // Bypassing this relation breaks a downstream unique; not degenerate via it.
    }
  }
  return false;
}

}  // namespace svqa
