#include "svqa/generator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace svqa {
namespace {

using ordered_json = nlohmann::ordered_json;

uint32_t full_mask(const Scene& scene) {
  return (uint32_t(1) << scene.objects.size()) - 1;
}

uint32_t spatial_mask(const Scene& scene, int anchor, Direction dir) {
  uint32_t out = 0;
  for (int id : spatial_set(scene, anchor, dir)) out |= uint32_t(1) << id;
  return out;
}

uint32_t match_mask(const Scene& scene, int anchor, Property prop) {
  uint32_t out = 0;
  for (int id : match_set(scene, anchor, prop)) out |= uint32_t(1) << id;
  return out;
}

uint32_t filter_mask(const Scene& scene, uint32_t in, const SlotBinding::Group& group) {
  uint32_t out = 0;
  for (uint32_t rest = in; rest != 0; rest &= rest - 1) {
    int id = std::countr_zero(rest);
    const ObjectAttributes& a = scene.objects[size_t(id)].attrs;
    if (!group.size.empty() && a.word(Property::size) != group.size) continue;
    if (!group.color.empty() && a.word(Property::color) != group.color) continue;
    if (!group.material.empty() && a.word(Property::material) != group.material) continue;
    if (group.noun != "thing" && group.noun != "object" &&
        a.word(Property::shape) != group.noun)
      continue;
    out |= uint32_t(1) << id;
  }
  return out;
}

// Fills one group's slots from a concrete target object. Each adjective slot
// is stated with probability 1/2; the noun names the shape with probability
// 1/2, otherwise "thing" or "object". Slots that must stay open (the matched
// property of the target group) are never stated.
void describe_target(const Scene& scene, int target, SlotBinding::Group& group,
                     std::optional<Property> forbidden, Rng& rng) {
  const ObjectAttributes& a = scene.objects[size_t(target)].attrs;
  auto stated = [&](Property p) {
    if (forbidden && *forbidden == p) return false;
    return rng.flip();
  };
  group.size = stated(Property::size) ? a.word(Property::size) : "";
  group.color = stated(Property::color) ? a.word(Property::color) : "";
  group.material = stated(Property::material) ? a.word(Property::material) : "";
  if (!(forbidden && *forbidden == Property::shape) && rng.flip())
    group.noun = a.word(Property::shape);
  else
    group.noun = rng.flip() ? "thing" : "object";
}

// Fills one group's slots without reference to any object: values are drawn
// uniformly from each property's vocabulary.
void describe_blind(SlotBinding::Group& group, std::optional<Property> forbidden,
                    Rng& rng) {
  auto stated = [&](Property p) {
    if (forbidden && *forbidden == p) return false;
    return rng.flip();
  };
  group.size = stated(Property::size) ? std::string(rng.pick(size_words())) : "";
  group.color = stated(Property::color) ? std::string(rng.pick(color_words())) : "";
  group.material =
      stated(Property::material) ? std::string(rng.pick(material_words())) : "";
  if (!(forbidden && *forbidden == Property::shape) && rng.flip())
    group.noun = rng.pick(shape_words());
  else
    group.noun = rng.flip() ? "thing" : "object";
}

int pick_member(uint32_t mask, Rng& rng) {
  int n = std::popcount(mask);
  int k = int(rng.below(uint64_t(n)));
  for (uint32_t rest = mask; rest != 0; rest &= rest - 1) {
    if (k-- == 0) return std::countr_zero(rest);
  }
  return -1;  // unreachable
}

// Walks the skeleton in order, sampling slot values as each filter group is
// reached. Groups that feed a `unique` node are described from a target
// object drawn from the group's input set and must isolate it exactly; other
// groups are described blind so their match sets stay unbiased. Returns
// nullopt when no uniquely-referring binding falls out of the draws.
bool sample_binding(const Template& tpl, const Scene& scene, Rng& rng,
                    SlotBinding& binding) {
  const auto& skel = tpl.skeleton;
  std::vector<int> consumer(skel.size(), -1);
  for (size_t i = 0; i < skel.size(); ++i)
    for (int in : skel[i].inputs) consumer[size_t(in)] = int(i);

  struct NodeValue {
    uint32_t set = 0;
    int ref = -1;
  };
  std::vector<NodeValue> values(skel.size());

  std::optional<Property> matched;
  if (tpl.has_matched_property)
    matched = property_from_word(binding.matched_property);

  for (size_t i = 0; i < skel.size(); ++i) {
    const SkeletonNode& node = skel[i];
    NodeValue& v = values[i];
    switch (node.op) {
      case SkeletonNode::Op::scene:
        v.set = full_mask(scene);
        break;
      case SkeletonNode::Op::filter_group: {
        uint32_t in = values[size_t(node.inputs[0])].set;
        SlotBinding::Group& group = binding.groups[size_t(node.group - 1)];
        std::optional<Property> forbidden;
        if (node.group == tpl.matching_target_group) forbidden = matched;
        bool guided = consumer[i] >= 0 &&
                      skel[size_t(consumer[i])].op == SkeletonNode::Op::unique;
        if (guided) {
          if (in == 0) return false;
          bool isolated = false;
          for (int attempt = 0; attempt < 4 && !isolated; ++attempt) {
            int target = pick_member(in, rng);
            describe_target(scene, target, group, forbidden, rng);
            v.set = filter_mask(scene, in, group);
            isolated = v.set == (uint32_t(1) << target);
          }
          if (!isolated) return false;
        } else {
          describe_blind(group, forbidden, rng);
          v.set = filter_mask(scene, in, group);
        }
        break;
      }
      case SkeletonNode::Op::unique: {
        uint32_t in = values[size_t(node.inputs[0])].set;
        if (std::popcount(in) != 1) return false;
        v.ref = std::countr_zero(in);
        break;
      }
      case SkeletonNode::Op::relate: {
        auto it = binding.relations.find(node.r_index);
        if (it == binding.relations.end()) {
          it = binding.relations
                   .emplace(node.r_index, rng.pick(relation_phrases()).first)
                   .first;
        }
        Direction dir = direction_from_phrase(it->second);
        v.set = spatial_mask(scene, values[size_t(node.inputs[0])].ref, dir);
        break;
      }
      case SkeletonNode::Op::same:
        v.set = match_mask(scene, values[size_t(node.inputs[0])].ref, *matched);
        break;
      case SkeletonNode::Op::set_union:
        v.set = values[size_t(node.inputs[0])].set | values[size_t(node.inputs[1])].set;
        break;
      case SkeletonNode::Op::set_intersect:
        v.set = values[size_t(node.inputs[0])].set & values[size_t(node.inputs[1])].set;
        break;
      case SkeletonNode::Op::query:
      case SkeletonNode::Op::equal:
      case SkeletonNode::Op::count:
      case SkeletonNode::Op::exist:
        break;  // answer nodes play no part in binding construction
    }
  }
  return true;
}

GenOutcome reject(RejectReason reason) { return GenOutcome{std::nullopt, reason}; }

}  // namespace

std::string to_word(RejectReason reason) {
  switch (reason) {
    case RejectReason::none: return "none";
    case RejectReason::unique_violation: return "unique_violation";
    case RejectReason::degenerate: return "degenerate";
    case RejectReason::answer_disallowed: return "answer_disallowed";
    case RejectReason::no_binding_found: return "no_binding_found";
  }
  return "?";
}

void GenStats::add(const GenStats& other) {
  attempts += other.attempts;
  accepted += other.accepted;
  no_binding_found += other.no_binding_found;
  unique_violation += other.unique_violation;
  answer_disallowed += other.answer_disallowed;
  degenerate += other.degenerate;
}

GenOutcome generate_candidate(const Template& tpl, const Scene& scene, Rng& rng,
                              const std::vector<int>& counting_answers) {
  SlotBinding binding;
  binding.groups.resize(size_t(tpl.group_count));
  fill_properties(tpl, binding, rng);
  if (!sample_binding(tpl, scene, rng, binding)) {
    return reject(RejectReason::no_binding_found);
  }

  QAInstance inst;
  inst.image_index = scene.scene_index;
  inst.split = scene.split;
  inst.template_family = tpl.family;
  inst.program = instantiate_program(tpl, binding);

  TypedProgram typed = validate(inst.program);
  try {
    inst.answer = execute(typed, scene);
  } catch (const UniqueViolation&) {
    return reject(RejectReason::unique_violation);
  }

  if (tpl.counting) {
    int n = std::stoi(inst.answer);
    if (std::find(counting_answers.begin(), counting_answers.end(), n) ==
        counting_answers.end()) {
      return reject(RejectReason::answer_disallowed);
    }
  }

  inst.question = render_text(tpl, binding, rng);
  return GenOutcome{std::move(inst), RejectReason::none};
}

GenOutcome generate_instance(const Template& tpl, const Scene& scene, Rng& rng,
                             const std::vector<int>& counting_answers) {
  GenOutcome out = generate_candidate(tpl, scene, rng, counting_answers);
  if (!out.instance) return out;
  TypedProgram typed = validate(out.instance->program);
  if (is_degenerate(typed, scene)) return reject(RejectReason::degenerate);
  return out;
}

BalancePolicy BalancePolicy::for_template(const Template& tpl,
                                          const std::vector<int>& counting_answers) {
  BalancePolicy policy;
  switch (tpl.answer_kind) {
    case AnswerKind::integer_answer: {
      double p = 1.0 / double(counting_answers.size());
      for (int n : counting_answers) policy.targets.emplace_back(std::to_string(n), p);
      break;
    }
    case AnswerKind::boolean_answer:
      policy.targets.emplace_back("yes", 0.5);
      policy.targets.emplace_back("no", 0.5);
      break;
    case AnswerKind::attribute_answer: {
      for (int p = 0; p < kNumProperties; ++p) {
        auto values = property_values(Property(p));
        double w = 0.25 / double(values.size());
        for (auto word : values) policy.targets.emplace_back(std::string(word), w);
      }
      break;
    }
  }
  return policy;
}

namespace {

std::vector<int> largest_remainder_quotas(
    const std::vector<std::pair<std::string, double>>& targets, int n) {
  std::vector<int> quotas(targets.size());
  std::vector<std::pair<double, size_t>> fractional;
  int assigned = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    double exact = double(n) * targets[i].second;
    quotas[i] = int(std::floor(exact));
    assigned += quotas[i];
    fractional.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(fractional.begin(), fractional.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < n - assigned; ++k) quotas[fractional[size_t(k)].second] += 1;
  return quotas;
}

}  // namespace

std::vector<QAInstance> generate_balanced(const Template& tpl,
                                          const std::vector<Scene>& scenes,
                                          const BalancePolicy& policy, int n,
                                          uint64_t seed,
                                          int max_rejections_per_question,
                                          GenStats* stats) {
  if (scenes.empty()) throw std::invalid_argument("generate_balanced: no scenes");
  std::vector<int> quotas = largest_remainder_quotas(policy.targets, n);
  std::map<std::string, size_t> class_index;
  for (size_t i = 0; i < policy.targets.size(); ++i)
    class_index[policy.targets[i].first] = i;

  std::vector<int> counting_answers;
  if (tpl.counting) {
    for (const auto& target : policy.targets)
      counting_answers.push_back(std::stoi(target.first));
  }

  uint64_t family_hash = hash_str64(tpl.family);
  int per_scene = std::max(1, int((2 * long(n) + long(scenes.size()) - 1) /
                                  long(scenes.size())));
  long attempt_budget_total = long(max_rejections_per_question) * long(n);

  std::vector<int> filled(quotas.size(), 0);
  std::vector<QAInstance> out;
  GenStats totals;
  constexpr int kMaxRounds = 64;

  for (int round = 0; round < kMaxRounds; ++round) {
    std::vector<std::vector<QAInstance>> pool(scenes.size());
    std::vector<GenStats> round_stats(scenes.size());

#pragma omp parallel for schedule(dynamic, 4)
    for (size_t s = 0; s < scenes.size(); ++s) {
      Rng rng(Rng::derive({seed, family_hash,
                           uint64_t(scenes[s].scene_index), uint64_t(round)}));
      int budget = per_scene * 40;
      GenStats& st = round_stats[s];
      while (budget-- > 0 && int(pool[s].size()) < per_scene) {
        GenOutcome o = generate_instance(tpl, scenes[s], rng, counting_answers);
        st.attempts += 1;
        switch (o.reason) {
          case RejectReason::none: st.accepted += 1; break;
          case RejectReason::no_binding_found: st.no_binding_found += 1; break;
          case RejectReason::unique_violation: st.unique_violation += 1; break;
          case RejectReason::answer_disallowed: st.answer_disallowed += 1; break;
          case RejectReason::degenerate: st.degenerate += 1; break;
        }
        if (o.instance) pool[s].push_back(std::move(*o.instance));
      }
    }

    for (size_t s = 0; s < scenes.size(); ++s) {
      totals.add(round_stats[s]);
      for (QAInstance& inst : pool[s]) {
        auto it = class_index.find(inst.answer);
        if (it == class_index.end()) continue;
        size_t c = it->second;
        if (filled[c] < quotas[c]) {
          filled[c] += 1;
          out.push_back(std::move(inst));
        }
      }
    }

    if (int(out.size()) == n) break;
    if (totals.attempts > attempt_budget_total || round == kMaxRounds - 1) {
      std::ostringstream msg;
      msg << "generate_balanced: budget exhausted for " << tpl.family << " after "
          << totals.attempts << " attempts; achieved";
      for (size_t i = 0; i < quotas.size(); ++i)
        msg << " " << policy.targets[i].first << "=" << filled[i] << "/" << quotas[i];
      throw std::runtime_error(msg.str());
    }
  }

  if (stats) stats->add(totals);
  return out;
}

DatasetFiles build_dataset(const DatasetConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

  uint64_t scene_seed = Rng::derive({config.seed, hash_str64("scenes")});
  auto make_pool = [&](Split split, int first, int count) {
    std::vector<Scene> pool;
    pool.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
      pool.push_back(sample_scene(scene_seed, first + i, config.min_objects,
                                  config.max_objects, split));
    }
    return pool;
  };

  std::vector<Scene> val = make_pool(Split::val, 0, config.val_scene_count);
  std::vector<Scene> test =
      make_pool(Split::test, config.val_scene_count, config.test_scene_count);
  std::vector<Scene> train =
      make_pool(Split::train, config.val_scene_count + config.test_scene_count,
                config.train_scene_count);

  DatasetFiles files;
  files.scenes_val = path("scenes_val.json");
  files.scenes_test = path("scenes_test.json");
  files.scenes_train = path("scenes_train.json");
  write_scenes_file(files.scenes_val, {"val", config.seed}, val);
  write_scenes_file(files.scenes_test, {"test", config.seed}, test);
  write_scenes_file(files.scenes_train, {"train", config.seed}, train);

  std::vector<const Template*> generalization, baseline;
  const auto& all = builtin_templates();
  for (const Template& tpl : all) {
    (tpl.family.ends_with("_base") ? baseline : generalization).push_back(&tpl);
  }

  auto generate_split = [&](const std::vector<Scene>& scenes, Split split,
                            const std::vector<const Template*>& families, int n) {
    std::vector<QAInstance> questions;
    for (const Template* tpl : families) {
      BalancePolicy policy = BalancePolicy::for_template(*tpl, config.counting_answers);
      policy.tolerance = config.balance_tolerance;
      uint64_t seed = Rng::derive({config.seed, hash_str64(to_word(split)),
                                   hash_str64(tpl->family)});
      std::vector<QAInstance> part =
          generate_balanced(*tpl, scenes, policy, n, seed,
                            config.max_rejections_per_question);
      questions.insert(questions.end(), std::make_move_iterator(part.begin()),
                       std::make_move_iterator(part.end()));
    }
    return questions;
  };

  std::vector<const Template*> val_families = generalization;
  val_families.insert(val_families.end(), baseline.begin(), baseline.end());

  std::vector<QAInstance> q_val =
      generate_split(val, Split::val, val_families, config.per_test_val);
  std::vector<QAInstance> q_test =
      generate_split(test, Split::test, generalization, config.per_test_test);
  std::vector<QAInstance> q_train =
      generate_split(train, Split::train, generalization, config.per_test_train);

  files.questions_val = path("questions_val.json");
  files.questions_test = path("questions_test.json");
  files.questions_train = path("questions_train.json");
  write_questions_file(files.questions_val, {"val", config.seed}, q_val);
  write_questions_file(files.questions_test, {"test", config.seed}, q_test);
  write_questions_file(files.questions_train, {"train", config.seed}, q_train);
  return files;
}

std::vector<QAInstance> oversample_mix(const std::vector<QAInstance>& oversampled,
                                       const std::vector<QAInstance>& base,
                                       int factor, uint64_t seed) {
  std::vector<QAInstance> out;
  out.reserve(oversampled.size() * size_t(factor) + base.size());
  for (int k = 0; k < factor; ++k)
    out.insert(out.end(), oversampled.begin(), oversampled.end());
  out.insert(out.end(), base.begin(), base.end());
  Rng rng(Rng::derive({seed, hash_str64("oversample")}));
  for (size_t i = out.size(); i > 1; --i) {
    size_t j = size_t(rng.below(i));
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

std::string questions_to_json(const QuestionsFileInfo& info,
                              const std::vector<QAInstance>& questions) {
  ordered_json root;
  root["info"]["split"] = info.split;
  root["info"]["seed"] = info.seed;
  root["questions"] = ordered_json::array();
  for (const QAInstance& q : questions) {
    ordered_json jq;
    jq["image_index"] = q.image_index;
    jq["question"] = q.question;
    jq["program"] = ordered_json::parse(program_to_json(q.program));
    jq["answer"] = q.answer;
    jq["template_family"] = q.template_family;
    jq["split"] = to_word(q.split);
    root["questions"].push_back(std::move(jq));
  }
  return root.dump(2) + "\n";
}

void write_questions_file(const std::string& path, const QuestionsFileInfo& info,
                          const std::vector<QAInstance>& questions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << questions_to_json(info, questions);
}

std::vector<QAInstance> questions_from_json(const std::string& text,
                                            QuestionsFileInfo* info) {
  ordered_json root = ordered_json::parse(text);
  if (info) {
    info->split = root.at("info").value("split", "val");
    info->seed = root.at("info").value("seed", uint64_t(0));
  }
  std::vector<QAInstance> out;
  for (const auto& jq : root.at("questions")) {
    QAInstance q;
    q.image_index = jq.at("image_index").get<int>();
    q.question = jq.at("question").get<std::string>();
    q.program = program_from_json(jq.at("program").dump());
    q.answer = jq.at("answer").get<std::string>();
    q.template_family = jq.at("template_family").get<std::string>();
    q.split = split_from_word(jq.at("split").get<std::string>());
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<QAInstance> read_questions_file(const std::string& path,
                                            QuestionsFileInfo* info) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return questions_from_json(buf.str(), info);
}

}  // namespace svqa
