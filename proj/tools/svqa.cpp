#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "svqa/dsl.hpp"
#include "svqa/eval.hpp"
#include "svqa/executor.hpp"
#include "svqa/generator.hpp"
#include "svqa/module_net.hpp"
#include "svqa/parser.hpp"
#include "svqa/rng.hpp"
#include "svqa/scene.hpp"
#include "svqa/templates.hpp"

namespace {

using namespace svqa;

std::vector<const Template*> select_families(const std::string& spec) {
  std::vector<const Template*> out;
  const std::vector<Template>& all = builtin_templates();
  auto add_if = [&](auto pred) {
    for (const Template& t : all)
      if (pred(t)) out.push_back(&t);
  };
  if (spec == "closure") {
    add_if([](const Template& t) { return !t.family.ends_with("_base"); });
  } else if (spec == "baseline") {
    add_if([](const Template& t) { return t.family.ends_with("_base"); });
  } else if (spec == "all") {
    add_if([](const Template&) { return true; });
  } else {
    std::string item;
    std::istringstream in(spec);
    while (std::getline(in, item, ',')) out.push_back(&find_template(item));
  }
  return out;
}

int cmd_gen_scenes(uint64_t seed, int num, int start_index, int min_objects,
                   int max_objects, const std::string& split, const std::string& out) {
  std::vector<Scene> scenes;
  scenes.reserve(size_t(num));
  for (int i = 0; i < num; ++i)
    scenes.push_back(sample_scene(seed, start_index + i, min_objects, max_objects));
  write_scenes_file(out, {split, seed}, scenes);
  std::fprintf(stderr, "wrote %d scenes to %s\n", num, out.c_str());
  return 0;
}

int cmd_gen_questions(const std::string& scenes_path, int per_test, uint64_t seed,
                      const std::string& families, double tolerance,
                      const std::vector<int>& counting, int max_rejections,
                      const std::string& split, const std::string& out) {
  const std::vector<Scene> scenes = read_scenes_file(scenes_path);
  std::vector<QAInstance> questions;
  const Split split_value = split_from_word(split);
  for (const Template* tpl : select_families(families)) {
    BalancePolicy policy = BalancePolicy::for_template(*tpl, counting);
    policy.tolerance = tolerance;
    const uint64_t family_seed = Rng::derive({seed, hash_str64(tpl->family)});
    GenStats stats;
    std::vector<QAInstance> batch = generate_balanced(*tpl, scenes, policy, per_test,
                                                      family_seed, max_rejections, &stats);
    for (QAInstance& q : batch) q.split = split_value;
    std::fprintf(stderr, "%-16s %d questions, %ld attempts\n", tpl->family.c_str(),
                 int(batch.size()), stats.attempts);
    questions.insert(questions.end(), std::make_move_iterator(batch.begin()),
                     std::make_move_iterator(batch.end()));
  }
  write_questions_file(out, {split, seed}, questions);
  std::fprintf(stderr, "wrote %d questions to %s\n", int(questions.size()), out.c_str());
  return 0;
}

int cmd_build_dataset(uint64_t seed, const std::string& out_dir) {
  DatasetConfig config;
  config.seed = seed;
  const DatasetFiles files = build_dataset(config, out_dir);
  std::fprintf(stderr, "wrote %s %s %s %s %s %s\n", files.scenes_train.c_str(),
               files.scenes_val.c_str(), files.scenes_test.c_str(),
               files.questions_train.c_str(), files.questions_val.c_str(),
               files.questions_test.c_str());
  return 0;
}

int cmd_parse(const std::string& questions_path, const std::string& out) {
  const std::vector<QAInstance> questions = read_questions_file(questions_path);
  const QuestionParser parser;
  nlohmann::json programs = nlohmann::json::array();
  long failures = 0;
  for (size_t i = 0; i < questions.size(); ++i) {
    const ParseOutcome outcome = parser.parse(questions[i].question);
    nlohmann::json row;
    row["index"] = i;
    row["image_index"] = questions[i].image_index;
    if (parse_ok(outcome)) {
      const ParseResult& r = std::get<ParseResult>(outcome);
      row["ok"] = true;
      row["family"] = r.family;
      row["program"] = nlohmann::json::parse(program_to_json(r.program));
    } else {
      row["ok"] = false;
      row["error"] = std::get<ParseFailure>(outcome).message;
      ++failures;
    }
    programs.push_back(std::move(row));
  }
  nlohmann::json root;
  root["info"] = {{"source", questions_path}};
  root["programs"] = std::move(programs);
  std::ofstream file(out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + out);
  file << root.dump(2) << "\n";
  std::fprintf(stderr, "parsed %zu questions, %ld failures\n", questions.size(), failures);
  return 0;
}

int cmd_execute(const std::string& programs_path, const std::string& scenes_path,
                const std::string& run_id, const std::string& out) {
  std::ifstream file(programs_path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + programs_path);
  nlohmann::json root = nlohmann::json::parse(file);

  const std::vector<Scene> scenes = read_scenes_file(scenes_path);
  std::unordered_map<int, const Scene*> by_index;
  for (const Scene& s : scenes) by_index[s.scene_index] = &s;

  PredictionSet predictions;
  predictions.run_id = run_id;
  PipelineDiagnostics diagnostics;
  for (const nlohmann::json& row : root.at("programs")) {
    const int index = row.at("index").get<int>();
    if (!row.at("ok").get<bool>()) {
      predictions.entries.emplace_back(index, kNoParseAnswer);
      ++diagnostics.no_parse;
      continue;
    }
    const auto scene_it = by_index.find(row.at("image_index").get<int>());
    if (scene_it == by_index.end())
      throw std::runtime_error("program " + std::to_string(index) +
                               " references missing scene index " +
                               row.at("image_index").dump());
    const TypedProgram typed = validate(program_from_json(row.at("program").dump()));
    try {
      predictions.entries.emplace_back(index, execute(typed, *scene_it->second));
    } catch (const UniqueViolation&) {
      predictions.entries.emplace_back(index, kUndefinedAnswer);
      ++diagnostics.unique_violation;
    }
  }
  write_predictions_file(out, predictions, &diagnostics);
  std::fprintf(stderr, "executed %zu programs (%ld no-parse, %ld undefined)\n",
               predictions.entries.size(), diagnostics.no_parse,
               diagnostics.unique_violation);
  return 0;
}

int cmd_pipeline(const std::string& questions_path, const std::string& scenes_path,
                 const std::string& run_id, const std::string& out) {
  const PipelineResult result = run_symbolic_pipeline_files(questions_path, scenes_path,
                                                            run_id);
  write_predictions_file(out, result.predictions, &result.diagnostics);
  std::fprintf(stderr, "answered %zu questions (%ld no-parse, %ld undefined)\n",
               result.predictions.entries.size(), result.diagnostics.no_parse,
               result.diagnostics.unique_violation);
  return 0;
}

int cmd_evaluate(const std::string& dataset_path, const std::vector<std::string>& preds,
                 const std::string& format) {
  const std::vector<QAInstance> dataset = read_questions_file(dataset_path);
  std::vector<PredictionSet> runs;
  for (const std::string& path : preds) runs.push_back(read_predictions_file(path));
  const AccuracyReport report = score(dataset, runs);
  if (format == "json" || format.empty()) std::fputs(report_to_json(report).c_str(), stdout);
  if (format == "table") std::fputs(report_to_table(report).c_str(), stdout);
  if (format.empty()) std::fputs(report_to_table(report).c_str(), stderr);
  return 0;
}

int cmd_gradcheck(const std::string& op, uint64_t seed, double epsilon, double tolerance) {
  std::vector<std::string> ops;
  if (op == "all")
    ops = {"film_affine", "film_coeffs", "vector_nmn_forward"};
  else
    ops = {op};
  bool all_pass = true;
  for (const std::string& name : ops) {
    const GradCheckReport r = grad_check(name, seed, epsilon, tolerance);
    nlohmann::json row = {{"op", r.op},           {"seed_used", r.seed_used},
                          {"coordinates", r.coordinates}, {"epsilon", r.epsilon},
                          {"max_rel_err", r.max_rel_err}, {"tolerance", r.tolerance},
                          {"pass", r.pass}};
    std::fprintf(stdout, "%s\n", row.dump().c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_oversample(const std::string& questions_path, const std::string& base_path,
                   int factor, uint64_t seed, const std::string& out) {
  QuestionsFileInfo info;
  const std::vector<QAInstance> questions = read_questions_file(questions_path, &info);
  std::vector<QAInstance> base;
  if (!base_path.empty()) base = read_questions_file(base_path);
  const std::vector<QAInstance> mixed = oversample_mix(questions, base, factor, seed);
  write_questions_file(out, {info.split, seed}, mixed);
  std::fprintf(stderr, "wrote %zu questions to %s\n", mixed.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symbolic CLEVR/CLOSURE question engine"};
  app.require_subcommand(1);

  uint64_t seed = 0;
  std::string out;
  std::string format;
  app.add_option("--seed", seed, "rng seed")->capture_default_str();
  app.add_option("--out", out, "output path");
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"json", "table"}));

  int exit_code = 0;
  auto need_out = [&]() -> const std::string& {
    if (out.empty()) throw CLI::ValidationError("--out is required");
    return out;
  };

  // gen-scenes
  auto* gen_scenes = app.add_subcommand("gen-scenes", "sample random scenes");
  int gs_num = 0, gs_start = 0, gs_min = 3, gs_max = 10;
  std::string gs_split = "val";
  gen_scenes->add_option("--num", gs_num, "scene count")->required();
  gen_scenes->add_option("--start-index", gs_start, "first image index")
      ->capture_default_str();
  gen_scenes->add_option("--min-objects", gs_min)->capture_default_str();
  gen_scenes->add_option("--max-objects", gs_max)->capture_default_str();
  gen_scenes->add_option("--split", gs_split)->capture_default_str();
  gen_scenes->callback([&]() {
    exit_code = cmd_gen_scenes(seed, gs_num, gs_start, gs_min, gs_max, gs_split,
                               need_out());
  });

  // gen-questions
  auto* gen_questions = app.add_subcommand("gen-questions",
                                           "generate balanced questions");
  std::string gq_scenes, gq_families = "closure", gq_split = "val";
  int gq_per_test = 3600, gq_max_rejections = 10000;
  double gq_tolerance = 0.035;
  std::vector<int> gq_counting = {1, 2, 3};
  gen_questions->add_option("--scenes", gq_scenes, "scenes file")->required();
  gen_questions->add_option("--per-test", gq_per_test, "questions per family")
      ->capture_default_str();
  gen_questions->add_option("--families", gq_families,
                            "closure|baseline|all|comma-separated names")
      ->capture_default_str();
  gen_questions->add_option("--tolerance", gq_tolerance)->capture_default_str();
  gen_questions->add_option("--counting", gq_counting, "allowed counting answers");
  gen_questions->add_option("--max-rejections", gq_max_rejections)->capture_default_str();
  gen_questions->add_option("--split", gq_split)->capture_default_str();
  gen_questions->callback([&]() {
    exit_code = cmd_gen_questions(gq_scenes, gq_per_test, seed, gq_families,
                                  gq_tolerance, gq_counting, gq_max_rejections,
                                  gq_split, need_out());
  });

  // build-dataset
  auto* build = app.add_subcommand("build-dataset",
                                   "scene pools plus train/val/test questions");
  build->callback([&]() { exit_code = cmd_build_dataset(seed, need_out()); });

  // parse
  auto* parse = app.add_subcommand("parse", "questions to programs");
  std::string p_questions;
  parse->add_option("--questions", p_questions)->required();
  parse->callback([&]() { exit_code = cmd_parse(p_questions, need_out()); });

  // execute
  auto* exec = app.add_subcommand("execute", "programs plus scenes to answers");
  std::string e_programs, e_scenes, e_run = "execute";
  exec->add_option("--programs", e_programs)->required();
  exec->add_option("--scenes", e_scenes)->required();
  exec->add_option("--run-id", e_run)->capture_default_str();
  exec->callback([&]() {
    exit_code = cmd_execute(e_programs, e_scenes, e_run, need_out());
  });

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "questions plus scenes to answers");
  std::string pl_questions, pl_scenes, pl_run = "symbolic";
  pipeline->add_option("--questions", pl_questions)->required();
  pipeline->add_option("--scenes", pl_scenes)->required();
  pipeline->add_option("--run-id", pl_run)->capture_default_str();
  pipeline->callback([&]() {
    exit_code = cmd_pipeline(pl_questions, pl_scenes, pl_run, need_out());
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score predictions");
  std::string ev_dataset;
  std::vector<std::string> ev_preds;
  evaluate->add_option("--dataset", ev_dataset)->required();
  evaluate->add_option("--pred", ev_preds, "prediction files")->required();
  evaluate->callback([&]() { exit_code = cmd_evaluate(ev_dataset, ev_preds, format); });

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks");
  std::string gc_op = "all";
  double gc_epsilon = 1e-3, gc_tolerance = 1e-4;
  uint64_t gc_seed = 42;
  gradcheck->add_option("--op", gc_op,
                        "all|film_affine|film_coeffs|vector_nmn_forward")
      ->capture_default_str();
  gradcheck->add_option("--check-seed", gc_seed)->capture_default_str();
  gradcheck->add_option("--epsilon", gc_epsilon)->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tolerance)->capture_default_str();
  gradcheck->callback([&]() {
    exit_code = cmd_gradcheck(gc_op, gc_seed, gc_epsilon, gc_tolerance);
  });

  // oversample
  auto* oversample = app.add_subcommand("oversample", "few-shot training mix");
  std::string os_questions, os_base;
  int os_factor = 300;
  oversample->add_option("--questions", os_questions, "questions to repeat")->required();
  oversample->add_option("--base", os_base, "questions mixed in once");
  oversample->add_option("--factor", os_factor)->capture_default_str();
  oversample->callback([&]() {
    exit_code = cmd_oversample(os_questions, os_base, os_factor, seed, need_out());
  });

  // accept the global flags after the subcommand name as well
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
  return exit_code;
}
