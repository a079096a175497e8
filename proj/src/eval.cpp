#include "svqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "svqa/dsl.hpp"
#include "svqa/executor.hpp"
#include "svqa/parser.hpp"

namespace svqa {

namespace {




std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string join_positions(const std::vector<int>& positions) {
  std::ostringstream out;
  const size_t shown = std::min<size_t>(positions.size(), 8);
  for (size_t i = 0; i < shown; ++i) {
    if (i) out << ", ";
    out << positions[i];
  }
  if (positions.size() > shown) out << ", ... (" << positions.size() << " total)";
  return out.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

AccuracyReport score(const std::vector<QAInstance>& dataset,
                     const std::vector<PredictionSet>& predictions) {
  std::vector<std::string> families;  // first-appearance order
  std::unordered_map<std::string, size_t> family_index;
  for (const QAInstance& q : dataset)
    if (family_index.emplace(q.template_family, families.size()).second)
      families.push_back(q.template_family);

  // correct/scored per (run, family)
  std::vector<std::vector<long>> correct(predictions.size(),
                                         std::vector<long>(families.size(), 0));
  std::vector<std::vector<long>> scored = correct;

  for (size_t r = 0; r < predictions.size(); ++r) {
    const PredictionSet& run = predictions[r];
    std::vector<int> unknown, duplicated;
    std::set<int> seen;
    for (const auto& [pos, answer] : run.entries) {
      if (pos < 0 || size_t(pos) >= dataset.size()) {
        unknown.push_back(pos);
        continue;
      }
      if (!seen.insert(pos).second) {
        duplicated.push_back(pos);
        continue;
      }
      const QAInstance& q = dataset[size_t(pos)];
      const size_t f = family_index.at(q.template_family);
      ++scored[r][f];
      if (lower(answer) == lower(q.answer)) ++correct[r][f];
    }
    if (!unknown.empty())
      throw std::invalid_argument("run \"" + run.run_id +
                                  "\": unknown question positions: " +
                                  join_positions(unknown));
    if (!duplicated.empty())
      throw std::invalid_argument("run \"" + run.run_id +
                                  "\": duplicate question positions: " +
                                  join_positions(duplicated));
  }

  AccuracyReport report;
  for (size_t f = 0; f < families.size(); ++f) {
    std::vector<double> accs;
    for (size_t r = 0; r < predictions.size(); ++r) {
      if (scored[r][f] == 0) continue;
      AccuracyReport::Cell cell;
      cell.family = families[f];
      cell.run_id = predictions[r].run_id;
      cell.correct = correct[r][f];
      cell.scored = scored[r][f];
      cell.accuracy = double(correct[r][f]) / double(scored[r][f]);
      accs.push_back(cell.accuracy);
      report.cells.push_back(std::move(cell));
    }
    if (accs.empty()) continue;
    AccuracyReport::FamilySummary summary;
    summary.family = families[f];
    summary.runs = int(accs.size());
    double sum = 0.0;
    for (double a : accs) sum += a;
    summary.mean = sum / double(accs.size());
    if (accs.size() >= 2) {
      double ss = 0.0;
      for (double a : accs) ss += (a - summary.mean) * (a - summary.mean);
      summary.std_dev = std::sqrt(ss / double(accs.size() - 1));
    }
    report.families.push_back(std::move(summary));
  }
  return report;
}

PipelineResult run_symbolic_pipeline(const std::vector<QAInstance>& questions,
                                     const std::vector<Scene>& scenes,
                                     const std::string& run_id) {
  std::unordered_map<int, const Scene*> by_index;
  for (const Scene& s : scenes) by_index[s.scene_index] = &s;

  const QuestionParser parser;
  const int n = int(questions.size());
  std::vector<std::string> answers(static_cast<size_t>(n));

#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n; ++i) {
    const QAInstance& q = questions[size_t(i)];
    const auto scene_it = by_index.find(q.image_index);
    if (scene_it == by_index.end()) {
      answers[size_t(i)] = "";  // flagged after the loop; throwing here would race
      continue;
    }
    const ParseOutcome outcome = parser.parse(q.question);
    if (!parse_ok(outcome)) {
      answers[size_t(i)] = kNoParseAnswer;
      continue;
    }
    const TypedProgram typed = validate(std::get<ParseResult>(outcome).program);
    try {
      answers[size_t(i)] = execute(typed, *scene_it->second);
    } catch (const UniqueViolation&) {
      answers[size_t(i)] = kUndefinedAnswer;
    }
  }

  PipelineResult result;
  result.predictions.run_id = run_id;
  result.predictions.entries.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    if (answers[size_t(i)].empty())
      throw std::invalid_argument("question " + std::to_string(i) +
                                  " references missing scene index " +
                                  std::to_string(questions[size_t(i)].image_index));
    if (answers[size_t(i)] == kNoParseAnswer) ++result.diagnostics.no_parse;
    if (answers[size_t(i)] == kUndefinedAnswer) ++result.diagnostics.unique_violation;
    result.predictions.entries.emplace_back(i, answers[size_t(i)]);
  }
  return result;
}

PipelineResult run_symbolic_pipeline_files(const std::string& questions_path,
                                           const std::string& scenes_path,
                                           const std::string& run_id) {
  const std::vector<QAInstance> questions = read_questions_file(questions_path);
  const std::vector<Scene> scenes = read_scenes_file(scenes_path);
  return run_symbolic_pipeline(questions, scenes, run_id);
}

std::string predictions_to_json(const PredictionSet& predictions,
                                const PipelineDiagnostics* diagnostics) {
  nlohmann::json root;
  root["run_id"] = predictions.run_id;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [pos, answer] : predictions.entries)
    entries.push_back(nlohmann::json::array({pos, answer}));
  root["entries"] = std::move(entries);
  if (diagnostics) {
    root["diagnostics"] = {{"no_parse", diagnostics->no_parse},
                           {"unique_violation", diagnostics->unique_violation}};
  }
  return root.dump(2) + "\n";
}

void write_predictions_file(const std::string& path, const PredictionSet& predictions,
                            const PipelineDiagnostics* diagnostics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << predictions_to_json(predictions, diagnostics);
}

PredictionSet predictions_from_json(const std::string& text,
                                    PipelineDiagnostics* diagnostics) {
  const nlohmann::json root = nlohmann::json::parse(text);
  PredictionSet out;
  out.run_id = root.at("run_id").get<std::string>();
  for (const nlohmann::json& entry : root.at("entries"))
    out.entries.emplace_back(entry.at(0).get<int>(), entry.at(1).get<std::string>());
  if (diagnostics && root.contains("diagnostics")) {
    diagnostics->no_parse = root["diagnostics"].value("no_parse", 0L);
    diagnostics->unique_violation = root["diagnostics"].value("unique_violation", 0L);
  }
  return out;
}

PredictionSet read_predictions_file(const std::string& path,
                                    PipelineDiagnostics* diagnostics) {
  return predictions_from_json(read_text_file(path), diagnostics);
}

std::string report_to_json(const AccuracyReport& report) {
  nlohmann::json root;
  nlohmann::json cells = nlohmann::json::array();
  for (const AccuracyReport::Cell& c : report.cells)
    cells.push_back({{"family", c.family},
                     {"run_id", c.run_id},
                     {"correct", c.correct},
                     {"scored", c.scored},
                     {"accuracy", c.accuracy}});
  root["cells"] = std::move(cells);
  nlohmann::json families = nlohmann::json::array();
  for (const AccuracyReport::FamilySummary& f : report.families) {
    nlohmann::json row = {{"family", f.family}, {"runs", f.runs}, {"mean", f.mean}};
    row["std"] = f.std_dev ? nlohmann::json(*f.std_dev) : nlohmann::json(nullptr);
    families.push_back(std::move(row));
  }
  root["families"] = std::move(families);
  return root.dump(2) + "\n";
}

std::string report_to_table(const AccuracyReport& report) {
  size_t width = 6;  // "family"
  for (const AccuracyReport::FamilySummary& f : report.families)
    width = std::max(width, f.family.size());

  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-*s  %16s  %4s\n", int(width), "family",
                "accuracy (%)", "runs");
  out << line;
  for (const AccuracyReport::FamilySummary& f : report.families) {
    char value[64];
    if (f.std_dev)
      std::snprintf(value, sizeof value, "%6.2f \xc2\xb1 %5.2f", f.mean * 100.0,
                    *f.std_dev * 100.0);
    else
      std::snprintf(value, sizeof value, "%6.2f", f.mean * 100.0);
    std::snprintf(line, sizeof line, "%-*s  %16s  %4d\n", int(width), f.family.c_str(),
                  value, f.runs);
    out << line;
  }
  return out.str();
}

}  // namespace svqa
