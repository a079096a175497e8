#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svqa/generator.hpp"
#include "svqa/scene.hpp"

namespace svqa {

// Sentinel predictions for questions the symbolic pipeline cannot answer.
// Both lie outside the closed answer vocabulary, so they always score wrong.
inline constexpr const char* kNoParseAnswer = "<no-parse>";
inline constexpr const char* kUndefinedAnswer = "<undefined>";

// One model run's answers. Entries pair a question's position in the dataset
// file (0-based) with the predicted answer text; positions must be unique and
// refer to questions that exist. A run may cover only a subset.
struct PredictionSet {
  std::string run_id;
  std::vector<std::pair<int, std::string>> entries;
};

// Per-question failure tallies for the symbolic pipeline.
struct PipelineDiagnostics {
  long no_parse = 0;
  long unique_violation = 0;
};

struct PipelineResult {
  PredictionSet predictions;
  PipelineDiagnostics diagnostics;
};

struct AccuracyReport {
  struct Cell {
    std::string family;
    std::string run_id;
    long correct = 0;
    long scored = 0;
    double accuracy = 0.0;
  };
  struct FamilySummary {
    std::string family;
    int runs = 0;
    double mean = 0.0;
    std::optional<double> std_dev;  // sample std (n-1), absent when runs < 2
  };
  std::vector<Cell> cells;              // family-major, runs in input order
  std::vector<FamilySummary> families;  // families in first-appearance order
};

// Scores each run against the dataset answers: lower-cased exact string
// match, grouped by template family. The answer vocabulary is closed, so an
// out-of-vocabulary prediction counts as wrong rather than raising. Unknown
// or duplicated question positions raise std::invalid_argument listing the
// offenders. Entry order within a run never affects the report.
AccuracyReport score(const std::vector<QAInstance>& dataset,
                     const std::vector<PredictionSet>& predictions);

// Parses each question text and executes the recovered program against the
// question's scene. A question that fails to parse answers "<no-parse>"; an
// execution hitting a uniqueness violation answers "<undefined>"; both
// sentinels lie outside the answer vocabulary, always score as wrong, and are
// tallied in the diagnostics. Raises if a question references a scene index
// absent from `scenes`. Questions are processed in parallel; the result is
// identical at any worker count.
PipelineResult run_symbolic_pipeline(const std::vector<QAInstance>& questions,
                                     const std::vector<Scene>& scenes,
                                     const std::string& run_id = "symbolic");
PipelineResult run_symbolic_pipeline_files(const std::string& questions_path,
                                           const std::string& scenes_path,
                                           const std::string& run_id = "symbolic");

std::string predictions_to_json(const PredictionSet& predictions,
                                const PipelineDiagnostics* diagnostics = nullptr);
void write_predictions_file(const std::string& path, const PredictionSet& predictions,
                            const PipelineDiagnostics* diagnostics = nullptr);
PredictionSet predictions_from_json(const std::string& text,
                                    PipelineDiagnostics* diagnostics = nullptr);
PredictionSet read_predictions_file(const std::string& path,
                                    PipelineDiagnostics* diagnostics = nullptr);

std::string report_to_json(const AccuracyReport& report);
// Fixed-width table with one "mean ± std" row per family, for terminals.
std::string report_to_table(const AccuracyReport& report);

}  // namespace svqa
