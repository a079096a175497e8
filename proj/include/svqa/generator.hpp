#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svqa/executor.hpp"
#include "svqa/templates.hpp"

namespace svqa {

struct QAInstance {
  int image_index = 0;
  std::string question;
  Program program;
  std::string answer;
  std::string template_family;
  Split split = Split::val;
};

enum class RejectReason : uint8_t {
  none,
  unique_violation,   // execution hit a non-singleton unique
  degenerate,         // some relation node can be bypassed without changing the answer
  answer_disallowed,  // counting answer outside the allowed set
  no_binding_found,   // no uniquely-referring binding could be constructed
};

std::string to_word(RejectReason reason);

struct GenOutcome {
  std::optional<QAInstance> instance;
  RejectReason reason = RejectReason::none;
};

struct GenStats {
  long attempts = 0;
  long accepted = 0;
  long no_binding_found = 0;
  long unique_violation = 0;
  long answer_disallowed = 0;
  long degenerate = 0;

  void add(const GenStats& other);
};

// One sampling attempt: draws the matched/queried properties, walks the
// template against the scene to construct a binding whose referring
// expressions are unique, then instantiates, executes, and checks the answer.
// Skips the degeneracy check (generate_instance adds it).
GenOutcome generate_candidate(const Template& tpl, const Scene& scene, Rng& rng,
                              const std::vector<int>& counting_answers);

// Full acceptance pipeline for a single attempt, including the relation
// bypass (degeneracy) rejection.
GenOutcome generate_instance(const Template& tpl, const Scene& scene, Rng& rng,
                             const std::vector<int>& counting_answers);

struct BalancePolicy {
  std::vector<std::pair<std::string, double>> targets;  // answer word -> probability
  double tolerance = 0.035;

  // Counting families balance the allowed counts uniformly; boolean families
  // balance yes/no; attribute families balance answer words uniformly within
  // each property, properties equally likely.
  static BalancePolicy for_template(const Template& tpl,
                                    const std::vector<int>& counting_answers);
};

// Generates exactly n accepted instances whose answers realize the balance
// targets (largest-remainder quotas). Work is sharded per scene with derived
// RNG streams and merged in a fixed order, so the result is identical across
// thread counts. Throws on budget exhaustion, reporting achieved counts.
std::vector<QAInstance> generate_balanced(const Template& tpl,
                                          const std::vector<Scene>& scenes,
                                          const BalancePolicy& policy, int n,
                                          uint64_t seed,
                                          int max_rejections_per_question = 10000,
                                          GenStats* stats = nullptr);

struct DatasetConfig {
  uint64_t seed = 0;
  int per_test_val = 3600;
  int per_test_test = 3600;
  int per_test_train = 36;
  std::vector<int> counting_answers = {1, 2, 3};
  int max_rejections_per_question = 10000;
  int val_scene_count = 1000;
  int test_scene_count = 1000;
  int train_scene_count = 300;
  int min_objects = 3;
  int max_objects = 10;
  double balance_tolerance = 0.035;
};

struct DatasetFiles {
  std::string scenes_train, scenes_val, scenes_test;
  std::string questions_train, questions_val, questions_test;
};

// Builds scene pools with disjoint image_index ranges per split and the
// question files: every family (generalization plus baseline) for val,
// generalization families only for test and train.
DatasetFiles build_dataset(const DatasetConfig& config, const std::string& out_dir);

// Training mix: each instance of `oversampled` repeated `factor` times, plus
// `base`, shuffled deterministically.
std::vector<QAInstance> oversample_mix(const std::vector<QAInstance>& oversampled,
                                       const std::vector<QAInstance>& base,
                                       int factor, uint64_t seed);

struct QuestionsFileInfo {
  std::string split = "val";
  uint64_t seed = 0;
};

std::string questions_to_json(const QuestionsFileInfo& info,
                              const std::vector<QAInstance>& questions);
void write_questions_file(const std::string& path, const QuestionsFileInfo& info,
                          const std::vector<QAInstance>& questions);
std::vector<QAInstance> read_questions_file(const std::string& path,
                                            QuestionsFileInfo* info = nullptr);
std::vector<QAInstance> questions_from_json(const std::string& text,
                                            QuestionsFileInfo* info = nullptr);

}  // namespace svqa
