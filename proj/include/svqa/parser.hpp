#pragma once

#include <string>
#include <variant>
#include <vector>

#include "svqa/templates.hpp"

namespace svqa {

struct ParseResult {
  std::string family;
  SlotBinding binding;
  Program program;
};

struct ParseFailure {
  std::string message;
  std::string longest_prefix;  // longest token prefix matched by any template
};

using ParseOutcome = std::variant<ParseResult, ParseFailure>;

inline bool parse_ok(const ParseOutcome& o) { return std::holds_alternative<ParseResult>(o); }

// Rule-based inverse of the surface grammar. Matching is case-insensitive,
// tolerant to optional-segment variants, plural noun inflection, the a/an
// article split, and "to the left/right of" phrasing; terminal punctuation is
// normalized before matching. When several templates derive the same text
// (the two baseline embedding families share a pattern) the first one in
// declaration order wins; derivations disagreeing on the program would be
// reported as ambiguous, which never happens for the builtin grammar.
class QuestionParser {
 public:
  QuestionParser();  // builtin templates plus the auxiliary query family
  explicit QuestionParser(std::vector<Template> templates);

  ParseOutcome parse(const std::string& text) const;
  std::vector<ParseOutcome> batch_parse(const std::vector<std::string>& texts) const;

  const std::vector<Template>& templates() const { return templates_; }

 private:
  std::vector<Template> templates_;
};

}  // namespace svqa
