#include "svqa/parser.hpp"

#include <algorithm>
#include <cctype>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace svqa {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  // Normalize terminal punctuation: strip any trailing ?/./! and close with
  // a single question mark.
  std::string body = text;
  while (!body.empty() && (body.back() == '?' || body.back() == '.' ||
                           body.back() == '!' || std::isspace(static_cast<unsigned char>(body.back()))))
    body.pop_back();
  body += '?';

  std::vector<std::string> tokens;
  std::string word;
  for (char raw : body) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!word.empty()) { tokens.push_back(word); word.clear(); }
    } else if (c == ';' || c == '?' || c == ',' || c == '.') {
      if (!word.empty()) { tokens.push_back(word); word.clear(); }
      tokens.emplace_back(1, c);
    } else {
      word += c;
    }
  }
  if (!word.empty()) tokens.push_back(word);
  return tokens;
}

// Accepted token sequences per canonical spatial phrase.
const std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>>&
relation_spellings() {
  static const std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>>
      spellings = {
          {"left of", {{"left", "of"}, {"to", "the", "left", "of"}}},
          {"right of", {{"right", "of"}, {"to", "the", "right", "of"}}},
          {"in front of", {{"in", "front", "of"}}},
          {"behind", {{"behind"}}},
      };
  return spellings;
}

struct Segment {
  bool optional = false;
  std::vector<PatternItem> items;
};

std::vector<Segment> segment_pattern(const std::vector<PatternItem>& pattern) {
  std::vector<Segment> segments;
  int current_group = -2;  // sentinel distinct from any real id
  for (const PatternItem& item : pattern) {
    if (segments.empty() || item.optional_group != current_group) {
      segments.push_back({item.optional_group >= 0, {}});
      current_group = item.optional_group;
    }
    segments.back().items.push_back(item);
  }
  return segments;
}

class TemplateMatcher {
 public:
  TemplateMatcher(const Template& tpl, const std::vector<std::string>& tokens)
      : tpl_(tpl), tokens_(tokens), segments_(segment_pattern(tpl.pattern)) {}

  // Returns every complete derivation; records the furthest token reached.
  std::vector<SlotBinding> matches(size_t* furthest) {
    SlotBinding binding;
    binding.groups.resize(tpl_.group_count);
    results_.clear();
    furthest_ = 0;
    match_segment(0, 0, 0, binding);
    if (furthest) *furthest = std::max(*furthest, furthest_);
    return results_;
  }

 private:
  void match_segment(size_t seg, size_t item, size_t t, SlotBinding& binding) {
    furthest_ = std::max(furthest_, t);
    if (seg == segments_.size()) {
      if (t == tokens_.size()) results_.push_back(binding);
      return;
    }
    const Segment& segment = segments_[seg];
    if (item == 0 && segment.optional) {
      // Branch: skip the optional segment entirely.
      match_segment(seg + 1, 0, t, binding);
    }
    if (item == segment.items.size()) {
      match_segment(seg + 1, 0, t, binding);
      return;
    }
    match_item(seg, item, t, binding);
  }

  void match_item(size_t seg, size_t item, size_t t, SlotBinding& binding) {
    const PatternItem& it = segments_[seg].items[item];
    switch (it.type) {
      case PatternItem::Type::word: {
        if (t >= tokens_.size()) return;
        const std::string want = lower(it.text);
        const std::string& got = tokens_[t];
        if (got == want || (want == "a" && got == "an"))
          match_segment(seg, item + 1, t + 1, binding);
        return;
      }
      case PatternItem::Type::punct:
        if (t < tokens_.size() && tokens_[t] == it.text)
          match_segment(seg, item + 1, t + 1, binding);
        return;
      case PatternItem::Type::slot:
        match_slot(it, seg, item, t, binding);
        return;
    }
  }

  void match_slot(const PatternItem& it, size_t seg, size_t item, size_t t,
                  SlotBinding& binding) {
    auto continue_with = [&](size_t next_t) { match_segment(seg, item + 1, next_t, binding); };

    switch (it.slot_kind) {
      case 'Z': case 'C': case 'M': {
        auto& group = binding.groups[it.slot_index - 1];
        std::string& field = it.slot_kind == 'Z'   ? group.size
                             : it.slot_kind == 'C' ? group.color
                                                   : group.material;
        const Property prop = it.slot_kind == 'Z'   ? Property::size
                              : it.slot_kind == 'C' ? Property::color
                                                    : Property::material;
        // Blank adjective branch.
        field.clear();
        continue_with(t);
        if (t < tokens_.size() && value_index(prop, tokens_[t]) >= 0) {
          field = tokens_[t];
          continue_with(t + 1);
          field.clear();
        }
        return;
      }
      case 'S': {
        if (t >= tokens_.size()) return;
        auto& group = binding.groups[it.slot_index - 1];
        static const std::vector<std::string> nouns = {"thing", "object", "cube",
                                                       "sphere", "cylinder"};
        for (const std::string& noun : nouns) {
          const std::string want = it.plural ? noun + "s" : noun;
          if (tokens_[t] == want) {
            group.noun = noun;
            continue_with(t + 1);
            group.noun.clear();
          }
        }
        return;
      }
      case 'R': {
        for (const auto& [canonical, forms] : relation_spellings()) {
          for (const auto& form : forms) {
            if (t + form.size() > tokens_.size()) continue;
            bool ok = true;
            for (size_t k = 0; k < form.size(); ++k)
              if (tokens_[t + k] != form[k]) { ok = false; break; }
            if (!ok) continue;
            auto [pos, inserted] = binding.relations.insert({it.slot_index, canonical});
            if (!inserted) pos->second = canonical;
            continue_with(t + form.size());
            binding.relations.erase(it.slot_index);
          }
        }
        return;
      }
      case 'A': case 'Q': {
        if (t >= tokens_.size()) return;
        for (const std::string& prop : property_words()) {
          if (tokens_[t] == prop) {
            std::string& field = it.slot_kind == 'A' ? binding.matched_property
                                                     : binding.queried_property;
            field = prop;
            continue_with(t + 1);
            field.clear();
          }
        }
        return;
      }
    }
  }

  const Template& tpl_;
  const std::vector<std::string>& tokens_;
  std::vector<Segment> segments_;
  std::vector<SlotBinding> results_;
  size_t furthest_ = 0;
};

}  // namespace

QuestionParser::QuestionParser() : templates_(parser_templates()) {}

QuestionParser::QuestionParser(std::vector<Template> templates)
    : templates_(std::move(templates)) {}

ParseOutcome QuestionParser::parse(const std::string& text) const {
  const std::vector<std::string> tokens = tokenize(text);
  size_t furthest = 0;

  struct Derivation {
    const Template* tpl;
    SlotBinding binding;
    Program program;
  };
  std::vector<Derivation> derivations;
  for (const Template& tpl : templates_) {
    TemplateMatcher matcher(tpl, tokens);
    for (SlotBinding& binding : matcher.matches(&furthest))
      derivations.push_back({&tpl, std::move(binding), {}});
  }

  if (derivations.empty()) {
    std::string prefix;
    for (size_t i = 0; i < furthest && i < tokens.size(); ++i) {
      if (i) prefix += ' ';
      prefix += tokens[i];
    }
    return ParseFailure{"no template derives the question", prefix};
  }

  for (Derivation& d : derivations)
    d.program = instantiate_program(*d.tpl, d.binding);
  for (size_t i = 1; i < derivations.size(); ++i) {
    if (!programs_isomorphic(derivations[0].program, derivations[i].program))
      return ParseFailure{"ambiguous question: templates " + derivations[0].tpl->family +
                              " and " + derivations[i].tpl->family +
                              " derive different programs",
                          ""};
  }

  return ParseResult{derivations[0].tpl->family, std::move(derivations[0].binding),
                     std::move(derivations[0].program)};
}

std::vector<ParseOutcome> QuestionParser::batch_parse(
    const std::vector<std::string>& texts) const {
  std::vector<ParseOutcome> out(texts.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (long i = 0; i < static_cast<long>(texts.size()); ++i) {
    try {
      out[i] = parse(texts[i]);
    } catch (const std::exception& err) {
      out[i] = ParseFailure{err.what(), ""};
    }
  }
  return out;
}

}  // namespace svqa
