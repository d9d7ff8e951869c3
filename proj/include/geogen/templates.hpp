#pragma once

#include <map>
#include <memory>
#include <regex>
#include <string>
#include <vector>

#include "geogen/deduction.hpp"

namespace geogen {

// A reasoning step reduced to what a reader can check: the facts used,
// the theorem cited and the fact claimed.
struct StepTriple {
  std::vector<Fact> conditions;
  int theorem_id = 0;
  Fact conclusion;

  // "c1; c2 | id | conclusion" over canonical keys.
  std::string text() const;
  friend bool operator==(const StepTriple& a, const StepTriple& b) { return a.text() == b.text(); }
};

StepTriple triple_of(const ReasoningStep& step);

// Sentence templates for facts and steps, each with an exact inverse.
//
// Literal phrases come from the registry predicate texts ("{0} is the
// midpoint of {1}"), measures use natural syntax ("DE = BC/2"), and a
// theorem step reads "Since <c1>, <c2> and <c3>, by <theorem text>,
// <conclusion>." Solver steps read "Solving E, ...", "Substituting S into
// E, ...", "Combining E1 and E2, ..." or "Substituting S and combining
// E1 and E2, ..." followed by "we get <conclusion>.", where S are the
// assignments substituted and E the equations used. Phrases never contain
// ", " or " and ", which keeps every list splittable.
class TemplateSet {
 public:
  // Throws MissingTemplate for a predicate or theorem without text and
  // SyntaxError for a template that breaks the phrase rules.
  explicit TemplateSet(const Registry& registry);

  const Registry& registry() const { return *registry_; }
  bool has_theorem(int id) const { return id == kAlgebraTheoremId || theorems_.count(id) > 0; }

  std::string fact_phrase(const Fact& fact) const;
  // Throws TranslationFailed.
  Fact parse_fact_phrase(const std::string& phrase) const;

  // Throws MissingTemplate for an unknown theorem id.
  std::string step_sentence(const StepTriple& step) const;
  // Throws TranslationFailed.
  StepTriple parse_step_sentence(const std::string& sentence) const;

  // "A, B and C"; "A" alone; "" for none.
  static std::string join_list(const std::vector<std::string>& items);
  static std::vector<std::string> split_list(const std::string& text);

 private:
  struct Pattern {
    const PredicateDef* predicate;
    std::regex regex;
  };

  const Registry* registry_;
  std::vector<Pattern> patterns_;
  std::map<int, std::string> theorems_;
  std::map<std::string, int> theorem_by_text_;
};

}  // namespace geogen
