#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geogen/gateway.hpp"
#include "geogen/plotter.hpp"
#include "geogen/templates.hpp"

namespace geogen {

// ------------------------------------------------------------ translation

// "c1; c2 | theorem | conclusion" with canonical fact text; the theorem is
// an id or a registry name.
std::string triple_to_text(const StepTriple& triple);
// Throws TranslationFailed.
StepTriple triple_from_text(const std::string& text, const Registry& registry);

class Translator {
 public:
  virtual ~Translator() = default;
  // Throws TranslationFailed.
  virtual StepTriple translate(const std::string& nl_step) = 0;
};

// Inverse of the sentence templates; exact on template-generated text.
class RuleTranslator : public Translator {
 public:
  explicit RuleTranslator(const TemplateSet& templates) : templates_(&templates) {}
  StepTriple translate(const std::string& nl_step) override;

 private:
  const TemplateSet* templates_;
};

// Asks the model for the triple text of one step. Gateway errors become
// TranslationFailed so a bad reply only rejects its candidate.
class GatewayTranslator : public Translator {
 public:
  GatewayTranslator(Gateway& gateway, const Registry& registry) : gateway_(&gateway), registry_(&registry) {}
  StepTriple translate(const std::string& nl_step) override;

  static CompletionRequest request(const std::string& nl_step);

 private:
  Gateway* gateway_;
  const Registry* registry_;
};

StepTriple translate_step(const std::string& nl_step, Translator& translator);

// ----------------------------------------------------------- verification

enum class VerifyMode { Strict, Fast };
std::string_view to_string(VerifyMode mode);
VerifyMode verify_mode_from_string(std::string_view text);  // InvalidArgument

enum class VerifyCode {
  Ok,
  MissingCondition,
  UnknownTheorem,
  BindingFailure,
  ConclusionMismatch,
  MissingEntity,
  TranslationFailed,
};
std::string_view to_string(VerifyCode code);

struct VerifyResult {
  bool valid = false;
  VerifyMode mode = VerifyMode::Strict;
  VerifyCode code = VerifyCode::Ok;  // Ok iff valid
  std::string message;
};

nlohmann::json to_json(const VerifyResult& result);

// Valid iff every condition is in `state`, the theorem exists, some binding
// over the conditions alone satisfies its premises, and that binding yields
// the conclusion. Solver steps pass when solving the condition equations
// yields the conclusion.
VerifyResult verify_strict(const State& state, const StepTriple& triple, const Registry& registry);

// Valid iff every entity the conclusion names exists: points present,
// segments drawn (possibly as part of a longer drawn segment), polygon
// sides drawn, angle arms drawn, circle centers present.
VerifyResult verify_fast(const Diagram& diagram, const StepTriple& triple);
// Same rule against a state: segments come from Line literals, extended by
// points the state places on them, and from polygon sides.
VerifyResult verify_fast(const State& state, const StepTriple& triple);

// ------------------------------------------------------------ tree search

class StepGenerator {
 public:
  virtual ~StepGenerator() = default;
  // Up to `k` candidate steps. An empty list or a leading kTerminalMarker
  // ends the search. Throws GeneratorError.
  virtual std::vector<std::string> generate(const std::string& prompt, const std::vector<std::string>& accepted,
                                            int k) = 0;
};

// Call i returns the first min(k, n) candidates of script entry i; past the
// end it returns the terminal marker.
class ScriptedGenerator : public StepGenerator {
 public:
  explicit ScriptedGenerator(Script script) : script_(std::move(script)) {}
  std::vector<std::string> generate(const std::string& prompt, const std::vector<std::string>& accepted,
                                    int k) override;

 private:
  Script script_;
  std::size_t next_ = 0;
};

// One completion per iteration; the reply holds one candidate per line.
class GatewayGenerator : public StepGenerator {
 public:
  explicit GatewayGenerator(Gateway& gateway) : gateway_(&gateway) {}
  std::vector<std::string> generate(const std::string& prompt, const std::vector<std::string>& accepted,
                                    int k) override;

  static CompletionRequest request(const std::string& prompt, const std::vector<std::string>& accepted, int k);

 private:
  Gateway* gateway_;
};

struct SearchConfig {
  int k = 4;
  int max_iterations = 32;
  VerifyMode mode = VerifyMode::Strict;
  std::uint64_t seed = 0;

  void validate() const;  // InvalidArgument
};

struct SearchProblem {
  std::string prompt;
  std::vector<Fact> givens;
  std::optional<Diagram> diagram;  // fast mode falls back to the givens without it
};

enum class Termination { Terminal, NoValidCandidates, MaxIterations, GeneratorError };
std::string_view to_string(Termination cause);

struct CandidateLog {
  std::string text;
  std::optional<StepTriple> triple;
  VerifyResult verdict;
};

struct AcceptedStep {
  std::string text;
  StepTriple triple;
  VerifyResult verdict;  // always valid
};

struct History {
  std::vector<AcceptedStep> accepted;
  std::vector<std::vector<CandidateLog>> iterations;
  std::vector<int> selected;  // candidate index per iteration, -1 when none
  Termination termination = Termination::Terminal;
  std::string error;

  nlohmann::json to_json() const;
};

// Generate, translate and verify up to K candidates per iteration; commit
// one valid candidate drawn uniformly under the seed; stop on the terminal
// marker, an iteration without valid candidates, max_iterations or a
// generator error.
History tree_search(const SearchProblem& problem, StepGenerator& generator, Translator& translator,
                    const Registry& registry, const SearchConfig& config);

}  // namespace geogen
