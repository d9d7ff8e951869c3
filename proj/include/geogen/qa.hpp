#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geogen/gateway.hpp"
#include "geogen/target_finder.hpp"
#include "geogen/templates.hpp"

namespace geogen {

struct QAPair {
  std::string id;  // "s<seed>-t<k>-<variant>"
  std::string image_ref;
  std::string question;
  std::optional<std::string> figure_description;
  std::vector<std::string> solution_nl;
  std::vector<ReasoningStep> solution_formal;
  std::string answer;
  // meta
  std::string signature;
  int depth = 0;
  std::string source = "synth";  // "synth" or "expand"
  std::uint64_t seed = 0;
};

nlohmann::json qa_to_json(const QAPair& pair);

// Natural-language drafts for one path.
struct Drafts {
  std::string target_phrase;        // "the length of DE", or the literal's sentence
  std::vector<std::string> steps;   // one sentence per ReasoningStep
};

// Throws MissingTemplate when a step cites a theorem the set does not know.
Drafts templatize(const ReasoningPath& path, const TemplateSet& templates);

// Version tag of the shipped transcription prompt.
inline constexpr const char* kTranscriptionPromptVersion = "transcribe-v1";
CompletionRequest transcription_request(const std::vector<std::string>& drafts);

// One polished sentence per draft. A null gateway returns the drafts.
// Throws GatewayError when the reply does not number exactly one line per
// draft; gateway failures propagate.
std::vector<std::string> transcribe(const std::vector<std::string>& drafts, Gateway* gateway);

struct QuestionModes {
  bool described = true;    // (a) figure description + numeric givens + target
  bool target_only = true;  // (b) target only; values are printed on the image
  bool proof = true;        // (c) proof-style, relation targets only
};

// What the question generator knows about the figure.
struct QuestionContext {
  std::string image_ref;
  std::vector<Fact> figure;  // layer-0 literals and numeric givens
  std::uint64_t seed = 0;
  int target_index = 0;
  std::string source = "synth";
};

// Numeric targets yield variants (a) and (b); relation targets yield (c).
// `solution_nl` must hold one sentence per path step.
std::vector<QAPair> make_questions(const ReasoningPath& path, const Drafts& drafts,
                                   const std::vector<std::string>& solution_nl, const QuestionContext& context,
                                   const TemplateSet& templates, const QuestionModes& modes);

// Drops exact (question, answer, image) repeats, then keeps at most `cap`
// records per signature. Survivors keep (seed, id) order.
std::vector<QAPair> dedup_and_cap(std::vector<QAPair> pairs, int cap = 400);

struct ExportSummary {
  std::size_t records = 0;
  std::string jsonl_path;
  std::string manifest_path;
};

// Writes <out>/qa.jsonl, <out>/manifest.json and <out>/images/<name> for
// every entry of `images` (image_ref -> file contents). `extra` is merged
// into the manifest. Throws IoError naming the path.
ExportSummary export_dataset(const std::vector<QAPair>& pairs, const std::string& out_dir,
                             const std::map<std::string, std::string>& images = {},
                             const nlohmann::json& extra = nlohmann::json::object());

nlohmann::json dataset_manifest(const std::vector<QAPair>& pairs);

// ---------------------------------------------------------------- pipeline

struct PipelineConfig {
  SynthConfig synth;
  TargetFilter filter;
  GivenConfig givens;
  ChaseLimits limits;
  QuestionModes modes;
  int cap = 400;
  bool transcribe = false;
  bool write_png = false;
};

enum class SeedStatus { Ok, Unsatisfied, ChaseLimit, NoTarget };
std::string_view to_string(SeedStatus status);

struct SeedResult {
  std::uint64_t seed = 0;
  SeedStatus status = SeedStatus::Ok;
  std::string message;
  std::optional<Diagram> diagram;
  std::string svg;
  std::vector<ReasoningPath> paths;
  std::vector<QAPair> pairs;
  int transcription_fallbacks = 0;
};

// Diagram, chase, numeric givens, targets, paths and questions for one
// seed. Failures are reported through the status, never thrown.
SeedResult process_seed(const Registry& registry, const TemplateSet& templates, const PipelineConfig& config,
                        std::uint64_t seed, Gateway* gateway);

// Questions for a formal annotation: initial facts (one per line, '#'
// comments) chased without a diagram. Image refs name `image_ref`.
SeedResult process_annotation(const Registry& registry, const TemplateSet& templates, const PipelineConfig& config,
                              const std::vector<std::string>& facts, std::uint64_t seed, const std::string& image_ref,
                              Gateway* gateway);

// Seed of diagram `index` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Runs process_seed over `count` derived seeds on `workers` threads.
// Results are ordered by index regardless of scheduling.
std::vector<SeedResult> run_synth(const Registry& registry, const TemplateSet& templates,
                                  const PipelineConfig& config, std::uint64_t master_seed, std::size_t count,
                                  int workers, Gateway* gateway);

}  // namespace geogen
