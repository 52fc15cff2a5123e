#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ksg/corpus.hpp"
#include "ksg/gateway.hpp"
#include "ksg/graph.hpp"
#include "ksg/payload.hpp"
#include "ksg/prompts.hpp"

namespace ksg::stage1 {

struct ContextBundle {
  corpus::Annotation annotation;
  std::string quoted_passage;
  std::vector<corpus::Annotation> reply_chain;  // root first
};

ContextBundle build_bundle(const corpus::Annotation& annotation, const corpus::Corpus& corpus,
                           const corpus::Reading& reading,
                           std::size_t depth_limit = corpus::kDefaultDepthLimit);

/// Model reply: {"substantive", "statement", "label", "reason"}.
struct Stage1Payload {
  bool substantive = false;
  std::string statement;
  std::optional<MicroIdeaLabel> label;
  std::string reason;

  bool operator==(const Stage1Payload&) const = default;
};

payload::ParseResult<Stage1Payload> parse_stage1_payload(std::string_view raw_text);
std::string serialize_stage1_payload(const Stage1Payload& payload);

inline constexpr std::size_t kStatementWordCap = 60;

struct Substantive {
  graph::MicroIdea micro_idea;
  bool over_length = false;
};

struct NonSubstantive {
  std::string reason;
};

/// Output that never became a usable payload. `transport_failure` marks items
/// whose request failed at the gateway (batch mode only).
struct InvalidOutput {
  std::string detail;
  std::vector<std::string> raw_texts;
  bool transport_failure = false;
};

using FilterOutcome = std::variant<Substantive, NonSubstantive, InvalidOutput>;

struct ExtractionResult {
  FilterOutcome outcome;
  std::vector<std::string> fingerprints;  // one per request issued
};

struct Stage1Options {
  prompts::PromptVersion version = prompts::PromptVersion::P2;
  std::string model_id;
  std::size_t parallelism = 1;
  std::size_t depth_limit = corpus::kDefaultDepthLimit;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
};

gateway::CompletionRequest build_request(const ContextBundle& bundle, const prompts::PromptRegistry& registry,
                                         const Stage1Options& options);

/// Contextualize, filter and assign one annotation. A reply that cannot be
/// parsed gets one corrective re-prompt; a second failure yields
/// InvalidOutput with both raw texts. Transport errors propagate.
ExtractionResult extract_micro_idea(const ContextBundle& bundle, const prompts::PromptRegistry& registry,
                                    const Stage1Options& options, gateway::ModelGateway& gateway);

struct Stage1Report {
  std::string template_id;
  std::string template_hash;
  std::string model_id;
  std::string source_run_id;
  std::size_t substantive = 0;
  std::size_t non_substantive = 0;
  std::size_t invalid = 0;
  std::size_t transport_failures = 0;
  std::vector<std::string> over_length;  // micro-idea ids
  std::vector<nlohmann::json> items;

  nlohmann::json to_json() const;
};

struct Stage1Run {
  std::vector<FilterOutcome> outcomes;
  Stage1Report report;
};

/// One outcome per annotation in corpus order. Per-item failures (including
/// transport errors) become InvalidOutput; only configuration errors throw.
Stage1Run run_stage1(const corpus::Corpus& corpus, const corpus::Reading& reading,
                     const prompts::PromptRegistry& registry, const Stage1Options& options,
                     gateway::ModelGateway& gateway);

std::vector<graph::MicroIdea> micro_ideas(const std::vector<FilterOutcome>& outcomes);

std::string outcome_kind(const FilterOutcome& outcome);

/// Predicted label per annotation as stored in a stage-1 report: a label
/// name, "filtered" or "invalid".
struct Prediction {
  std::string annotation_id;
  std::string label;
};

std::vector<Prediction> predictions_from_report(const nlohmann::json& report);

}  // namespace ksg::stage1
