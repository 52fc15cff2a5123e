#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ksg/gateway.hpp"
#include "ksg/graph.hpp"
#include "ksg/payload.hpp"
#include "ksg/prompts.hpp"
#include "ksg/stage1.hpp"

namespace ksg::stage3 {

struct Linked {
  std::vector<graph::EpistemicRelation> relations;  // rank order, [0] is primary

  bool operator==(const Linked&) const = default;
};

struct Uncategorized {
  std::string reason;

  bool operator==(const Uncategorized&) const = default;
};

using InvalidOutput = stage1::InvalidOutput;

using LinkOutcome = std::variant<Linked, Uncategorized, InvalidOutput>;

std::string outcome_kind(const LinkOutcome& outcome);

/// Parsed stage-3 reply: either links or an explicit "uncategorized".
struct LinkPayload {
  bool uncategorized = false;
  std::string reason;
  std::vector<graph::EpistemicRelation> relations;  // micro_idea_id left empty
};

/// Accepts {"links":[...]} or a single link object. Under a two-level scheme
/// every link needs a stance and a function; under a flat scheme the category
/// goes in "function" (or "category") and a stance is rejected. Targets must
/// name one of `node_ids`, or be "uncategorized" as the only link.
payload::ParseResult<LinkPayload> parse_stage3_payload(std::string_view raw_text,
                                                       const prompts::CodingScheme& scheme,
                                                       const std::set<std::string>& node_ids,
                                                       std::size_t max_links = graph::kMaxLinks);

struct Stage3Options {
  std::string model_id;
  /// Template version; defaults to the scheme id when it names a version.
  std::optional<prompts::PromptVersion> version;
  std::size_t max_links = graph::kMaxLinks;
  std::size_t parallelism = 1;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
};

struct LinkResult {
  LinkOutcome outcome;
  std::vector<std::string> fingerprints;
};

gateway::CompletionRequest build_request(const graph::MicroIdea& micro_idea,
                                         const std::vector<graph::SynthesisNode>& nodes,
                                         const prompts::CodingScheme& scheme,
                                         const prompts::PromptRegistry& registry, const Stage3Options& options);

/// One request listing every node; one corrective re-prompt on an unusable
/// reply. Transport errors propagate; an empty node list is InvalidArgument.
LinkResult link_micro_idea(const graph::MicroIdea& micro_idea, const std::vector<graph::SynthesisNode>& nodes,
                           const prompts::CodingScheme& scheme, const prompts::PromptRegistry& registry,
                           const Stage3Options& options, gateway::ModelGateway& gateway);

struct Stage3Report {
  std::string model_id;
  std::string scheme_id;
  std::string template_hash;
  std::size_t linked = 0;
  std::size_t uncategorized = 0;
  std::size_t invalid = 0;
  std::size_t transport_failures = 0;
};

struct Stage3Run {
  std::vector<LinkOutcome> outcomes;
  std::vector<std::vector<std::string>> fingerprints;
  Stage3Report report;
};

Stage3Run run_stage3(const std::vector<graph::MicroIdea>& micro_ideas,
                     const std::vector<graph::SynthesisNode>& nodes, const prompts::CodingScheme& scheme,
                     const prompts::PromptRegistry& registry, const Stage3Options& options,
                     gateway::ModelGateway& gateway);

inline constexpr std::string_view kInvalidOutputRationale = "invalid_output=true";

/// Graph with one relation set per micro-idea. Invalid outcomes become
/// uncategorized relations whose rationale is "invalid_output=true".
/// Throws ksg::Error(InvalidArgument) if outcomes and micro-ideas misalign and
/// ksg::Error(Validation) if the result would not validate.
graph::KnowledgeSynthesisGraph assemble_graph(const std::vector<graph::MicroIdea>& micro_ideas,
                                              const std::vector<graph::SynthesisNode>& nodes,
                                              const std::vector<LinkOutcome>& outcomes,
                                              const std::string& scheme_id, graph::GraphMetadata metadata,
                                              const std::vector<prompts::CodingScheme>* schemes = nullptr);

nlohmann::json outcome_to_json(const LinkOutcome& outcome);
LinkOutcome outcome_from_json(const nlohmann::json& doc);

/// Outcomes file: {"models":{model_id:{"scheme_id", "report", "items":[{"micro_idea_id",
/// "outcome":{...}, "fingerprints"}]}}, "source_run_id"}.
struct ModelOutcomes {
  std::string model_id;
  std::string scheme_id;
  std::vector<std::string> micro_idea_ids;
  std::vector<LinkOutcome> outcomes;
};

nlohmann::json outcomes_file(const std::vector<graph::MicroIdea>& micro_ideas,
                             const std::vector<Stage3Run>& runs, const std::string& source_run_id);
std::vector<ModelOutcomes> read_outcomes_file(const nlohmann::json& doc);

}  // namespace ksg::stage3
