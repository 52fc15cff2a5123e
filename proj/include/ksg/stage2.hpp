#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ksg/corpus.hpp"
#include "ksg/error.hpp"
#include "ksg/gateway.hpp"
#include "ksg/graph.hpp"
#include "ksg/payload.hpp"
#include "ksg/prompts.hpp"

namespace ksg::stage2 {

enum class ContextMode { AbstractOnly, SummaryOnly, FullText, SummaryPlusInstructor };

std::string_view to_string(ContextMode mode) noexcept;
/// Accepts "abstract", "summary", "fulltext", "summary_instructor".
std::optional<ContextMode> parse_context_mode(std::string_view text);

inline constexpr std::size_t kFullTextCharBudget = 24000;
inline constexpr std::size_t kAbstractCharBudget = 4000;

/// Reading material for the node prompt.
///   AbstractOnly           first two paragraphs of the full text
///   SummaryOnly            the summary
///   FullText               the full text, cut after `char_budget` bytes with a notice
///   SummaryPlusInstructor  summary, then the instructor prompts numbered 1..n
/// Throws ksg::Error(Config) when the mode needs a field the reading lacks.
std::string build_stage2_context(const corpus::Reading& reading, ContextMode mode,
                                 std::size_t char_budget = kFullTextCharBudget);

struct NodeDraft {
  std::string title;
  std::string description;

  bool operator==(const NodeDraft&) const = default;
};

/// {"nodes":[{"title","description"}]}; count bounds and duplicate titles
/// (case-folded) are checked.
payload::ParseResult<std::vector<NodeDraft>> parse_stage2_payload(std::string_view raw_text,
                                                                  std::size_t min_nodes,
                                                                  std::size_t max_nodes);

struct Stage2Options {
  ContextMode mode = ContextMode::SummaryPlusInstructor;
  std::size_t min_nodes = 4;
  std::size_t max_nodes = 10;
  std::size_t char_budget = kFullTextCharBudget;
  std::string model_id;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
};

struct Stage2Result {
  std::vector<graph::SynthesisNode> nodes;
  std::vector<std::string> fingerprints;
  std::string template_hash;
};

/// Raised when two replies in a row are unusable; carries both raw texts.
class Stage2Failure : public Error {
public:
  Stage2Failure(const std::string& message, std::vector<std::string> raw_responses)
      : Error(ErrorCode::Stage2Failure, message), raw_responses_(std::move(raw_responses)) {}

  const std::vector<std::string>& raw_responses() const noexcept { return raw_responses_; }

private:
  std::vector<std::string> raw_responses_;
};

/// Node ids are stable_id("sn-", reading id, title).
Stage2Result generate_nodes(const corpus::Reading& reading, const Stage2Options& options,
                            const prompts::PromptRegistry& registry, gateway::ModelGateway& gateway);

std::string node_id(std::string_view reading_id, std::string_view title);

nlohmann::json nodes_to_json(const std::vector<graph::SynthesisNode>& nodes);
std::vector<graph::SynthesisNode> nodes_from_json(const nlohmann::json& doc);

}  // namespace ksg::stage2
