#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ksg/labels.hpp"
#include "ksg/schemes.hpp"

namespace ksg::graph {

struct MicroIdea {
  std::string id;
  std::string source_annotation_id;
  std::string statement;
  MicroIdeaLabel label = MicroIdeaLabel::Descriptive;

  bool operator==(const MicroIdea&) const = default;
  auto operator<=>(const MicroIdea&) const = default;
};

struct SynthesisNode {
  std::string id;
  std::string title;
  std::string description;
  std::string reading_id;
  std::string context_mode;

  bool operator==(const SynthesisNode&) const = default;
  auto operator<=>(const SynthesisNode&) const = default;
};

/// Reserved target name for micro-ideas that could not be linked. It is a
/// sentinel, never a SynthesisNode.
inline constexpr std::string_view kUncategorized = "uncategorized";

/// Edge from a micro-idea to a synthesis node (or the uncategorized sentinel).
///
/// `function` holds the category name of the scheme named by `scheme_id`. For
/// the two-level scheme it is a RelationFunction name and `stance` is set; for
/// flat schemes `stance` stays empty. `rank` orders the links of one
/// micro-idea; rank 0 is the primary link.
struct EpistemicRelation {
  std::string micro_idea_id;
  std::optional<std::string> target;  // nullopt == uncategorized
  std::optional<Stance> stance;
  std::optional<std::string> function;
  std::optional<std::string> rationale;
  std::string scheme_id;
  unsigned rank = 0;

  bool uncategorized() const noexcept { return !target.has_value(); }
  std::optional<RelationFunction> relation_function() const;

  bool operator==(const EpistemicRelation&) const = default;
  auto operator<=>(const EpistemicRelation&) const = default;
};

struct GraphMetadata {
  std::string run_id;
  std::map<std::string, std::string> prompt_versions;  // "stage1" -> "p2", ...
  std::vector<std::string> model_ids;
  std::string created_at;

  bool operator==(const GraphMetadata&) const = default;
};

struct KnowledgeSynthesisGraph {
  std::vector<MicroIdea> micro_ideas;
  std::vector<SynthesisNode> synthesis_nodes;
  std::vector<EpistemicRelation> relations;
  GraphMetadata metadata;

  /// Structural equality: micro-ideas and nodes compare as sets, relations by
  /// (micro_idea_id, rank) order.
  bool operator==(const KnowledgeSynthesisGraph& other) const;
};

/// Sorted copy: micro-ideas and nodes by id, relations by
/// (micro_idea_id, rank, ...).
KnowledgeSynthesisGraph normalized(KnowledgeSynthesisGraph graph);

inline constexpr std::size_t kMaxLinks = 3;

enum class ViolationKind {
  DuplicateId,
  EmptyField,
  ReservedId,
  DanglingMicroIdea,
  DanglingTarget,
  MissingStanceOrFunction,
  UnexpectedStance,
  UnknownScheme,
  UnknownCategory,
  UncoveredMicroIdea,
  TooManyLinks,
  BadRank,
};

std::string_view to_string(ViolationKind kind) noexcept;

struct Violation {
  ViolationKind kind;
  std::string subject;  // offending id
  std::string detail;

  bool operator==(const Violation&) const = default;
};

/// Every violated structural invariant, in deterministic order. Relation
/// categories are checked against `schemes` (the builtin schemes when null).
std::vector<Violation> validate(const KnowledgeSynthesisGraph& graph,
                                const std::vector<prompts::CodingScheme>* schemes = nullptr);

std::string violations_to_json(const std::vector<Violation>& violations);

enum class ExportFormat { Json, GraphML, Dot };

std::optional<ExportFormat> parse_export_format(std::string_view name);

/// Deterministic rendering ordered by id. Throws ksg::Error(Validation)
/// carrying the JSON violation report when the graph is invalid.
std::string export_graph(const KnowledgeSynthesisGraph& graph, ExportFormat format,
                         const std::vector<prompts::CodingScheme>* schemes = nullptr);

/// Inverse of the JSON export. Does not repair: validate() on the result
/// reports whatever was wrong with the source. Throws ksg::Error(Parse) on
/// malformed JSON and ksg::Error(Schema) naming the JSON path on layout errors.
KnowledgeSynthesisGraph import_json(std::string_view bytes);

/// JSON rendering without the validity gate, used when a graph must be
/// persisted for inspection regardless of its state.
std::string to_json_unchecked(const KnowledgeSynthesisGraph& graph);

inline constexpr std::string_view kSchemaVersion = "1";

nlohmann::json relation_to_json(const EpistemicRelation& relation);
/// `path` prefixes JSON paths in schema error messages.
EpistemicRelation relation_from_json(const nlohmann::json& doc, const std::string& path = "$");
nlohmann::json metadata_to_json(const GraphMetadata& metadata);

struct GraphDelta {
  std::vector<MicroIdea> added_micro_ideas;
  std::vector<MicroIdea> removed_micro_ideas;
  std::vector<SynthesisNode> added_nodes;
  std::vector<SynthesisNode> removed_nodes;
  std::vector<EpistemicRelation> added_relations;
  std::vector<EpistemicRelation> removed_relations;
  std::optional<GraphMetadata> metadata;  // set when metadata differs

  bool empty() const noexcept;
};

GraphDelta diff(const KnowledgeSynthesisGraph& from, const KnowledgeSynthesisGraph& to);
KnowledgeSynthesisGraph patch(const KnowledgeSynthesisGraph& base, const GraphDelta& delta);
std::string delta_to_json(const GraphDelta& delta);

}  // namespace ksg::graph
