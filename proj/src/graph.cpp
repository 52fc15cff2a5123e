#include "ksg/graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ksg/error.hpp"

namespace ksg::graph {

std::optional<RelationFunction> EpistemicRelation::relation_function() const
{
  if (!function) return std::nullopt;
  return parse_relation_function(*function);
}

KnowledgeSynthesisGraph normalized(KnowledgeSynthesisGraph graph)
{
  std::sort(graph.micro_ideas.begin(), graph.micro_ideas.end());
  std::sort(graph.synthesis_nodes.begin(), graph.synthesis_nodes.end());
  std::sort(graph.relations.begin(), graph.relations.end());
  return graph;
}

bool KnowledgeSynthesisGraph::operator==(const KnowledgeSynthesisGraph& other) const
{
  const auto a = normalized(*this);
  const auto b = normalized(other);
  return a.micro_ideas == b.micro_ideas && a.synthesis_nodes == b.synthesis_nodes && a.relations == b.relations &&
         a.metadata == b.metadata;
}

std::string_view to_string(ViolationKind kind) noexcept
{
  switch (kind) {
    case ViolationKind::DuplicateId: return "duplicate_id";
    case ViolationKind::EmptyField: return "empty_field";
    case ViolationKind::ReservedId: return "reserved_id";
    case ViolationKind::DanglingMicroIdea: return "dangling_micro_idea";
    case ViolationKind::DanglingTarget: return "dangling_target";
    case ViolationKind::MissingStanceOrFunction: return "missing_stance_or_function";
    case ViolationKind::UnexpectedStance: return "unexpected_stance";
    case ViolationKind::UnknownScheme: return "unknown_scheme";
    case ViolationKind::UnknownCategory: return "unknown_category";
    case ViolationKind::UncoveredMicroIdea: return "uncovered_micro_idea";
    case ViolationKind::TooManyLinks: return "too_many_links";
    case ViolationKind::BadRank: return "bad_rank";
  }
  return "unknown";
}

std::vector<Violation> validate(const KnowledgeSynthesisGraph& input, const std::vector<prompts::CodingScheme>* schemes)
{
  const auto graph = normalized(input);
  const auto& known_schemes = schemes ? *schemes : prompts::builtin_schemes();
  std::vector<Violation> out;
  auto report = [&](ViolationKind kind, std::string subject, std::string detail) {
    out.push_back({kind, std::move(subject), std::move(detail)});
  };

  std::set<std::string> micro_ids;
  std::set<std::string> node_ids;
  for (const auto& m : graph.micro_ideas) {
    if (m.id.empty()) report(ViolationKind::EmptyField, m.id, "micro-idea id is empty");
    if (m.statement.empty()) report(ViolationKind::EmptyField, m.id, "micro-idea statement is empty");
    if (m.id == kUncategorized) report(ViolationKind::ReservedId, m.id, "id is reserved for the uncategorized sentinel");
    if (!micro_ids.insert(m.id).second) report(ViolationKind::DuplicateId, m.id, "micro-idea id repeated");
  }
  for (const auto& n : graph.synthesis_nodes) {
    if (n.id.empty()) report(ViolationKind::EmptyField, n.id, "synthesis node id is empty");
    if (n.title.empty()) report(ViolationKind::EmptyField, n.id, "synthesis node title is empty");
    if (n.id == kUncategorized) report(ViolationKind::ReservedId, n.id, "id is reserved for the uncategorized sentinel");
    if (!node_ids.insert(n.id).second) report(ViolationKind::DuplicateId, n.id, "synthesis node id repeated");
    if (micro_ids.contains(n.id)) report(ViolationKind::DuplicateId, n.id, "id used by both a micro-idea and a node");
  }

  std::map<std::string, std::vector<unsigned>> ranks;
  for (const auto& r : graph.relations) {
    const auto subject = r.micro_idea_id + "#" + std::to_string(r.rank);
    if (!micro_ids.contains(r.micro_idea_id)) {
      report(ViolationKind::DanglingMicroIdea, subject,
             node_ids.contains(r.micro_idea_id) ? "relation source is a synthesis node"
                                                : "relation source '" + r.micro_idea_id + "' is not a micro-idea");
    } else {
      ranks[r.micro_idea_id].push_back(r.rank);
    }

    if (r.target && !node_ids.contains(*r.target)) {
      report(ViolationKind::DanglingTarget, subject,
             micro_ids.contains(*r.target) ? "relation target is a micro-idea"
                                           : "relation target '" + *r.target + "' is not a synthesis node");
    }

    const auto scheme = std::find_if(known_schemes.begin(), known_schemes.end(), [&](const prompts::CodingScheme& s) {
      return s.scheme_id == r.scheme_id && s.stage == 3;
    });
    if (scheme == known_schemes.end()) {
      report(ViolationKind::UnknownScheme, subject, "unknown stage-3 scheme '" + r.scheme_id + "'");
    }

    if (r.uncategorized()) {
      if (r.stance || r.function) {
        report(ViolationKind::UnexpectedStance, subject, "uncategorized relation carries a stance or function");
      }
      continue;
    }
    if (scheme == known_schemes.end()) continue;
    if (!r.function || (scheme->two_level && !r.stance)) {
      report(ViolationKind::MissingStanceOrFunction, subject,
             scheme->two_level ? "two-level relation needs both stance and function" : "relation needs a category");
    }
    if (!scheme->two_level && r.stance) {
      report(ViolationKind::UnexpectedStance, subject, "flat scheme '" + scheme->scheme_id + "' takes no stance");
    }
    if (r.function && !scheme->has_category(*r.function)) {
      report(ViolationKind::UnknownCategory, subject,
             "'" + *r.function + "' is not a category of scheme '" + scheme->scheme_id + "'");
    }
  }

  for (const auto& m : graph.micro_ideas) {
    auto it = ranks.find(m.id);
    if (it == ranks.end()) {
      report(ViolationKind::UncoveredMicroIdea, m.id, "micro-idea has no relation");
      continue;
    }
    auto rs = it->second;
    if (rs.size() > kMaxLinks) {
      report(ViolationKind::TooManyLinks, m.id,
             std::to_string(rs.size()) + " relations exceed the limit of " + std::to_string(kMaxLinks));
    }
    std::sort(rs.begin(), rs.end());
    for (unsigned i = 0; i < rs.size(); ++i) {
      if (rs[i] != i) {
        report(ViolationKind::BadRank, m.id, "relation ranks must be 0..n-1 without gaps or repeats");
        break;
      }
    }
  }
  return out;
}

bool GraphDelta::empty() const noexcept
{
  return added_micro_ideas.empty() && removed_micro_ideas.empty() && added_nodes.empty() && removed_nodes.empty() &&
         added_relations.empty() && removed_relations.empty() && !metadata;
}

namespace {

template <typename T>
void multiset_difference(const std::vector<T>& a, const std::vector<T>& b, std::vector<T>& out)
{
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
}

template <typename T>
void remove_each(std::vector<T>& items, const std::vector<T>& removed)
{
  for (const auto& r : removed) {
    auto it = std::find(items.begin(), items.end(), r);
    if (it != items.end()) items.erase(it);
  }
}

}  // namespace

GraphDelta diff(const KnowledgeSynthesisGraph& from, const KnowledgeSynthesisGraph& to)
{
  const auto a = normalized(from);
  const auto b = normalized(to);
  GraphDelta d;
  multiset_difference(b.micro_ideas, a.micro_ideas, d.added_micro_ideas);
  multiset_difference(a.micro_ideas, b.micro_ideas, d.removed_micro_ideas);
  multiset_difference(b.synthesis_nodes, a.synthesis_nodes, d.added_nodes);
  multiset_difference(a.synthesis_nodes, b.synthesis_nodes, d.removed_nodes);
  multiset_difference(b.relations, a.relations, d.added_relations);
  multiset_difference(a.relations, b.relations, d.removed_relations);
  if (!(a.metadata == b.metadata)) d.metadata = b.metadata;
  return d;
}

KnowledgeSynthesisGraph patch(const KnowledgeSynthesisGraph& base, const GraphDelta& delta)
{
  auto g = base;
  remove_each(g.micro_ideas, delta.removed_micro_ideas);
  remove_each(g.synthesis_nodes, delta.removed_nodes);
  remove_each(g.relations, delta.removed_relations);
  g.micro_ideas.insert(g.micro_ideas.end(), delta.added_micro_ideas.begin(), delta.added_micro_ideas.end());
  g.synthesis_nodes.insert(g.synthesis_nodes.end(), delta.added_nodes.begin(), delta.added_nodes.end());
  g.relations.insert(g.relations.end(), delta.added_relations.begin(), delta.added_relations.end());
  if (delta.metadata) g.metadata = *delta.metadata;
  return normalized(std::move(g));
}

}  // namespace ksg::graph
