#include <map>
#include <sstream>

#include "ksg/error.hpp"
#include "ksg/graph.hpp"

namespace ksg::graph {
namespace {

using nlohmann::json;

json opt(const std::optional<std::string>& value)
{
  return value ? json(*value) : json(nullptr);
}

json micro_idea_to_json(const MicroIdea& m)
{
  return {{"id", m.id},
          {"source_annotation_id", m.source_annotation_id},
          {"statement", m.statement},
          {"label", std::string(to_string(m.label))}};
}

json node_to_json(const SynthesisNode& n)
{
  return {{"id", n.id},
          {"title", n.title},
          {"description", n.description},
          {"provenance", {{"reading_id", n.reading_id}, {"context_mode", n.context_mode}}}};
}

json graph_to_json(const KnowledgeSynthesisGraph& input)
{
  const auto g = normalized(input);
  json doc{{"schema_version", std::string(kSchemaVersion)}, {"metadata", metadata_to_json(g.metadata)}};
  doc["micro_ideas"] = json::array();
  for (const auto& m : g.micro_ideas) doc["micro_ideas"].push_back(micro_idea_to_json(m));
  doc["synthesis_nodes"] = json::array();
  for (const auto& n : g.synthesis_nodes) doc["synthesis_nodes"].push_back(node_to_json(n));
  doc["relations"] = json::array();
  for (const auto& r : g.relations) doc["relations"].push_back(relation_to_json(r));
  return doc;
}

// Schema-checking accessors that report JSON paths.
const json& member(const json& obj, const char* key, const std::string& path)
{
  if (!obj.is_object()) throw Error(ErrorCode::Schema, path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::Schema, path + "." + key + ": missing");
  return *it;
}

std::string string_at(const json& obj, const char* key, const std::string& path)
{
  const auto& v = member(obj, key, path);
  if (!v.is_string()) throw Error(ErrorCode::Schema, path + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string_at(const json& obj, const char* key, const std::string& path)
{
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return string_at(obj, key, path);
}

const json& array_at(const json& obj, const char* key, const std::string& path)
{
  const auto& v = member(obj, key, path);
  if (!v.is_array()) throw Error(ErrorCode::Schema, path + "." + key + ": expected an array");
  return v;
}

GraphMetadata metadata_from_json(const json& doc, const std::string& path)
{
  GraphMetadata m;
  m.run_id = string_at(doc, "run_id", path);
  m.created_at = string_at(doc, "created_at", path);
  const auto& versions = member(doc, "prompt_versions", path);
  if (!versions.is_object()) throw Error(ErrorCode::Schema, path + ".prompt_versions: expected an object");
  for (const auto& [k, v] : versions.items()) {
    if (!v.is_string()) throw Error(ErrorCode::Schema, path + ".prompt_versions." + k + ": expected a string");
    m.prompt_versions[k] = v.get<std::string>();
  }
  const auto& models = array_at(doc, "model_ids", path);
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!models[i].is_string()) {
      throw Error(ErrorCode::Schema, path + ".model_ids[" + std::to_string(i) + "]: expected a string");
    }
    m.model_ids.push_back(models[i].get<std::string>());
  }
  return m;
}

std::string xml_escape(std::string_view text)
{
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\t': out += "&#9;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      default:
        // Other C0 controls are not allowed in XML 1.0.
        if (c < 0x20) out += "\xEF\xBF\xBD";
        else out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::string dot_quote(std::string_view text)
{
  std::string out = "\"";
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

using Attributes = std::vector<std::pair<std::string, std::string>>;

Attributes micro_attributes(const MicroIdea& m)
{
  return {{"kind", "micro_idea"},
          {"label", m.statement},
          {"epistemic_label", std::string(to_string(m.label))},
          {"source_annotation_id", m.source_annotation_id}};
}

Attributes node_attributes(const SynthesisNode& n)
{
  return {{"kind", "synthesis_node"},
          {"label", n.title},
          {"description", n.description},
          {"reading_id", n.reading_id},
          {"context_mode", n.context_mode}};
}

Attributes edge_attributes(const EpistemicRelation& r)
{
  Attributes a;
  if (r.stance) a.emplace_back("stance", std::string(to_string(*r.stance)));
  if (r.function) a.emplace_back("function", *r.function);
  a.emplace_back("scheme_id", r.scheme_id);
  a.emplace_back("rank", std::to_string(r.rank));
  if (r.rationale) a.emplace_back("rationale", *r.rationale);
  return a;
}

bool uses_uncategorized(const KnowledgeSynthesisGraph& g)
{
  for (const auto& r : g.relations) {
    if (r.uncategorized()) return true;
  }
  return false;
}

std::string to_graphml(const KnowledgeSynthesisGraph& g)
{
  struct Key {
    const char* id;
    const char* domain;
    const char* name;
    const char* type;
  };
  static constexpr Key kKeys[] = {
      {"g_run_id", "graph", "run_id", "string"},
      {"g_created_at", "graph", "created_at", "string"},
      {"g_model_ids", "graph", "model_ids", "string"},
      {"g_prompt_versions", "graph", "prompt_versions", "string"},
      {"n_ksg_id", "node", "ksg_id", "string"},
      {"n_kind", "node", "kind", "string"},
      {"n_label", "node", "label", "string"},
      {"n_epistemic_label", "node", "epistemic_label", "string"},
      {"n_source_annotation_id", "node", "source_annotation_id", "string"},
      {"n_description", "node", "description", "string"},
      {"n_reading_id", "node", "reading_id", "string"},
      {"n_context_mode", "node", "context_mode", "string"},
      {"e_stance", "edge", "stance", "string"},
      {"e_function", "edge", "function", "string"},
      {"e_scheme_id", "edge", "scheme_id", "string"},
      {"e_rank", "edge", "rank", "int"},
      {"e_rationale", "edge", "rationale", "string"},
  };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\"\n"
      << "         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\"\n"
      << "         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
         "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n";
  for (const auto& k : kKeys) {
    out << "  <key id=\"" << k.id << "\" for=\"" << k.domain << "\" attr.name=\"" << k.name << "\" attr.type=\""
        << k.type << "\"/>\n";
  }
  out << "  <graph id=\"ksg\" edgedefault=\"directed\">\n";

  auto data = [&](const char* indent, const std::string& prefix, const Attributes& attrs) {
    for (const auto& [name, value] : attrs) {
      out << indent << "<data key=\"" << prefix << name << "\">" << xml_escape(value) << "</data>\n";
    }
  };
  std::string models;
  for (const auto& m : g.metadata.model_ids) models += (models.empty() ? "" : ",") + m;
  std::string versions;
  for (const auto& [stage, v] : g.metadata.prompt_versions) versions += (versions.empty() ? "" : ",") + stage + "=" + v;
  data("    ", "g_",
       {{"run_id", g.metadata.run_id},
        {"created_at", g.metadata.created_at},
        {"model_ids", models},
        {"prompt_versions", versions}});

  // GraphML ids must be NMTOKENs; graph ids are carried in ksg_id instead.
  std::map<std::string, std::string> xml_id;
  std::size_t counter = 0;
  auto vertex = [&](const std::string& id, Attributes attrs) {
    const auto vid = "v" + std::to_string(counter++);
    xml_id[id] = vid;
    out << "    <node id=\"" << vid << "\">\n";
    attrs.insert(attrs.begin(), {"ksg_id", id});
    data("      ", "n_", attrs);
    out << "    </node>\n";
  };
  for (const auto& m : g.micro_ideas) vertex(m.id, micro_attributes(m));
  for (const auto& n : g.synthesis_nodes) vertex(n.id, node_attributes(n));
  if (uses_uncategorized(g)) vertex(std::string(kUncategorized), {{"kind", "uncategorized"}, {"label", "uncategorized"}});

  std::size_t edge_counter = 0;
  for (const auto& r : g.relations) {
    const auto target = r.target ? *r.target : std::string(kUncategorized);
    out << "    <edge id=\"e" << edge_counter++ << "\" source=\"" << xml_id.at(r.micro_idea_id) << "\" target=\""
        << xml_id.at(target) << "\">\n";
    data("      ", "e_", edge_attributes(r));
    out << "    </edge>\n";
  }
  out << "  </graph>\n</graphml>\n";
  return out.str();
}

std::string to_dot(const KnowledgeSynthesisGraph& g)
{
  std::ostringstream out;
  auto attr_list = [&](const Attributes& attrs) {
    out << " [";
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      out << (i ? ", " : "") << attrs[i].first << "=" << dot_quote(attrs[i].second);
    }
    out << "]";
  };
  out << "digraph ksg {\n";
  out << "  graph [run_id=" << dot_quote(g.metadata.run_id) << "];\n";
  for (const auto& m : g.micro_ideas) {
    out << "  " << dot_quote(m.id);
    auto attrs = micro_attributes(m);
    attrs.emplace_back("shape", "box");
    attr_list(attrs);
    out << ";\n";
  }
  for (const auto& n : g.synthesis_nodes) {
    out << "  " << dot_quote(n.id);
    auto attrs = node_attributes(n);
    attrs.emplace_back("shape", "ellipse");
    attr_list(attrs);
    out << ";\n";
  }
  if (uses_uncategorized(g)) {
    out << "  " << dot_quote(kUncategorized);
    attr_list({{"kind", "uncategorized"}, {"label", "uncategorized"}, {"shape", "diamond"}});
    out << ";\n";
  }
  for (const auto& r : g.relations) {
    out << "  " << dot_quote(r.micro_idea_id) << " -> " << dot_quote(r.target ? *r.target : kUncategorized);
    attr_list(edge_attributes(r));
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

json delta_relations(const std::vector<EpistemicRelation>& relations)
{
  json out = json::array();
  for (const auto& r : relations) out.push_back(relation_to_json(r));
  return out;
}

}  // namespace

nlohmann::json metadata_to_json(const GraphMetadata& m)
{
  return {{"run_id", m.run_id},
          {"prompt_versions", m.prompt_versions},
          {"model_ids", m.model_ids},
          {"created_at", m.created_at}};
}

nlohmann::json relation_to_json(const EpistemicRelation& r)
{
  return {{"micro_idea_id", r.micro_idea_id},
          {"target", r.target ? *r.target : std::string(kUncategorized)},
          {"stance", r.stance ? json(std::string(to_string(*r.stance))) : json(nullptr)},
          {"function", opt(r.function)},
          {"rationale", opt(r.rationale)},
          {"scheme_id", r.scheme_id},
          {"rank", r.rank}};
}

EpistemicRelation relation_from_json(const nlohmann::json& doc, const std::string& path)
{
  EpistemicRelation r;
  r.micro_idea_id = string_at(doc, "micro_idea_id", path);
  const auto target = string_at(doc, "target", path);
  if (target != kUncategorized) r.target = target;
  if (const auto stance = optional_string_at(doc, "stance", path)) {
    r.stance = parse_stance(*stance);
    if (!r.stance || std::string(to_string(*r.stance)) != *stance) {
      throw Error(ErrorCode::Schema, path + ".stance: unknown stance '" + *stance + "'");
    }
  }
  r.function = optional_string_at(doc, "function", path);
  r.rationale = optional_string_at(doc, "rationale", path);
  r.scheme_id = string_at(doc, "scheme_id", path);
  const auto& rank = member(doc, "rank", path);
  if (!rank.is_number_unsigned()) throw Error(ErrorCode::Schema, path + ".rank: expected a non-negative integer");
  r.rank = rank.get<unsigned>();
  return r;
}

std::string violations_to_json(const std::vector<Violation>& violations)
{
  json out = json::array();
  for (const auto& v : violations) {
    out.push_back({{"kind", std::string(to_string(v.kind))}, {"subject", v.subject}, {"detail", v.detail}});
  }
  return json{{"violations", out}}.dump(2) + "\n";
}

std::optional<ExportFormat> parse_export_format(std::string_view name)
{
  const auto token = normalize_token(name);
  if (token == "json") return ExportFormat::Json;
  if (token == "graphml") return ExportFormat::GraphML;
  if (token == "dot" || token == "gv") return ExportFormat::Dot;
  return std::nullopt;
}

std::string to_json_unchecked(const KnowledgeSynthesisGraph& graph)
{
  return graph_to_json(graph).dump(2) + "\n";
}

std::string export_graph(const KnowledgeSynthesisGraph& graph, ExportFormat format,
                         const std::vector<prompts::CodingScheme>* schemes)
{
  const auto violations = validate(graph, schemes);
  if (!violations.empty()) throw Error(ErrorCode::Validation, violations_to_json(violations));
  const auto g = normalized(graph);
  switch (format) {
    case ExportFormat::Json: return to_json_unchecked(g);
    case ExportFormat::GraphML: return to_graphml(g);
    case ExportFormat::Dot: return to_dot(g);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown export format");
}

KnowledgeSynthesisGraph import_json(std::string_view bytes)
{
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("graph JSON: ") + e.what());
  }
  const std::string root = "$";
  const auto version = string_at(doc, "schema_version", root);
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::Schema, "$.schema_version: unsupported version '" + version + "'");
  }
  KnowledgeSynthesisGraph g;
  g.metadata = metadata_from_json(member(doc, "metadata", root), "$.metadata");

  const auto& micro = array_at(doc, "micro_ideas", root);
  for (std::size_t i = 0; i < micro.size(); ++i) {
    const auto path = "$.micro_ideas[" + std::to_string(i) + "]";
    MicroIdea m;
    m.id = string_at(micro[i], "id", path);
    m.source_annotation_id = string_at(micro[i], "source_annotation_id", path);
    m.statement = string_at(micro[i], "statement", path);
    const auto label = string_at(micro[i], "label", path);
    const auto parsed = parse_micro_idea_label(label);
    if (!parsed || to_string(*parsed) != label) {
      throw Error(ErrorCode::Schema, path + ".label: unknown label '" + label + "'");
    }
    m.label = *parsed;
    g.micro_ideas.push_back(std::move(m));
  }

  const auto& nodes = array_at(doc, "synthesis_nodes", root);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto path = "$.synthesis_nodes[" + std::to_string(i) + "]";
    SynthesisNode n;
    n.id = string_at(nodes[i], "id", path);
    n.title = string_at(nodes[i], "title", path);
    n.description = string_at(nodes[i], "description", path);
    const auto& provenance = member(nodes[i], "provenance", path);
    n.reading_id = string_at(provenance, "reading_id", path + ".provenance");
    n.context_mode = string_at(provenance, "context_mode", path + ".provenance");
    g.synthesis_nodes.push_back(std::move(n));
  }

  const auto& relations = array_at(doc, "relations", root);
  for (std::size_t i = 0; i < relations.size(); ++i) {
    g.relations.push_back(relation_from_json(relations[i], "$.relations[" + std::to_string(i) + "]"));
  }
  return g;
}

std::string delta_to_json(const GraphDelta& d)
{
  json doc;
  doc["micro_ideas"] = {{"added", json::array()}, {"removed", json::array()}};
  for (const auto& m : d.added_micro_ideas) doc["micro_ideas"]["added"].push_back(micro_idea_to_json(m));
  for (const auto& m : d.removed_micro_ideas) doc["micro_ideas"]["removed"].push_back(micro_idea_to_json(m));
  doc["synthesis_nodes"] = {{"added", json::array()}, {"removed", json::array()}};
  for (const auto& n : d.added_nodes) doc["synthesis_nodes"]["added"].push_back(node_to_json(n));
  for (const auto& n : d.removed_nodes) doc["synthesis_nodes"]["removed"].push_back(node_to_json(n));
  doc["relations"] = {{"added", delta_relations(d.added_relations)}, {"removed", delta_relations(d.removed_relations)}};
  doc["metadata"] = d.metadata ? metadata_to_json(*d.metadata) : json(nullptr);
  doc["empty"] = d.empty();
  return doc.dump(2) + "\n";
}

}  // namespace ksg::graph
