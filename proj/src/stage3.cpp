#include "ksg/stage3.hpp"

#include "ksg/error.hpp"

namespace ksg::stage3 {
namespace {

using nlohmann::json;
using payload::PayloadError;
using payload::PayloadErrorKind;

constexpr std::string_view kSystemPrompt =
    "You help instructors connect student Micro-ideas to the key concepts of a course reading. Reply with one "
    "JSON object and no other text.";

constexpr std::string_view kSchemaHint = "stage3_payload_v1";

PayloadError error(PayloadErrorKind kind, std::string message, std::string_view raw)
{
  return PayloadError{kind, std::move(message), std::string(raw)};
}

bool is_uncategorized(std::string_view text)
{
  return normalize_token(text) == graph::kUncategorized;
}

// Optional string member: absent and null read as nullopt, any other
// non-string value sets `wrong_type`.
struct StringField {
  std::optional<std::string> value;
  bool wrong_type = false;
};

StringField string_field(const json& o, const char* key)
{
  if (!o.contains(key) || o[key].is_null()) return {};
  if (!o[key].is_string()) return {std::nullopt, true};
  return {o[key].get<std::string>(), false};
}

std::string format_nodes(const std::vector<graph::SynthesisNode>& nodes)
{
  std::string out;
  for (const auto& n : nodes) out += "- " + n.id + ": " + n.title + " - " + n.description + "\n";
  return out;
}

prompts::PromptVersion resolve_version(const prompts::CodingScheme& scheme, const Stage3Options& options)
{
  if (options.version) return *options.version;
  if (auto v = prompts::parse_version(scheme.scheme_id)) return *v;
  throw Error(ErrorCode::Config, "scheme '" + scheme.scheme_id + "' names no prompt version; set one explicitly");
}

}  // namespace

std::string outcome_kind(const LinkOutcome& outcome)
{
  switch (outcome.index()) {
    case 0: return "linked";
    case 1: return "uncategorized";
    default: return "invalid";
  }
}

payload::ParseResult<LinkPayload> parse_stage3_payload(std::string_view raw, const prompts::CodingScheme& scheme,
                                                       const std::set<std::string>& node_ids, std::size_t max_links)
{
  const auto object =
      payload::select_object(raw, [](const json& o) { return o.contains("links") || o.contains("target"); });
  if (!object) {
    auto bare = trim(raw);
    while (!bare.empty() && (bare.front() == '"' || bare.front() == '\'')) bare.erase(bare.begin());
    while (!bare.empty() && (bare.back() == '"' || bare.back() == '\'' || bare.back() == '.')) bare.pop_back();
    if (is_uncategorized(bare)) return LinkPayload{true, {}, {}};
    return error(PayloadErrorKind::NoObject, "no JSON object found", raw);
  }

  json links;
  if (object->contains("links")) {
    const auto& l = (*object)["links"];
    if (l.is_string() && is_uncategorized(l.get<std::string>())) {
      return LinkPayload{true, object->value("reason", std::string{}), {}};
    }
    if (!l.is_array()) return error(PayloadErrorKind::WrongType, "\"links\" must be an array", raw);
    links = l;
  } else if (object->contains("target")) {
    links = json::array({*object});
  } else {
    return error(PayloadErrorKind::MissingField, "missing \"links\"", raw);
  }

  if (links.empty()) return error(PayloadErrorKind::LinkCount, "no links given", raw);
  if (links.size() > max_links) {
    return error(PayloadErrorKind::LinkCount,
                 std::to_string(links.size()) + " links exceed the limit of " + std::to_string(max_links), raw);
  }

  LinkPayload out;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto& link = links[i];
    const auto where = "links[" + std::to_string(i) + "]";
    if (!link.is_object()) return error(PayloadErrorKind::WrongType, where + " must be an object", raw);

    const auto target_field = string_field(link, "target");
    if (target_field.wrong_type) return error(PayloadErrorKind::WrongType, where + ".target must be a string", raw);
    if (!target_field.value) return error(PayloadErrorKind::MissingField, where + " lacks \"target\"", raw);
    const auto& target = target_field.value;
    const auto rationale_field = string_field(link, "rationale");
    if (rationale_field.wrong_type) {
      return error(PayloadErrorKind::WrongType, where + ".rationale must be a string", raw);
    }
    const auto& rationale = rationale_field.value;

    if (is_uncategorized(*target)) {
      if (links.size() > 1) {
        return error(PayloadErrorKind::MixedUncategorized, "\"uncategorized\" must be the only link", raw);
      }
      return LinkPayload{true, rationale.value_or(""), {}};
    }
    const auto node = trim(*target);
    if (!node_ids.contains(node)) return error(PayloadErrorKind::UnknownTarget, "unknown node '" + node + "'", raw);

    graph::EpistemicRelation r;
    r.target = node;
    r.scheme_id = scheme.scheme_id;
    r.rank = static_cast<unsigned>(i);
    if (rationale && !trim(*rationale).empty()) r.rationale = trim(*rationale);

    auto function_field = string_field(link, "function");
    if (!function_field.value && !function_field.wrong_type) function_field = string_field(link, "category");
    if (function_field.wrong_type) {
      return error(PayloadErrorKind::WrongType, where + ".function must be a string", raw);
    }
    const auto& function = function_field.value;
    if (!function || trim(*function).empty()) {
      return error(PayloadErrorKind::MissingField, where + " lacks \"function\"", raw);
    }
    const auto stance_field = string_field(link, "stance");
    if (stance_field.wrong_type) return error(PayloadErrorKind::WrongType, where + ".stance must be a string", raw);
    const auto& stance = stance_field.value;

    if (scheme.two_level) {
      if (!stance || trim(*stance).empty()) {
        return error(PayloadErrorKind::MissingField, where + " lacks \"stance\"", raw);
      }
      r.stance = parse_stance(*stance);
      if (!r.stance) return error(PayloadErrorKind::StanceDomain, "stance '" + *stance + "' is not recognised", raw);
      const auto f = parse_relation_function(*function);
      if (!f) {
        return error(PayloadErrorKind::FunctionDomain, "function '" + *function + "' is not recognised", raw);
      }
      r.function = std::string(to_string(*f));
    } else {
      if (stance && !trim(*stance).empty()) {
        return error(PayloadErrorKind::StanceDomain,
                     "scheme '" + scheme.scheme_id + "' takes no stance, got '" + *stance + "'", raw);
      }
      const auto name = normalize_token(*function);
      if (!scheme.has_category(name)) {
        return error(PayloadErrorKind::FunctionDomain,
                     "'" + *function + "' is not a category of scheme '" + scheme.scheme_id + "'", raw);
      }
      r.function = name;
    }

    for (const auto& prior : out.relations) {
      if (prior.target == r.target && prior.stance == r.stance && prior.function == r.function) {
        return error(PayloadErrorKind::DuplicateLink, "link to '" + node + "' repeated", raw);
      }
    }
    out.relations.push_back(std::move(r));
  }
  return out;
}

gateway::CompletionRequest build_request(const graph::MicroIdea& micro_idea,
                                         const std::vector<graph::SynthesisNode>& nodes,
                                         const prompts::CodingScheme& scheme,
                                         const prompts::PromptRegistry& registry, const Stage3Options& options)
{
  const auto& tmpl = registry.get(prompts::template_id(3, resolve_version(scheme, options)));
  const std::map<std::string, std::string> vars{
      {"micro_idea", micro_idea.statement},
      {"micro_idea_label", std::string(to_string(micro_idea.label))},
      {"nodes", format_nodes(nodes)},
      {"scheme", scheme.describe()},
      {"max_links", std::to_string(options.max_links)},
  };
  gateway::CompletionRequest request;
  request.model_id = options.model_id;
  request.system_prompt = std::string(kSystemPrompt);
  request.user_prompt = prompts::render_template(tmpl.body, vars, prompts::RenderMode::Lenient);
  request.temperature = options.temperature;
  request.seed = options.seed;
  request.response_schema_hint = std::string(kSchemaHint);
  return request;
}

LinkResult link_micro_idea(const graph::MicroIdea& micro_idea, const std::vector<graph::SynthesisNode>& nodes,
                           const prompts::CodingScheme& scheme, const prompts::PromptRegistry& registry,
                           const Stage3Options& options, gateway::ModelGateway& gateway)
{
  if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "linking needs at least one synthesis node");
  std::set<std::string> node_ids;
  for (const auto& n : nodes) node_ids.insert(n.id);

  auto request = build_request(micro_idea, nodes, scheme, registry, options);
  LinkResult out{InvalidOutput{}, {}};
  std::vector<std::string> raw_texts;
  for (int attempt = 0; attempt < 2; ++attempt) {
    out.fingerprints.push_back(gateway::fingerprint(request));
    const auto result = gateway.complete(request);
    raw_texts.push_back(result.raw_text);
    auto parsed = parse_stage3_payload(result.raw_text, scheme, node_ids, options.max_links);
    if (auto* p = std::get_if<LinkPayload>(&parsed)) {
      if (p->uncategorized) {
        out.outcome = Uncategorized{p->reason};
      } else {
        for (auto& r : p->relations) r.micro_idea_id = micro_idea.id;
        out.outcome = Linked{std::move(p->relations)};
      }
      return out;
    }
    const auto& e = std::get<PayloadError>(parsed);
    const auto detail = std::string(payload::to_string(e.kind)) + ": " + e.message;
    if (attempt == 0) {
      request.user_prompt += "\n\nYour previous reply could not be used (" + detail +
                             "). Reply again with only the JSON object described above.";
    } else {
      out.outcome = InvalidOutput{detail, raw_texts, false};
    }
  }
  return out;
}

Stage3Run run_stage3(const std::vector<graph::MicroIdea>& micro_ideas,
                     const std::vector<graph::SynthesisNode>& nodes, const prompts::CodingScheme& scheme,
                     const prompts::PromptRegistry& registry, const Stage3Options& options,
                     gateway::ModelGateway& gateway)
{
  if (options.parallelism == 0) throw Error(ErrorCode::Config, "parallelism must be at least 1");
  if (options.max_links == 0 || options.max_links > graph::kMaxLinks) {
    throw Error(ErrorCode::Config, "max_links must be between 1 and " + std::to_string(graph::kMaxLinks));
  }
  if (scheme.stage != 3) throw Error(ErrorCode::Config, "scheme '" + scheme.scheme_id + "' is not a stage-3 scheme");
  if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "linking needs at least one synthesis node");
  const auto& tmpl = registry.get(prompts::template_id(3, resolve_version(scheme, options)));

  std::vector<LinkResult> results(micro_ideas.size(), LinkResult{InvalidOutput{}, {}});
  gateway::parallel_for(micro_ideas.size(), options.parallelism, [&](std::size_t i) {
    try {
      results[i] = link_micro_idea(micro_ideas[i], nodes, scheme, registry, options, gateway);
    } catch (const gateway::TransportError& e) {
      results[i] = LinkResult{InvalidOutput{e.what(), {}, true},
                              {gateway::fingerprint(build_request(micro_ideas[i], nodes, scheme, registry, options))}};
    }
  });

  Stage3Run run;
  run.report.model_id = options.model_id;
  run.report.scheme_id = scheme.scheme_id;
  run.report.template_hash = tmpl.content_hash;
  for (auto& r : results) {
    switch (r.outcome.index()) {
      case 0: ++run.report.linked; break;
      case 1: ++run.report.uncategorized; break;
      default:
        ++run.report.invalid;
        if (std::get<InvalidOutput>(r.outcome).transport_failure) ++run.report.transport_failures;
    }
    run.outcomes.push_back(std::move(r.outcome));
    run.fingerprints.push_back(std::move(r.fingerprints));
  }
  return run;
}

graph::KnowledgeSynthesisGraph assemble_graph(const std::vector<graph::MicroIdea>& micro_ideas,
                                              const std::vector<graph::SynthesisNode>& nodes,
                                              const std::vector<LinkOutcome>& outcomes,
                                              const std::string& scheme_id, graph::GraphMetadata metadata,
                                              const std::vector<prompts::CodingScheme>* schemes)
{
  if (micro_ideas.size() != outcomes.size()) {
    throw Error(ErrorCode::InvalidArgument, "outcome count does not match micro-idea count");
  }
  graph::KnowledgeSynthesisGraph g;
  g.micro_ideas = micro_ideas;
  g.synthesis_nodes = nodes;
  g.metadata = std::move(metadata);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (const auto* linked = std::get_if<Linked>(&outcomes[i])) {
      for (auto r : linked->relations) {
        r.micro_idea_id = micro_ideas[i].id;
        g.relations.push_back(std::move(r));
      }
      continue;
    }
    graph::EpistemicRelation r;
    r.micro_idea_id = micro_ideas[i].id;
    r.scheme_id = scheme_id;
    if (const auto* u = std::get_if<Uncategorized>(&outcomes[i])) {
      if (!u->reason.empty()) r.rationale = u->reason;
    } else {
      r.rationale = std::string(kInvalidOutputRationale);
    }
    g.relations.push_back(std::move(r));
  }
  if (const auto violations = graph::validate(g, schemes); !violations.empty()) {
    throw Error(ErrorCode::Validation, graph::violations_to_json(violations));
  }
  return g;
}

json outcome_to_json(const LinkOutcome& outcome)
{
  json out{{"kind", outcome_kind(outcome)}};
  if (const auto* l = std::get_if<Linked>(&outcome)) {
    out["relations"] = json::array();
    for (const auto& r : l->relations) out["relations"].push_back(graph::relation_to_json(r));
  } else if (const auto* u = std::get_if<Uncategorized>(&outcome)) {
    out["reason"] = u->reason;
  } else {
    const auto& inv = std::get<InvalidOutput>(outcome);
    out["detail"] = inv.detail;
    out["raw_texts"] = inv.raw_texts;
    out["transport_failure"] = inv.transport_failure;
  }
  return out;
}

LinkOutcome outcome_from_json(const json& doc)
{
  try {
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "linked") {
      Linked l;
      const auto& rels = doc.at("relations");
      for (std::size_t i = 0; i < rels.size(); ++i) {
        l.relations.push_back(graph::relation_from_json(rels[i], "$.relations[" + std::to_string(i) + "]"));
      }
      return l;
    }
    if (kind == "uncategorized") return Uncategorized{doc.value("reason", std::string{})};
    if (kind == "invalid") {
      return InvalidOutput{doc.value("detail", std::string{}),
                           doc.value("raw_texts", std::vector<std::string>{}),
                           doc.value("transport_failure", false)};
    }
    throw Error(ErrorCode::Parse, "unknown outcome kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("stage-3 outcome: ") + e.what());
  }
}

json outcomes_file(const std::vector<graph::MicroIdea>& micro_ideas, const std::vector<Stage3Run>& runs,
                   const std::string& source_run_id)
{
  json models = json::object();
  for (const auto& run : runs) {
    if (run.outcomes.size() != micro_ideas.size()) {
      throw Error(ErrorCode::InvalidArgument, "outcome count does not match micro-idea count");
    }
    json items = json::array();
    for (std::size_t i = 0; i < micro_ideas.size(); ++i) {
      items.push_back({{"micro_idea_id", micro_ideas[i].id},
                       {"outcome", outcome_to_json(run.outcomes[i])},
                       {"fingerprints", run.fingerprints[i]}});
    }
    const auto& rep = run.report;
    models[rep.model_id] = {{"scheme_id", rep.scheme_id},
                            {"report",
                             {{"template_hash", rep.template_hash},
                              {"linked", rep.linked},
                              {"uncategorized", rep.uncategorized},
                              {"invalid", rep.invalid},
                              {"transport_failures", rep.transport_failures}}},
                            {"items", std::move(items)}};
  }
  return {{"source_run_id", source_run_id}, {"models", std::move(models)}};
}

std::vector<ModelOutcomes> read_outcomes_file(const json& doc)
{
  std::vector<ModelOutcomes> out;
  try {
    for (const auto& [model, entry] : doc.at("models").items()) {
      ModelOutcomes m;
      m.model_id = model;
      m.scheme_id = entry.at("scheme_id").get<std::string>();
      for (const auto& item : entry.at("items")) {
        m.micro_idea_ids.push_back(item.at("micro_idea_id").get<std::string>());
        m.outcomes.push_back(outcome_from_json(item.at("outcome")));
      }
      out.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("stage-3 outcomes file: ") + e.what());
  }
  return out;
}

}  // namespace ksg::stage3
