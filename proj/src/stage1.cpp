#include "ksg/stage1.hpp"

#include "ksg/error.hpp"
#include "ksg/hash.hpp"

namespace ksg::stage1 {
namespace {

using nlohmann::json;
using payload::PayloadError;
using payload::PayloadErrorKind;

constexpr std::string_view kSystemPrompt =
    "You help instructors turn student social annotations on course readings into Micro-ideas: concise, "
    "standalone statements that carry the epistemic intent of the original contribution. Reply with one JSON "
    "object and no other text.";

constexpr std::string_view kSchemaHint = "stage1_payload_v1";

std::string format_reply_chain(const std::vector<corpus::Annotation>& chain)
{
  if (chain.empty()) return "(none)\n";
  std::string out;
  for (const auto& a : chain) out += "- [" + a.author + "] " + a.body + "\n";
  return out;
}

PayloadError error(PayloadErrorKind kind, std::string message, std::string_view raw)
{
  return PayloadError{kind, std::move(message), std::string(raw)};
}

std::string corrective_prompt(const std::string& original, const PayloadError& e)
{
  return original + "\n\nYour previous reply could not be used (" + std::string(payload::to_string(e.kind)) + ": " +
         e.message + "). Reply again with only the JSON object described above.";
}

}  // namespace

ContextBundle build_bundle(const corpus::Annotation& annotation, const corpus::Corpus& corpus,
                           const corpus::Reading& /*reading*/, std::size_t depth_limit)
{
  return ContextBundle{annotation, annotation.quoted_passage, corpus::thread_context(annotation, corpus, depth_limit)};
}

payload::ParseResult<Stage1Payload> parse_stage1_payload(std::string_view raw)
{
  const auto object = payload::select_object(raw, [](const json& o) { return o.contains("substantive"); });
  if (!object) return error(PayloadErrorKind::NoObject, "no JSON object found", raw);
  const auto& o = *object;

  Stage1Payload p;
  if (!o.contains("substantive")) return error(PayloadErrorKind::MissingField, "missing \"substantive\"", raw);
  if (!o["substantive"].is_boolean()) {
    return error(PayloadErrorKind::WrongType, "\"substantive\" must be a boolean", raw);
  }
  p.substantive = o["substantive"].get<bool>();

  for (const char* key : {"statement", "label", "reason"}) {
    if (o.contains(key) && !o[key].is_null() && !o[key].is_string()) {
      return error(PayloadErrorKind::WrongType, std::string("\"") + key + "\" must be a string", raw);
    }
  }
  auto text = [&](const char* key) {
    return o.contains(key) && o[key].is_string() ? o[key].get<std::string>() : std::string{};
  };
  p.statement = text("statement");
  p.reason = text("reason");
  const auto label = text("label");
  if (!trim(label).empty()) {
    p.label = parse_micro_idea_label(label);
    if (!p.label) return error(PayloadErrorKind::LabelDomain, "label '" + label + "' is not a micro-idea label", raw);
  }
  if (p.substantive) {
    if (trim(p.statement).empty()) return error(PayloadErrorKind::EmptyField, "substantive reply needs a statement", raw);
    if (!p.label) return error(PayloadErrorKind::MissingField, "substantive reply needs a label", raw);
  }
  return p;
}

std::string serialize_stage1_payload(const Stage1Payload& p)
{
  json doc{{"substantive", p.substantive},
           {"statement", p.statement},
           {"label", p.label ? json(std::string(to_string(*p.label))) : json(nullptr)},
           {"reason", p.reason}};
  return doc.dump();
}

gateway::CompletionRequest build_request(const ContextBundle& bundle, const prompts::PromptRegistry& registry,
                                         const Stage1Options& options)
{
  const auto& tmpl = registry.get(prompts::template_id(1, options.version));
  const auto& scheme = registry.scheme(tmpl.scheme_ref.value_or(std::string(prompts::kStage1SchemeId)));
  const std::map<std::string, std::string> vars{
      {"annotation_id", bundle.annotation.id},
      {"annotation", bundle.annotation.body},
      {"quoted_passage", bundle.quoted_passage.empty() ? "(none)" : bundle.quoted_passage},
      {"reply_context", format_reply_chain(bundle.reply_chain)},
      {"label_scheme", scheme.describe()},
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

ExtractionResult extract_micro_idea(const ContextBundle& bundle, const prompts::PromptRegistry& registry,
                                    const Stage1Options& options, gateway::ModelGateway& gateway)
{
  auto request = build_request(bundle, registry, options);
  ExtractionResult out{InvalidOutput{}, {}};
  std::vector<std::string> raw_texts;

  for (int attempt = 0; attempt < 2; ++attempt) {
    out.fingerprints.push_back(gateway::fingerprint(request));
    const auto result = gateway.complete(request);
    raw_texts.push_back(result.raw_text);
    auto parsed = parse_stage1_payload(result.raw_text);
    if (auto* p = std::get_if<Stage1Payload>(&parsed)) {
      if (!p->substantive) {
        out.outcome = NonSubstantive{p->reason};
        return out;
      }
      graph::MicroIdea idea;
      idea.source_annotation_id = bundle.annotation.id;
      idea.statement = trim(p->statement);
      idea.id = stable_id("mi-", idea.source_annotation_id, idea.statement);
      idea.label = *p->label;
      const bool over = word_count(idea.statement) > kStatementWordCap;
      out.outcome = Substantive{std::move(idea), over};
      return out;
    }
    const auto& e = std::get<PayloadError>(parsed);
    if (attempt == 0) {
      request.user_prompt = corrective_prompt(request.user_prompt, e);
    } else {
      out.outcome = InvalidOutput{std::string(payload::to_string(e.kind)) + ": " + e.message, raw_texts, false};
    }
  }
  return out;
}

std::string outcome_kind(const FilterOutcome& outcome)
{
  switch (outcome.index()) {
    case 0: return "substantive";
    case 1: return "non_substantive";
    default: return "invalid";
  }
}

json Stage1Report::to_json() const
{
  return {{"template_id", template_id},
          {"template_hash", template_hash},
          {"model_id", model_id},
          {"source_run_id", source_run_id},
          {"counts",
           {{"substantive", substantive},
            {"non_substantive", non_substantive},
            {"invalid", invalid},
            {"transport_failures", transport_failures}}},
          {"over_length", over_length},
          {"items", items}};
}

Stage1Run run_stage1(const corpus::Corpus& corpus, const corpus::Reading& reading,
                     const prompts::PromptRegistry& registry, const Stage1Options& options,
                     gateway::ModelGateway& gateway)
{
  if (options.parallelism == 0) throw Error(ErrorCode::Config, "parallelism must be at least 1");
  const auto& tmpl = registry.get(prompts::template_id(1, options.version));
  registry.scheme(tmpl.scheme_ref.value_or(std::string(prompts::kStage1SchemeId)));

  const auto annotations = corpus.annotations();
  std::vector<ExtractionResult> results(annotations.size(), ExtractionResult{InvalidOutput{}, {}});
  gateway::parallel_for(annotations.size(), options.parallelism, [&](std::size_t i) {
    const auto bundle = build_bundle(annotations[i], corpus, reading, options.depth_limit);
    try {
      results[i] = extract_micro_idea(bundle, registry, options, gateway);
    } catch (const gateway::TransportError& e) {
      results[i] = ExtractionResult{InvalidOutput{e.what(), {}, true}, {gateway::fingerprint(build_request(bundle, registry, options))}};
    }
  });

  Stage1Run run;
  run.report.template_id = tmpl.template_id;
  run.report.template_hash = tmpl.content_hash;
  run.report.model_id = options.model_id;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& r = results[i];
    json item{{"annotation_id", annotations[i].id}, {"outcome", outcome_kind(r.outcome)}, {"fingerprints", r.fingerprints}};
    if (const auto* s = std::get_if<Substantive>(&r.outcome)) {
      ++run.report.substantive;
      item["micro_idea_id"] = s->micro_idea.id;
      item["statement"] = s->micro_idea.statement;
      item["label"] = std::string(to_string(s->micro_idea.label));
      item["over_length"] = s->over_length;
      if (s->over_length) run.report.over_length.push_back(s->micro_idea.id);
    } else if (const auto* n = std::get_if<NonSubstantive>(&r.outcome)) {
      ++run.report.non_substantive;
      item["reason"] = n->reason;
    } else {
      const auto& inv = std::get<InvalidOutput>(r.outcome);
      ++run.report.invalid;
      if (inv.transport_failure) ++run.report.transport_failures;
      item["detail"] = inv.detail;
      item["raw_texts"] = inv.raw_texts;
      item["transport_failure"] = inv.transport_failure;
    }
    run.report.items.push_back(std::move(item));
    run.outcomes.push_back(std::move(r.outcome));
  }
  return run;
}

std::vector<graph::MicroIdea> micro_ideas(const std::vector<FilterOutcome>& outcomes)
{
  std::vector<graph::MicroIdea> out;
  for (const auto& o : outcomes) {
    if (const auto* s = std::get_if<Substantive>(&o)) out.push_back(s->micro_idea);
  }
  return out;
}

std::vector<Prediction> predictions_from_report(const json& report)
{
  std::vector<Prediction> out;
  if (!report.contains("items") || !report["items"].is_array()) {
    throw Error(ErrorCode::Parse, "stage-1 report has no items array");
  }
  for (const auto& item : report["items"]) {
    Prediction p;
    p.annotation_id = item.at("annotation_id").get<std::string>();
    const auto kind = item.at("outcome").get<std::string>();
    if (kind == "substantive") p.label = item.at("label").get<std::string>();
    else if (kind == "non_substantive") p.label = "filtered";
    else p.label = "invalid";
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ksg::stage1
