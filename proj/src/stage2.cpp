#include "ksg/stage2.hpp"

#include <set>
#include <sstream>

#include "ksg/hash.hpp"

namespace ksg::stage2 {
namespace {

using nlohmann::json;
using payload::PayloadError;
using payload::PayloadErrorKind;

constexpr std::string_view kSystemPrompt =
    "You help instructors identify the key concepts and arguments of a course reading so that student ideas can "
    "be connected to them. Reply with one JSON object and no other text.";

constexpr std::string_view kSchemaHint = "stage2_payload_v1";

// Largest prefix of `text` of at most `limit` bytes that ends on a UTF-8
// character boundary.
std::string_view utf8_prefix(std::string_view text, std::size_t limit)
{
  if (text.size() <= limit) return text;
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return text.substr(0, cut);
}

std::vector<std::string> paragraphs(const std::string& text)
{
  std::vector<std::string> out;
  std::istringstream lines(text);
  std::string line;
  std::string current;
  auto flush = [&] {
    auto t = trim(current);
    if (!t.empty()) out.push_back(std::move(t));
    current.clear();
  };
  while (std::getline(lines, line)) {
    if (trim(line).empty()) flush();
    else current += line + "\n";
  }
  flush();
  return out;
}

Error missing(ContextMode mode, const char* field)
{
  return Error(ErrorCode::Config,
               "context mode '" + std::string(to_string(mode)) + "' needs reading field '" + field + "'");
}

PayloadError error(PayloadErrorKind kind, std::string message, std::string_view raw)
{
  return PayloadError{kind, std::move(message), std::string(raw)};
}

}  // namespace

std::string_view to_string(ContextMode mode) noexcept
{
  switch (mode) {
    case ContextMode::AbstractOnly: return "abstract";
    case ContextMode::SummaryOnly: return "summary";
    case ContextMode::FullText: return "fulltext";
    case ContextMode::SummaryPlusInstructor: return "summary_instructor";
  }
  return "";
}

std::optional<ContextMode> parse_context_mode(std::string_view text)
{
  const auto token = normalize_token(text);
  if (token == "abstract" || token == "abstract_only") return ContextMode::AbstractOnly;
  if (token == "summary" || token == "summary_only") return ContextMode::SummaryOnly;
  if (token == "fulltext" || token == "full_text") return ContextMode::FullText;
  if (token == "summary_instructor" || token == "summary_plus_instructor") return ContextMode::SummaryPlusInstructor;
  return std::nullopt;
}

std::string build_stage2_context(const corpus::Reading& reading, ContextMode mode, std::size_t char_budget)
{
  switch (mode) {
    case ContextMode::AbstractOnly: {
      std::string out;
      int taken = 0;
      for (const auto& p : paragraphs(reading.full_text)) {
        if (p.starts_with("#")) continue;
        out += (out.empty() ? "" : "\n\n") + p;
        if (++taken == 2) break;
      }
      return std::string(utf8_prefix(out, kAbstractCharBudget));
    }
    case ContextMode::SummaryOnly:
      if (!reading.summary) throw missing(mode, "summary");
      return *reading.summary;
    case ContextMode::FullText: {
      const auto head = utf8_prefix(reading.full_text, char_budget);
      if (head.size() == reading.full_text.size()) return reading.full_text;
      return std::string(head) + "\n[truncated: showing the first " + std::to_string(head.size()) + " of " +
             std::to_string(reading.full_text.size()) + " characters]";
    }
    case ContextMode::SummaryPlusInstructor: {
      if (!reading.summary) throw missing(mode, "summary");
      if (reading.instructor_prompts.empty()) throw missing(mode, "instructor_prompts");
      std::string out = *reading.summary + "\n\nInstructor prompts:\n";
      for (std::size_t i = 0; i < reading.instructor_prompts.size(); ++i) {
        out += std::to_string(i + 1) + ". " + reading.instructor_prompts[i] + "\n";
      }
      return out;
    }
  }
  throw Error(ErrorCode::Config, "unknown context mode");
}

payload::ParseResult<std::vector<NodeDraft>> parse_stage2_payload(std::string_view raw, std::size_t min_nodes,
                                                                  std::size_t max_nodes)
{
  const auto object = payload::select_object(raw, [](const json& o) { return o.contains("nodes"); });
  if (!object) return error(PayloadErrorKind::NoObject, "no JSON object found", raw);
  if (!object->contains("nodes")) return error(PayloadErrorKind::MissingField, "missing \"nodes\"", raw);
  const auto& nodes = (*object)["nodes"];
  if (!nodes.is_array()) return error(PayloadErrorKind::WrongType, "\"nodes\" must be an array", raw);

  std::vector<NodeDraft> out;
  std::set<std::string> folded;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    const auto where = "nodes[" + std::to_string(i) + "]";
    if (!n.is_object()) return error(PayloadErrorKind::WrongType, where + " must be an object", raw);
    for (const char* key : {"title", "description"}) {
      if (!n.contains(key)) return error(PayloadErrorKind::MissingField, where + " lacks \"" + key + "\"", raw);
      if (!n[key].is_string()) return error(PayloadErrorKind::WrongType, where + "." + key + " must be a string", raw);
      if (trim(n[key].get<std::string>()).empty()) {
        return error(PayloadErrorKind::EmptyField, where + "." + key + " is empty", raw);
      }
    }
    NodeDraft d{trim(n["title"].get<std::string>()), trim(n["description"].get<std::string>())};
    if (!folded.insert(to_lower(d.title)).second) {
      return error(PayloadErrorKind::DuplicateTitle, "duplicate title '" + d.title + "'", raw);
    }
    out.push_back(std::move(d));
  }
  if (out.size() < min_nodes || out.size() > max_nodes) {
    return error(PayloadErrorKind::NodeCount,
                 std::to_string(out.size()) + " nodes outside [" + std::to_string(min_nodes) + ", " +
                     std::to_string(max_nodes) + "]",
                 raw);
  }
  return out;
}

std::string node_id(std::string_view reading_id, std::string_view title)
{
  return stable_id("sn-", reading_id, title);
}

Stage2Result generate_nodes(const corpus::Reading& reading, const Stage2Options& options,
                            const prompts::PromptRegistry& registry, gateway::ModelGateway& gateway)
{
  if (options.min_nodes < 1 || options.max_nodes < options.min_nodes) {
    throw Error(ErrorCode::Config, "node bounds must satisfy 1 <= min_nodes <= max_nodes");
  }
  const auto& tmpl = registry.get(prompts::template_id(2, prompts::PromptVersion::PBase));
  const std::map<std::string, std::string> vars{
      {"reading_title", reading.title},
      {"context", build_stage2_context(reading, options.mode, options.char_budget)},
      {"context_mode", std::string(to_string(options.mode))},
      {"min_nodes", std::to_string(options.min_nodes)},
      {"max_nodes", std::to_string(options.max_nodes)},
  };
  gateway::CompletionRequest request;
  request.model_id = options.model_id;
  request.system_prompt = std::string(kSystemPrompt);
  request.user_prompt = prompts::render_template(tmpl.body, vars, prompts::RenderMode::Lenient);
  request.temperature = options.temperature;
  request.seed = options.seed;
  request.response_schema_hint = std::string(kSchemaHint);

  Stage2Result out;
  out.template_hash = tmpl.content_hash;
  std::vector<std::string> raw_texts;
  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    out.fingerprints.push_back(gateway::fingerprint(request));
    const auto result = gateway.complete(request);
    raw_texts.push_back(result.raw_text);
    auto parsed = parse_stage2_payload(result.raw_text, options.min_nodes, options.max_nodes);
    if (auto* drafts = std::get_if<std::vector<NodeDraft>>(&parsed)) {
      for (auto& d : *drafts) {
        graph::SynthesisNode node;
        node.id = node_id(reading.id, d.title);
        node.title = std::move(d.title);
        node.description = std::move(d.description);
        node.reading_id = reading.id;
        node.context_mode = std::string(to_string(options.mode));
        out.nodes.push_back(std::move(node));
      }
      return out;
    }
    const auto& e = std::get<PayloadError>(parsed);
    last_error = std::string(payload::to_string(e.kind)) + ": " + e.message;
    request.user_prompt += "\n\nYour previous reply could not be used (" + last_error +
                           "). Reply again with only the JSON object described above.";
  }
  throw Stage2Failure("stage 2 failed after a corrective re-prompt: " + last_error, std::move(raw_texts));
}

json nodes_to_json(const std::vector<graph::SynthesisNode>& nodes)
{
  json out = json::array();
  for (const auto& n : nodes) {
    out.push_back({{"id", n.id},
                   {"title", n.title},
                   {"description", n.description},
                   {"provenance", {{"reading_id", n.reading_id}, {"context_mode", n.context_mode}}}});
  }
  return out;
}

std::vector<graph::SynthesisNode> nodes_from_json(const json& doc)
{
  std::vector<graph::SynthesisNode> out;
  try {
    for (const auto& n : doc) {
      out.push_back({n.at("id").get<std::string>(), n.at("title").get<std::string>(),
                     n.at("description").get<std::string>(), n.at("provenance").at("reading_id").get<std::string>(),
                     n.at("provenance").at("context_mode").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("synthesis nodes: ") + e.what());
  }
  return out;
}

}  // namespace ksg::stage2
