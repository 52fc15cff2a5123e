#include "ksg/payload.hpp"

namespace ksg::payload {

std::string_view to_string(PayloadErrorKind kind) noexcept
{
  switch (kind) {
    case PayloadErrorKind::NoObject: return "no_object";
    case PayloadErrorKind::MissingField: return "missing_field";
    case PayloadErrorKind::WrongType: return "wrong_type";
    case PayloadErrorKind::EmptyField: return "empty_field";
    case PayloadErrorKind::LabelDomain: return "label_domain";
    case PayloadErrorKind::StanceDomain: return "stance_domain";
    case PayloadErrorKind::FunctionDomain: return "function_domain";
    case PayloadErrorKind::UnknownTarget: return "unknown_target";
    case PayloadErrorKind::LinkCount: return "link_count";
    case PayloadErrorKind::MixedUncategorized: return "mixed_uncategorized";
    case PayloadErrorKind::DuplicateLink: return "duplicate_link";
    case PayloadErrorKind::NodeCount: return "node_count";
    case PayloadErrorKind::DuplicateTitle: return "duplicate_title";
  }
  return "unknown";
}

namespace {

// End (exclusive) of the balanced object starting at `start`, honouring JSON
// string escapes; npos when the braces never balance.
std::size_t object_end(std::string_view text, std::size_t start)
{
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

}  // namespace

std::vector<nlohmann::json> embedded_objects(std::string_view text)
{
  std::vector<nlohmann::json> out;
  std::size_t i = 0;
  while ((i = text.find('{', i)) != std::string_view::npos) {
    const auto end = object_end(text, i);
    if (end != std::string_view::npos) {
      auto parsed = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
      if (!parsed.is_discarded() && parsed.is_object()) {
        out.push_back(std::move(parsed));
        i = end;
        continue;
      }
    }
    ++i;
  }
  return out;
}

std::optional<nlohmann::json> select_object(std::string_view text,
                                            const std::function<bool(const nlohmann::json&)>& wanted)
{
  auto objects = embedded_objects(text);
  for (auto& o : objects) {
    if (wanted(o)) return std::move(o);
  }
  if (!objects.empty()) return std::move(objects.front());
  return std::nullopt;
}

}  // namespace ksg::payload
