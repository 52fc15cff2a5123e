#include "ksg/labels.hpp"

#include <cctype>

namespace ksg {

std::string_view to_string(MicroIdeaLabel label) noexcept
{
  switch (label) {
    case MicroIdeaLabel::Descriptive: return "descriptive";
    case MicroIdeaLabel::Interpretive: return "interpretive";
    case MicroIdeaLabel::Analytical: return "analytical";
    case MicroIdeaLabel::Generative: return "generative";
  }
  return "";
}

std::string_view to_string(Stance stance) noexcept
{
  return stance == Stance::BuildToward ? "build_toward" : "push_back";
}

std::string_view to_string(RelationFunction function) noexcept
{
  switch (function) {
    case RelationFunction::Ground: return "ground";
    case RelationFunction::ExplainElaborate: return "explain_elaborate";
    case RelationFunction::NewIdea: return "new_idea";
    case RelationFunction::Question: return "question";
  }
  return "";
}

std::string normalize_token(std::string_view text)
{
  std::string out;
  bool pending_sep = false;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

std::optional<MicroIdeaLabel> parse_micro_idea_label(std::string_view text)
{
  const auto token = normalize_token(text);
  for (auto label : kMicroIdeaLabels) {
    if (token == to_string(label)) return label;
  }
  return std::nullopt;
}

std::optional<Stance> parse_stance(std::string_view text)
{
  const auto trimmed = trim(text);
  if (trimmed == "+") return Stance::BuildToward;
  if (trimmed == "-" || trimmed == "\xe2\x88\x92") return Stance::PushBack;
  const auto token = normalize_token(text);
  for (auto stance : kStances) {
    if (token == to_string(stance)) return stance;
  }
  return std::nullopt;
}

std::optional<RelationFunction> parse_relation_function(std::string_view text)
{
  auto token = normalize_token(text);
  if (token == "explain_and_elaborate") token = "explain_elaborate";
  for (auto function : kRelationFunctions) {
    if (token == to_string(function)) return function;
  }
  return std::nullopt;
}

std::string trim(std::string_view text)
{
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string to_lower(std::string_view text)
{
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::size_t word_count(std::string_view text)
{
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

}  // namespace ksg
