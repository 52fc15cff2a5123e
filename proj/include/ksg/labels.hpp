#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace ksg {

/// Epistemic function of a micro-idea.
enum class MicroIdeaLabel { Descriptive, Interpretive, Analytical, Generative };

inline constexpr std::array kMicroIdeaLabels{
    MicroIdeaLabel::Descriptive, MicroIdeaLabel::Interpretive,
    MicroIdeaLabel::Analytical, MicroIdeaLabel::Generative};

enum class Stance { BuildToward, PushBack };

inline constexpr std::array kStances{Stance::BuildToward, Stance::PushBack};

enum class RelationFunction { Ground, ExplainElaborate, NewIdea, Question };

inline constexpr std::array kRelationFunctions{
    RelationFunction::Ground, RelationFunction::ExplainElaborate,
    RelationFunction::NewIdea, RelationFunction::Question};

std::string_view to_string(MicroIdeaLabel label) noexcept;
std::string_view to_string(Stance stance) noexcept;
std::string_view to_string(RelationFunction function) noexcept;

// Parsers accept any case and separator spelling ("Build toward (+)",
// "push-back", "Explain & Elaborate") and return nullopt outside the set.
std::optional<MicroIdeaLabel> parse_micro_idea_label(std::string_view text);
std::optional<Stance> parse_stance(std::string_view text);
std::optional<RelationFunction> parse_relation_function(std::string_view text);

/// Lowercases ASCII, collapses every run of non-alphanumerics into one '_'
/// and strips leading/trailing '_'. "Explain & Elaborate" -> "explain_elaborate".
std::string normalize_token(std::string_view text);

std::string trim(std::string_view text);

std::string to_lower(std::string_view text);

std::size_t word_count(std::string_view text);

}  // namespace ksg
