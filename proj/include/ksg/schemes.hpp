#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ksg::prompts {

struct Category {
  std::string name;          // machine name used in payloads
  std::string display_name;  // name as shown to annotators
  std::string description;

  bool operator==(const Category&) const = default;
};

/// A labelling scheme for stage 1 or stage 3. Two-level schemes carry a
/// stance axis and a function axis; `cells[s][f]` describes the pair.
struct CodingScheme {
  std::string scheme_id;
  int stage = 3;
  std::vector<Category> categories;
  bool two_level = false;
  std::vector<Category> stances;
  std::vector<std::vector<std::string>> cells;

  bool has_category(std::string_view name) const;
  std::vector<std::string> category_names() const;

  /// Plain-text rendering inserted into prompts.
  std::string describe() const;

  bool operator==(const CodingScheme&) const = default;
};

/// Parses and checks a scheme definition. Throws ksg::Error(Schema) on
/// duplicate names or a two-level scheme whose axes are not exactly
/// {build_toward, push_back} x {ground, explain_elaborate, new_idea, question}.
CodingScheme scheme_from_json(const nlohmann::json& doc);
nlohmann::json scheme_to_json(const CodingScheme& scheme);

/// The stage-1 label scheme followed by the stage-3 schemes p_base, p1, p2, p3.
const std::vector<CodingScheme>& builtin_schemes();
const CodingScheme* find_builtin_scheme(std::string_view scheme_id);

inline constexpr std::string_view kStage1SchemeId = "stage1";

}  // namespace ksg::prompts
