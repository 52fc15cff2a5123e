#include "ksg/schemes.hpp"

#include <set>

#include "ksg/error.hpp"
#include "ksg/labels.hpp"
#include "resources.hpp"

namespace ksg::prompts {
namespace {

using nlohmann::json;

Category category_from_json(const json& doc, const std::string& path)
{
  if (!doc.is_object() || !doc.contains("name") || !doc["name"].is_string()) {
    throw Error(ErrorCode::Schema, path + ": category needs a string \"name\"");
  }
  Category c;
  c.name = doc["name"].get<std::string>();
  c.display_name = doc.value("display_name", c.name);
  c.description = doc.value("description", std::string{});
  if (c.name.empty()) throw Error(ErrorCode::Schema, path + ": empty category name");
  return c;
}

json category_to_json(const Category& c)
{
  return {{"name", c.name}, {"display_name", c.display_name}, {"description", c.description}};
}

std::vector<Category> categories_from(const json& doc, const char* key, const std::string& id)
{
  std::vector<Category> out;
  if (!doc.contains(key)) return out;
  if (!doc[key].is_array()) throw Error(ErrorCode::Schema, "scheme " + id + ": \"" + key + "\" must be an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc[key].size(); ++i) {
    auto c = category_from_json(doc[key][i], "scheme " + id + "." + key + "[" + std::to_string(i) + "]");
    if (!names.insert(c.name).second) {
      throw Error(ErrorCode::Schema, "scheme " + id + ": duplicate name '" + c.name + "'");
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

bool CodingScheme::has_category(std::string_view name) const
{
  for (const auto& c : categories) {
    if (c.name == name) return true;
  }
  return false;
}

std::vector<std::string> CodingScheme::category_names() const
{
  std::vector<std::string> out;
  for (const auto& c : categories) out.push_back(c.name);
  return out;
}

std::string CodingScheme::describe() const
{
  std::string out;
  if (!two_level) {
    for (const auto& c : categories) out += "- " + c.name + " (" + c.display_name + "): " + c.description + "\n";
    return out;
  }
  for (std::size_t s = 0; s < stances.size(); ++s) {
    out += "Stance " + stances[s].name + " (" + stances[s].display_name + "): " + stances[s].description + "\n";
    for (std::size_t f = 0; f < categories.size(); ++f) {
      out += "  - " + categories[f].name + " (" + categories[f].display_name + "): " + cells[s][f] + "\n";
    }
  }
  return out;
}

CodingScheme scheme_from_json(const json& doc)
{
  if (!doc.is_object() || !doc.contains("scheme_id") || !doc["scheme_id"].is_string()) {
    throw Error(ErrorCode::Schema, "scheme definition needs a string \"scheme_id\"");
  }
  CodingScheme s;
  s.scheme_id = doc["scheme_id"].get<std::string>();
  s.stage = doc.value("stage", 3);
  if (s.stage != 1 && s.stage != 3) throw Error(ErrorCode::Schema, "scheme " + s.scheme_id + ": stage must be 1 or 3");
  s.two_level = doc.value("two_level", false);
  s.categories = categories_from(doc, "categories", s.scheme_id);
  if (s.categories.empty()) throw Error(ErrorCode::Schema, "scheme " + s.scheme_id + ": no categories");
  if (s.stage == 1) {
    for (const auto& c : s.categories) {
      if (!parse_micro_idea_label(c.name) || normalize_token(c.name) != c.name) {
        throw Error(ErrorCode::Schema, "scheme " + s.scheme_id + ": '" + c.name + "' is not a micro-idea label");
      }
    }
  }

  if (s.two_level) {
    s.stances = categories_from(doc, "stances", s.scheme_id);
    std::vector<std::string> stance_names;
    for (const auto& c : s.stances) stance_names.push_back(c.name);
    if (stance_names != std::vector<std::string>{"build_toward", "push_back"}) {
      throw Error(ErrorCode::Schema, "scheme " + s.scheme_id + ": two-level stances must be [build_toward, push_back]");
    }
    std::vector<std::string> expected;
    for (auto f : kRelationFunctions) expected.emplace_back(to_string(f));
    if (s.category_names() != expected) {
      throw Error(ErrorCode::Schema, "scheme " + s.scheme_id +
                                         ": two-level functions must be [ground, explain_elaborate, new_idea, question]");
    }
    if (!doc.contains("cells") || !doc["cells"].is_array() || doc["cells"].size() != s.stances.size()) {
      throw Error(ErrorCode::Schema, "scheme " + s.scheme_id + ": cells must have one row per stance");
    }
    for (const auto& row : doc["cells"]) {
      if (!row.is_array() || row.size() != s.categories.size()) {
        throw Error(ErrorCode::Schema, "scheme " + s.scheme_id + ": each cells row needs one entry per function");
      }
      s.cells.push_back(row.get<std::vector<std::string>>());
    }
  } else if (doc.contains("stances") || doc.contains("cells")) {
    throw Error(ErrorCode::Schema, "scheme " + s.scheme_id + ": flat schemes take no stances or cells");
  }
  return s;
}

json scheme_to_json(const CodingScheme& s)
{
  json doc{{"scheme_id", s.scheme_id}, {"stage", s.stage}, {"two_level", s.two_level}};
  doc["categories"] = json::array();
  for (const auto& c : s.categories) doc["categories"].push_back(category_to_json(c));
  if (s.two_level) {
    doc["stances"] = json::array();
    for (const auto& c : s.stances) doc["stances"].push_back(category_to_json(c));
    doc["cells"] = s.cells;
  }
  return doc;
}

const std::vector<CodingScheme>& builtin_schemes()
{
  static const std::vector<CodingScheme> schemes = [] {
    std::vector<CodingScheme> out;
    for (const char* id : {"stage1", "p_base", "p1", "p2", "p3"}) {
      const auto content = detail::embedded_resource(std::string("schemes/") + id + ".json");
      if (!content) throw Error(ErrorCode::Internal, std::string("builtin scheme missing: ") + id);
      out.push_back(scheme_from_json(json::parse(*content)));
    }
    return out;
  }();
  return schemes;
}

const CodingScheme* find_builtin_scheme(std::string_view scheme_id)
{
  for (const auto& s : builtin_schemes()) {
    if (s.scheme_id == scheme_id) return &s;
  }
  return nullptr;
}

}  // namespace ksg::prompts
