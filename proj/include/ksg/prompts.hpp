#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ksg/schemes.hpp"

namespace ksg::prompts {

enum class PromptVersion { PBase, P1, P2, P3 };

std::string_view to_string(PromptVersion version) noexcept;
std::optional<PromptVersion> parse_version(std::string_view text);

struct PromptTemplate {
  std::string template_id;  // "stage<N>/<version>"
  int stage = 1;
  PromptVersion version = PromptVersion::PBase;
  std::string body;
  std::optional<std::string> scheme_ref;
  std::string content_hash;  // SHA-256 of body

  std::set<std::string> placeholders() const;
};

/// Placeholders are `{identifier}` with identifier in [A-Za-z_][A-Za-z0-9_]*;
/// every other brace is literal text.
std::set<std::string> extract_placeholders(std::string_view body);

/// Placeholder names each stage may use.
const std::set<std::string>& declared_placeholders(int stage);

enum class RenderMode {
  Strict,   // variables must match the placeholders exactly
  Lenient,  // variables not used by the template are ignored
};

/// Single-pass substitution: values are inserted literally and never
/// re-scanned. Throws ksg::Error(Config) naming a missing or (strict) extra
/// variable.
std::string render_template(std::string_view body, const std::map<std::string, std::string>& variables,
                            RenderMode mode = RenderMode::Strict);

std::string template_id(int stage, PromptVersion version);

class PromptRegistry {
public:
  /// Templates and schemes compiled into the library.
  static const PromptRegistry& builtin();

  /// Reads `root/prompts/stage{1,2,3}/*.txt` and `root/schemes/*.json`.
  /// Missing stages or schemes fall back to the builtin ones.
  static PromptRegistry load_directory(const std::filesystem::path& root);

  const PromptTemplate& get(std::string_view template_id) const;
  const PromptTemplate* find(int stage, PromptVersion version) const;
  const CodingScheme& scheme(std::string_view scheme_id) const;
  const CodingScheme* find_scheme(std::string_view scheme_id) const;

  std::vector<const PromptTemplate*> templates() const;
  const std::vector<CodingScheme>& schemes() const noexcept { return schemes_; }

  std::string render(std::string_view template_id, const std::map<std::string, std::string>& variables,
                     RenderMode mode = RenderMode::Strict) const;

  void add_template(PromptTemplate tmpl);
  void add_scheme(CodingScheme scheme);

private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
  std::vector<CodingScheme> schemes_;
};

/// Builds a checked template; throws ksg::Error(Schema) if the body uses a
/// placeholder outside the stage's declared set.
PromptTemplate make_template(int stage, PromptVersion version, std::string body,
                             std::optional<std::string> scheme_ref = std::nullopt);

}  // namespace ksg::prompts
