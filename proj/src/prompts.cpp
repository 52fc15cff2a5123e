#include "ksg/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ksg/error.hpp"
#include "ksg/hash.hpp"
#include "ksg/labels.hpp"
#include "resources.hpp"

namespace ksg::prompts {
namespace {

bool ident_start(char c)
{
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c)
{
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Calls on_text/on_placeholder for the pieces of `body` in order.
template <typename Text, typename Placeholder>
void scan(std::string_view body, Text on_text, Placeholder on_placeholder)
{
  std::size_t i = 0;
  std::size_t literal_start = 0;
  while (i < body.size()) {
    if (body[i] == '{' && i + 1 < body.size() && ident_start(body[i + 1])) {
      std::size_t j = i + 1;
      while (j < body.size() && ident_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}') {
        on_text(body.substr(literal_start, i - literal_start));
        on_placeholder(body.substr(i + 1, j - i - 1));
        i = j + 1;
        literal_start = i;
        continue;
      }
    }
    ++i;
  }
  on_text(body.substr(literal_start));
}

std::string slurp(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::optional<std::string> default_scheme_ref(int stage, PromptVersion version)
{
  if (stage == 1) return std::string(kStage1SchemeId);
  if (stage == 3) return std::string(to_string(version));
  return std::nullopt;
}

}  // namespace

std::string_view to_string(PromptVersion version) noexcept
{
  switch (version) {
    case PromptVersion::PBase: return "p_base";
    case PromptVersion::P1: return "p1";
    case PromptVersion::P2: return "p2";
    case PromptVersion::P3: return "p3";
  }
  return "";
}

std::optional<PromptVersion> parse_version(std::string_view text)
{
  const auto token = normalize_token(text);
  if (token == "p_base" || token == "pbase" || token == "base") return PromptVersion::PBase;
  if (token == "p1") return PromptVersion::P1;
  if (token == "p2") return PromptVersion::P2;
  if (token == "p3") return PromptVersion::P3;
  return std::nullopt;
}

std::set<std::string> extract_placeholders(std::string_view body)
{
  std::set<std::string> names;
  scan(body, [](std::string_view) {}, [&](std::string_view name) { names.emplace(name); });
  return names;
}

std::set<std::string> PromptTemplate::placeholders() const
{
  return extract_placeholders(body);
}

const std::set<std::string>& declared_placeholders(int stage)
{
  static const std::set<std::string> stage1{"annotation_id", "annotation", "quoted_passage", "reply_context",
                                            "label_scheme"};
  static const std::set<std::string> stage2{"reading_title", "context", "context_mode", "min_nodes", "max_nodes"};
  static const std::set<std::string> stage3{"micro_idea", "micro_idea_label", "nodes", "scheme", "max_links"};
  static const std::set<std::string> none;
  switch (stage) {
    case 1: return stage1;
    case 2: return stage2;
    case 3: return stage3;
    default: return none;
  }
}

std::string render_template(std::string_view body, const std::map<std::string, std::string>& variables,
                            RenderMode mode)
{
  const auto used = extract_placeholders(body);
  for (const auto& name : used) {
    if (!variables.contains(name)) throw Error(ErrorCode::Config, "missing template variable '" + name + "'");
  }
  if (mode == RenderMode::Strict) {
    for (const auto& [name, value] : variables) {
      if (!used.contains(name)) throw Error(ErrorCode::Config, "unused template variable '" + name + "'");
    }
  }
  std::string out;
  out.reserve(body.size());
  scan(
      body, [&](std::string_view text) { out.append(text); },
      [&](std::string_view name) { out.append(variables.at(std::string(name))); });
  return out;
}

std::string template_id(int stage, PromptVersion version)
{
  return "stage" + std::to_string(stage) + "/" + std::string(to_string(version));
}

PromptTemplate make_template(int stage, PromptVersion version, std::string body, std::optional<std::string> scheme_ref)
{
  if (stage < 1 || stage > 3) throw Error(ErrorCode::Schema, "template stage must be 1, 2 or 3");
  const auto& allowed = declared_placeholders(stage);
  for (const auto& name : extract_placeholders(body)) {
    if (!allowed.contains(name)) {
      throw Error(ErrorCode::Schema, template_id(stage, version) + ": undeclared placeholder '{" + name + "}'");
    }
  }
  PromptTemplate t;
  t.template_id = template_id(stage, version);
  t.stage = stage;
  t.version = version;
  t.content_hash = sha256_hex(body);
  t.body = std::move(body);
  t.scheme_ref = scheme_ref ? std::move(scheme_ref) : default_scheme_ref(stage, version);
  return t;
}

const PromptRegistry& PromptRegistry::builtin()
{
  static const PromptRegistry registry = [] {
    PromptRegistry r;
    for (const auto& scheme : builtin_schemes()) r.add_scheme(scheme);
    for (const auto& [path, content] : detail::embedded_resources()) {
      // prompts/stage<N>/<version>.txt
      if (!path.starts_with("prompts/stage")) continue;
      const int stage = path[13] - '0';
      const auto file = path.substr(15);
      const auto version = parse_version(file.substr(0, file.size() - 4));
      if (!version) throw Error(ErrorCode::Internal, "bad builtin template name " + std::string(path));
      r.add_template(make_template(stage, *version, std::string(content)));
    }
    return r;
  }();
  return registry;
}

PromptRegistry PromptRegistry::load_directory(const std::filesystem::path& root)
{
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(ErrorCode::Config, "prompt directory " + root.string() + " not found");
  PromptRegistry r = builtin();
  const auto schemes_dir = root / "schemes";
  if (fs::is_directory(schemes_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(schemes_dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      try {
        r.add_scheme(scheme_from_json(nlohmann::json::parse(slurp(file))));
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Parse, file.string() + ": " + e.what());
      }
    }
  }
  for (int stage = 1; stage <= 3; ++stage) {
    const auto dir = root / "prompts" / ("stage" + std::to_string(stage));
    if (!fs::is_directory(dir)) continue;
    for (auto version : {PromptVersion::PBase, PromptVersion::P1, PromptVersion::P2, PromptVersion::P3}) {
      const auto file = dir / (std::string(to_string(version)) + ".txt");
      if (fs::exists(file)) r.add_template(make_template(stage, version, slurp(file)));
    }
  }
  return r;
}

const PromptTemplate& PromptRegistry::get(std::string_view id) const
{
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(ErrorCode::Config, "unknown prompt template '" + std::string(id) + "'");
  return it->second;
}

const PromptTemplate* PromptRegistry::find(int stage, PromptVersion version) const
{
  auto it = templates_.find(template_id(stage, version));
  return it == templates_.end() ? nullptr : &it->second;
}

const CodingScheme* PromptRegistry::find_scheme(std::string_view scheme_id) const
{
  for (const auto& s : schemes_) {
    if (s.scheme_id == scheme_id) return &s;
  }
  return nullptr;
}

const CodingScheme& PromptRegistry::scheme(std::string_view scheme_id) const
{
  if (const auto* s = find_scheme(scheme_id)) return *s;
  throw Error(ErrorCode::Config, "unknown coding scheme '" + std::string(scheme_id) + "'");
}

std::vector<const PromptTemplate*> PromptRegistry::templates() const
{
  std::vector<const PromptTemplate*> out;
  for (const auto& [id, t] : templates_) out.push_back(&t);
  return out;
}

std::string PromptRegistry::render(std::string_view id, const std::map<std::string, std::string>& variables,
                                   RenderMode mode) const
{
  return render_template(get(id).body, variables, mode);
}

void PromptRegistry::add_template(PromptTemplate tmpl)
{
  auto id = tmpl.template_id;
  templates_.insert_or_assign(std::move(id), std::move(tmpl));
}

void PromptRegistry::add_scheme(CodingScheme scheme)
{
  for (auto& s : schemes_) {
    if (s.scheme_id == scheme.scheme_id) {
      s = std::move(scheme);
      return;
    }
  }
  schemes_.push_back(std::move(scheme));
}

}  // namespace ksg::prompts
