#include "ksg/corpus.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include "csv.hpp"
#include "json.hpp"
#include "ksg/error.hpp"
#include "ksg/hash.hpp"

namespace ksg::corpus {
namespace {

using nlohmann::json;

std::string slurp(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool is_iso8601(const std::string& text)
{
  static const std::regex pattern(
      R"(^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$)");
  return std::regex_match(text, pattern);
}

std::string row_label(std::size_t index, Format format)
{
  return format == Format::Csv ? "row " + std::to_string(index + 1) : "annotation " + std::to_string(index);
}

// Field values keyed by canonical field name for one input record.
using FieldMap = std::map<std::string, std::optional<std::string>>;

Annotation to_annotation(const FieldMap& fields, std::size_t index, Format format)
{
  auto fail = [&](const std::string& field, const std::string& what) -> Error {
    return Error(ErrorCode::Parse, row_label(index, format) + ", field '" + field + "': " + what);
  };
  auto required = [&](const std::string& field) -> std::string {
    auto it = fields.find(field);
    if (it == fields.end() || !it->second) throw fail(field, "missing");
    return *it->second;
  };
  auto optional_field = [&](const std::string& field) -> std::optional<std::string> {
    auto it = fields.find(field);
    if (it == fields.end() || !it->second || it->second->empty()) return std::nullopt;
    return it->second;
  };

  Annotation a;
  a.id = trim(required("id"));
  if (a.id.empty()) throw fail("id", "empty");
  a.author = pseudonymize(required("author"));
  a.body = required("body");
  if (trim(a.body).empty()) throw fail("body", "empty after trimming");
  a.quoted_passage = optional_field("quoted_passage").value_or("");
  a.parent_id = optional_field("parent_id");
  if (a.parent_id) a.parent_id = trim(*a.parent_id);
  a.document_id = required("document_id");
  a.created_at = optional_field("created_at");
  if (a.created_at && !is_iso8601(*a.created_at)) throw fail("created_at", "not an ISO-8601 timestamp");
  return a;
}

std::vector<Annotation> parse_json_records(std::string_view bytes, const ColumnMapping* mapping)
{
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("annotation JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("annotations") || !doc["annotations"].is_array()) {
    throw Error(ErrorCode::Parse, "annotation JSON: expected top-level object with an \"annotations\" array");
  }
  std::vector<Annotation> out;
  const auto& items = doc["annotations"];
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (!item.is_object()) {
      throw Error(ErrorCode::Parse, "annotation " + std::to_string(i) + ": expected an object");
    }
    FieldMap fields;
    for (const auto& [key, value] : item.items()) {
      const auto field = mapping ? mapping->field_for(key) : key;
      if (value.is_null()) {
        fields[field] = std::nullopt;
      } else if (value.is_string()) {
        fields[field] = value.get<std::string>();
      } else if (value.is_number_integer() && (field == "id" || field == "parent_id")) {
        fields[field] = value.dump();
      } else {
        throw Error(ErrorCode::Parse,
                    "annotation " + std::to_string(i) + ", field '" + field + "': expected a string");
      }
    }
    out.push_back(to_annotation(fields, i, Format::Json));
  }
  return out;
}

std::vector<Annotation> parse_csv_records(std::string_view bytes, const ColumnMapping* mapping)
{
  const auto rows = detail::parse_csv(bytes);
  if (rows.empty()) return {};
  std::vector<std::string> header;
  for (const auto& cell : rows.front().cells) {
    const auto name = trim(cell);
    header.push_back(mapping ? mapping->field_for(name) : name);
  }
  std::vector<Annotation> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r].cells;
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::Parse, "row " + std::to_string(r) + " (line " + std::to_string(rows[r].line) +
                                        "): expected " + std::to_string(header.size()) + " fields, found " +
                                        std::to_string(cells.size()));
    }
    FieldMap fields;
    for (std::size_t c = 0; c < cells.size(); ++c) fields[header[c]] = cells[c];
    out.push_back(to_annotation(fields, r - 1, Format::Csv));
  }
  return out;
}

}  // namespace

std::string gold_label_name(const GoldCoding& coding)
{
  return coding.label ? std::string(to_string(*coding.label)) : std::string("filtered");
}

Corpus Corpus::from_annotations(std::vector<Annotation> annotations)
{
  Corpus corpus;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    if (a.id.empty()) throw Error(ErrorCode::Validation, "annotation " + std::to_string(i) + " has an empty id");
    if (trim(a.body).empty()) {
      throw Error(ErrorCode::Validation, "annotation '" + a.id + "' has an empty body");
    }
    if (!corpus.index_.emplace(a.id, i).second) {
      throw Error(ErrorCode::Validation, "duplicate annotation id '" + a.id + "'");
    }
  }

  std::vector<std::string> orphans;
  for (const auto& a : annotations) {
    if (a.parent_id && !corpus.index_.contains(*a.parent_id)) orphans.push_back(a.id + " -> " + *a.parent_id);
  }
  if (!orphans.empty()) {
    std::string message = "dangling parent_id in " + std::to_string(orphans.size()) + " annotation(s):";
    for (const auto& o : orphans) message += " " + o;
    throw Error(ErrorCode::Validation, message);
  }

  // Reply graph must be acyclic: every chain reaches a root.
  enum class Mark { None, Active, Done };
  std::vector<Mark> marks(annotations.size(), Mark::None);
  for (std::size_t start = 0; start < annotations.size(); ++start) {
    std::vector<std::size_t> path;
    std::size_t at = start;
    while (marks[at] == Mark::None) {
      marks[at] = Mark::Active;
      path.push_back(at);
      const auto& parent = annotations[at].parent_id;
      if (!parent) break;
      at = corpus.index_.at(*parent);
      if (marks[at] == Mark::Active) {
        throw Error(ErrorCode::Validation, "reply cycle through annotation '" + annotations[at].id + "'");
      }
    }
    for (auto p : path) marks[p] = Mark::Done;
  }

  corpus.annotations_ = std::move(annotations);
  return corpus;
}

const Annotation* Corpus::find(std::string_view id) const
{
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &annotations_[it->second];
}

std::optional<Format> parse_format(std::string_view name)
{
  const auto token = normalize_token(name);
  if (token == "csv") return Format::Csv;
  if (token == "json") return Format::Json;
  return std::nullopt;
}

ColumnMapping ColumnMapping::load(const std::filesystem::path& path)
{
  json doc;
  try {
    doc = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, "column mapping " + path.string() + ": " + e.what());
  }
  static const std::set<std::string> kFields{"id",        "author",      "body",      "quoted_passage",
                                             "parent_id", "document_id", "created_at"};
  const auto& columns = doc.contains("columns") ? doc["columns"] : doc;
  if (!columns.is_object()) throw Error(ErrorCode::Parse, "column mapping: expected an object");
  ColumnMapping mapping;
  for (const auto& [source, field] : columns.items()) {
    if (!field.is_string() || !kFields.contains(field.get<std::string>())) {
      throw Error(ErrorCode::Parse, "column mapping: '" + source + "' maps to an unknown field");
    }
    mapping.source_to_field[source] = field.get<std::string>();
  }
  return mapping;
}

std::string ColumnMapping::field_for(const std::string& source) const
{
  auto it = source_to_field.find(source);
  return it == source_to_field.end() ? source : it->second;
}

std::string pseudonymize(std::string_view author)
{
  static const std::regex already(R"(^anon-[0-9a-f]{12}$)");
  const std::string value(author);
  if (std::regex_match(value, already)) return value;
  return "anon-" + sha256_hex(value).substr(0, 12);
}

Corpus parse_annotations(std::string_view bytes, Format format, const ColumnMapping* mapping)
{
  auto records = format == Format::Json ? parse_json_records(bytes, mapping) : parse_csv_records(bytes, mapping);
  return Corpus::from_annotations(std::move(records));
}

Corpus load_annotations(const std::filesystem::path& path, Format format, const ColumnMapping* mapping)
{
  return parse_annotations(slurp(path), format, mapping);
}

std::string to_canonical_json(const Corpus& corpus)
{
  json items = json::array();
  for (const auto& a : corpus.annotations()) {
    items.push_back({
        {"id", a.id},
        {"author", a.author},
        {"body", a.body},
        {"quoted_passage", a.quoted_passage},
        {"parent_id", a.parent_id ? json(*a.parent_id) : json(nullptr)},
        {"document_id", a.document_id},
        {"created_at", a.created_at ? json(*a.created_at) : json(nullptr)},
    });
  }
  return json{{"annotations", items}}.dump(2) + "\n";
}

std::string fingerprint(const Corpus& corpus)
{
  return sha256_hex(to_canonical_json(corpus));
}

Reading make_reading(std::string id, std::string title, std::string full_text, std::optional<std::string> summary,
                     std::vector<std::string> prompts)
{
  if (trim(full_text).empty()) throw Error(ErrorCode::Validation, "reading '" + id + "' has empty full text");
  if (summary && summary->size() >= full_text.size()) {
    throw Error(ErrorCode::Validation, "reading '" + id + "': summary (" + std::to_string(summary->size()) +
                                           " bytes) is not shorter than the full text (" +
                                           std::to_string(full_text.size()) + " bytes)");
  }
  return Reading{std::move(id), std::move(title), std::move(full_text), std::move(summary), std::move(prompts)};
}

Reading load_reading(const std::filesystem::path& text_path, const std::optional<std::filesystem::path>& summary_path,
                     const std::optional<std::filesystem::path>& prompts_path)
{
  auto text = slurp(text_path);
  std::string title = text_path.stem().string();
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      auto t = trim(line);
      if (t.empty()) continue;
      while (!t.empty() && t.front() == '#') t.erase(t.begin());
      title = trim(t);
      break;
    }
  }
  std::optional<std::string> summary;
  if (summary_path) summary = trim(slurp(*summary_path));
  std::vector<std::string> prompts;
  if (prompts_path) {
    std::istringstream lines(slurp(*prompts_path));
    std::string line;
    while (std::getline(lines, line)) {
      auto t = trim(line);
      if (!t.empty()) prompts.push_back(std::move(t));
    }
  }
  return make_reading(text_path.stem().string(), std::move(title), std::move(text), std::move(summary),
                      std::move(prompts));
}

std::string fingerprint(const Reading& reading)
{
  json doc{{"id", reading.id},
           {"title", reading.title},
           {"full_text", reading.full_text},
           {"summary", reading.summary ? json(*reading.summary) : json(nullptr)},
           {"instructor_prompts", reading.instructor_prompts}};
  return sha256_hex(doc.dump());
}

std::vector<Annotation> thread_context(const Annotation& annotation, const Corpus& corpus, std::size_t depth_limit)
{
  std::vector<Annotation> chain;
  std::unordered_set<std::string> seen{annotation.id};
  auto parent = annotation.parent_id;
  while (parent && chain.size() < depth_limit) {
    const auto* found = corpus.find(*parent);
    if (!found || !seen.insert(found->id).second) break;
    chain.push_back(*found);
    parent = found->parent_id;
  }
  return {chain.rbegin(), chain.rend()};
}

std::vector<GoldCoding> parse_gold(std::string_view bytes)
{
  const auto rows = detail::parse_csv(bytes);
  if (rows.empty()) return {};
  const auto& header = rows.front().cells;
  std::size_t id_col = header.size();
  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = trim(header[c]);
    if (name == "annotation_id") id_col = c;
    if (name == "label") label_col = c;
  }
  if (id_col == header.size() || label_col == header.size()) {
    throw Error(ErrorCode::Parse, "gold codings: header must contain annotation_id and label");
  }
  std::vector<GoldCoding> out;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r].cells;
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::Parse, "gold codings row " + std::to_string(r) + ": wrong number of fields");
    }
    GoldCoding coding;
    coding.annotation_id = trim(cells[id_col]);
    const auto label = trim(cells[label_col]);
    if (normalize_token(label) != "filtered") {
      coding.label = parse_micro_idea_label(label);
      if (!coding.label) {
        throw Error(ErrorCode::Parse, "gold codings row " + std::to_string(r) + ", field 'label': unknown label '" +
                                          label + "'");
      }
    }
    if (!seen.insert(coding.annotation_id).second) {
      throw Error(ErrorCode::Validation, "gold codings: duplicate annotation_id '" + coding.annotation_id + "'");
    }
    out.push_back(std::move(coding));
  }
  return out;
}

std::vector<GoldCoding> load_gold(const std::filesystem::path& path)
{
  return parse_gold(slurp(path));
}

}  // namespace ksg::corpus
