#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ksg/labels.hpp"

namespace ksg::corpus {

struct Annotation {
  std::string id;
  std::string author;  // pseudonymized at ingestion
  std::string body;
  std::string quoted_passage;
  std::optional<std::string> parent_id;
  std::string document_id;
  std::optional<std::string> created_at;

  bool operator==(const Annotation&) const = default;
};

struct Reading {
  std::string id;
  std::string title;
  std::string full_text;
  std::optional<std::string> summary;
  std::vector<std::string> instructor_prompts;

  bool operator==(const Reading&) const = default;
};

/// Expert label for one annotation; nullopt label means the expert filtered
/// the annotation out as non-substantive.
struct GoldCoding {
  std::string annotation_id;
  std::optional<MicroIdeaLabel> label;

  bool operator==(const GoldCoding&) const = default;
};

std::string gold_label_name(const GoldCoding& coding);

/// Immutable, validated annotation set in input order.
class Corpus {
public:
  Corpus() = default;

  /// Validates ids, bodies, parent references and acyclicity; throws
  /// ksg::Error(Validation) describing the first class of problem found.
  static Corpus from_annotations(std::vector<Annotation> annotations);

  std::span<const Annotation> annotations() const noexcept { return annotations_; }
  std::size_t size() const noexcept { return annotations_.size(); }
  bool empty() const noexcept { return annotations_.empty(); }
  const Annotation* find(std::string_view id) const;

  bool operator==(const Corpus& other) const { return annotations_ == other.annotations_; }

private:
  std::vector<Annotation> annotations_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Format { Csv, Json };

std::optional<Format> parse_format(std::string_view name);

/// Renames source columns (CSV header cells or JSON keys) onto canonical field
/// names, e.g. {"Student": "author", "Comment": "body"}. Unmapped names pass
/// through unchanged.
struct ColumnMapping {
  std::map<std::string, std::string> source_to_field;

  static ColumnMapping load(const std::filesystem::path& path);
  std::string field_for(const std::string& source) const;
};

/// Replaces an author field by "anon-" + 12 hex digits of its SHA-256.
/// Values already in that form are returned unchanged so canonical exports
/// reload to the same corpus.
std::string pseudonymize(std::string_view author);

Corpus parse_annotations(std::string_view bytes, Format format, const ColumnMapping* mapping = nullptr);
Corpus load_annotations(const std::filesystem::path& path, Format format,
                        const ColumnMapping* mapping = nullptr);

/// Canonical JSON layout: {"annotations":[{...}]}, keys sorted, 2-space indent.
std::string to_canonical_json(const Corpus& corpus);

/// SHA-256 of the canonical JSON.
std::string fingerprint(const Corpus& corpus);

/// Reading id is the file stem; title is the first non-empty line of the text
/// with any leading '#' removed. Instructor prompts are the non-empty lines of
/// the prompts file, in order.
Reading load_reading(const std::filesystem::path& text_path,
                     const std::optional<std::filesystem::path>& summary_path = std::nullopt,
                     const std::optional<std::filesystem::path>& prompts_path = std::nullopt);

Reading make_reading(std::string id, std::string title, std::string full_text,
                     std::optional<std::string> summary, std::vector<std::string> prompts);

std::string fingerprint(const Reading& reading);

/// Ancestors of `annotation`, root first, limited to the nearest
/// `depth_limit`. The annotation itself is never included.
std::vector<Annotation> thread_context(const Annotation& annotation, const Corpus& corpus,
                                       std::size_t depth_limit);

inline constexpr std::size_t kDefaultDepthLimit = 8;

/// Gold CSV with header annotation_id,label. Labels are case-insensitive;
/// "filtered" marks a non-substantive annotation. Duplicate ids are an error.
std::vector<GoldCoding> parse_gold(std::string_view bytes);
std::vector<GoldCoding> load_gold(const std::filesystem::path& path);

}  // namespace ksg::corpus
