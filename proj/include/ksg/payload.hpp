#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace ksg::payload {

enum class PayloadErrorKind {
  NoObject,        // no JSON object anywhere in the text
  MissingField,
  WrongType,
  EmptyField,
  LabelDomain,     // stage-1 label outside the closed set
  StanceDomain,
  FunctionDomain,  // category outside the active scheme
  UnknownTarget,   // node id not offered in the prompt
  LinkCount,       // zero links or more than allowed
  MixedUncategorized,
  DuplicateLink,
  NodeCount,
  DuplicateTitle,
};

std::string_view to_string(PayloadErrorKind kind) noexcept;

struct PayloadError {
  PayloadErrorKind kind;
  std::string message;
  std::string raw_text;
};

template <typename T>
using ParseResult = std::variant<T, PayloadError>;

/// Every balanced `{...}` span in `text` that parses as a JSON object, in
/// order of appearance. Braces inside JSON strings are respected.
std::vector<nlohmann::json> embedded_objects(std::string_view text);

/// The first embedded object accepted by `wanted`; otherwise the first
/// embedded object; otherwise nullopt.
std::optional<nlohmann::json> select_object(std::string_view text,
                                            const std::function<bool(const nlohmann::json&)>& wanted);

}  // namespace ksg::payload
