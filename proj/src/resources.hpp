#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace ksg::detail {

/// Files under prompts/ and schemes/ compiled into the library, keyed by
/// their path relative to the source root.
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_resources();

inline std::optional<std::string_view> embedded_resource(std::string_view path)
{
  for (const auto& [name, content] : embedded_resources()) {
    if (name == path) return content;
  }
  return std::nullopt;
}

}  // namespace ksg::detail
