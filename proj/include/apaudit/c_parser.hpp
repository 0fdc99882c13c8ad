#pragma once

#include <string>
#include <string_view>

#include "apaudit/code_index.hpp"

namespace apaudit {

Language language_for_path(std::string_view path) noexcept;

/// Parses one file into function records. Never throws on malformed input;
/// problems are reported through ParsedFile::diagnostics and ParsedFile::ok.
ParsedFile parse_source(std::string path, std::string content);

struct ReparseResult {
  bool ok = false;
  std::size_t function_count = 0;
  std::string message;
};

/// Checks that text parses, without error nodes, as exactly one function definition.
ReparseResult check_single_function(std::string_view text);

}  // namespace apaudit
