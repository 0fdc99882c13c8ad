#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace apaudit {

enum class BugType { OOB, DBZ, MLK, NPD, Custom };

BugType parse_bug_type(std::string_view s);
std::string_view to_string(BugType t) noexcept;

struct CodeExample {
  std::string name;  // file name inside the spec directory
  std::string code;
  bool buggy = false;
  std::vector<int> bug_lines;  // 1-based, buggy examples only
};

struct AntiPatternSpec {
  std::string name;
  BugType bug_type = BugType::Custom;
  std::string description;
  std::vector<CodeExample> buggy_examples;
  std::vector<CodeExample> nonbuggy_examples;

  /// Buggy examples first, then non-buggy; the numbering used in prompts.
  std::vector<const CodeExample*> ordered_examples() const;

  /// Throws ConfigError unless there is a name and at least one buggy example.
  void validate() const;
};

/// Reads <dir>/manifest.json:
///   {"name", "bug_type", "description",
///    "examples": [{"file", "label": "buggy"|"nonbuggy", "bug_lines": [..]}]}
AntiPatternSpec load_anti_pattern_spec(const std::filesystem::path& dir);

nlohmann::json to_json(const AntiPatternSpec& spec);

}  // namespace apaudit
