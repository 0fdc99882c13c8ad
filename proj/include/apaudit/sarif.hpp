#pragma once

#include <filesystem>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "apaudit/code_index.hpp"
#include "apaudit/detector.hpp"

namespace apaudit {

inline constexpr const char* kSarifSchemaUri = "https://json.schemastore.org/sarif-2.1.0-rtm.5.json";

struct SarifOptions {
  std::string tool_name = "apaudit";
  std::string tool_version = "0.1.0";
  std::map<std::string, std::string> rule_descriptions;  // anti-pattern name -> text
};

/// One result per report with locations in path order. Origins missing from
/// the index get a file-level location and a warning in the property bag.
nlohmann::json emit_sarif(const std::vector<BugReport>& reports, const CodeIndex* index,
                          const SarifOptions& options = {});

/// Validator for the JSON Schema draft-04 keywords used by the SARIF schema:
/// type, enum, $ref (local), properties, additionalProperties, required, items,
/// minItems, uniqueItems, minimum, maximum, pattern, format (date-time, uri),
/// anyOf, oneOf.
class JsonSchema {
 public:
  explicit JsonSchema(nlohmann::json schema);
  /// Throws ConfigError when the file is missing or not JSON.
  static JsonSchema load(const std::filesystem::path& file);

  /// Violations as "<json pointer>: <message>"; empty when valid.
  std::vector<std::string> validate(const nlohmann::json& doc) const;

 private:
  void check(const nlohmann::json& schema, const nlohmann::json& value, const std::string& where,
             std::vector<std::string>& errors, int depth) const;
  const nlohmann::json& resolve(const std::string& ref) const;

  nlohmann::json root_;
  std::map<std::string, std::regex> patterns_;  // compiled once from every "pattern" keyword
};

}  // namespace apaudit
