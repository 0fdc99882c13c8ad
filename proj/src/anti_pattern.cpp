#include "apaudit/anti_pattern.hpp"

#include <fstream>
#include <sstream>

#include "apaudit/errors.hpp"

namespace apaudit {

using nlohmann::json;
namespace fs = std::filesystem;

BugType parse_bug_type(std::string_view s) {
  if (s == "OOB") return BugType::OOB;
  if (s == "DBZ") return BugType::DBZ;
  if (s == "MLK") return BugType::MLK;
  if (s == "NPD") return BugType::NPD;
  if (s == "custom" || s == "CUSTOM") return BugType::Custom;
  throw ConfigError("unknown bug type: " + std::string(s));
}

std::string_view to_string(BugType t) noexcept {
  switch (t) {
    case BugType::OOB: return "OOB";
    case BugType::DBZ: return "DBZ";
    case BugType::MLK: return "MLK";
    case BugType::NPD: return "NPD";
    case BugType::Custom: return "custom";
  }
  return "custom";
}

std::vector<const CodeExample*> AntiPatternSpec::ordered_examples() const {
  std::vector<const CodeExample*> out;
  for (const auto& e : buggy_examples) out.push_back(&e);
  for (const auto& e : nonbuggy_examples) out.push_back(&e);
  return out;
}

void AntiPatternSpec::validate() const {
  if (name.empty()) throw ConfigError("anti-pattern spec has no name");
  if (buggy_examples.empty()) throw ConfigError("anti-pattern " + name + " has no buggy examples");
  for (const auto* e : ordered_examples()) {
    if (e->code.empty()) throw ConfigError("anti-pattern " + name + ": example " + e->name + " is empty");
  }
}

AntiPatternSpec load_anti_pattern_spec(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  std::ifstream in(manifest);
  if (!in) throw ConfigError("missing anti-pattern manifest: " + manifest.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("malformed anti-pattern manifest: " + manifest.string());
  AntiPatternSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.bug_type = parse_bug_type(j.value("bug_type", "custom"));
    spec.description = j.value("description", "");
    for (const auto& e : j.value("examples", json::array())) {
      CodeExample ex;
      ex.name = e.at("file").get<std::string>();
      const std::string label = e.at("label").get<std::string>();
      if (label != "buggy" && label != "nonbuggy") {
        throw ConfigError("example " + ex.name + " has unknown label '" + label + "'");
      }
      ex.buggy = label == "buggy";
      ex.bug_lines = e.value("bug_lines", std::vector<int>{});
      std::ifstream src(dir / ex.name, std::ios::binary);
      if (!src) throw ConfigError("missing example file: " + (dir / ex.name).string());
      std::ostringstream buf;
      buf << src.rdbuf();
      ex.code = buf.str();
      (ex.buggy ? spec.buggy_examples : spec.nonbuggy_examples).push_back(std::move(ex));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed anti-pattern manifest " + manifest.string() + ": " + e.what());
  }
  return spec;
}

json to_json(const AntiPatternSpec& spec) {
  json examples = json::array();
  for (const auto* e : spec.ordered_examples()) {
    examples.push_back({{"file", e->name}, {"label", e->buggy ? "buggy" : "nonbuggy"}, {"bug_lines", e->bug_lines}});
  }
  return {{"name", spec.name},
          {"bug_type", to_string(spec.bug_type)},
          {"description", spec.description},
          {"examples", examples}};
}

}  // namespace apaudit
