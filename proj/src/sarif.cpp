#include "apaudit/sarif.hpp"

#include <fstream>
#include <regex>
#include <set>

#include "apaudit/errors.hpp"

namespace apaudit {

using nlohmann::json;

namespace {

// line 0 means a file-level location.
json physical(const std::string& file, int line) {
  json loc = {{"artifactLocation", {{"uri", file}}}};
  if (line > 0) loc["region"] = {{"startLine", line}};
  return {{"physicalLocation", loc}};
}

std::string json_type(const json& v) {
  switch (v.type()) {
    case json::value_t::object: return "object";
    case json::value_t::array: return "array";
    case json::value_t::string: return "string";
    case json::value_t::boolean: return "boolean";
    case json::value_t::null: return "null";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "integer";
    default: return "number";
  }
}

bool has_type(const json& v, const std::string& t) {
  const std::string actual = json_type(v);
  if (t == actual) return true;
  if (t == "number") return actual == "integer";
  if (t == "integer" && actual == "number") {
    const double d = v.get<double>();
    return d == static_cast<double>(static_cast<long long>(d));
  }
  return false;
}

void collect_patterns(const json& n, std::map<std::string, std::regex>& out) {
  if (n.is_object()) {
    for (auto it = n.begin(); it != n.end(); ++it) {
      if (it.key() == "pattern" && it->is_string() && !out.count(it->get<std::string>())) {
        out.emplace(it->get<std::string>(), std::regex(it->get<std::string>(), std::regex::ECMAScript));
      } else {
        collect_patterns(*it, out);
      }
    }
  } else if (n.is_array()) {
    for (const auto& x : n) collect_patterns(x, out);
  }
}

const std::regex& date_time_re() {
  static const std::regex re(R"(^\d{4}-\d{2}-\d{2}[Tt]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$)");
  return re;
}

const std::regex& uri_re() {
  static const std::regex re(R"(^[A-Za-z][A-Za-z0-9+.\-]*:[^\s]*$)");
  return re;
}

std::string pointer_child(const std::string& where, const std::string& key) {
  std::string escaped;
  for (char c : key) {
    if (c == '~') escaped += "~0";
    else if (c == '/') escaped += "~1";
    else escaped += c;
  }
  return where + "/" + escaped;
}

}  // namespace

json emit_sarif(const std::vector<BugReport>& reports, const CodeIndex* index, const SarifOptions& options) {
  std::set<std::string> names;
  for (const auto& r : reports) names.insert(r.anti_pattern);
  std::map<std::string, std::size_t> rule_index;
  json rules = json::array();
  for (const auto& n : names) {
    rule_index[n] = rules.size();
    auto d = options.rule_descriptions.find(n);
    const std::string text = d != options.rule_descriptions.end() ? d->second : n + " anti-pattern";
    rules.push_back({{"id", n}, {"name", n}, {"shortDescription", {{"text", text}}}});
  }

  json results = json::array();
  for (const BugReport& r : reports) {
    json locations = json::array();
    json flow = json::array();
    json warnings = json::array();
    for (const PathStep& s : r.candidate.path_steps) {
      int line = s.line;
      if (index && !index->has_line(s.file, s.line)) {
        line = 0;
        warnings.push_back("origin " + s.origin() + " is not in the indexed repository; file-level location used");
      }
      json loc = physical(s.file, line);
      loc["message"] = {{"text", s.description.empty() ? s.origin() : s.description}};
      locations.push_back(loc);
      flow.push_back({{"location", loc}});
    }
    const std::string seed = r.candidate.seed.file + ":" + std::to_string(r.candidate.seed.line);
    json result = {{"ruleId", r.anti_pattern},
                   {"ruleIndex", rule_index.at(r.anti_pattern)},
                   {"level", "warning"},
                   {"message", {{"text", r.candidate.explanation.empty() ? r.anti_pattern : r.candidate.explanation}}},
                   {"locations", locations},
                   {"partialFingerprints", {{"apauditSeed/v1", r.anti_pattern + "@" + seed}}},
                   {"properties",
                    {{"run_id", r.run_id},
                     {"seed", seed},
                     {"detect_request", r.candidate.request_digest},
                     {"validate_request", r.verdict.request_digest},
                     {"validator_reasons", r.verdict.reasons}}}};
    if (!flow.empty()) result["codeFlows"] = json::array({{{"threadFlows", json::array({{{"locations", flow}}})}}});
    if (!warnings.empty()) result["properties"]["warnings"] = warnings;
    results.push_back(result);
  }

  return {{"$schema", kSarifSchemaUri},
          {"version", "2.1.0"},
          {"runs",
           json::array({{{"tool",
                          {{"driver",
                            {{"name", options.tool_name}, {"version", options.tool_version}, {"rules", rules}}}}},
                         {"columnKind", "utf16CodeUnits"},
                         {"results", results}}})}};
}

JsonSchema::JsonSchema(json schema) : root_(std::move(schema)) { collect_patterns(root_, patterns_); }

JsonSchema JsonSchema::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open schema: " + file.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed schema: " + file.string());
  return JsonSchema(std::move(j));
}

std::vector<std::string> JsonSchema::validate(const json& doc) const {
  std::vector<std::string> errors;
  check(root_, doc, "", errors, 0);
  return errors;
}

const json& JsonSchema::resolve(const std::string& ref) const {
  if (ref.rfind("#", 0) != 0) throw ConfigError("only local $ref is supported: " + ref);
  try {
    return root_.at(json::json_pointer(ref.substr(1)));
  } catch (const json::exception&) {
    throw ConfigError("unresolvable $ref " + ref);
  }
}

void JsonSchema::check(const json& schema, const json& value, const std::string& where,
                       std::vector<std::string>& errors, int depth) const {
  if (depth > 200) {
    errors.push_back(where + ": schema recursion too deep");
    return;
  }
  if (!schema.is_object()) return;
  const std::string at = where.empty() ? "/" : where;
  if (auto ref = schema.find("$ref"); ref != schema.end()) {
    check(resolve(ref->get<std::string>()), value, where, errors, depth + 1);
    return;
  }

  if (auto t = schema.find("type"); t != schema.end()) {
    bool ok = false;
    if (t->is_string()) ok = has_type(value, t->get<std::string>());
    else
      for (const auto& alt : *t) ok = ok || has_type(value, alt.get<std::string>());
    if (!ok) {
      errors.push_back(at + ": expected type " + t->dump() + ", got " + json_type(value));
      return;
    }
  }
  if (auto e = schema.find("enum"); e != schema.end()) {
    if (std::find(e->begin(), e->end(), value) == e->end()) {
      errors.push_back(at + ": value " + value.dump() + " not in enum " + e->dump());
    }
  }
  if (auto any = schema.find("anyOf"); any != schema.end()) {
    bool ok = false;
    for (const auto& alt : *any) {
      std::vector<std::string> sub;
      check(alt, value, where, sub, depth + 1);
      if (sub.empty()) {
        ok = true;
        break;
      }
    }
    if (!ok) errors.push_back(at + ": matches no anyOf alternative");
  }
  if (auto one = schema.find("oneOf"); one != schema.end()) {
    int matches = 0;
    for (const auto& alt : *one) {
      std::vector<std::string> sub;
      check(alt, value, where, sub, depth + 1);
      if (sub.empty()) ++matches;
    }
    if (matches != 1) errors.push_back(at + ": matches " + std::to_string(matches) + " oneOf alternatives");
  }

  if (value.is_object()) {
    const auto props = schema.find("properties");
    const auto extra = schema.find("additionalProperties");
    for (auto it = value.begin(); it != value.end(); ++it) {
      const std::string child = pointer_child(where, it.key());
      if (props != schema.end() && props->contains(it.key())) {
        check((*props)[it.key()], *it, child, errors, depth + 1);
      } else if (extra != schema.end()) {
        if (extra->is_boolean() && !extra->get<bool>()) {
          errors.push_back(at + ": property '" + it.key() + "' is not allowed");
        } else if (extra->is_object()) {
          check(*extra, *it, child, errors, depth + 1);
        }
      }
    }
    if (auto req = schema.find("required"); req != schema.end()) {
      for (const auto& name : *req) {
        if (!value.contains(name.get<std::string>())) {
          errors.push_back(at + ": missing required property '" + name.get<std::string>() + "'");
        }
      }
    }
  }

  if (value.is_array()) {
    if (auto mn = schema.find("minItems"); mn != schema.end() && value.size() < mn->get<std::size_t>()) {
      errors.push_back(at + ": fewer than " + mn->dump() + " items");
    }
    if (auto u = schema.find("uniqueItems"); u != schema.end() && u->get<bool>()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        for (std::size_t k = i + 1; k < value.size(); ++k) {
          if (value[i] == value[k]) errors.push_back(at + ": items " + std::to_string(i) + " and " +
                                                     std::to_string(k) + " are equal");
        }
      }
    }
    if (auto items = schema.find("items"); items != schema.end()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        const json& s = items->is_array() ? (i < items->size() ? (*items)[i] : json::object()) : *items;
        check(s, value[i], where + "/" + std::to_string(i), errors, depth + 1);
      }
    }
  }

  if (value.is_number()) {
    const double d = value.get<double>();
    if (auto mn = schema.find("minimum"); mn != schema.end() && d < mn->get<double>()) {
      errors.push_back(at + ": " + value.dump() + " is below the minimum " + mn->dump());
    }
    if (auto mx = schema.find("maximum"); mx != schema.end() && d > mx->get<double>()) {
      errors.push_back(at + ": " + value.dump() + " is above the maximum " + mx->dump());
    }
  }

  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    if (auto p = schema.find("pattern"); p != schema.end()) {
      const auto& re = patterns_.at(p->get<std::string>());
      if (!std::regex_search(s, re)) errors.push_back(at + ": '" + s + "' does not match " + p->dump());
    }
    if (auto f = schema.find("format"); f != schema.end()) {
      const std::string fmt = f->get<std::string>();
      if (fmt == "date-time" && !std::regex_match(s, date_time_re())) {
        errors.push_back(at + ": '" + s + "' is not a date-time");
      } else if (fmt == "uri" && !std::regex_match(s, uri_re())) {
        errors.push_back(at + ": '" + s + "' is not an absolute URI");
      }
    }
  }
}

}  // namespace apaudit
