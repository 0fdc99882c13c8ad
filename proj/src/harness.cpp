#include "apaudit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "apaudit/errors.hpp"

namespace apaudit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& file, const char* what) {
  std::ifstream in(file);
  if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + file.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(std::string("malformed ") + what + ": " + file.string());
  return j;
}

bool is_relative_path(const std::string& p) { return !p.empty() && p.front() != '/' && p.find("..") == std::string::npos; }

std::string key_of(const std::string& anti_pattern, const std::string& file, int line) {
  return anti_pattern + "@" + file + ":" + std::to_string(line);
}

}  // namespace

void DatasetManifest::validate() const {
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const DatasetCase& c = cases[i];
    const std::string where = "manifest case " + std::to_string(i + 1);
    if (c.anti_pattern.empty()) throw ConfigError(where + " has no anti_pattern");
    if (!is_relative_path(c.target_file)) throw ConfigError(where + ": target_file must be repo-relative");
    if (!is_relative_path(c.ground_truth.file)) throw ConfigError(where + ": ground_truth.file must be repo-relative");
    if (c.ground_truth.line < 1) throw ConfigError(where + ": ground_truth.line must be positive");
  }
}

std::set<std::string> DatasetManifest::anti_patterns() const {
  std::set<std::string> out;
  for (const auto& c : cases) out.insert(c.anti_pattern);
  return out;
}

DatasetManifest manifest_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != "apaudit.manifest/1") {
    throw ConfigError("manifest must have schema apaudit.manifest/1");
  }
  DatasetManifest m;
  try {
    for (const auto& c : j.at("cases")) {
      DatasetCase d;
      d.project = c.at("project").get<std::string>();
      d.commit = c.value("commit", "");
      d.target_file = c.at("target_file").get<std::string>();
      d.bug_type = parse_bug_type(c.at("bug_type").get<std::string>());
      d.anti_pattern = c.at("anti_pattern").get<std::string>();
      const json& gt = c.at("ground_truth");
      d.ground_truth.file = gt.value("file", d.target_file);
      d.ground_truth.function = gt.value("function", "");
      d.ground_truth.line = gt.at("line").get<int>();
      m.cases.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const fs::path& file) { return manifest_from_json(read_json(file, "manifest")); }

json to_json(const DatasetManifest& m) {
  json cases = json::array();
  for (const auto& c : m.cases) {
    cases.push_back({{"project", c.project},
                     {"commit", c.commit},
                     {"target_file", c.target_file},
                     {"bug_type", to_string(c.bug_type)},
                     {"anti_pattern", c.anti_pattern},
                     {"ground_truth",
                      {{"file", c.ground_truth.file}, {"function", c.ground_truth.function}, {"line", c.ground_truth.line}}}});
  }
  return {{"schema", "apaudit.manifest/1"}, {"cases", cases}};
}

Adjudications Adjudications::from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != "apaudit.adjudications/1") {
    throw ConfigError("adjudications must have schema apaudit.adjudications/1");
  }
  Adjudications a;
  try {
    for (const auto& l : j.at("labels")) {
      a.set(l.at("anti_pattern").get<std::string>(), l.at("file").get<std::string>(), l.at("line").get<int>(),
            l.at("true_positive").get<bool>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed adjudications: ") + e.what());
  }
  return a;
}

Adjudications Adjudications::load(const fs::path& file) { return from_json(read_json(file, "adjudications")); }

void Adjudications::set(const std::string& anti_pattern, const std::string& file, int line, bool true_positive) {
  labels_[key_of(anti_pattern, file, line)] = true_positive;
}

std::optional<bool> Adjudications::label(const BugReport& report) const {
  auto it = labels_.find(report_key(report));
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

json Adjudications::to_json() const {
  json labels = json::array();
  for (const auto& [key, tp] : labels_) {
    const auto at = key.find('@');
    const auto colon = key.rfind(':');
    labels.push_back({{"anti_pattern", key.substr(0, at)},
                      {"file", key.substr(at + 1, colon - at - 1)},
                      {"line", std::atoi(key.c_str() + colon + 1)},
                      {"true_positive", tp}});
  }
  return {{"schema", "apaudit.adjudications/1"}, {"labels", labels}};
}

std::string report_key(const BugReport& report) {
  return key_of(report.anti_pattern, report.candidate.seed.file, report.candidate.seed.line);
}

std::string_view to_string(MatchKind k) noexcept {
  switch (k) {
    case MatchKind::Matched: return "matched";
    case MatchKind::New: return "new";
    case MatchKind::Unmatched: return "unmatched";
  }
  return "unmatched";
}

MatchResult match_report(const BugReport& report, const DatasetCase& c, bool adjudicated_true,
                         const MatchOptions& options) {
  MatchResult out;
  const GroundTruth& gt = c.ground_truth;
  std::optional<LineSpan> fn_span;
  if (!gt.function.empty()) {
    if (options.index) {
      for (const FunctionRecord* fn : options.index->functions_named(gt.function)) {
        if (fn->file == gt.file) fn_span = fn->body_span;
      }
    }
    if (!fn_span) {
      out.diagnostics.push_back("ground-truth function " + gt.function + " not found in " + gt.file +
                                "; matching by line window only");
    }
  }
  for (const PathStep& s : report.candidate.path_steps) {
    if (s.file != gt.file) continue;
    if (std::abs(s.line - gt.line) <= options.window || (fn_span && fn_span->contains(s.line))) {
      out.kind = MatchKind::Matched;
      return out;
    }
  }
  out.kind = adjudicated_true ? MatchKind::New : MatchKind::Unmatched;
  return out;
}

double round2(double v) noexcept { return std::round(v * 100.0) / 100.0; }

EvaluationMetrics compute_metrics(std::string group, std::size_t cases, std::size_t reproduced,
                                  std::size_t new_found, std::size_t fp) {
  EvaluationMetrics m;
  m.group = std::move(group);
  m.cases = cases;
  m.reproduced = reproduced;
  m.new_found = new_found;
  m.tp = reproduced + new_found;
  m.fp = fp;
  m.precision_defined = m.tp + m.fp > 0;
  const double p = m.precision_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  const double r = cases > 0 ? static_cast<double>(reproduced) / static_cast<double>(cases) : 0.0;
  m.precision = 100.0 * p;
  m.recall = 100.0 * r;
  m.f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  return m;
}

Evaluation evaluate(const std::vector<BugReport>& reports, const DatasetManifest& manifest,
                    const Adjudications& adjudications, const MatchOptions& options) {
  Evaluation out;
  out.window = options.window;
  const std::set<std::string> names = manifest.anti_patterns();
  for (const auto& r : reports) {
    if (!names.count(r.anti_pattern)) {
      throw ContractError("report for " + r.anti_pattern + " has no cases in the manifest");
    }
  }

  struct Tally {
    std::size_t cases = 0;
    std::set<std::size_t> reproduced;
    std::size_t new_found = 0;
    std::size_t fp = 0;
  };
  std::map<std::string, Tally> by_ap;
  for (const auto& c : manifest.cases) ++by_ap[c.anti_pattern].cases;

  std::set<std::string> diag;
  for (const BugReport& r : reports) {
    Tally& t = by_ap[r.anti_pattern];
    const bool labeled_true = adjudications.label(r).value_or(false);
    bool matched = false;
    for (std::size_t i = 0; i < manifest.cases.size(); ++i) {
      const DatasetCase& c = manifest.cases[i];
      if (c.anti_pattern != r.anti_pattern) continue;
      MatchResult m = match_report(r, c, false, options);
      diag.insert(m.diagnostics.begin(), m.diagnostics.end());
      if (m.kind == MatchKind::Matched) {
        t.reproduced.insert(i);
        matched = true;
      }
    }
    // A second report on an already reproduced case is neither a new TP nor a FP.
    if (!matched) labeled_true ? ++t.new_found : ++t.fp;
  }

  std::size_t cases = 0, reproduced = 0, new_found = 0, fp = 0;
  for (const auto& [name, t] : by_ap) {
    out.per_anti_pattern.push_back(compute_metrics(name, t.cases, t.reproduced.size(), t.new_found, t.fp));
    cases += t.cases;
    reproduced += t.reproduced.size();
    new_found += t.new_found;
    fp += t.fp;
  }
  out.total = compute_metrics("Total", cases, reproduced, new_found, fp);
  out.diagnostics.assign(diag.begin(), diag.end());
  return out;
}

json to_json(const EvaluationMetrics& m) {
  return {{"group", m.group},
          {"cases", m.cases},
          {"reproduced", m.reproduced},
          {"new_found", m.new_found},
          {"tp", m.tp},
          {"fp", m.fp},
          {"precision", m.precision_defined ? json(round2(m.precision)) : json(nullptr)},
          {"precision_defined", m.precision_defined},
          {"recall", round2(m.recall)},
          {"f1", round2(m.f1)}};
}

json to_json(const Evaluation& e) {
  json rows = json::array();
  for (const auto& m : e.per_anti_pattern) rows.push_back(to_json(m));
  return {{"schema", "apaudit.metrics/1"},
          {"matching", {{"window", e.window}, {"function_containment", true}}},
          {"per_anti_pattern", rows},
          {"total", to_json(e.total)},
          {"diagnostics", e.diagnostics}};
}

}  // namespace apaudit
