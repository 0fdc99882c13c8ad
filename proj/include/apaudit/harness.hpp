#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apaudit/anti_pattern.hpp"
#include "apaudit/code_index.hpp"
#include "apaudit/detector.hpp"

namespace apaudit {

struct GroundTruth {
  std::string file;
  std::string function;
  int line = 0;

  bool operator==(const GroundTruth&) const = default;
};

/// One row of the dataset table plus the location of the known bug.
struct DatasetCase {
  std::string project;
  std::string commit;
  std::string target_file;
  BugType bug_type = BugType::Custom;
  std::string anti_pattern;
  GroundTruth ground_truth;

  bool operator==(const DatasetCase&) const = default;
};

struct DatasetManifest {
  std::vector<DatasetCase> cases;

  /// Throws ConfigError for absolute paths, missing names or non-positive lines.
  void validate() const;
  std::set<std::string> anti_patterns() const;
};

/// {"schema": "apaudit.manifest/1", "cases": [...]}. Throws ConfigError.
DatasetManifest manifest_from_json(const nlohmann::json& j);
DatasetManifest load_manifest(const std::filesystem::path& file);
nlohmann::json to_json(const DatasetManifest& m);

/// Human labels for reports, keyed by anti-pattern and seed location.
class Adjudications {
 public:
  Adjudications() = default;
  /// {"schema": "apaudit.adjudications/1", "labels": [{anti_pattern, file, line, true_positive}]}.
  static Adjudications from_json(const nlohmann::json& j);
  static Adjudications load(const std::filesystem::path& file);

  void set(const std::string& anti_pattern, const std::string& file, int line, bool true_positive);
  std::optional<bool> label(const BugReport& report) const;
  nlohmann::json to_json() const;

 private:
  std::map<std::string, bool> labels_;
};

/// "<anti_pattern>@<seed file>:<seed line>".
std::string report_key(const BugReport& report);

enum class MatchKind { Matched, New, Unmatched };
std::string_view to_string(MatchKind k) noexcept;

struct MatchOptions {
  int window = 5;
  const CodeIndex* index = nullptr;  // enables function containment
};

struct MatchResult {
  MatchKind kind = MatchKind::Unmatched;
  std::vector<std::string> diagnostics;
};

/// Matched when a path step in the ground-truth file lies inside the ground-truth
/// function or within window lines of the ground-truth line. Otherwise New when
/// the report is adjudicated true, else Unmatched.
MatchResult match_report(const BugReport& report, const DatasetCase& c, bool adjudicated_true,
                         const MatchOptions& options = {});

struct EvaluationMetrics {
  std::string group;
  std::size_t cases = 0;
  std::size_t reproduced = 0;
  std::size_t new_found = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  double precision = 0.0;  // percent; meaningless when !precision_defined
  bool precision_defined = false;
  double recall = 0.0;  // percent
  double f1 = 0.0;

  bool operator==(const EvaluationMetrics&) const = default;
};

/// Unrounded metrics from raw counts; tp = reproduced + new_found.
EvaluationMetrics compute_metrics(std::string group, std::size_t cases, std::size_t reproduced,
                                  std::size_t new_found, std::size_t fp);

struct Evaluation {
  std::vector<EvaluationMetrics> per_anti_pattern;  // sorted by name
  EvaluationMetrics total;                          // sums raw counts
  int window = 5;
  std::vector<std::string> diagnostics;
};

/// Pure function of its inputs. Throws ContractError when a report names an
/// anti-pattern absent from the manifest.
Evaluation evaluate(const std::vector<BugReport>& reports, const DatasetManifest& manifest,
                    const Adjudications& adjudications, const MatchOptions& options = {});

/// Percentages and F1 rounded to two decimals.
nlohmann::json to_json(const Evaluation& e);
nlohmann::json to_json(const EvaluationMetrics& m);

double round2(double v) noexcept;

}  // namespace apaudit
