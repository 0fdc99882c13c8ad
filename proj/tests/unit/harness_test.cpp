#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "apaudit/errors.hpp"
#include "apaudit/harness.hpp"
#include "apaudit/sarif.hpp"
#include "published_rows.hpp"

using namespace apaudit;
namespace fs = std::filesystem;

namespace {

BugReport report(const std::string& ap, const std::string& file, std::vector<int> lines, int seed_line = 0) {
  BugReport r;
  r.anti_pattern = ap;
  r.run_id = "run";
  r.candidate.seed.file = file;
  r.candidate.seed.line = seed_line ? seed_line : lines.back();
  for (int l : lines) r.candidate.path_steps.push_back({file, l, "step at " + std::to_string(l), true});
  r.candidate.explanation = "explained";
  r.verdict.accepted = true;
  return r;
}

DatasetCase lzd_case(int line, std::string function = "") {
  return {"proj", "abc123", "src/m.c", BugType::DBZ, "LZD", {"src/m.c", std::move(function), line}};
}

const JsonSchema& sarif_schema() {
  static const JsonSchema s = JsonSchema::load(fs::path(APAUDIT_SOURCE_DIR) / "schemas" / "sarif-2.1.0-rtm.5.json");
  return s;
}

}  // namespace

TEST(Metrics, ReproducesEveryPublishedRow) {
  for (const auto& row : testsupport::published_rows()) {
    SCOPED_TRACE(row.table + " " + row.group + " " + row.ap);
    auto m = compute_metrics(row.ap, row.cases, row.reproduced, row.new_found, row.fp);
    EXPECT_EQ(static_cast<int>(m.tp), row.tp);
    const double p = m.precision_defined ? m.precision : 0.0;
    EXPECT_LE(std::abs(p - row.precision), 0.005);
    EXPECT_LE(std::abs(m.recall - row.recall), 0.005);
    EXPECT_LE(std::abs(m.f1 - row.f1), 0.005);
  }
}

TEST(Metrics, ZeroReportsFlagUndefinedPrecision) {
  auto m = compute_metrics("LZD", 5, 0, 0, 0);
  EXPECT_FALSE(m.precision_defined);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_TRUE(to_json(m)["precision"].is_null());
}

TEST(Match, LineWindowBoundary) {
  auto c = lzd_case(20);
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {20}), c, false).kind, MatchKind::Matched);
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {25}), c, false).kind, MatchKind::Matched);
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {15}), c, false).kind, MatchKind::Matched);
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {26}), c, false).kind, MatchKind::Unmatched);
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {40, 26}), c, false).kind, MatchKind::Unmatched);
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {40, 22}), c, false).kind, MatchKind::Matched);
  MatchOptions wide;
  wide.window = 6;
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {26}), c, false, wide).kind, MatchKind::Matched);
}

TEST(Match, AdjudicationMakesNew) {
  auto c = lzd_case(20);
  EXPECT_EQ(match_report(report("LZD", "src/other.c", {20}), c, true).kind, MatchKind::New);
  EXPECT_EQ(match_report(report("LZD", "src/other.c", {20}), c, false).kind, MatchKind::Unmatched);
}

TEST(Match, FunctionContainment) {
  std::string src = "int helper(int a, int d) {\n";
  for (int i = 0; i < 30; ++i) src += "  a = a + 1;\n";
  src += "  return a / d;\n}\n";
  auto idx = index_sources({{"src/m.c", src}});
  auto c = lzd_case(2, "helper");
  MatchOptions with_index;
  with_index.index = &idx;
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {32}), c, false, with_index).kind, MatchKind::Matched);
  EXPECT_EQ(match_report(report("LZD", "src/m.c", {32}), c, false).kind, MatchKind::Unmatched);

  auto missing = lzd_case(2, "nowhere");
  auto r = match_report(report("LZD", "src/m.c", {32}), missing, false, with_index);
  EXPECT_EQ(r.kind, MatchKind::Unmatched);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_NE(r.diagnostics[0].find("line window"), std::string::npos);
}

TEST(Evaluate, CountsAndPurity) {
  DatasetManifest m;
  m.cases = {lzd_case(10), lzd_case(50),
             {"proj", "abc123", "src/o.c", BugType::OOB, "OSO", {"src/o.c", "", 7}}};
  Adjudications adj;
  adj.set("LZD", "src/x.c", 3, true);
  adj.set("LZD", "src/y.c", 4, false);
  std::vector<BugReport> reports = {
      report("LZD", "src/m.c", {9, 11}),   // reproduces case 1
      report("LZD", "src/m.c", {12}, 13),  // second hit on case 1
      report("LZD", "src/x.c", {3}),       // adjudicated new
      report("LZD", "src/y.c", {4}),       // adjudicated false
      report("LZD", "src/z.c", {5}),       // unlabeled
      report("OSO", "src/o.c", {7}),
  };
  auto e = evaluate(reports, m, adj);
  ASSERT_EQ(e.per_anti_pattern.size(), 2u);
  const auto& lzd = e.per_anti_pattern[0];
  EXPECT_EQ(lzd.group, "LZD");
  EXPECT_EQ(lzd.cases, 2u);
  EXPECT_EQ(lzd.reproduced, 1u);
  EXPECT_EQ(lzd.new_found, 1u);
  EXPECT_EQ(lzd.tp, 2u);
  EXPECT_EQ(lzd.fp, 2u);
  EXPECT_EQ(e.total.cases, 3u);
  EXPECT_EQ(e.total.tp, 3u);
  EXPECT_EQ(e.total.fp, 2u);
  EXPECT_DOUBLE_EQ(e.total.precision, 60.0);
  EXPECT_EQ(to_json(evaluate(reports, m, adj)).dump(), to_json(e).dump());

  auto none = evaluate({}, m, adj);
  EXPECT_FALSE(none.total.precision_defined);
  EXPECT_EQ(none.total.recall, 0.0);

  reports.push_back(report("MSC", "src/q.c", {1}));
  EXPECT_THROW(evaluate(reports, m, adj), ContractError);
}

TEST(Manifest, RoundTripAndValidation) {
  DatasetManifest m;
  m.cases = {lzd_case(10, "f")};
  auto back = manifest_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.cases, m.cases);
  auto j = to_json(m);
  j["cases"][0]["target_file"] = "/abs/m.c";
  EXPECT_THROW(manifest_from_json(j), ConfigError);
  j = to_json(m);
  j["cases"][0]["ground_truth"]["line"] = 0;
  EXPECT_THROW(manifest_from_json(j), ConfigError);
  EXPECT_THROW(manifest_from_json(nlohmann::json{{"cases", nlohmann::json::array()}}), ConfigError);

  Adjudications a;
  a.set("LZD", "src/a.c", 7, true);
  auto a2 = Adjudications::from_json(nlohmann::json::parse(a.to_json().dump()));
  EXPECT_EQ(a2.label(report("LZD", "src/a.c", {7})), std::optional<bool>(true));
  EXPECT_EQ(a2.label(report("LZD", "src/a.c", {8})), std::nullopt);
}

TEST(Sarif, EmptyReportListIsValid) {
  auto doc = emit_sarif({}, nullptr);
  EXPECT_TRUE(doc["runs"][0]["results"].empty());
  EXPECT_EQ(sarif_schema().validate(doc), std::vector<std::string>{});
}

TEST(Sarif, TwoStepReportKeepsOrder) {
  auto idx = index_sources({{"src/m.c", "int f(int a) {\n  int z = 0;\n  return a / z;\n}\n"}});
  auto doc = emit_sarif({report("LZD", "src/m.c", {2, 3})}, &idx);
  EXPECT_EQ(sarif_schema().validate(doc), std::vector<std::string>{});
  const auto& res = doc["runs"][0]["results"];
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0]["ruleId"], "LZD");
  EXPECT_EQ(res[0]["message"]["text"], "explained");
  ASSERT_EQ(res[0]["locations"].size(), 2u);
  EXPECT_EQ(res[0]["locations"][0]["physicalLocation"]["region"]["startLine"], 2);
  EXPECT_EQ(res[0]["locations"][1]["physicalLocation"]["region"]["startLine"], 3);
  EXPECT_EQ(doc["runs"][0]["tool"]["driver"]["rules"][0]["id"], "LZD");
}

TEST(Sarif, UnmappableOriginFallsBackToFile) {
  auto idx = index_sources({{"src/m.c", "int f(int a) {\n  return a;\n}\n"}});
  auto doc = emit_sarif({report("LZD", "src/m.c", {2, 90})}, &idx);
  EXPECT_EQ(sarif_schema().validate(doc), std::vector<std::string>{});
  const auto& r = doc["runs"][0]["results"][0];
  EXPECT_FALSE(r["locations"][1]["physicalLocation"].contains("region"));
  ASSERT_EQ(r["properties"]["warnings"].size(), 1u);
}

TEST(Sarif, ValidatorCatchesViolations) {
  auto good = emit_sarif({report("LZD", "src/m.c", {2, 3})}, nullptr);
  auto bad_version = good;
  bad_version["version"] = "2.0.0";
  EXPECT_FALSE(sarif_schema().validate(bad_version).empty());
  auto no_runs = good;
  no_runs.erase("runs");
  EXPECT_FALSE(sarif_schema().validate(no_runs).empty());
  auto zero_line = good;
  zero_line["runs"][0]["results"][0]["locations"][0]["physicalLocation"]["region"]["startLine"] = 0;
  EXPECT_FALSE(sarif_schema().validate(zero_line).empty());
  auto no_message = good;
  no_message["runs"][0]["results"][0].erase("message");
  EXPECT_FALSE(sarif_schema().validate(no_message).empty());
  auto stray = good;
  stray["runs"][0]["tool"]["driver"]["bogus"] = 1;
  EXPECT_FALSE(sarif_schema().validate(stray).empty());
  auto bad_level = good;
  bad_level["runs"][0]["results"][0]["level"] = "fatal";
  EXPECT_FALSE(sarif_schema().validate(bad_level).empty());
}
