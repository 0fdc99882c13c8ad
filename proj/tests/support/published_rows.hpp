#pragma once

// Raw counts and printed metrics of the published evaluation tables.
// "table2" rows are per-model results; "table3" rows compare against baseline tools.

#include <string>
#include <vector>

namespace testsupport {

struct PublishedRow {
  std::string table;  // "table2" or "table3"
  std::string group;  // model or tool
  std::string ap;     // anti-pattern or "Total"
  int cases, reproduced, new_found, tp, fp;
  double precision, recall, f1;
};

inline const std::vector<PublishedRow>& published_rows() {
  static const std::vector<PublishedRow> rows = {
      {"table2", "claude-3.7", "OSO", 5, 4, 2, 6, 3, 66.67, 80.00, 0.73},
      {"table2", "claude-3.7", "NOF", 5, 5, 2, 7, 2, 77.78, 100.00, 0.88},
      {"table2", "claude-3.7", "ASO", 5, 5, 0, 5, 0, 100.00, 100.00, 1.00},
      {"table2", "claude-3.7", "IZC", 9, 6, 1, 7, 1, 87.50, 66.67, 0.76},
      {"table2", "claude-3.7", "LZD", 5, 5, 5, 10, 0, 100.00, 100.00, 1.00},
      {"table2", "claude-3.7", "UEC", 5, 5, 1, 6, 1, 85.71, 100.00, 0.92},
      {"table2", "claude-3.7", "MSC", 6, 6, 0, 6, 0, 100.00, 100.00, 1.00},
      {"table2", "claude-3.7", "Total", 40, 36, 11, 47, 7, 87.04, 90.00, 0.88},
      {"table2", "deepseek-r1", "OSO", 5, 3, 1, 4, 2, 66.67, 60.00, 0.63},
      {"table2", "deepseek-r1", "NOF", 5, 5, 1, 6, 2, 75.00, 100.00, 0.86},
      {"table2", "deepseek-r1", "ASO", 5, 4, 0, 4, 0, 100.00, 80.00, 0.89},
      {"table2", "deepseek-r1", "IZC", 9, 5, 1, 6, 0, 100.00, 55.56, 0.71},
      {"table2", "deepseek-r1", "LZD", 5, 5, 3, 8, 1, 88.89, 100.00, 0.94},
      {"table2", "deepseek-r1", "UEC", 5, 5, 1, 6, 1, 85.71, 100.00, 0.92},
      {"table2", "deepseek-r1", "MSC", 6, 5, 0, 5, 0, 100.00, 83.33, 0.91},
      {"table2", "deepseek-r1", "Total", 40, 32, 7, 39, 6, 86.67, 80.00, 0.83},
      {"table2", "o4-mini", "OSO", 5, 3, 0, 3, 2, 60.00, 60.00, 0.60},
      {"table2", "o4-mini", "NOF", 5, 5, 1, 6, 2, 75.00, 100.00, 0.86},
      {"table2", "o4-mini", "ASO", 5, 5, 0, 5, 0, 100.00, 100.00, 1.00},
      {"table2", "o4-mini", "IZC", 9, 5, 0, 5, 0, 100.00, 55.56, 0.71},
      {"table2", "o4-mini", "LZD", 5, 5, 2, 7, 1, 87.50, 100.00, 0.93},
      {"table2", "o4-mini", "UEC", 5, 5, 1, 6, 2, 75.00, 100.00, 0.86},
      {"table2", "o4-mini", "MSC", 6, 5, 1, 6, 0, 100.00, 83.33, 0.91},
      {"table2", "o4-mini", "Total", 40, 33, 5, 38, 7, 84.44, 82.50, 0.83},
      {"table3", "RepoAudit", "OSO", 5, 1, 0, 1, 4, 20.00, 20.00, 0.20},
      {"table3", "RepoAudit", "NOF", 5, 0, 0, 0, 9, 0.00, 0.00, 0.00},
      {"table3", "RepoAudit", "ASO", 5, 2, 0, 2, 2, 50.00, 40.00, 0.44},
      {"table3", "RepoAudit", "IZC", 9, 1, 0, 1, 15, 6.25, 11.11, 0.08},
      {"table3", "RepoAudit", "LZD", 5, 3, 0, 3, 7, 30.00, 60.00, 0.40},
      {"table3", "RepoAudit", "UEC", 5, 5, 1, 6, 1, 85.71, 100.00, 0.92},
      {"table3", "RepoAudit", "MSC", 6, 5, 0, 5, 0, 100.00, 83.33, 0.91},
      {"table3", "RepoAudit", "Total", 40, 17, 1, 18, 38, 32.14, 42.50, 0.37},
      {"table3", "BugBot", "OSO", 5, 1, 1, 2, 1, 66.67, 20.00, 0.31},
      {"table3", "BugBot", "NOF", 5, 1, 0, 1, 2, 33.33, 20.00, 0.25},
      {"table3", "BugBot", "ASO", 5, 0, 1, 1, 1, 50.00, 0.00, 0.00},
      {"table3", "BugBot", "IZC", 9, 1, 0, 1, 0, 100.00, 11.11, 0.20},
      {"table3", "BugBot", "LZD", 5, 3, 1, 4, 0, 100.00, 60.00, 0.75},
      {"table3", "BugBot", "UEC", 5, 1, 0, 1, 2, 33.33, 20.00, 0.25},
      {"table3", "BugBot", "MSC", 6, 4, 1, 5, 0, 100.00, 66.67, 0.80},
      {"table3", "BugBot", "Total", 40, 11, 4, 15, 6, 71.43, 27.50, 0.40},
      {"table3", "CodeRabbit", "OSO", 5, 0, 0, 0, 3, 0.00, 0.00, 0.00},
      {"table3", "CodeRabbit", "NOF", 5, 0, 0, 0, 0, 0.00, 0.00, 0.00},
      {"table3", "CodeRabbit", "ASO", 5, 1, 0, 1, 0, 100.00, 20.00, 0.33},
      {"table3", "CodeRabbit", "IZC", 9, 0, 0, 0, 0, 0.00, 0.00, 0.00},
      {"table3", "CodeRabbit", "LZD", 5, 1, 1, 2, 0, 100.00, 20.00, 0.33},
      {"table3", "CodeRabbit", "UEC", 5, 1, 1, 2, 0, 100.00, 20.00, 0.33},
      {"table3", "CodeRabbit", "MSC", 6, 4, 1, 5, 0, 100.00, 66.67, 0.80},
      {"table3", "CodeRabbit", "Total", 40, 7, 3, 10, 3, 76.92, 17.50, 0.29},
      {"table3", "Infer", "OSO", 5, 0, 0, 0, 11, 0.00, 0.00, 0.00},
      {"table3", "Infer", "NOF", 5, 1, 0, 1, 1, 50.00, 20.00, 0.29},
      {"table3", "Infer", "ASO", 5, 0, 0, 0, 0, 0.00, 0.00, 0.00},
      {"table3", "Infer", "IZC", 9, 0, 0, 0, 0, 0.00, 0.00, 0.00},
      {"table3", "Infer", "LZD", 5, 0, 0, 0, 0, 0.00, 0.00, 0.00},
      {"table3", "Infer", "UEC", 5, 0, 0, 0, 0, 0.00, 0.00, 0.00},
      {"table3", "Infer", "MSC", 6, 0, 0, 0, 0, 0.00, 0.00, 0.00},
      {"table3", "Infer", "Total", 40, 1, 0, 1, 12, 7.69, 2.50, 0.04},
  };
  return rows;
}

}  // namespace testsupport
