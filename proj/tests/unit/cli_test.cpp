#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "apaudit/cli.hpp"

using namespace apaudit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kE2e = fs::path(APAUDIT_SOURCE_DIR) / "tests" / "fixtures" / "e2e";

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "apaudit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("apaudit_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::vector<std::string> artifacts() {
  std::vector<std::string> v;
  for (const char* ap : {"ASO", "IZC", "LZD", "MSC", "NOF", "OSO", "UEC"}) v.push_back((kE2e / "artifacts" / ap).string());
  return v;
}

std::vector<std::string> scan_args(const fs::path& config, const fs::path& out) {
  std::vector<std::string> a = {"scan", "--config", config.string(), "--repo", (kE2e / "corpus").string(), "--out",
                                out.string(), "--artifacts"};
  for (auto& s : artifacts()) a.push_back(s);
  return a;
}

// A copy of the fixture config and cassettes that a test may damage.
fs::path copy_fixture(const TempDir& t) {
  fs::copy(kE2e / "apaudit.json", t / "apaudit.json");
  fs::copy(kE2e / "cassettes", t / "cassettes", fs::copy_options::recursive);
  return t / "apaudit.json";
}

}  // namespace

TEST(Cli, HelpAndBadFlags) {
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({"scan", "--bogus"}).code, kExitConfig);
  EXPECT_EQ(cli({}).code, kExitConfig);
}

TEST(Cli, IndexCountsAndDump) {
  TempDir t;
  auto r = cli({"index", (kE2e / "corpus").string(), "--out", (t / "index.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("7 files"), std::string::npos) << r.out;
  const json j = load(t / "index.json");
  EXPECT_TRUE(j.contains("functions"));
}

TEST(Cli, SynthesizeReplayReproducesCommittedArtifacts) {
  TempDir t;
  for (const char* ap : {"LZD", "UEC"}) {
    auto r = cli({"synthesize", "--config", (kE2e / "apaudit.json").string(), "--spec", (kE2e / "specs" / ap).string(),
                  "--out", (t / ap).string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find(std::string(ap) + ":"), std::string::npos) << r.out;
    EXPECT_EQ(load(t / ap / "strategy.json"), load(kE2e / "artifacts" / ap / "strategy.json"));
    EXPECT_EQ(load(t / ap / "prompt.json"), load(kE2e / "artifacts" / ap / "prompt.json"));
    EXPECT_EQ(load(t / ap / "ledger.json").at("schema"), "apaudit.ledger/1");
  }
}

TEST(Cli, SynthesizeBadSpecWritesNothing) {
  TempDir t;
  fs::create_directories(t / "spec");
  std::ofstream(t / "spec" / "manifest.json") << R"({"name": "X", "bug_type": "nonsense"})";
  auto r = cli({"synthesize", "--config", (kE2e / "apaudit.json").string(), "--spec", (t / "spec").string(), "--out",
                (t / "out").string()});
  EXPECT_EQ(r.code, kExitConfig) << r.err;
  EXPECT_FALSE(fs::exists(t / "out" / "strategy.json"));
}

TEST(Cli, SynthesizeCassetteMissFailsWithoutOutput) {
  TempDir t;
  const fs::path cfg = copy_fixture(t);
  fs::remove_all(t / "cassettes");
  fs::create_directories(t / "cassettes");
  auto r = cli({"synthesize", "--config", cfg.string(), "--spec", (kE2e / "specs" / "LZD").string(), "--out",
                (t / "out").string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_FALSE(fs::exists(t / "out" / "strategy.json"));
  EXPECT_FALSE(fs::exists(t / "out" / "prompt.json"));
}

TEST(Cli, ScanReplayFindsEveryPlantedBug) {
  TempDir t;
  auto args = scan_args(kE2e / "apaudit.json", t / "out");
  args.insert(args.end(), {"--k-max", "2"});
  auto r = cli(args);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("7 reports"), std::string::npos) << r.out;
  EXPECT_EQ(load(t / "out" / "reports.json").at("reports").size(), 7u);
  const json runlog = load(t / "out" / "runlog.json");
  ASSERT_EQ(runlog.at("runs").size(), 7u);
  for (const auto& run : runlog.at("runs")) {
    EXPECT_EQ(run.at("k_max"), 2);
    EXPECT_EQ(run.at("seed_cap"), 100);
  }
  EXPECT_TRUE(load(t / "out" / "reports.sarif").contains("runs"));
  EXPECT_EQ(load(t / "out" / "ledger.json").at("schema"), "apaudit.ledger/1");
}

TEST(Cli, ScanIsByteStable) {
  TempDir t;
  ASSERT_EQ(cli(scan_args(kE2e / "apaudit.json", t / "a")).code, kExitOk);
  ASSERT_EQ(cli(scan_args(kE2e / "apaudit.json", t / "b")).code, kExitOk);
  for (const char* f : {"reports.json", "reports.sarif", "ledger.json"}) {
    EXPECT_EQ(slurp(t / "a" / f), slurp(t / "b" / f)) << f;
  }
}

TEST(Cli, ScanMissingDetectCassetteIsPartial) {
  TempDir t;
  const fs::path cfg = copy_fixture(t);
  bool removed = false;
  for (const auto& e : fs::directory_iterator(t / "cassettes")) {
    if (slurp(e.path()).find("Audit the function below") != std::string::npos) {
      fs::remove(e.path());
      removed = true;
      break;
    }
  }
  ASSERT_TRUE(removed);
  auto r = cli(scan_args(cfg, t / "out"));
  EXPECT_EQ(r.code, kExitPartial) << r.err;
  EXPECT_TRUE(fs::exists(t / "out" / "runlog.json"));
}

TEST(Cli, ScanRejectsZeroCapAndUnknownModel) {
  TempDir t;
  auto zero = scan_args(kE2e / "apaudit.json", t / "out");
  zero.insert(zero.end(), {"--seed-cap", "0"});
  EXPECT_EQ(cli(zero).code, kExitConfig);
  auto model = scan_args(kE2e / "apaudit.json", t / "out");
  model.insert(model.end(), {"--model", "no-such-model"});
  EXPECT_EQ(cli(model).code, kExitConfig);
  EXPECT_FALSE(fs::exists(t / "out" / "reports.json"));
}

TEST(Cli, AdversarialCassettesAreRejected) {
  TempDir t;
  auto r = cli({"scan", "--config", (kE2e / "apaudit.json").string(), "--cassettes",
                (kE2e / "adversarial" / "cassettes").string(), "--repo", (kE2e / "corpus").string(), "--artifacts",
                (kE2e / "artifacts" / "LZD").string(), "--out", (t / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(load(t / "out" / "reports.json").at("reports").empty());
  const json run = load(t / "out" / "runlog.json").at("runs").at(0);
  EXPECT_EQ(run.at("counts").at("rejected"), 1);
  EXPECT_EQ(run.at("counts").at("accepted"), 0);
}

TEST(Cli, EvaluateAndReport) {
  TempDir t;
  ASSERT_EQ(cli(scan_args(kE2e / "apaudit.json", t / "out")).code, kExitOk);
  auto e = cli({"evaluate", "--reports", (t / "out" / "reports.json").string(), "--manifest",
                (kE2e / "dataset.json").string(), "--adjudications", (kE2e / "adjudications.json").string(), "--repo",
                (kE2e / "corpus").string(), "--out", (t / "metrics.json").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const json total = load(t / "metrics.json").at("total");
  EXPECT_EQ(total.at("tp"), 7);
  EXPECT_EQ(total.at("fp"), 0);
  EXPECT_DOUBLE_EQ(total.at("precision").get<double>(), 100.0);
  EXPECT_DOUBLE_EQ(total.at("recall").get<double>(), 100.0);

  auto r = cli({"report", "--reports", (t / "out" / "reports.json").string(), "--runlog",
                (t / "out" / "runlog.json").string(), "--ledger", (t / "out" / "ledger.json").string(), "--sarif",
                (t / "again.sarif").string(), "--repo", (kE2e / "corpus").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_FALSE(r.out.empty());
  EXPECT_EQ(load(t / "again.sarif").at("version"), "2.1.0");
}

TEST(Cli, EvaluateRejectsUnknownAntiPattern) {
  TempDir t;
  ASSERT_EQ(cli(scan_args(kE2e / "apaudit.json", t / "out")).code, kExitOk);
  json m = load(kE2e / "dataset.json");
  m["cases"].erase(m["cases"].begin());
  std::ofstream(t / "partial.json") << m.dump();
  auto e = cli({"evaluate", "--reports", (t / "out" / "reports.json").string(), "--manifest",
                (t / "partial.json").string(), "--out", (t / "metrics.json").string()});
  EXPECT_EQ(e.code, kExitConfig);
  EXPECT_FALSE(fs::exists(t / "metrics.json"));
}
