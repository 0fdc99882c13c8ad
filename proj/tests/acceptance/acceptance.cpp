// Exit gate: one PASS/FAIL line per acceptance criterion, each with its
// wall-clock limit. Exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "apaudit/c_parser.hpp"
#include "apaudit/cli.hpp"
#include "apaudit/config.hpp"
#include "apaudit/harness.hpp"
#include "apaudit/sarif.hpp"
#include "apaudit/slicer.hpp"
#include "program_gen.hpp"
#include "published_rows.hpp"
#include "slice_oracle.hpp"

using namespace apaudit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = APAUDIT_SOURCE_DIR;
const fs::path kE2e = kRoot / "tests" / "fixtures" / "e2e";
const std::vector<std::string> kAntiPatterns = {"ASO", "IZC", "LZD", "MSC", "NOF", "OSO", "UEC"};

// Collects failed checks; a criterion passes when none failed.
class Check {
 public:
  void operator()(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(failed_) + " failed check(s)";
    for (const auto& f : failures_) s += "\n    " + f;
    return s;
  }
  std::string note;

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "apaudit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != kExitOk) std::cerr << err.str();
  return code;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("apaudit_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Seed seed_at(const FunctionRecord& fn, std::size_t stmt, const std::string& ident, SeedKind kind) {
  Seed s;
  s.function_id = fn.id;
  s.statement = stmt;
  s.captured_ident = ident;
  s.operand_idents = {ident};
  s.seed_kind = kind;
  s.file = fn.file;
  s.line = fn.statements[stmt].span.start;
  return s;
}

oracle::MemberDepths as_map(const Slice& s) {
  oracle::MemberDepths m;
  for (const auto& x : s.members) m[{x.function_id, x.statement}] = x.depth;
  return m;
}

std::vector<Seed> every_seed(const FunctionRecord& fn, bool uses_only) {
  std::vector<Seed> out;
  for (const auto& st : fn.statements) {
    std::set<std::string> ids = st.uses;
    if (!uses_only) ids.insert(st.defs.begin(), st.defs.end());
    for (const auto& v : ids) {
      for (SeedKind kind : {SeedKind::FaultyValue, SeedKind::DangerousOperand}) out.push_back(seed_at(fn, st.id, v, kind));
    }
  }
  return out;
}

RetrievalStrategy fixture_strategy(const std::string& ap) {
  return strategy_from_json(load(kE2e / "artifacts" / ap / "strategy.json"));
}

std::vector<std::string> scan_args(const fs::path& out) {
  std::vector<std::string> a = {"scan", "--config", (kE2e / "apaudit.json").string(), "--repo",
                                (kE2e / "corpus").string(), "--out", out.string(), "--artifacts"};
  for (const auto& ap : kAntiPatterns) a.push_back((kE2e / "artifacts" / ap).string());
  return a;
}

// 1. Slices equal the brute-force oracle on generated programs.
Check oracle_equivalence() {
  Check c;
  int programs = 0;
  std::size_t comparisons = 0;
  bool branches = false, loops = false, calls = false, pointers = false;
  for (std::uint32_t r = 1; r <= 24; ++r) {
    const auto prog = progen::generate(r, 30);
    c(prog.statements <= 30, "program " + std::to_string(r) + " exceeds 30 statements");
    const CodeIndex idx = index_sources({{"t.c", prog.source}});
    c(idx.diagnostics().empty(), "program " + std::to_string(r) + " does not parse");
    ++programs;
    branches |= prog.source.find("if (") != std::string::npos;
    loops |= prog.source.find("while (") != std::string::npos || prog.source.find("for (") != std::string::npos;
    calls |= prog.functions > 1;
    pointers |= prog.source.find("*") != std::string::npos;
    for (const auto& fn : idx.functions()) {
      for (const Seed& s : every_seed(fn, false)) {
        const Direction dir = direction_for(s.seed_kind);
        c(intra_slice(fn, s.captured_ident, s.statement, dir) ==
              oracle::intra(fn, s.captured_ident, s.statement, dir),
          "intra " + fn.name + " stmt " + std::to_string(s.statement) + " " + s.captured_ident);
        for (int k = 0; k <= 3; ++k) {
          SlicerConfig cfg;
          cfg.k_max = k;
          c(as_map(interprocedural_slice(idx, s, cfg)) == oracle::slice(idx, s, k),
            "inter " + fn.name + " stmt " + std::to_string(s.statement) + " " + s.captured_ident + " k=" +
                std::to_string(k));
          ++comparisons;
        }
      }
    }
  }
  c(programs >= 20, "fewer than 20 programs");
  c(branches && loops && calls && pointers, "generated programs miss a construct");
  c.note = std::to_string(programs) + " programs, " + std::to_string(comparisons) + " slice comparisons";
  return c;
}

// 2. members(k) grows with k and no member is deeper than k.
Check k_monotone() {
  Check c;
  std::size_t seeds = 0;
  for (std::uint32_t r = 1; r <= 24; ++r) {
    const CodeIndex idx = index_sources({{"t.c", progen::generate(r, 30).source}});
    for (const auto& fn : idx.functions()) {
      for (const Seed& s : every_seed(fn, false)) {
        std::set<std::pair<std::string, std::size_t>> prev;
        for (int k = 0; k <= 3; ++k) {
          SlicerConfig cfg;
          cfg.k_max = k;
          std::set<std::pair<std::string, std::size_t>> cur;
          for (const auto& m : interprocedural_slice(idx, s, cfg).members) {
            c(m.depth <= k, "member deeper than k=" + std::to_string(k));
            cur.insert({m.function_id, m.statement});
          }
          c(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()),
            fn.name + " stmt " + std::to_string(s.statement) + " loses members at k=" + std::to_string(k));
          prev = std::move(cur);
        }
        ++seeds;
      }
    }
  }
  c(SlicerConfig{}.k_max == 3, "default k is not 3");
  c.note = std::to_string(seeds) + " seeds, k in 0..3";
  return c;
}

// 3. Every context from the fixture corpus re-parses and maps its lines back.
Check inliner_validity() {
  Check c;
  const CodeIndex idx = index_repository(kE2e / "corpus");
  static const std::regex origin_comment(R"(/\* origin: (\S+):(\d+) \*/)");
  std::size_t contexts = 0;
  for (const auto& ap : kAntiPatterns) {
    const RetrievalStrategy strategy = fixture_strategy(ap);
    const SlicerConfig cfg;
    for (const Seed& seed : extract_seeds(idx, strategy, {}, 100, 7).seeds) {
      const Slice slice = interprocedural_slice(idx, seed, cfg);
      const DetectionContext ctx = inline_slices(idx, slice, cfg);
      const std::string where = ap + " " + seed.file + ":" + std::to_string(seed.line);
      ++contexts;
      c(!ctx.fallback, where + " fell back to comments");
      c(check_single_function(ctx.rendered).ok, where + " does not re-parse");
      for (const auto& m : slice.members) {
        const auto& fn = idx.function(m.function_id);
        c(ctx.has_origin(fn.file, fn.statements[m.statement].span.start), where + " member without origin");
      }
      // Every origin-tagged line is in the origin map and names a real source line.
      std::istringstream lines(ctx.rendered);
      std::string line;
      for (int n = 1; std::getline(lines, line); ++n) {
        std::smatch m;
        if (!std::regex_search(line, m, origin_comment)) continue;
        const std::string file = m[1];
        const int src = std::stoi(m[2]);
        const bool mapped = std::any_of(ctx.origin_map.begin(), ctx.origin_map.end(), [&](const OriginEntry& e) {
          return e.rendered_line == n && e.file == file && e.line == src;
        });
        c(mapped, where + " rendered line " + std::to_string(n) + " missing from origin map");
        const bool real = std::any_of(idx.functions().begin(), idx.functions().end(), [&](const FunctionRecord& f) {
          return f.file == file && f.body_span.start <= src && src <= f.body_span.end;
        });
        c(real, where + " origin " + file + ":" + std::to_string(src) + " is not in the corpus");
      }
      for (const auto& e : ctx.origin_map) {
        c(e.rendered_line >= 1, where + " origin entry without a rendered line");
      }
    }
  }
  c(contexts > 0, "no contexts rendered");
  c.note = std::to_string(contexts) + " contexts";
  return c;
}

// 4. Replay of the planted corpus: 7 accepted, 0 rejected, identical bytes twice.
Check e2e_replay() {
  Check c;
  c(load_app_config(kE2e / "apaudit.json").gateway.mode == GatewayMode::Replay, "fixture config is not strict replay");
  const fs::path dir = scratch("e2e");
  c(cli(scan_args(dir / "a")) == kExitOk, "first scan failed");
  c(cli(scan_args(dir / "b")) == kExitOk, "second scan failed");
  if (!c.ok()) return c;
  c(load(dir / "a" / "reports.json").at("reports").size() == 7, "expected 7 reports");
  std::size_t accepted = 0, rejected = 0, errored = 0;
  const json runlog = load(dir / "a" / "runlog.json");
  for (const auto& run : runlog.at("runs")) {
    accepted += run.at("counts").at("accepted").get<std::size_t>();
    rejected += run.at("counts").at("rejected").get<std::size_t>();
    errored += run.at("counts").at("error").get<std::size_t>();
  }
  c(accepted == 7 && rejected == 0 && errored == 0, "outcome counts");
  for (const char* f : {"reports.json", "reports.sarif", "ledger.json"}) {
    c(slurp(dir / "a" / f) == slurp(dir / "b" / f), std::string(f) + " differs between runs");
  }
  c.note = std::to_string(accepted) + " accepted, " + std::to_string(rejected) + " rejected, byte-stable";
  fs::remove_all(dir);
  return c;
}

// 5. The validator rejects a fabricated step and keeps its own conversation.
Check validator_isolation() {
  Check c;
  const fs::path dir = scratch("isolation");
  const std::string lzd = (kE2e / "artifacts" / "LZD").string();
  c(cli(scan_args(dir / "faithful")) == kExitOk, "faithful scan failed");
  c(cli({"scan", "--config", (kE2e / "apaudit.json").string(), "--cassettes",
         (kE2e / "adversarial" / "cassettes").string(), "--repo", (kE2e / "corpus").string(), "--artifacts", lzd,
         "--out", (dir / "adversarial").string()}) == kExitOk,
    "adversarial scan failed");
  if (!c.ok()) return c;
  std::size_t validated = 0;
  for (const char* which : {"faithful", "adversarial"}) {
    const json runlog = load(dir / which / "runlog.json");
    for (const auto& run : runlog.at("runs")) {
      const bool is_lzd = run.at("anti_pattern") == "LZD";
      if (is_lzd && std::string(which) == "faithful") {
        c(run.at("counts").at("accepted") == 1, "faithful LZD candidate not accepted");
      }
      if (std::string(which) == "adversarial") {
        c(run.at("counts").at("rejected") == 1 && run.at("counts").at("accepted") == 0,
          "adversarial candidate not rejected");
      }
      for (const auto& s : run.at("seeds")) {
        const std::string d = s.value("detect_digest", ""), v = s.value("validate_digest", "");
        if (v.empty()) continue;
        ++validated;
        c(!d.empty() && d != v, "detector and validator share a request digest");
      }
    }
  }
  c(validated >= 8, "too few validated seeds");
  c.note = std::to_string(validated) + " validated seeds, distinct digests";
  fs::remove_all(dir);
  return c;
}

// 6. Raw counts of the published totals reproduce their metrics through evaluate().
Check metric_arithmetic() {
  Check c;
  int rows = 0;
  for (const auto& row : testsupport::published_rows()) {
    if (row.ap != "Total") continue;
    DatasetManifest manifest;
    Adjudications adj;
    std::vector<BugReport> reports;
    auto report_at = [&](const std::string& file, int line) {
      BugReport r;
      r.anti_pattern = "T";
      r.candidate.seed.file = file;
      r.candidate.seed.line = line;
      r.candidate.path_steps = {PathStep{file, line, "step", true}};
      r.verdict.accepted = true;
      reports.push_back(r);
    };
    for (int i = 0; i < row.cases; ++i) {
      const std::string file = "case" + std::to_string(i) + ".c";
      manifest.cases.push_back({"p" + std::to_string(i), "", file, BugType::Custom, "T", {file, "", 10}});
      if (i < row.reproduced) report_at(file, 10);
    }
    for (int i = 0; i < row.new_found; ++i) {
      report_at("new" + std::to_string(i) + ".c", 100);
      adj.set("T", "new" + std::to_string(i) + ".c", 100, true);
    }
    for (int i = 0; i < row.fp; ++i) {
      report_at("fp" + std::to_string(i) + ".c", 100);
      adj.set("T", "fp" + std::to_string(i) + ".c", 100, false);
    }
    const EvaluationMetrics t = evaluate(reports, manifest, adj).total;
    const std::string name = row.table + " " + row.group;
    c(static_cast<int>(t.tp) == row.tp && static_cast<int>(t.reproduced) == row.reproduced, name + " counts");
    c(std::abs(t.precision - row.precision) <= 0.005, name + " precision " + std::to_string(t.precision));
    c(std::abs(t.recall - row.recall) <= 0.005, name + " recall " + std::to_string(t.recall));
    c(std::abs(t.f1 - row.f1) <= 0.005, name + " F1 " + std::to_string(t.f1));
    const json printed = to_json(t);
    c(printed.at("precision") == round2(row.precision) && printed.at("recall") == round2(row.recall) &&
          printed.at("f1") == round2(row.f1),
      name + " printed values");
    if (row.table == "table2" || row.group == "RepoAudit") ++rows;
  }
  c(rows == 4, "expected the three per-model totals and the RepoAudit total");
  c.note = "per-model and baseline totals within 0.005";
  return c;
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

// 7. Ledger entries follow the price profile; grouped rows sum to the total.
Check cost_ledger() {
  Check c;
  const AppConfig cfg = load_app_config(kE2e / "apaudit.json");
  const fs::path dir = scratch("ledger");
  c(cli(scan_args(dir)) == kExitOk, "scan failed");
  if (!c.ok()) return c;
  const json ledger = load(dir / "ledger.json");
  double sum = 0.0;
  std::size_t entries = 0;
  for (const auto& e : ledger.at("entries")) {
    const ModelProfile& p = cfg.gateway.profiles.at(e.at("model").get<std::string>());
    const double expect = (e.at("tokens_in").get<double>() * p.price_per_million_in +
                           e.at("tokens_out").get<double>() * p.price_per_million_out) /
                          1e6;
    c(round4(e.at("dollars").get<double>()) == round4(expect), "entry " + e.at("request_digest").get<std::string>());
    sum += e.at("dollars").get<double>();
    ++entries;
  }
  for (const char* key : {"by_stage", "by_anti_pattern"}) {
    const json& t = ledger.at(key);
    double dollars = 0.0, seconds = 0.0;
    std::int64_t in = 0, out = 0;
    std::size_t calls = 0;
    for (const auto& r : t.at("rows")) {
      dollars += r.at("dollars").get<double>();
      seconds += r.at("seconds").get<double>();
      in += r.at("tokens_in").get<std::int64_t>();
      out += r.at("tokens_out").get<std::int64_t>();
      calls += r.at("calls").get<std::size_t>();
    }
    const json& total = t.at("total");
    c(round4(dollars) == round4(total.at("dollars").get<double>()), std::string(key) + " dollars");
    c(round4(seconds) == round4(total.at("seconds").get<double>()), std::string(key) + " seconds");
    c(in == total.at("tokens_in").get<std::int64_t>() && out == total.at("tokens_out").get<std::int64_t>(),
      std::string(key) + " tokens");
    c(calls == entries && calls == total.at("calls").get<std::size_t>(), std::string(key) + " calls");
    c(round4(sum) == round4(total.at("dollars").get<double>()), std::string(key) + " total vs entries");
  }
  std::ostringstream note;
  note << entries << " exchanges, $" << std::fixed << std::setprecision(4) << sum;
  c.note = note.str();
  fs::remove_all(dir);
  return c;
}

// 8. 250 matches under cap 100: exactly 100 seeds, reproducible per RNG seed.
Check seed_cap() {
  Check c;
  std::ostringstream src;
  src << "int f(int a, int b) {\n  int c = 0;\n";
  for (int i = 0; i < 250; ++i) src << "  c = a / b;\n";
  src << "  return c;\n}\n";
  const CodeIndex idx = index_sources({{"many.c", src.str()}});
  const RetrievalStrategy s = fixture_strategy("LZD");
  const auto a = extract_seeds(idx, s, {}, 100, 7);
  const auto b = extract_seeds(idx, s, {}, 100, 7);
  const auto d = extract_seeds(idx, s, {}, 100, 8);
  const auto serial = extract_seeds_serial(idx, s, {}, 100, 7);
  c(a.total_matches == 250, "expected 250 matches, got " + std::to_string(a.total_matches));
  c(a.seeds.size() == 100 && a.sampled, "expected exactly 100 seeds");
  c(a.seeds == b.seeds, "same RNG seed gave different seeds");
  c(a.seeds != d.seeds, "different RNG seed gave the same seeds");
  c(a.seeds == serial.seeds, "parallel and serial extraction differ");
  c.note = std::to_string(a.total_matches) + " matches -> " + std::to_string(a.seeds.size()) + " seeds";
  return c;
}

// 9. Every SARIF document the tool emits validates against the 2.1.0 schema.
Check sarif_conformance() {
  Check c;
  const JsonSchema schema = JsonSchema::load(kRoot / "schemas" / "sarif-2.1.0-rtm.5.json");
  const fs::path dir = scratch("sarif");
  c(cli(scan_args(dir / "scan")) == kExitOk, "scan failed");
  c(cli({"scan", "--config", (kE2e / "apaudit.json").string(), "--cassettes",
         (kE2e / "adversarial" / "cassettes").string(), "--repo", (kE2e / "corpus").string(), "--artifacts",
         (kE2e / "artifacts" / "LZD").string(), "--out", (dir / "empty").string()}) == kExitOk,
    "adversarial scan failed");
  c(cli({"report", "--reports", (dir / "scan" / "reports.json").string(), "--sarif", (dir / "report.sarif").string(),
         "--repo", (kE2e / "corpus").string()}) == kExitOk,
    "report failed");
  c(cli({"report", "--reports", (dir / "scan" / "reports.json").string(), "--sarif",
         (dir / "unindexed.sarif").string()}) == kExitOk,
    "report without repo failed");
  if (!c.ok()) return c;
  std::size_t docs = 0, results = 0;
  for (const fs::path& f : {dir / "scan" / "reports.sarif", dir / "empty" / "reports.sarif", dir / "report.sarif",
                            dir / "unindexed.sarif"}) {
    const json doc = load(f);
    const auto errors = schema.validate(doc);
    c(errors.empty(), f.filename().string() + ": " + (errors.empty() ? "" : errors.front()));
    ++docs;
    results += doc.at("runs").at(0).at("results").size();
  }
  c(results == 7 + 0 + 7 + 7, "unexpected result counts");
  c.note = std::to_string(docs) + " documents, " + std::to_string(results) + " results";
  fs::remove_all(dir);
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Check()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "slicer oracle equivalence", 10, oracle_equivalence},
      {2, "K-bound monotonicity", 5, k_monotone},
      {3, "inliner validity", 5, inliner_validity},
      {4, "end-to-end replay", 30, e2e_replay},
      {5, "validator isolation", 10, validator_isolation},
      {6, "metric arithmetic", 1, metric_arithmetic},
      {7, "cost ledger", 1, cost_ledger},
      {8, "seed cap and determinism", 5, seed_cap},
      {9, "SARIF conformance", 5, sarif_conformance},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    try {
      c = cr.run();
    } catch (const std::exception& e) {
      c(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = c.ok() && secs < cr.limit_s;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << cr.id << ". " << cr.name << " (" << std::fixed
              << std::setprecision(2) << secs << " s, limit " << std::setprecision(0) << cr.limit_s << " s)";
    if (!c.note.empty()) std::cout << ": " << c.note;
    if (!c.ok()) std::cout << "\n    " << c.summary();
    if (secs >= cr.limit_s) std::cout << "\n    over the time limit";
    std::cout << "\n" << std::flush;
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
