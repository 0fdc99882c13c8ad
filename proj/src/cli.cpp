#include "apaudit/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "apaudit/config.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/harness.hpp"
#include "apaudit/retrieval.hpp"
#include "apaudit/sarif.hpp"

#ifndef APAUDIT_SARIF_SCHEMA
#define APAUDIT_SARIF_SCHEMA ""
#endif

namespace apaudit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed JSON in " + file.string());
  return j;
}

/// Write-temp-then-rename so a crash never leaves a truncated artifact.
void write_text_file(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    out << text;
  }
  fs::rename(tmp, file);
}

void write_json_file(const fs::path& file, const json& j) { write_text_file(file, j.dump(2) + "\n"); }

// Flags shared by subcommands that talk to the gateway.
struct GatewayFlags {
  std::string config;
  std::string mode;
  std::string cassettes;
  std::string model;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Config file (apaudit.config/1)");
    app->add_option("--mode", mode, "Gateway mode: live, record, replay, hybrid");
    app->add_option("--cassettes", cassettes, "Cassette directory");
    app->add_option("--model", model, "Model profile id");
  }

  AppConfig load() const {
    AppConfig c = config.empty() ? default_app_config() : load_app_config(config);
    if (!mode.empty()) c.gateway.mode = parse_gateway_mode(mode);
    if (!cassettes.empty()) c.gateway.cassette_dir = cassettes;
    if (!model.empty()) {
      if (!c.gateway.profiles.count(model)) throw ConfigError("unknown model profile " + model);
      c.gateway.default_model = model;
    }
    return c;
  }
};

struct IndexFlags {
  std::vector<std::string> include;
  std::vector<std::string> exclude;

  void add(CLI::App* app) {
    app->add_option("--include", include, "Glob of files to index (repeatable)");
    app->add_option("--exclude", exclude, "Glob of files to skip (repeatable)");
  }
  IndexOptions options() const {
    IndexOptions o;
    o.include_globs = include;
    o.exclude_globs = exclude;
    return o;
  }
};

json ledger_document(const Gateway& g) {
  const auto entries = g.ledger().entries();
  return {{"schema", "apaudit.ledger/1"},
          {"entries", ledger_to_json(entries)},
          {"by_stage", cost_table_to_json(tally_cost(entries, CostGroup::Stage))},
          {"by_anti_pattern", cost_table_to_json(tally_cost(entries, CostGroup::AntiPattern))}};
}

std::string money(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

std::string pct(const EvaluationMetrics& m, double v, bool defined = true) {
  if (!defined) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  (void)m;
  return s.str();
}

void check_sarif(const json& doc, const std::string& schema_path, std::ostream& err) {
  if (schema_path.empty() || !fs::exists(schema_path)) {
    err << "warning: SARIF schema not found; output not validated\n";
    return;
  }
  const auto errors = JsonSchema::load(schema_path).validate(doc);
  if (!errors.empty()) throw Error("emitted SARIF violates the 2.1.0 schema: " + errors.front());
}

int cmd_index(const std::string& repo, const IndexFlags& flags, const std::string& out_file, std::ostream& out) {
  const CodeIndex idx = index_repository(repo, flags.options());
  if (!out_file.empty()) write_json_file(out_file, idx.to_json());
  out << idx.files().size() << " files, " << idx.functions().size() << " functions, "
      << idx.call_graph().edges.size() << " call edges, " << idx.call_graph().unresolved.size()
      << " unresolved calls\n";
  return kExitOk;
}

int cmd_synthesize(const std::string& spec_dir, const std::string& out_dir, const GatewayFlags& gf, bool no_reflect,
                   std::ostream& out, std::ostream& err) {
  AppConfig cfg = gf.load();
  const AntiPatternSpec spec = load_anti_pattern_spec(spec_dir);
  spec.validate();
  const ReasoningHintSet hints = cfg.hint_set();
  hints.validate();
  Gateway g(cfg.gateway, cfg.transport());

  const RetrievalStrategy strategy = synthesize_retrieval_strategy(spec, g);
  DetectionPrompt prompt = synthesize_detection_prompt(spec, hints, g);
  RefineOptions ro = cfg.reflection;
  if (no_reflect) ro.enabled = false;
  RefineResult refined = reflect_and_refine(prompt, spec, g, ro);
  for (const auto& w : refined.warnings) err << "warning: " << w << "\n";

  write_json_file(fs::path(out_dir) / "strategy.json", to_json(strategy));
  write_json_file(fs::path(out_dir) / "prompt.json", to_json(refined.prompt));
  write_json_file(fs::path(out_dir) / "ledger.json", ledger_document(g));
  out << spec.name << ": " << strategy.extractor.rules.size() << " matcher rules ("
      << to_string(strategy.direction) << "), prompt " << refined.prompt.content_digest().substr(0, 12) << ", "
      << refined.prompt.reflection_log.size() << " reflection rounds\n";
  return kExitOk;
}

struct ScanFlags {
  std::string repo;
  std::vector<std::string> artifacts;
  std::string out_dir;
  int k_max = -1;
  long long seed_cap = -1;
  std::string rng_seed;
  int parallelism = -1;
  bool transcripts = false;
  bool serial = false;
  std::string sarif_schema = APAUDIT_SARIF_SCHEMA;
};

int cmd_scan(const ScanFlags& sf, const GatewayFlags& gf, const IndexFlags& ix, std::ostream& out, std::ostream& err) {
  AppConfig cfg = gf.load();
  if (sf.k_max >= 0) cfg.pipeline.slicer.k_max = sf.k_max;
  if (sf.seed_cap == 0) throw ConfigError("--seed-cap must be at least 1");
  if (sf.seed_cap > 0) cfg.pipeline.seed_cap = static_cast<std::size_t>(sf.seed_cap);
  if (!sf.rng_seed.empty()) {
    try {
      cfg.pipeline.rng_seed = std::stoull(sf.rng_seed);
    } catch (const std::exception&) {
      throw ConfigError("--rng-seed must be an unsigned integer");
    }
  }
  if (sf.parallelism >= 0) cfg.pipeline.parallelism = sf.parallelism;
  cfg.pipeline.keep_contexts = sf.transcripts;
  cfg.pipeline.slicer.validate();

  std::vector<std::pair<RetrievalStrategy, DetectionPrompt>> artifacts;
  for (const auto& dir : sf.artifacts) {
    artifacts.emplace_back(strategy_from_json(read_json_file(fs::path(dir) / "strategy.json")),
                           prompt_from_json(read_json_file(fs::path(dir) / "prompt.json")));
  }
  const CodeIndex index = index_repository(sf.repo, ix.options());
  Gateway g(cfg.gateway, cfg.transport());

  std::vector<BugReport> reports;
  json runs = json::array();
  bool partial = false;
  for (const auto& [strategy, prompt] : artifacts) {
    PipelineResult r = sf.serial ? run_pipeline_serial(index, strategy, prompt, cfg.pipeline, g)
                                 : run_pipeline(index, strategy, prompt, cfg.pipeline, g);
    const OutcomeCounts& c = r.log.counts;
    out << prompt.anti_pattern << ": " << c.total() << " seeds (" << r.log.total_matches << " matches), "
        << c.accepted << " accepted, " << c.rejected << " rejected, " << c.no_bug << " no bug, " << c.errored
        << " errors\n";
    for (const auto& s : r.log.seeds) {
      if (s.outcome == SeedOutcome::Error) err << "seed " << s.seed.file << ":" << s.seed.line << ": " << s.error << "\n";
    }
    partial = partial || c.errored > 0;
    reports.insert(reports.end(), r.reports.begin(), r.reports.end());
    runs.push_back(to_json(r.log));
  }

  const json sarif = emit_sarif(reports, &index);
  check_sarif(sarif, sf.sarif_schema, err);
  const fs::path dir(sf.out_dir);
  write_json_file(dir / "reports.json", reports_to_json(reports));
  write_text_file(dir / "reports.sarif", sarif.dump(2) + "\n");
  write_json_file(dir / "runlog.json", {{"schema", "apaudit.runlogs/1"}, {"runs", runs}});
  write_json_file(dir / "ledger.json", ledger_document(g));
  const CostTable total = tally_cost(g.ledger().entries(), CostGroup::AntiPattern);
  out << reports.size() << " reports, " << total.total.calls << " LLM calls, $" << money(total.total.dollars) << ", "
      << money(total.total.seconds) << " s\n";
  return partial ? kExitPartial : kExitOk;
}

std::vector<BugReport> read_reports(const std::vector<std::string>& files) {
  std::vector<BugReport> all;
  for (const auto& f : files) {
    auto part = reports_from_json(read_json_file(f));
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

int cmd_evaluate(const std::vector<std::string>& report_files, const std::string& manifest_file,
                 const std::string& adjudication_file, int window, const std::string& repo, const std::string& out_file,
                 const std::string& config, std::ostream& out) {
  int w = config.empty() ? 5 : load_app_config(config).match_window;
  if (window >= 0) w = window;
  const auto reports = read_reports(report_files);
  const DatasetManifest manifest = load_manifest(manifest_file);
  const Adjudications adj = adjudication_file.empty() ? Adjudications{} : Adjudications::load(adjudication_file);
  std::optional<CodeIndex> index;
  if (!repo.empty()) index = index_repository(repo);
  MatchOptions mo;
  mo.window = w;
  mo.index = index ? &*index : nullptr;
  Evaluation e;
  try {
    e = evaluate(reports, manifest, adj, mo);
  } catch (const ContractError& ex) {
    throw ConfigError(ex.what());
  }
  write_json_file(out_file, to_json(e));
  auto row = [&](const EvaluationMetrics& m) {
    out << std::left << std::setw(6) << m.group << " C=" << m.cases << " R=" << m.reproduced << " N=" << m.new_found
        << " TP=" << m.tp << " FP=" << m.fp << " P=" << pct(m, m.precision, m.precision_defined)
        << " R%=" << pct(m, m.recall) << " F1=" << pct(m, m.f1) << "\n";
  };
  for (const auto& m : e.per_anti_pattern) row(m);
  row(e.total);
  for (const auto& d : e.diagnostics) out << "note: " << d << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& report_files, const std::string& runlog_file,
               const std::string& ledger_file, const std::string& sarif_out, const std::string& repo,
               const std::string& sarif_schema, std::ostream& out, std::ostream& err) {
  const auto reports = read_reports(report_files);
  if (!runlog_file.empty()) {
    const json rl = read_json_file(runlog_file);
    for (const auto& run : rl.at("runs")) {
      const json& c = run.at("counts");
      out << "run " << run.at("run_id").get<std::string>() << " " << run.at("anti_pattern").get<std::string>()
          << ": k=" << run.at("k_max") << ", cap=" << run.at("seed_cap") << ", " << c.at("seeds") << " seeds, "
          << c.at("accepted") << " accepted, " << c.at("rejected") << " rejected, " << c.at("no_bug") << " no bug, "
          << c.at("error") << " errors\n";
    }
  }
  out << reports.size() << " validated reports\n";
  for (const auto& r : reports) {
    out << "\n[" << r.anti_pattern << "] " << r.candidate.seed.file << ":" << r.candidate.seed.line << "\n"
        << "  " << r.candidate.explanation << "\n";
    for (std::size_t i = 0; i < r.candidate.path_steps.size(); ++i) {
      const auto& s = r.candidate.path_steps[i];
      out << "  " << (i + 1) << ". " << s.origin() << "  " << s.description << "\n";
    }
    out << "  validator: " << r.verdict.reasons << "\n";
  }
  if (!ledger_file.empty()) {
    const json led = read_json_file(ledger_file);
    out << "\ncost by anti-pattern:\n";
    for (const auto& row : led.at("by_anti_pattern").at("rows")) {
      out << "  " << std::left << std::setw(6) << row.at("group").get<std::string>() << " calls=" << row.at("calls")
          << " $" << money(row.at("dollars").get<double>()) << " " << money(row.at("seconds").get<double>())
          << " s\n";
    }
    const json& t = led.at("by_anti_pattern").at("total");
    out << "  total  calls=" << t.at("calls") << " $" << money(t.at("dollars").get<double>()) << " "
        << money(t.at("seconds").get<double>()) << " s\n";
  }
  if (!sarif_out.empty()) {
    std::optional<CodeIndex> index;
    if (!repo.empty()) index = index_repository(repo);
    const json sarif = emit_sarif(reports, index ? &*index : nullptr);
    check_sarif(sarif, sarif_schema, err);
    write_text_file(sarif_out, sarif.dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn bug anti-patterns from examples and audit C/C++ repositories with an LLM."};
  app.name("apaudit");
  app.require_subcommand(1);

  std::string repo, out_file;
  IndexFlags index_flags;
  auto* index_cmd = app.add_subcommand("index", "Index a repository and optionally dump index.json");
  index_cmd->add_option("repo", repo, "Repository root")->required();
  index_cmd->add_option("--out", out_file, "Write index.json here");
  index_flags.add(index_cmd);

  std::string spec_dir, out_dir;
  bool no_reflect = false;
  GatewayFlags synth_gw;
  auto* synth_cmd = app.add_subcommand("synthesize", "Write strategy.json and prompt.json from an anti-pattern spec");
  synth_cmd->add_option("--spec", spec_dir, "Anti-pattern spec directory (manifest.json + examples)")->required();
  synth_cmd->add_option("--out", out_dir, "Artifact output directory")->required();
  synth_cmd->add_flag("--no-reflect", no_reflect, "Skip prompt reflection");
  synth_gw.add(synth_cmd);

  ScanFlags scan;
  GatewayFlags scan_gw;
  IndexFlags scan_ix;
  auto* scan_cmd = app.add_subcommand("scan", "Run the audit pipeline over a repository");
  scan_cmd->add_option("--repo", scan.repo, "Repository root")->required();
  scan_cmd->add_option("--artifacts", scan.artifacts, "Directory with strategy.json and prompt.json (repeatable)")
      ->required();
  scan_cmd->add_option("--out", scan.out_dir, "Output directory")->required();
  scan_cmd->add_option("--k-max", scan.k_max, "Call-depth bound for slicing");
  scan_cmd->add_option("--seed-cap", scan.seed_cap, "Maximum seeds per anti-pattern");
  scan_cmd->add_option("--rng-seed", scan.rng_seed, "Seed for sampling when the cap applies");
  scan_cmd->add_option("--parallelism", scan.parallelism, "Worker threads (0: all cores)");
  scan_cmd->add_flag("--transcripts", scan.transcripts, "Keep rendered contexts in runlog.json");
  scan_cmd->add_flag("--serial", scan.serial, "Analyze seeds on one thread");
  scan_cmd->add_option("--sarif-schema", scan.sarif_schema, "SARIF 2.1.0 schema used to check the output");
  scan_gw.add(scan_cmd);
  scan_ix.add(scan_cmd);

  std::vector<std::string> eval_reports;
  std::string manifest, adjudications, eval_repo, metrics_out, eval_config;
  int window = -1;
  auto* eval_cmd = app.add_subcommand("evaluate", "Compute precision, recall and F1 against a dataset manifest");
  eval_cmd->add_option("--reports", eval_reports, "reports.json (repeatable)")->required();
  eval_cmd->add_option("--manifest", manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--adjudications", adjudications, "Human labels for reports");
  eval_cmd->add_option("--window", window, "Line window for matching");
  eval_cmd->add_option("--repo", eval_repo, "Repository root, enables function containment");
  eval_cmd->add_option("--config", eval_config, "Config file");
  eval_cmd->add_option("--out", metrics_out, "metrics.json path")->required();

  std::vector<std::string> rep_reports;
  std::string runlog, ledger, sarif_out, rep_repo, rep_schema = APAUDIT_SARIF_SCHEMA;
  auto* report_cmd = app.add_subcommand("report", "Summarize reports, run logs and cost ledgers");
  report_cmd->add_option("--reports", rep_reports, "reports.json (repeatable)")->required();
  report_cmd->add_option("--runlog", runlog, "runlog.json");
  report_cmd->add_option("--ledger", ledger, "ledger.json");
  report_cmd->add_option("--sarif", sarif_out, "Also write SARIF here");
  report_cmd->add_option("--repo", rep_repo, "Repository root for SARIF locations");
  report_cmd->add_option("--sarif-schema", rep_schema, "SARIF 2.1.0 schema used to check the output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*index_cmd) return cmd_index(repo, index_flags, out_file, out);
    if (*synth_cmd) return cmd_synthesize(spec_dir, out_dir, synth_gw, no_reflect, out, err);
    if (*scan_cmd) return cmd_scan(scan, scan_gw, scan_ix, out, err);
    if (*eval_cmd) return cmd_evaluate(eval_reports, manifest, adjudications, window, eval_repo, metrics_out, eval_config, out);
    if (*report_cmd) return cmd_report(rep_reports, runlog, ledger, sarif_out, rep_repo, rep_schema, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const LookupError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace apaudit
