#include "apaudit/detector.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <omp.h>

#include "apaudit/digest.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"

namespace apaudit {

using nlohmann::json;

namespace {

constexpr std::string_view kValidatorSystem =
    "You are an independent reviewer of reported bugs in C/C++ code. You receive one function assembled from a "
    "program slice and a path of claims written by another auditor. Judge every claim against the code alone. "
    "A claim is upheld only when the statement it cites exists at the cited origin, does what the claim says, "
    "and can execute after the previous step on a feasible path given the branch conditions in the code. "
    "Reply with a single JSON object and nothing else.";

constexpr std::string_view kValidatorFormat =
    "Reply with one JSON object:\n"
    "{\"checks\": [{\"step\": 1, \"upheld\": true, \"reason\": \"...\"}], \"reasons\": \"overall assessment\"}\n"
    "Give exactly one check per step.";

Cost cost_of(const Gateway& llm, const LlmExchange& ex) {
  Cost c;
  c.tokens_in = ex.response.tokens_in;
  c.tokens_out = ex.response.tokens_out;
  c.dollars = exchange_dollars(llm.profile(ex.request.model_id), ex.response.tokens_in, ex.response.tokens_out);
  c.seconds = ex.response.latency_ms / 1000.0;
  return c;
}

using Accept = std::function<std::string(const json&)>;

struct Conversation {
  std::optional<LlmExchange> accepted;
  std::string last_digest;
  std::string last_error;
  Cost cost;
};

/// Sends req, re-prompting with the violation until accept returns no error.
Conversation converse(Gateway& llm, LlmRequest req, int max_attempts, const Accept& accept) {
  Conversation c;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    LlmExchange ex = llm.complete(req);
    c.last_digest = ex.request_digest;
    c.cost += cost_of(llm, ex);
    const auto j = extract_json_object(ex.response.text);
    c.last_error = j ? accept(*j) : "the reply did not contain a JSON object";
    if (c.last_error.empty()) {
      c.accepted = std::move(ex);
      return c;
    }
    req.messages.push_back({"assistant", ex.response.text});
    req.messages.push_back({"user", "The reply violates the requested format: " + c.last_error +
                                        ". Reply again with one corrected JSON object."});
  }
  return c;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct ParsedDetection {
  bool bug = false;
  std::vector<PathStep> steps;
  std::string explanation;
};

std::string parse_detection(const json& j, ParsedDetection& out) {
  if (!j.is_object()) return "the reply is not an object";
  if (!j.contains("verdict") || !j["verdict"].is_string()) return "\"verdict\" must be \"bug\" or \"no_bug\"";
  const std::string verdict = lower(trim(j["verdict"].get<std::string>()));
  if (verdict == "no_bug" || verdict == "no bug" || verdict == "no-bug") {
    out = {};
    return {};
  }
  if (verdict != "bug") return "\"verdict\" must be \"bug\" or \"no_bug\"";
  if (!j.contains("path") || !j["path"].is_array() || j["path"].empty()) {
    return "a \"bug\" verdict needs a non-empty \"path\" array";
  }
  ParsedDetection p;
  p.bug = true;
  std::size_t n = 0;
  for (const auto& step : j["path"]) {
    ++n;
    const std::string where = "path step " + std::to_string(n);
    if (!step.is_object() || !step.contains("origin") || !step["origin"].is_string()) {
      return where + " needs an \"origin\" string";
    }
    auto origin = parse_origin(step["origin"].get<std::string>());
    if (!origin) return where + " has an origin that is not of the form <file>:<line>";
    if (!step.contains("description") || !step["description"].is_string()) {
      return where + " needs a \"description\" string";
    }
    origin->description = trim(step["description"].get<std::string>());
    p.steps.push_back(std::move(*origin));
  }
  if (!j.contains("explanation") || !j["explanation"].is_string()) return "\"explanation\" must be a string";
  p.explanation = trim(j["explanation"].get<std::string>());
  out = std::move(p);
  return {};
}

struct ParsedChecks {
  std::map<int, std::pair<bool, std::string>> by_step;
  std::string reasons;
};

std::string parse_checks(const json& j, std::size_t steps, ParsedChecks& out) {
  if (!j.is_object() || !j.contains("checks") || !j["checks"].is_array()) return "\"checks\" must be an array";
  ParsedChecks p;
  for (const auto& c : j["checks"]) {
    if (!c.is_object() || !c.contains("step") || !c["step"].is_number_integer()) {
      return "every check needs an integer \"step\"";
    }
    const int step = c["step"].get<int>();
    if (step < 1 || static_cast<std::size_t>(step) > steps) {
      return "check step " + std::to_string(step) + " is out of range 1.." + std::to_string(steps);
    }
    if (!c.contains("upheld") || !c["upheld"].is_boolean()) {
      return "check " + std::to_string(step) + " needs a boolean \"upheld\"";
    }
    if (p.by_step.count(step)) return "step " + std::to_string(step) + " is checked twice";
    std::string reason = c.contains("reason") && c["reason"].is_string() ? c["reason"].get<std::string>() : "";
    p.by_step[step] = {c["upheld"].get<bool>(), trim(reason)};
  }
  if (j.contains("reasons") && j["reasons"].is_string()) p.reasons = trim(j["reasons"].get<std::string>());
  out = std::move(p);
  return {};
}

std::string claim_text(const PathStep& s) { return s.origin() + ": " + s.description; }

void check_compatible(const RetrievalStrategy& strategy, const DetectionPrompt& prompt, const PipelineConfig& cfg) {
  strategy.validate();
  prompt.validate();
  cfg.slicer.validate();
  if (strategy.anti_pattern != prompt.anti_pattern) {
    throw ConfigError("strategy is for " + strategy.anti_pattern + " but the prompt is for " + prompt.anti_pattern);
  }
  if (cfg.seed_cap < 1) throw ConfigError("seed cap must be at least 1");
}

std::string make_run_id(const CodeIndex& index, const RetrievalStrategy& strategy, const DetectionPrompt& prompt,
                        const PipelineConfig& cfg, std::uint64_t rng) {
  std::ostringstream key;
  key << index.digest() << '\n'
      << strategy.digest() << '\n'
      << prompt.content_digest() << '\n'
      << cfg.slicer.k_max << '\n'
      << cfg.seed_cap << '\n'
      << rng;
  return sha256_hex(key.str()).substr(0, 16);
}

PipelineResult run(const CodeIndex& index, const RetrievalStrategy& strategy, const DetectionPrompt& prompt,
                   const PipelineConfig& cfg, Gateway& llm, bool parallel) {
  check_compatible(strategy, prompt, cfg);
  const ExtractionResult seeds = parallel ? extract_seeds(index, strategy, cfg.scope, cfg.seed_cap, cfg.rng_seed)
                                          : extract_seeds_serial(index, strategy, cfg.scope, cfg.seed_cap, cfg.rng_seed);

  PipelineResult out;
  RunLog& log = out.log;
  log.run_id = make_run_id(index, strategy, prompt, cfg, seeds.rng_seed);
  log.anti_pattern = prompt.anti_pattern;
  log.index_digest = index.digest();
  log.strategy_digest = strategy.digest();
  log.prompt_digest = prompt.content_digest();
  log.k_max = cfg.slicer.k_max;
  log.seed_cap = cfg.seed_cap;
  log.rng_seed = seeds.rng_seed;
  log.total_matches = seeds.total_matches;
  log.sampled = seeds.sampled;
  log.seeds.resize(seeds.seeds.size());

  const long n = static_cast<long>(seeds.seeds.size());
  if (parallel) {
    const int threads = cfg.parallelism > 0 ? cfg.parallelism : omp_get_max_threads();
    // Each iteration owns one slot, so the log needs no lock.
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long i = 0; i < n; ++i) log.seeds[i] = analyze_seed(index, seeds.seeds[i], prompt, cfg, llm);
  } else {
    for (long i = 0; i < n; ++i) log.seeds[i] = analyze_seed(index, seeds.seeds[i], prompt, cfg, llm);
  }

  for (const SeedRecord& r : log.seeds) {
    log.cost += r.cost;
    switch (r.outcome) {
      case SeedOutcome::NoBug: ++log.counts.no_bug; break;
      case SeedOutcome::Rejected: ++log.counts.rejected; break;
      case SeedOutcome::Error: ++log.counts.errored; break;
      case SeedOutcome::Accepted:
        ++log.counts.accepted;
        out.reports.push_back({*r.candidate, *r.verdict, prompt.anti_pattern, r.cost, log.run_id});
        break;
    }
  }
  return out;
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing \"") + key + "\"");
  return j.at(key).get<T>();
}

}  // namespace

std::optional<PathStep> parse_origin(std::string_view text) {
  std::string s = trim(text);
  if (lower(s.substr(0, 7)) == "origin:") s = trim(std::string_view(s).substr(7));
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) return std::nullopt;
  int line = 0;
  const char* first = s.data() + colon + 1;
  const char* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, line);
  if (ec != std::errc{} || ptr != last || line < 1) return std::nullopt;
  PathStep step;
  step.file = trim(std::string_view(s).substr(0, colon));
  step.line = line;
  if (step.file.empty()) return std::nullopt;
  return step;
}

Cost& Cost::operator+=(const Cost& o) {
  tokens_in += o.tokens_in;
  tokens_out += o.tokens_out;
  dollars += o.dollars;
  seconds += o.seconds;
  return *this;
}

bool BugCandidate::grounded() const {
  return std::all_of(path_steps.begin(), path_steps.end(), [](const PathStep& s) { return s.grounded; });
}

std::string detection_request(const DetectionContext& context) {
  std::ostringstream p;
  p << "Audit the function below. It was assembled from a program slice. A comment /* origin: <file>:<line> */ "
       "gives the repository location of the statement before it, and /* seed */ marks the statement the slice "
       "was built around.\n\n```c\n"
    << context.rendered;
  if (!context.rendered.empty() && context.rendered.back() != '\n') p << '\n';
  p << "```\n\nDecide whether this code contains the anti-pattern and answer in the output format given above. "
       "Cite origins exactly as they appear in the comments.\n";
  return p.str();
}

DetectOutcome detect(const DetectionContext& context, const DetectionPrompt& prompt, const Seed& seed, Gateway& llm,
                     const DetectOptions& options) {
  if (trim(context.rendered).empty()) throw ContractError("detect requires a non-empty detection context");
  LlmRequest req;
  req.model_id = options.model_id;
  req.stage = "detect";
  req.anti_pattern = prompt.anti_pattern;
  req.messages = {{"system", prompt.assemble()}, {"user", detection_request(context)}};

  ParsedDetection parsed;
  Conversation c = converse(llm, req, options.max_attempts, [&](const json& j) { return parse_detection(j, parsed); });

  DetectOutcome out;
  out.cost = c.cost;
  out.request_digest = c.accepted ? c.accepted->request_digest : c.last_digest;
  if (!c.accepted) {
    out.diagnostics.push_back("detection reply stayed malformed after " + std::to_string(options.max_attempts) +
                              " attempts (" + c.last_error + "); read as no bug");
    return out;
  }
  if (!parsed.bug) return out;

  BugCandidate cand;
  cand.seed = seed;
  cand.explanation = parsed.explanation;
  cand.raw_response_digest = sha256_hex(c.accepted->response.text);
  cand.request_digest = c.accepted->request_digest;
  for (PathStep& s : parsed.steps) {
    s.grounded = context.has_origin(s.file, s.line);
    if (!s.grounded) out.diagnostics.push_back("path step " + s.origin() + " is not in the detection context");
    cand.path_steps.push_back(std::move(s));
  }
  out.candidate = std::move(cand);
  return out;
}

std::string validation_request(const BugCandidate& candidate, const DetectionContext& context) {
  std::ostringstream p;
  p << "Code under review. A comment /* origin: <file>:<line> */ gives the repository location of the statement "
       "before it.\n\n```c\n"
    << context.rendered;
  if (!context.rendered.empty() && context.rendered.back() != '\n') p << '\n';
  p << "```\n\nClaimed bug path, in execution order:\n";
  for (std::size_t i = 0; i < candidate.path_steps.size(); ++i) {
    const PathStep& s = candidate.path_steps[i];
    p << (i + 1) << ". [" << s.origin() << "] " << s.description << "\n";
  }
  p << "\nFor each step decide whether the code at the cited origin supports the claim.\n" << kValidatorFormat << "\n";
  return p.str();
}

ValidateOutcome validate(const BugCandidate& candidate, const DetectionContext& context, Gateway& llm,
                         const ValidateOptions& options) {
  ValidateOutcome out;
  ValidationVerdict& v = out.verdict;
  const auto& steps = candidate.path_steps;
  if (steps.empty()) {
    v.accepted = false;
    v.reasons = "the candidate has no path steps";
    return out;
  }

  LlmRequest req;
  req.model_id = options.model_id;
  req.stage = "validate";
  req.anti_pattern = options.anti_pattern;
  req.messages = {{"system", std::string(kValidatorSystem)}, {"user", validation_request(candidate, context)}};

  ParsedChecks parsed;
  Conversation c =
      converse(llm, req, options.max_attempts, [&](const json& j) { return parse_checks(j, steps.size(), parsed); });
  out.cost = c.cost;
  v.request_digest = c.accepted ? c.accepted->request_digest : c.last_digest;
  if (!c.accepted) {
    v.accepted = false;
    v.reasons = "validator reply stayed malformed after " + std::to_string(options.max_attempts) + " attempts (" +
                c.last_error + ")";
    for (const PathStep& s : steps) v.checks.push_back({claim_text(s), false, "not checked"});
    return out;
  }

  v.reasons = parsed.reasons;
  int outside = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    ClaimCheck check{claim_text(steps[i]), false, "no check returned for this step"};
    if (auto it = parsed.by_step.find(static_cast<int>(i + 1)); it != parsed.by_step.end()) {
      check.upheld = it->second.first;
      check.reason = it->second.second;
    }
    const bool in_context = context.has_origin(steps[i].file, steps[i].line);
    if (!steps[i].grounded || !in_context) {
      check.upheld = false;
      check.reason = "origin " + steps[i].origin() + " does not appear in the detection context";
      ++outside;
    }
    v.checks.push_back(std::move(check));
  }
  if (outside > 0) {
    v.reasons = std::to_string(outside) + " of " + std::to_string(steps.size()) +
                " steps cite code outside the detection context. Validator: " + v.reasons;
  }
  v.accepted = std::all_of(v.checks.begin(), v.checks.end(), [](const ClaimCheck& k) { return k.upheld; });
  return out;
}

std::string_view to_string(SeedOutcome o) noexcept {
  switch (o) {
    case SeedOutcome::NoBug: return "no_bug";
    case SeedOutcome::Accepted: return "accepted";
    case SeedOutcome::Rejected: return "rejected";
    case SeedOutcome::Error: return "error";
  }
  return "error";
}

SeedOutcome parse_seed_outcome(std::string_view s) {
  if (s == "no_bug") return SeedOutcome::NoBug;
  if (s == "accepted") return SeedOutcome::Accepted;
  if (s == "rejected") return SeedOutcome::Rejected;
  if (s == "error") return SeedOutcome::Error;
  throw ConfigError("unknown seed outcome '" + std::string(s) + "'");
}

SeedRecord analyze_seed(const CodeIndex& index, const Seed& seed, const DetectionPrompt& prompt,
                        const PipelineConfig& cfg, Gateway& llm) {
  SeedRecord rec;
  rec.seed = seed;
  try {
    const Slice slice = interprocedural_slice(index, seed, cfg.slicer);
    const DetectionContext ctx = inline_slices(index, slice, cfg.slicer);
    rec.diagnostics.insert(rec.diagnostics.end(), ctx.diagnostics.begin(), ctx.diagnostics.end());
    if (cfg.keep_contexts) rec.context = ctx.rendered;

    DetectOutcome d = detect(ctx, prompt, seed, llm, cfg.detect);
    rec.detect_digest = d.request_digest;
    rec.cost += d.cost;
    rec.diagnostics.insert(rec.diagnostics.end(), d.diagnostics.begin(), d.diagnostics.end());
    if (!d.candidate) {
      rec.outcome = SeedOutcome::NoBug;
      return rec;
    }
    for (PathStep& s : d.candidate->path_steps) {
      if (s.grounded && !index.has_line(s.file, s.line)) {
        s.grounded = false;
        rec.diagnostics.push_back("path step " + s.origin() + " is not in the repository");
      }
    }
    rec.candidate = d.candidate;

    ValidateOptions vo = cfg.validate;
    vo.anti_pattern = prompt.anti_pattern;
    ValidateOutcome v = validate(*d.candidate, ctx, llm, vo);
    rec.validate_digest = v.verdict.request_digest;
    rec.cost += v.cost;
    rec.outcome = v.verdict.accepted ? SeedOutcome::Accepted : SeedOutcome::Rejected;
    rec.verdict = std::move(v.verdict);
  } catch (const std::exception& e) {
    rec.outcome = SeedOutcome::Error;
    rec.error = e.what();
  }
  return rec;
}

PipelineResult run_pipeline(const CodeIndex& index, const RetrievalStrategy& strategy, const DetectionPrompt& prompt,
                            const PipelineConfig& cfg, Gateway& llm) {
  return run(index, strategy, prompt, cfg, llm, true);
}

PipelineResult run_pipeline_serial(const CodeIndex& index, const RetrievalStrategy& strategy,
                                   const DetectionPrompt& prompt, const PipelineConfig& cfg, Gateway& llm) {
  return run(index, strategy, prompt, cfg, llm, false);
}

json to_json(const Cost& c) {
  return {{"tokens_in", c.tokens_in}, {"tokens_out", c.tokens_out}, {"dollars", c.dollars}, {"seconds", c.seconds}};
}

json to_json(const PathStep& s) {
  return {{"file", s.file}, {"line", s.line}, {"description", s.description}, {"grounded", s.grounded}};
}

json to_json(const BugCandidate& c) {
  json steps = json::array();
  for (const auto& s : c.path_steps) steps.push_back(to_json(s));
  return {{"seed", to_json(c.seed)},
          {"path", steps},
          {"explanation", c.explanation},
          {"raw_response_digest", c.raw_response_digest},
          {"request_digest", c.request_digest}};
}

json to_json(const ValidationVerdict& v) {
  json checks = json::array();
  for (const auto& k : v.checks) checks.push_back({{"claim", k.claim}, {"upheld", k.upheld}, {"reason", k.reason}});
  return {{"accepted", v.accepted}, {"reasons", v.reasons}, {"checks", checks}, {"request_digest", v.request_digest}};
}

json to_json(const BugReport& r) {
  return {{"anti_pattern", r.anti_pattern},
          {"run_id", r.run_id},
          {"candidate", to_json(r.candidate)},
          {"verdict", to_json(r.verdict)},
          {"cost", to_json(r.cost)}};
}

json to_json(const SeedRecord& r) {
  json j = {{"seed", to_json(r.seed)},
            {"outcome", to_string(r.outcome)},
            {"detect_digest", r.detect_digest},
            {"validate_digest", r.validate_digest},
            {"candidate", r.candidate ? to_json(*r.candidate) : json(nullptr)},
            {"verdict", r.verdict ? to_json(*r.verdict) : json(nullptr)},
            {"diagnostics", r.diagnostics},
            {"error", r.error},
            {"cost", to_json(r.cost)}};
  if (!r.context.empty()) j["context"] = r.context;
  return j;
}

json to_json(const RunLog& log) {
  json seeds = json::array();
  for (const auto& r : log.seeds) seeds.push_back(to_json(r));
  return {{"schema", "apaudit.runlog/1"},
          {"run_id", log.run_id},
          {"anti_pattern", log.anti_pattern},
          {"index_digest", log.index_digest},
          {"strategy_digest", log.strategy_digest},
          {"prompt_digest", log.prompt_digest},
          {"k_max", log.k_max},
          {"seed_cap", log.seed_cap},
          {"rng_seed", log.rng_seed},
          {"total_matches", log.total_matches},
          {"sampled", log.sampled},
          {"counts",
           {{"seeds", log.counts.total()},
            {"no_bug", log.counts.no_bug},
            {"accepted", log.counts.accepted},
            {"rejected", log.counts.rejected},
            {"error", log.counts.errored}}},
          {"cost", to_json(log.cost)},
          {"seeds", seeds}};
}

BugReport report_from_json(const json& j) {
  try {
    BugReport r;
    r.anti_pattern = required<std::string>(j, "anti_pattern");
    r.run_id = required<std::string>(j, "run_id");
    const json& c = j.at("candidate");
    r.candidate.seed = seed_from_json(c.at("seed"));
    for (const auto& s : c.at("path")) {
      r.candidate.path_steps.push_back({required<std::string>(s, "file"), required<int>(s, "line"),
                                        required<std::string>(s, "description"), required<bool>(s, "grounded")});
    }
    r.candidate.explanation = required<std::string>(c, "explanation");
    r.candidate.raw_response_digest = required<std::string>(c, "raw_response_digest");
    r.candidate.request_digest = required<std::string>(c, "request_digest");
    const json& v = j.at("verdict");
    r.verdict.accepted = required<bool>(v, "accepted");
    r.verdict.reasons = required<std::string>(v, "reasons");
    r.verdict.request_digest = required<std::string>(v, "request_digest");
    for (const auto& k : v.at("checks")) {
      r.verdict.checks.push_back(
          {required<std::string>(k, "claim"), required<bool>(k, "upheld"), required<std::string>(k, "reason")});
    }
    const json& cost = j.at("cost");
    r.cost = {required<std::int64_t>(cost, "tokens_in"), required<std::int64_t>(cost, "tokens_out"),
              required<double>(cost, "dollars"), required<double>(cost, "seconds")};
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

json reports_to_json(const std::vector<BugReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  return {{"schema", "apaudit.reports/1"}, {"reports", arr}};
}

std::vector<BugReport> reports_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != "apaudit.reports/1") {
    throw ConfigError("reports file must have schema apaudit.reports/1");
  }
  if (!j.contains("reports") || !j["reports"].is_array()) throw ConfigError("reports file needs a \"reports\" array");
  std::vector<BugReport> out;
  for (const auto& r : j["reports"]) out.push_back(report_from_json(r));
  return out;
}

}  // namespace apaudit
