#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apaudit/code_index.hpp"
#include "apaudit/prompt_synth.hpp"
#include "apaudit/retrieval.hpp"
#include "apaudit/slicer.hpp"

namespace apaudit {

class Gateway;
struct LlmExchange;

struct PathStep {
  std::string file;
  int line = 0;
  std::string description;
  bool grounded = false;  // origin appears in the context's origin map

  std::string origin() const { return file + ":" + std::to_string(line); }
  bool operator==(const PathStep&) const = default;
};

/// Parses "file:line", tolerating a leading "origin:". Empty when malformed.
std::optional<PathStep> parse_origin(std::string_view text);

struct Cost {
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double dollars = 0.0;
  double seconds = 0.0;

  Cost& operator+=(const Cost& o);
  bool operator==(const Cost&) const = default;
};

struct BugCandidate {
  Seed seed;
  std::vector<PathStep> path_steps;
  std::string explanation;
  std::string raw_response_digest;  // SHA-256 of the accepted reply text
  std::string request_digest;       // detection conversation

  /// True when every step is grounded.
  bool grounded() const;
  bool operator==(const BugCandidate&) const = default;
};

struct ClaimCheck {
  std::string claim;
  bool upheld = false;
  std::string reason;

  bool operator==(const ClaimCheck&) const = default;
};

struct ValidationVerdict {
  bool accepted = false;
  std::string reasons;
  std::vector<ClaimCheck> checks;  // one per path step, in path order
  std::string request_digest;      // empty when no LLM call was made

  bool operator==(const ValidationVerdict&) const = default;
};

struct DetectOptions {
  int max_attempts = 3;  // initial request plus two retries
  std::string model_id;
};

struct DetectOutcome {
  std::optional<BugCandidate> candidate;
  std::vector<std::string> diagnostics;
  std::string request_digest;  // last detection request sent
  Cost cost;
};

/// The user message sent to the detector for one context.
std::string detection_request(const DetectionContext& context);

/// Runs the detection conversation. Schema violations are re-prompted, then
/// read as "no bug" with a diagnostic. Steps citing origins absent from the
/// context are kept with grounded = false so the validator can reject them.
/// Throws ContractError for an empty context and GatewayError on gateway failure.
DetectOutcome detect(const DetectionContext& context, const DetectionPrompt& prompt, const Seed& seed, Gateway& llm,
                     const DetectOptions& options = {});

struct ValidateOptions {
  int max_attempts = 3;
  std::string model_id;
  std::string anti_pattern;  // ledger tag only; the validator prompt is bug-type agnostic
};

struct ValidateOutcome {
  ValidationVerdict verdict;
  Cost cost;
};

/// The validator's user message: the context and the claimed path, never the explanation.
std::string validation_request(const BugCandidate& candidate, const DetectionContext& context);

/// A separate conversation re-derives each step. Ungrounded steps are never upheld.
/// Zero steps are rejected without a call; a reply that stays malformed is a rejection.
/// Throws GatewayError on gateway failure.
ValidateOutcome validate(const BugCandidate& candidate, const DetectionContext& context, Gateway& llm,
                         const ValidateOptions& options = {});

enum class SeedOutcome { NoBug, Accepted, Rejected, Error };
std::string_view to_string(SeedOutcome o) noexcept;
SeedOutcome parse_seed_outcome(std::string_view s);

struct SeedRecord {
  Seed seed;
  SeedOutcome outcome = SeedOutcome::Error;
  std::string detect_digest;
  std::string validate_digest;
  std::optional<BugCandidate> candidate;
  std::optional<ValidationVerdict> verdict;
  std::vector<std::string> diagnostics;
  std::string error;
  Cost cost;
  std::string context;  // rendered context, kept only when transcripts are requested
};

struct OutcomeCounts {
  std::size_t no_bug = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t errored = 0;

  std::size_t total() const noexcept { return no_bug + accepted + rejected + errored; }
  bool operator==(const OutcomeCounts&) const = default;
};

struct RunLog {
  std::string run_id;
  std::string anti_pattern;
  std::string index_digest;
  std::string strategy_digest;
  std::string prompt_digest;
  int k_max = 0;
  std::size_t seed_cap = 0;
  std::uint64_t rng_seed = 0;
  std::size_t total_matches = 0;
  bool sampled = false;
  std::vector<SeedRecord> seeds;  // extraction order
  OutcomeCounts counts;
  Cost cost;
};

struct BugReport {
  BugCandidate candidate;
  ValidationVerdict verdict;
  std::string anti_pattern;
  Cost cost;
  std::string run_id;

  bool operator==(const BugReport&) const = default;
};

struct PipelineConfig {
  SlicerConfig slicer;
  std::size_t seed_cap = 100;
  std::optional<std::uint64_t> rng_seed;
  SeedScope scope;
  int parallelism = 0;  // 0: OpenMP default
  DetectOptions detect;
  ValidateOptions validate;
  bool keep_contexts = false;
};

struct PipelineResult {
  std::vector<BugReport> reports;  // accepted candidates only, extraction order
  RunLog log;
};

/// Seeds are analyzed concurrently; results are independent of thread timing.
/// Per-seed failures are recorded in the log and never abort the run.
/// Throws ConfigError when the strategy, prompt and slicer settings disagree.
PipelineResult run_pipeline(const CodeIndex& index, const RetrievalStrategy& strategy, const DetectionPrompt& prompt,
                            const PipelineConfig& cfg, Gateway& llm);

/// Single-threaded reference with identical output.
PipelineResult run_pipeline_serial(const CodeIndex& index, const RetrievalStrategy& strategy,
                                   const DetectionPrompt& prompt, const PipelineConfig& cfg, Gateway& llm);

/// Analyzes one seed: slice, inline, detect, validate.
SeedRecord analyze_seed(const CodeIndex& index, const Seed& seed, const DetectionPrompt& prompt,
                        const PipelineConfig& cfg, Gateway& llm);

nlohmann::json to_json(const Cost& c);
nlohmann::json to_json(const PathStep& s);
nlohmann::json to_json(const BugCandidate& c);
nlohmann::json to_json(const ValidationVerdict& v);
nlohmann::json to_json(const BugReport& r);
nlohmann::json to_json(const SeedRecord& r);
nlohmann::json to_json(const RunLog& log);

BugReport report_from_json(const nlohmann::json& j);

/// {"schema": "apaudit.reports/1", "reports": [...]} merged across runs.
nlohmann::json reports_to_json(const std::vector<BugReport>& reports);
/// Throws ConfigError on schema violations.
std::vector<BugReport> reports_from_json(const nlohmann::json& j);

}  // namespace apaudit
