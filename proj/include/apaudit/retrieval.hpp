#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apaudit/anti_pattern.hpp"
#include "apaudit/code_index.hpp"

namespace apaudit {

class Gateway;

enum class RuleTarget { Call, BinaryOp, Declaration, Parameter, Allocation, IndexAccess };
enum class CaptureKind { Arg, Lhs, Rhs, DeclaredIdent, Base, Index };
enum class SeedKind { FaultyValue, DangerousOperand };
enum class Direction { Forward, Backward };

std::string_view to_string(RuleTarget t) noexcept;
std::string_view to_string(SeedKind k) noexcept;
std::string_view to_string(Direction d) noexcept;
RuleTarget parse_rule_target(std::string_view s);
SeedKind parse_seed_kind(std::string_view s);
Direction parse_direction(std::string_view s);

struct Capture {
  CaptureKind kind = CaptureKind::Lhs;
  int arg = 0;  // 0-based, for CaptureKind::Arg

  /// "arg(k)", "lhs", "rhs", "declared_ident", "base", "index".
  static Capture parse(std::string_view s);
  std::string str() const;
  bool operator==(const Capture&) const = default;
};

struct MatcherRule {
  RuleTarget target = RuleTarget::Call;
  std::optional<std::string> name_pattern;  // glob, '|' separates alternatives
  std::optional<std::string> op;            // operator token(s), '|' separated
  Capture capture;
  SeedKind seed_kind = SeedKind::FaultyValue;

  /// Empty when the capture is legal for the target, otherwise the reason.
  std::string legality_error() const;
  bool operator==(const MatcherRule&) const = default;
};

/// Callee glob used by allocation rules without a name_pattern.
inline constexpr std::string_view kDefaultAllocators =
    "malloc|calloc|realloc|strdup|strndup|aligned_alloc|kmalloc|kzalloc|kcalloc|krealloc|vmalloc|vzalloc|kstrdup";

struct SeedExtractorSpec {
  std::vector<MatcherRule> rules;
  bool operator==(const SeedExtractorSpec&) const = default;
};

struct RetrievalStrategy {
  SeedExtractorSpec extractor;
  Direction direction = Direction::Forward;
  std::string anti_pattern;
  std::string provenance;  // request digest of the accepting LLM exchange

  /// Empty when rules are non-empty, legal and consistent with the direction.
  std::string validation_error() const;
  /// Throws ConfigError with validation_error().
  void validate() const;
  std::string digest() const;
  bool operator==(const RetrievalStrategy&) const = default;
};

nlohmann::json to_json(const RetrievalStrategy& s);
/// Throws ConfigError on schema violations.
RetrievalStrategy strategy_from_json(const nlohmann::json& j);

struct Seed {
  std::string function_id;
  std::size_t statement = 0;
  std::string captured_ident;
  std::vector<std::string> operand_idents;  // every identifier in the captured operand
  SeedKind seed_kind = SeedKind::FaultyValue;
  std::size_t rule_index = 0;
  std::string file;
  int line = 0;

  bool operator==(const Seed&) const = default;
};

nlohmann::json to_json(const Seed& s);
Seed seed_from_json(const nlohmann::json& j);

/// Restricts extraction to files matching any of the globs; no globs means every file.
struct SeedScope {
  std::vector<std::string> file_globs;
};

struct ExtractionResult {
  std::vector<Seed> seeds;
  std::size_t total_matches = 0;
  std::uint64_t rng_seed = 0;
  bool sampled = false;
};

/// RNG seed from the strategy and index digests.
std::uint64_t default_rng_seed(const RetrievalStrategy& strategy, const CodeIndex& index);

/// Matches every rule against every in-scope statement, per file in parallel,
/// then samples down to cap when needed. Throws ContractError if cap < 1.
ExtractionResult extract_seeds(const CodeIndex& index, const RetrievalStrategy& strategy, const SeedScope& scope,
                               std::size_t cap, std::optional<std::uint64_t> rng_seed = std::nullopt);

/// Single-threaded reference with identical output.
ExtractionResult extract_seeds_serial(const CodeIndex& index, const RetrievalStrategy& strategy,
                                      const SeedScope& scope, std::size_t cap,
                                      std::optional<std::uint64_t> rng_seed = std::nullopt);

/// Seeds one rule produces at one statement.
std::vector<Seed> match_rule(const FunctionRecord& fn, const StatementNode& st, const MatcherRule& rule,
                             std::size_t rule_index);

struct SynthesisOptions {
  int max_attempts = 3;  // initial request plus two re-prompts
  std::string model_id;  // empty: gateway default
};

/// Prompts for a rule set, validating and re-prompting on schema violations.
/// Throws ConfigError for an invalid spec, SynthesisError after max_attempts.
RetrievalStrategy synthesize_retrieval_strategy(const AntiPatternSpec& spec, Gateway& llm,
                                                const SynthesisOptions& options = {});

/// The prompt used for strategy synthesis, exposed for fixture recording.
std::string retrieval_synthesis_prompt(const AntiPatternSpec& spec);

}  // namespace apaudit
