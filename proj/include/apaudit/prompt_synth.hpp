#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apaudit/anti_pattern.hpp"

namespace apaudit {

class Gateway;

enum class HintCategory { Primitive, Pointer, Buffer };

std::string_view to_string(HintCategory c) noexcept;
HintCategory parse_hint_category(std::string_view s);

struct ReasoningHintSet {
  std::string primitive_hint;
  std::string pointer_hint;
  std::string buffer_hint;
  std::set<HintCategory> enabled;

  /// Built-in texts with every category enabled.
  static ReasoningHintSet defaults();
  /// Reads <dir>/{primitive,pointer,buffer}.txt; missing files keep the built-in text.
  static ReasoningHintSet from_directory(const std::filesystem::path& dir, std::set<HintCategory> enabled);

  const std::string& text(HintCategory c) const;
  /// Throws ConfigError when nothing is enabled or an enabled hint is blank.
  void validate() const;
  bool operator==(const ReasoningHintSet&) const = default;
};

struct FewShotBlock {
  std::string name;
  bool buggy = false;
  std::vector<int> bug_lines;
  std::string code;       // verbatim from the spec
  std::string reasoning;  // LLM-written annotation

  bool operator==(const FewShotBlock&) const = default;
};

struct ReflectionEntry {
  std::string draft_digest;
  std::string critique;
  std::string revision_digest;  // equals draft_digest when the round changed nothing
  int mislabeled = 0;           // examples the draft misclassified in the self-check

  bool operator==(const ReflectionEntry&) const = default;
};

struct DetectionPrompt {
  std::string anti_pattern;
  BugType bug_type = BugType::Custom;
  std::string semantics_summary;
  std::vector<FewShotBlock> few_shot_blocks;
  ReasoningHintSet hints;
  std::string output_schema;
  std::vector<ReflectionEntry> reflection_log;
  std::vector<std::string> provenance;  // request digests of accepted synthesis/reflection exchanges

  /// The system text sent to the detector.
  std::string assemble() const;
  /// SHA-256 of assemble().
  std::string content_digest() const;
  /// Throws ConfigError when fields required by the detector are missing.
  void validate() const;
  bool operator==(const DetectionPrompt&) const = default;
};

/// Fixed output contract of the detector; identical for every prompt.
std::string_view detection_output_schema();

nlohmann::json to_json(const DetectionPrompt& p);
/// Throws ConfigError on schema violations.
DetectionPrompt prompt_from_json(const nlohmann::json& j);

struct PromptSynthOptions {
  int max_attempts = 3;  // initial request plus two retries
  std::string model_id;
};

/// Asks for a semantics summary and per-example reasoning, then assembles the prompt
/// around the verbatim examples. Throws ConfigError for an invalid spec or hint set,
/// SynthesisError after max_attempts schema violations.
DetectionPrompt synthesize_detection_prompt(const AntiPatternSpec& spec, const ReasoningHintSet& hints, Gateway& llm,
                                            const PromptSynthOptions& options = {});

struct RefineOptions {
  bool enabled = true;
  int rounds = 1;  // stops early once a round changes nothing
  int max_attempts = 3;
  std::string model_id;
};

struct RefineResult {
  DetectionPrompt prompt;
  std::vector<std::string> warnings;
};

/// Best effort: any failure returns the draft unchanged with a warning.
RefineResult reflect_and_refine(const DetectionPrompt& draft, const AntiPatternSpec& spec, Gateway& llm,
                                const RefineOptions& options = {});

/// Request texts, exposed for fixture recording.
std::string prompt_synthesis_request(const AntiPatternSpec& spec);
std::string reflection_request(const DetectionPrompt& draft, const AntiPatternSpec& spec);

}  // namespace apaudit
