#include "apaudit/prompt_synth.hpp"

#include <fstream>
#include <sstream>

#include "apaudit/digest.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"

namespace apaudit {

using nlohmann::json;

namespace {

constexpr std::string_view kPrimitiveHint =
    "Primitive values (integers, floats, sizes, lengths, counters): work out the range of values each one can "
    "hold on every path that reaches the risky operation, and the ordering between related values. Note which "
    "checks constrain a value and whether a check still admits a boundary case such as zero, a negative number "
    "or a result that wrapped around during arithmetic.";

constexpr std::string_view kPointerHint =
    "Pointer values: track aliasing. When a risky operation involves a pointer p, find every other pointer that "
    "refers to the same memory as p (copies, struct fields, out-parameters, return values) and take the memory "
    "operations performed through all of them into account, including frees, reassignments and null checks.";

constexpr std::string_view kBufferHint =
    "Buffer values: reason about the range of offsets used to access a buffer together with the aliases of its "
    "base pointer. Relate every index, pointer increment and length argument to the size the buffer was "
    "allocated or declared with, including offsets that can become negative and sizes computed with overflow.";

constexpr std::string_view kOutputSchema = R"SCHEMA(Reply with exactly one JSON object and nothing else:
{
  "verdict": "bug" | "no_bug",
  "path": [
    {"origin": "<file>:<line> copied from an origin comment of the context", "description": "what happens at this step"}
  ],
  "explanation": "why the path is an instance of the anti-pattern"
}
List the path steps in execution order, from the origin of the faulty value to the statement where the bug manifests.
Use "no_bug" with an empty path when the context does not contain the anti-pattern.)SCHEMA";

constexpr std::string_view kSynthSystem =
    "You are a senior code auditor. You study labeled examples of one bug anti-pattern and write guidance that "
    "lets another auditor recognize it. Reply with a single JSON object and nothing else.";

constexpr std::string_view kReflectSystem =
    "You review bug-detection prompts. You check whether a prompt would lead an auditor to classify each "
    "labeled example correctly and repair it when it would not. Reply with a single JSON object and nothing else.";

std::string hint_file(HintCategory c) { return std::string(to_string(c)) + ".txt"; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void append_examples(std::ostringstream& p, const AntiPatternSpec& spec) {
  const auto examples = spec.ordered_examples();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const CodeExample& e = *examples[i];
    p << "Example " << (i + 1) << " [" << (e.buggy ? "buggy" : "non-buggy") << "] " << e.name;
    if (e.buggy && !e.bug_lines.empty()) {
      p << " bug lines:";
      for (int l : e.bug_lines) p << ' ' << l;
    }
    p << "\n```c\n" << e.code;
    if (!e.code.empty() && e.code.back() != '\n') p << '\n';
    p << "```\n\n";
  }
}

struct Annotated {
  std::string summary;
  std::vector<std::string> reasoning;  // one per example, prompt order
};

/// Validates {semantics_summary, annotations:[{example, reasoning}]} against n examples.
/// Returns an error message, empty on success.
std::string parse_annotated(const json& j, std::size_t n, bool annotations_optional, Annotated& out) {
  if (!j.contains("semantics_summary") || !j.at("semantics_summary").is_string() ||
      trim(j.at("semantics_summary").get<std::string>()).empty()) {
    return "missing non-empty string field 'semantics_summary'";
  }
  out.summary = trim(j.at("semantics_summary").get<std::string>());
  if (!j.contains("annotations") || j.at("annotations").is_null()) {
    return annotations_optional ? "" : "missing array field 'annotations'";
  }
  if (!j.at("annotations").is_array()) return "'annotations' must be an array";
  std::vector<std::string> r(n);
  for (const auto& a : j.at("annotations")) {
    if (!a.is_object() || !a.contains("example") || !a.at("example").is_number_integer() ||
        !a.contains("reasoning") || !a.at("reasoning").is_string()) {
      return "each annotation needs an integer 'example' and a string 'reasoning'";
    }
    const auto k = a.at("example").get<long long>();
    if (k < 1 || static_cast<std::size_t>(k) > n) return "annotation refers to unknown example " + std::to_string(k);
    if (!r[static_cast<std::size_t>(k - 1)].empty()) return "example " + std::to_string(k) + " annotated twice";
    r[static_cast<std::size_t>(k - 1)] = trim(a.at("reasoning").get<std::string>());
    if (r[static_cast<std::size_t>(k - 1)].empty()) return "empty reasoning for example " + std::to_string(k);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i].empty()) return "example " + std::to_string(i + 1) + " has no annotation";
  }
  out.reasoning = std::move(r);
  return {};
}

/// Sends req, re-prompting with the violation until `accept` returns an empty error.
template <typename Accept>
std::optional<LlmExchange> converse(Gateway& llm, LlmRequest req, int max_attempts, Accept accept,
                                    std::vector<std::string>& raw, std::string& last_error) {
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    LlmExchange ex = llm.complete(req);
    raw.push_back(ex.response.text);
    const auto j = extract_json_object(ex.response.text);
    last_error = j ? accept(*j) : "the reply did not contain a JSON object";
    if (last_error.empty()) return ex;
    req.messages.push_back({"assistant", ex.response.text});
    req.messages.push_back({"user", "The reply violates the requested format: " + last_error +
                                        ". Reply again with one corrected JSON object."});
  }
  return std::nullopt;
}

json hints_to_json(const ReasoningHintSet& h) {
  json enabled = json::array();
  for (HintCategory c : h.enabled) enabled.push_back(to_string(c));
  return {{"enabled", enabled}, {"primitive", h.primitive_hint}, {"pointer", h.pointer_hint}, {"buffer", h.buffer_hint}};
}

}  // namespace

std::string_view to_string(HintCategory c) noexcept {
  switch (c) {
    case HintCategory::Primitive: return "primitive";
    case HintCategory::Pointer: return "pointer";
    case HintCategory::Buffer: return "buffer";
  }
  return "primitive";
}

HintCategory parse_hint_category(std::string_view s) {
  if (s == "primitive") return HintCategory::Primitive;
  if (s == "pointer") return HintCategory::Pointer;
  if (s == "buffer") return HintCategory::Buffer;
  throw ConfigError("unknown hint category '" + std::string(s) + "'");
}

ReasoningHintSet ReasoningHintSet::defaults() {
  return {std::string(kPrimitiveHint), std::string(kPointerHint), std::string(kBufferHint),
          {HintCategory::Primitive, HintCategory::Pointer, HintCategory::Buffer}};
}

ReasoningHintSet ReasoningHintSet::from_directory(const std::filesystem::path& dir, std::set<HintCategory> enabled) {
  ReasoningHintSet h = defaults();
  h.enabled = std::move(enabled);
  for (HintCategory c : {HintCategory::Primitive, HintCategory::Pointer, HintCategory::Buffer}) {
    const auto p = dir / hint_file(c);
    if (!std::filesystem::exists(p)) continue;
    std::string text = trim(read_file(p));
    switch (c) {
      case HintCategory::Primitive: h.primitive_hint = std::move(text); break;
      case HintCategory::Pointer: h.pointer_hint = std::move(text); break;
      case HintCategory::Buffer: h.buffer_hint = std::move(text); break;
    }
  }
  h.validate();
  return h;
}

const std::string& ReasoningHintSet::text(HintCategory c) const {
  switch (c) {
    case HintCategory::Primitive: return primitive_hint;
    case HintCategory::Pointer: return pointer_hint;
    case HintCategory::Buffer: return buffer_hint;
  }
  return primitive_hint;
}

void ReasoningHintSet::validate() const {
  if (enabled.empty()) throw ConfigError("at least one reasoning hint category must be enabled");
  for (HintCategory c : enabled) {
    if (trim(text(c)).empty()) throw ConfigError("enabled hint '" + std::string(to_string(c)) + "' is empty");
  }
}

std::string_view detection_output_schema() { return kOutputSchema; }

std::string DetectionPrompt::assemble() const {
  std::ostringstream p;
  p << "You are a code auditor searching C/C++ code for one bug anti-pattern: " << anti_pattern << " (bug type "
    << to_string(bug_type) << ").\n\n";
  p << "## Anti-pattern semantics\n" << semantics_summary << "\n\n";
  p << "## Reasoning hints\n";
  for (HintCategory c : hints.enabled) p << "- " << hints.text(c) << "\n";
  p << "\n## Labeled examples\n";
  for (std::size_t i = 0; i < few_shot_blocks.size(); ++i) {
    const FewShotBlock& b = few_shot_blocks[i];
    p << "### Example " << (i + 1) << " [" << (b.buggy ? "buggy" : "non-buggy") << "]";
    if (b.buggy && !b.bug_lines.empty()) {
      p << " bug lines:";
      for (int l : b.bug_lines) p << ' ' << l;
    }
    p << "\n```c\n" << b.code;
    if (!b.code.empty() && b.code.back() != '\n') p << '\n';
    p << "```\nReasoning: " << b.reasoning << "\n\n";
  }
  p << "## Task\nThe user message holds a detection context: a slice of the program inlined into one function. "
       "Every original line carries an origin comment with its file and line, and the statement the slice "
       "started from is marked with a seed comment. Decide whether the context contains an instance of the "
       "anti-pattern.\n\n";
  p << "## Output format\n" << output_schema << "\n";
  return p.str();
}

std::string DetectionPrompt::content_digest() const { return sha256_hex(assemble()); }

void DetectionPrompt::validate() const {
  if (anti_pattern.empty()) throw ConfigError("prompt has no anti-pattern name");
  if (semantics_summary.empty()) throw ConfigError("prompt has no semantics summary");
  if (few_shot_blocks.empty()) throw ConfigError("prompt has no examples");
  if (output_schema != detection_output_schema()) throw ConfigError("prompt output schema does not match this build");
  hints.validate();
}

json to_json(const DetectionPrompt& p) {
  json blocks = json::array();
  for (const auto& b : p.few_shot_blocks) {
    blocks.push_back({{"name", b.name},
                      {"label", b.buggy ? "buggy" : "nonbuggy"},
                      {"bug_lines", b.bug_lines},
                      {"code", b.code},
                      {"reasoning", b.reasoning}});
  }
  json log = json::array();
  for (const auto& r : p.reflection_log) {
    log.push_back({{"draft_digest", r.draft_digest},
                   {"critique", r.critique},
                   {"revision_digest", r.revision_digest},
                   {"mislabeled", r.mislabeled}});
  }
  return {{"schema", "apaudit.prompt/1"},
          {"anti_pattern", p.anti_pattern},
          {"bug_type", to_string(p.bug_type)},
          {"semantics_summary", p.semantics_summary},
          {"few_shot_blocks", blocks},
          {"hints", hints_to_json(p.hints)},
          {"output_schema", p.output_schema},
          {"reflection_log", log},
          {"provenance", p.provenance},
          {"content_digest", p.content_digest()}};
}

DetectionPrompt prompt_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != "apaudit.prompt/1") throw ConfigError("unsupported prompt schema");
  DetectionPrompt p;
  try {
    p.anti_pattern = j.at("anti_pattern").get<std::string>();
    p.bug_type = parse_bug_type(j.at("bug_type").get<std::string>());
    p.semantics_summary = j.at("semantics_summary").get<std::string>();
    for (const auto& b : j.at("few_shot_blocks")) {
      const std::string label = b.at("label").get<std::string>();
      if (label != "buggy" && label != "nonbuggy") throw ConfigError("bad example label '" + label + "'");
      p.few_shot_blocks.push_back({b.at("name").get<std::string>(), label == "buggy",
                                   b.at("bug_lines").get<std::vector<int>>(), b.at("code").get<std::string>(),
                                   b.at("reasoning").get<std::string>()});
    }
    const json& h = j.at("hints");
    p.hints.primitive_hint = h.at("primitive").get<std::string>();
    p.hints.pointer_hint = h.at("pointer").get<std::string>();
    p.hints.buffer_hint = h.at("buffer").get<std::string>();
    for (const auto& c : h.at("enabled")) p.hints.enabled.insert(parse_hint_category(c.get<std::string>()));
    p.output_schema = j.at("output_schema").get<std::string>();
    for (const auto& r : j.at("reflection_log")) {
      p.reflection_log.push_back({r.at("draft_digest").get<std::string>(), r.at("critique").get<std::string>(),
                                  r.at("revision_digest").get<std::string>(), r.value("mislabeled", 0)});
    }
    p.provenance = j.value("provenance", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed prompt: ") + e.what());
  }
  p.validate();
  if (j.contains("content_digest") && j.at("content_digest") != p.content_digest()) {
    throw ConfigError("prompt content digest mismatch; the file was edited or produced by another build");
  }
  return p;
}

std::string prompt_synthesis_request(const AntiPatternSpec& spec) {
  std::ostringstream p;
  p << "Anti-pattern: " << spec.name << " (bug type " << to_string(spec.bug_type) << ")\n";
  if (!spec.description.empty()) p << "Description: " << spec.description << "\n";
  p << "\n";
  append_examples(p, spec);
  p << "Write guidance for detecting this anti-pattern.\n"
       "1. semantics_summary: the low-level program semantics that make code an instance of the anti-pattern, "
       "stated in terms of values, operations and the checks that are missing or insufficient. Also say what "
       "distinguishes the non-buggy examples.\n"
       "2. annotations: for every example, the step-by-step reasoning an auditor follows to reach its label.\n\n"
       "Reply with one JSON object:\n"
       "{\"semantics_summary\": \"...\", \"annotations\": [{\"example\": 1, \"reasoning\": \"...\"}]}\n";
  return p.str();
}

DetectionPrompt synthesize_detection_prompt(const AntiPatternSpec& spec, const ReasoningHintSet& hints, Gateway& llm,
                                            const PromptSynthOptions& options) {
  spec.validate();
  hints.validate();
  const auto examples = spec.ordered_examples();
  LlmRequest req;
  req.model_id = options.model_id;
  req.stage = "synthesize_prompt";
  req.anti_pattern = spec.name;
  req.messages = {{"system", std::string(kSynthSystem)}, {"user", prompt_synthesis_request(spec)}};

  Annotated parsed;
  std::vector<std::string> raw;
  std::string error;
  const auto ex = converse(
      llm, req, options.max_attempts,
      [&](const json& j) { return parse_annotated(j, examples.size(), false, parsed); }, raw, error);
  if (!ex) {
    throw SynthesisError("detection prompt synthesis for " + spec.name + " failed: " + error, std::move(raw));
  }

  DetectionPrompt p;
  p.anti_pattern = spec.name;
  p.bug_type = spec.bug_type;
  p.semantics_summary = parsed.summary;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const CodeExample& e = *examples[i];
    p.few_shot_blocks.push_back({e.name, e.buggy, e.bug_lines, e.code, parsed.reasoning[i]});
  }
  p.hints = hints;
  p.output_schema = std::string(kOutputSchema);
  p.provenance.push_back(ex->request_digest);
  return p;
}

std::string reflection_request(const DetectionPrompt& draft, const AntiPatternSpec& spec) {
  std::ostringstream p;
  p << "Below is a draft detection prompt for the anti-pattern " << spec.name
    << ", followed by the labeled examples it was written from.\n\n"
    << "=== DRAFT PROMPT ===\n"
    << draft.assemble() << "=== END DRAFT PROMPT ===\n\n";
  append_examples(p, spec);
  p << "For every example, decide how an auditor who follows only the draft's semantics summary and reasoning "
       "would classify it. Then critique the draft. If any example would be misclassified, or the summary is "
       "vague or wrong, provide a revision; otherwise set revision to null.\n\n"
       "Reply with one JSON object:\n"
       "{\"self_check\": [{\"example\": 1, \"predicted\": \"buggy\" | \"non-buggy\"}], \"critique\": \"...\", "
       "\"revision\": null | {\"semantics_summary\": \"...\", \"annotations\": [{\"example\": 1, \"reasoning\": "
       "\"...\"}]}}\n";
  return p.str();
}

RefineResult reflect_and_refine(const DetectionPrompt& draft, const AntiPatternSpec& spec, Gateway& llm,
                                const RefineOptions& options) {
  RefineResult out{draft, {}};
  if (!options.enabled || options.rounds <= 0) return out;
  const auto examples = spec.ordered_examples();
  if (examples.size() != draft.few_shot_blocks.size()) {
    out.warnings.push_back("reflection skipped: the draft and the spec disagree on the examples");
    return out;
  }

  DetectionPrompt current = draft;
  for (int round = 1; round <= options.rounds; ++round) {
    LlmRequest req;
    req.model_id = options.model_id;
    req.stage = "reflect_prompt";
    req.anti_pattern = spec.name;
    req.messages = {{"system", std::string(kReflectSystem)}, {"user", reflection_request(current, spec)}};

    int mislabeled = 0;
    std::string critique;
    std::optional<Annotated> revision;
    auto accept = [&](const json& j) -> std::string {
      mislabeled = 0;
      revision.reset();
      if (!j.contains("self_check") || !j.at("self_check").is_array()) return "missing array field 'self_check'";
      for (const auto& s : j.at("self_check")) {
        if (!s.is_object() || !s.contains("example") || !s.at("example").is_number_integer() ||
            !s.contains("predicted") || !s.at("predicted").is_string()) {
          return "each self_check entry needs an integer 'example' and a string 'predicted'";
        }
        const auto k = s.at("example").get<long long>();
        if (k < 1 || static_cast<std::size_t>(k) > examples.size()) {
          return "self_check refers to unknown example " + std::to_string(k);
        }
        const std::string pred = s.at("predicted").get<std::string>();
        if (pred != "buggy" && pred != "non-buggy") return "predicted must be 'buggy' or 'non-buggy'";
        if ((pred == "buggy") != examples[static_cast<std::size_t>(k - 1)]->buggy) ++mislabeled;
      }
      if (!j.contains("critique") || !j.at("critique").is_string()) return "missing string field 'critique'";
      critique = trim(j.at("critique").get<std::string>());
      if (!j.contains("revision") || j.at("revision").is_null()) return {};
      if (!j.at("revision").is_object()) return "'revision' must be an object or null";
      Annotated a;
      if (auto err = parse_annotated(j.at("revision"), examples.size(), true, a); !err.empty()) {
        return "revision: " + err;
      }
      revision = std::move(a);
      return {};
    };

    std::vector<std::string> raw;
    std::string error;
    std::optional<LlmExchange> ex;
    try {
      ex = converse(llm, req, options.max_attempts, accept, raw, error);
    } catch (const GatewayError& e) {
      out.warnings.push_back("reflection round " + std::to_string(round) + " failed: " + e.what() +
                             "; keeping the previous prompt");
      break;
    }
    if (!ex) {
      out.warnings.push_back("reflection round " + std::to_string(round) + " gave no usable reply: " + error +
                             "; keeping the previous prompt");
      break;
    }

    DetectionPrompt next = current;
    if (revision) {
      next.semantics_summary = revision->summary;
      if (!revision->reasoning.empty()) {
        for (std::size_t i = 0; i < next.few_shot_blocks.size(); ++i) {
          next.few_shot_blocks[i].reasoning = revision->reasoning[i];
        }
      }
    }
    const std::string before = current.content_digest();
    const std::string after = next.content_digest();
    next.reflection_log.push_back({before, critique, after, mislabeled});
    next.provenance.push_back(ex->request_digest);
    current = std::move(next);
    if (before == after) break;
  }
  out.prompt = std::move(current);
  return out;
}

}  // namespace apaudit
