#include "apaudit/retrieval.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "apaudit/digest.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"

namespace apaudit {

using nlohmann::json;

std::string_view to_string(RuleTarget t) noexcept {
  switch (t) {
    case RuleTarget::Call: return "call";
    case RuleTarget::BinaryOp: return "binary_op";
    case RuleTarget::Declaration: return "declaration";
    case RuleTarget::Parameter: return "parameter";
    case RuleTarget::Allocation: return "allocation";
    case RuleTarget::IndexAccess: return "index_access";
  }
  return "call";
}

std::string_view to_string(SeedKind k) noexcept {
  return k == SeedKind::FaultyValue ? "faulty_value" : "dangerous_operand";
}

std::string_view to_string(Direction d) noexcept { return d == Direction::Forward ? "forward" : "backward"; }

RuleTarget parse_rule_target(std::string_view s) {
  for (RuleTarget t : {RuleTarget::Call, RuleTarget::BinaryOp, RuleTarget::Declaration, RuleTarget::Parameter,
                       RuleTarget::Allocation, RuleTarget::IndexAccess}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown rule target '" + std::string(s) + "'");
}

SeedKind parse_seed_kind(std::string_view s) {
  if (s == "faulty_value") return SeedKind::FaultyValue;
  if (s == "dangerous_operand") return SeedKind::DangerousOperand;
  throw ConfigError("unknown seed kind '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  if (s == "forward") return Direction::Forward;
  if (s == "backward") return Direction::Backward;
  throw ConfigError("unknown direction '" + std::string(s) + "'");
}

Capture Capture::parse(std::string_view s) {
  Capture c;
  if (s == "lhs") {
    c.kind = CaptureKind::Lhs;
  } else if (s == "rhs") {
    c.kind = CaptureKind::Rhs;
  } else if (s == "declared_ident") {
    c.kind = CaptureKind::DeclaredIdent;
  } else if (s == "base") {
    c.kind = CaptureKind::Base;
  } else if (s == "index") {
    c.kind = CaptureKind::Index;
  } else if (s.starts_with("arg(") && s.ends_with(")") && s.size() > 5) {
    c.kind = CaptureKind::Arg;
    const std::string_view num = s.substr(4, s.size() - 5);
    if (!std::all_of(num.begin(), num.end(), [](char ch) { return ch >= '0' && ch <= '9'; }) || num.size() > 3) {
      throw ConfigError("bad capture '" + std::string(s) + "'");
    }
    c.arg = std::stoi(std::string(num));
  } else {
    throw ConfigError("unknown capture '" + std::string(s) + "'");
  }
  return c;
}

std::string Capture::str() const {
  switch (kind) {
    case CaptureKind::Arg: return "arg(" + std::to_string(arg) + ")";
    case CaptureKind::Lhs: return "lhs";
    case CaptureKind::Rhs: return "rhs";
    case CaptureKind::DeclaredIdent: return "declared_ident";
    case CaptureKind::Base: return "base";
    case CaptureKind::Index: return "index";
  }
  return "lhs";
}

std::string MatcherRule::legality_error() const {
  const CaptureKind k = capture.kind;
  bool ok = false;
  switch (target) {
    case RuleTarget::Call:
    case RuleTarget::Allocation: ok = k == CaptureKind::Arg || k == CaptureKind::Lhs; break;
    case RuleTarget::BinaryOp: ok = k == CaptureKind::Lhs || k == CaptureKind::Rhs; break;
    case RuleTarget::Declaration:
    case RuleTarget::Parameter: ok = k == CaptureKind::DeclaredIdent; break;
    case RuleTarget::IndexAccess: ok = k == CaptureKind::Base || k == CaptureKind::Index; break;
  }
  if (ok) return {};
  return "capture " + capture.str() + " is not legal for target " + std::string(to_string(target));
}

std::string RetrievalStrategy::validation_error() const {
  if (extractor.rules.empty()) return "extractor has no rules";
  const SeedKind expected = direction == Direction::Forward ? SeedKind::FaultyValue : SeedKind::DangerousOperand;
  for (std::size_t i = 0; i < extractor.rules.size(); ++i) {
    const auto& r = extractor.rules[i];
    if (auto err = r.legality_error(); !err.empty()) return "rule " + std::to_string(i) + ": " + err;
    if (r.seed_kind != expected) {
      return "rule " + std::to_string(i) + ": seed_kind " + std::string(to_string(r.seed_kind)) +
             " contradicts direction " + std::string(to_string(direction));
    }
    if (r.op && r.op->empty()) return "rule " + std::to_string(i) + ": empty operator";
    if (r.name_pattern && r.name_pattern->empty()) return "rule " + std::to_string(i) + ": empty name_pattern";
  }
  return {};
}

void RetrievalStrategy::validate() const {
  if (auto err = validation_error(); !err.empty()) throw ConfigError("invalid retrieval strategy: " + err);
}

std::string RetrievalStrategy::digest() const { return sha256_hex(to_json(*this).dump()); }

namespace {

json rule_to_json(const MatcherRule& r) {
  json j = {{"target", to_string(r.target)}, {"capture", r.capture.str()}, {"seed_kind", to_string(r.seed_kind)}};
  if (r.name_pattern) j["name_pattern"] = *r.name_pattern;
  if (r.op) j["operator"] = *r.op;
  return j;
}

MatcherRule rule_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("rule must be an object");
  static const std::set<std::string> known = {"target", "capture", "seed_kind", "name_pattern", "operator"};
  for (const auto& [k, _] : j.items()) {
    if (known.count(k) == 0) throw ConfigError("unknown rule field '" + k + "'");
  }
  MatcherRule r;
  auto str = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j.at(key).is_string()) throw ConfigError(std::string("rule field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
  };
  r.target = parse_rule_target(str("target"));
  r.capture = Capture::parse(str("capture"));
  r.seed_kind = parse_seed_kind(str("seed_kind"));
  if (j.contains("name_pattern") && !j.at("name_pattern").is_null()) r.name_pattern = str("name_pattern");
  if (j.contains("operator") && !j.at("operator").is_null()) r.op = str("operator");
  return r;
}

}  // namespace

json to_json(const RetrievalStrategy& s) {
  json rules = json::array();
  for (const auto& r : s.extractor.rules) rules.push_back(rule_to_json(r));
  return {{"schema", "apaudit.strategy/1"},
          {"anti_pattern", s.anti_pattern},
          {"direction", to_string(s.direction)},
          {"extractor", {{"rules", rules}}},
          {"provenance", s.provenance}};
}

RetrievalStrategy strategy_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("strategy must be a JSON object");
  if (j.value("schema", "") != "apaudit.strategy/1") throw ConfigError("unsupported strategy schema");
  RetrievalStrategy s;
  try {
    s.anti_pattern = j.at("anti_pattern").get<std::string>();
    s.direction = parse_direction(j.at("direction").get<std::string>());
    for (const auto& r : j.at("extractor").at("rules")) s.extractor.rules.push_back(rule_from_json(r));
    s.provenance = j.value("provenance", "");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed strategy: ") + e.what());
  }
  s.validate();
  return s;
}

json to_json(const Seed& s) {
  return {{"function", s.function_id},
          {"statement", s.statement},
          {"captured_ident", s.captured_ident},
          {"operand_idents", s.operand_idents},
          {"seed_kind", to_string(s.seed_kind)},
          {"rule_index", s.rule_index},
          {"file", s.file},
          {"line", s.line}};
}

Seed seed_from_json(const json& j) {
  Seed s;
  s.function_id = j.at("function").get<std::string>();
  s.statement = j.at("statement").get<std::size_t>();
  s.captured_ident = j.at("captured_ident").get<std::string>();
  s.operand_idents = j.at("operand_idents").get<std::vector<std::string>>();
  s.seed_kind = parse_seed_kind(j.at("seed_kind").get<std::string>());
  s.rule_index = j.at("rule_index").get<std::size_t>();
  s.file = j.at("file").get<std::string>();
  s.line = j.at("line").get<int>();
  return s;
}

namespace {

/// '|' separates alternatives, so the bitwise-or operator can only be given alone.
bool op_matches(const std::optional<std::string>& pattern, const std::string& op) {
  if (!pattern) return true;
  if (*pattern == "|" || *pattern == "||") return op == *pattern;
  std::string_view p = *pattern;
  std::size_t pos = 0;
  while (pos <= p.size()) {
    std::size_t bar = p.find('|', pos);
    if (bar == std::string_view::npos) bar = p.size();
    if (bar > pos && p.substr(pos, bar - pos) == op) return true;
    pos = bar + 1;
  }
  return false;
}

void emit(std::vector<Seed>& out, const FunctionRecord& fn, const StatementNode& st, const MatcherRule& rule,
          std::size_t rule_index, const std::vector<std::string>& operand, bool filter_ident) {
  if (operand.empty()) return;
  std::string captured;
  if (filter_ident && rule.name_pattern) {
    for (const auto& id : operand) {
      if (glob_match(*rule.name_pattern, id)) {
        captured = id;
        break;
      }
    }
    if (captured.empty()) return;
  } else {
    captured = operand.front();
  }
  Seed s;
  s.function_id = fn.id;
  s.statement = st.id;
  s.captured_ident = captured;
  s.operand_idents = operand;
  s.seed_kind = rule.seed_kind;
  s.rule_index = rule_index;
  s.file = fn.file;
  s.line = st.span.start;
  out.push_back(std::move(s));
}

}  // namespace

std::vector<Seed> match_rule(const FunctionRecord& fn, const StatementNode& st, const MatcherRule& rule,
                             std::size_t rule_index) {
  std::vector<Seed> out;
  switch (rule.target) {
    case RuleTarget::Call:
    case RuleTarget::Allocation: {
      if (st.id == 0) break;
      const std::string pattern = rule.name_pattern ? *rule.name_pattern
                                  : rule.target == RuleTarget::Allocation ? std::string(kDefaultAllocators)
                                                                          : std::string("*");
      for (const auto& call : st.calls) {
        if (!glob_match(pattern, call.callee)) continue;
        if (rule.capture.kind == CaptureKind::Lhs) {
          if (call.result_target) emit(out, fn, st, rule, rule_index, {*call.result_target}, false);
        } else if (static_cast<std::size_t>(rule.capture.arg) < call.arg_idents.size()) {
          emit(out, fn, st, rule, rule_index, call.arg_idents[static_cast<std::size_t>(rule.capture.arg)], false);
        }
      }
      break;
    }
    case RuleTarget::BinaryOp:
      if (st.id == 0) break;
      for (const auto& b : st.binary_ops) {
        if (!op_matches(rule.op, b.op)) continue;
        emit(out, fn, st, rule, rule_index, rule.capture.kind == CaptureKind::Lhs ? b.lhs_idents : b.rhs_idents, true);
      }
      break;
    case RuleTarget::Declaration:
      if (st.id == 0 || st.kind != StatementKind::Decl) break;
      for (const auto& d : st.declared) emit(out, fn, st, rule, rule_index, {d}, true);
      break;
    case RuleTarget::Parameter:
      if (st.id != 0) break;
      for (const auto& p : fn.params) emit(out, fn, st, rule, rule_index, {p.name}, true);
      break;
    case RuleTarget::IndexAccess:
      if (st.id == 0) break;
      for (const auto& ia : st.index_accesses) {
        emit(out, fn, st, rule, rule_index, rule.capture.kind == CaptureKind::Base ? ia.base_idents : ia.index_idents,
             true);
      }
      break;
  }
  return out;
}

std::uint64_t default_rng_seed(const RetrievalStrategy& strategy, const CodeIndex& index) {
  return digest_prefix_u64(sha256_hex(strategy.digest() + index.digest()));
}

namespace {

bool in_scope(const SeedScope& scope, const std::string& path) {
  if (scope.file_globs.empty()) return true;
  return std::any_of(scope.file_globs.begin(), scope.file_globs.end(),
                     [&](const std::string& g) { return glob_match(g, path); });
}

std::vector<Seed> match_function(const FunctionRecord& fn, const RetrievalStrategy& strategy) {
  std::vector<Seed> out;
  std::set<std::pair<std::size_t, std::string>> seen;
  for (const auto& st : fn.statements) {
    for (std::size_t r = 0; r < strategy.extractor.rules.size(); ++r) {
      for (auto& s : match_rule(fn, st, strategy.extractor.rules[r], r)) {
        if (seen.emplace(s.statement, s.captured_ident).second) out.push_back(std::move(s));
      }
    }
  }
  return out;
}

/// Functions grouped by file, in path order; the index stores them contiguously.
std::vector<std::vector<const FunctionRecord*>> functions_by_file(const CodeIndex& index, const SeedScope& scope) {
  std::vector<std::vector<const FunctionRecord*>> groups;
  std::string current;
  for (const auto& fn : index.functions()) {
    if (!in_scope(scope, fn.file)) continue;
    if (groups.empty() || fn.file != current) {
      groups.emplace_back();
      current = fn.file;
    }
    groups.back().push_back(&fn);
  }
  return groups;
}

ExtractionResult finish(std::vector<Seed> all, const CodeIndex& index, const RetrievalStrategy& strategy,
                        std::size_t cap, std::optional<std::uint64_t> rng_seed) {
  std::sort(all.begin(), all.end(), [](const Seed& a, const Seed& b) {
    return std::tie(a.file, a.line, a.function_id, a.statement, a.rule_index, a.captured_ident) <
           std::tie(b.file, b.line, b.function_id, b.statement, b.rule_index, b.captured_ident);
  });
  ExtractionResult res;
  res.total_matches = all.size();
  res.rng_seed = rng_seed ? *rng_seed : default_rng_seed(strategy, index);
  if (all.size() > cap) {
    std::mt19937_64 rng(res.rng_seed);
    res.seeds.reserve(cap);
    std::sample(all.begin(), all.end(), std::back_inserter(res.seeds), cap, rng);
    res.sampled = true;
  } else {
    res.seeds = std::move(all);
  }
  return res;
}

void check_cap(std::size_t cap) {
  if (cap < 1) throw ContractError("seed cap must be at least 1");
}

}  // namespace

ExtractionResult extract_seeds(const CodeIndex& index, const RetrievalStrategy& strategy, const SeedScope& scope,
                               std::size_t cap, std::optional<std::uint64_t> rng_seed) {
  check_cap(cap);
  const auto groups = functions_by_file(index, scope);
  std::vector<std::vector<Seed>> per_file(groups.size());
  const auto n = static_cast<std::ptrdiff_t>(groups.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    for (const FunctionRecord* fn : groups[k]) {
      auto seeds = match_function(*fn, strategy);
      per_file[k].insert(per_file[k].end(), std::make_move_iterator(seeds.begin()),
                         std::make_move_iterator(seeds.end()));
    }
  }
  std::vector<Seed> all;
  for (auto& v : per_file) all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  return finish(std::move(all), index, strategy, cap, rng_seed);
}

ExtractionResult extract_seeds_serial(const CodeIndex& index, const RetrievalStrategy& strategy,
                                      const SeedScope& scope, std::size_t cap,
                                      std::optional<std::uint64_t> rng_seed) {
  check_cap(cap);
  std::vector<Seed> all;
  for (const auto& fn : index.functions()) {
    if (!in_scope(scope, fn.file)) continue;
    auto seeds = match_function(fn, strategy);
    all.insert(all.end(), std::make_move_iterator(seeds.begin()), std::make_move_iterator(seeds.end()));
  }
  return finish(std::move(all), index, strategy, cap, rng_seed);
}

namespace {

std::string numbered(const std::string& code) {
  std::ostringstream out;
  std::istringstream in(code);
  std::string line;
  int n = 1;
  while (std::getline(in, line)) out << n++ << ": " << line << '\n';
  return out.str();
}

constexpr std::string_view kStrategySystem =
    "You are a static-analysis expert. You design seed extractors for a program slicer "
    "that audits C/C++ code for one bug anti-pattern. Reply with a single JSON object and nothing else.";

constexpr std::string_view kRuleSchema = R"RULES(Seed extractor rules use this JSON schema:
{
  "direction": "forward" | "backward",
  "rules": [
    {
      "target": "call" | "allocation" | "binary_op" | "declaration" | "parameter" | "index_access",
      "name_pattern": optional glob over the callee (call, allocation) or the captured identifier (others); '|' separates alternatives,
      "operator": optional operator token for binary_op, '|' separates alternatives (e.g. "/|%"),
      "capture": "arg(k)" (0-based, call/allocation) | "lhs" (call/allocation result, binary_op left) | "rhs" (binary_op right)
                 | "declared_ident" (declaration, parameter) | "base" | "index" (index_access),
      "seed_kind": "faulty_value" | "dangerous_operand"
    }
  ],
  "rationale": short text
}
Use direction "forward" with seed_kind "faulty_value" when the bug starts at a value that later misbehaves
(for example an allocation that must be released). Use direction "backward" with seed_kind "dangerous_operand"
when the bug shows at an operand that must not receive a bad value (for example a divisor or an array index).
Every rule must use the seed_kind that matches the direction.)RULES";

}  // namespace

std::string retrieval_synthesis_prompt(const AntiPatternSpec& spec) {
  std::ostringstream p;
  p << "Anti-pattern: " << spec.name << " (bug type " << to_string(spec.bug_type) << ")\n";
  if (!spec.description.empty()) p << "Description: " << spec.description << "\n";
  p << "\n" << kRuleSchema << "\n\n";
  const auto examples = spec.ordered_examples();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const CodeExample& e = *examples[i];
    p << "Example " << (i + 1) << " [" << (e.buggy ? "buggy" : "non-buggy") << "]";
    if (!e.bug_lines.empty()) {
      p << " bug lines:";
      for (int l : e.bug_lines) p << ' ' << l;
    }
    p << "\n```c\n" << numbered(e.code) << "```\n\n";
  }
  p << "Produce rules whose seeds cover the bug-relevant statement of every buggy example. "
       "Keep the rule set small.";
  return p.str();
}

RetrievalStrategy synthesize_retrieval_strategy(const AntiPatternSpec& spec, Gateway& llm,
                                                const SynthesisOptions& options) {
  spec.validate();
  LlmRequest req;
  req.model_id = options.model_id;
  req.stage = "synthesize_strategy";
  req.anti_pattern = spec.name;
  req.messages = {{"system", std::string(kStrategySystem)}, {"user", retrieval_synthesis_prompt(spec)}};
  std::vector<std::string> raw;
  for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
    const LlmExchange ex = llm.complete(req);
    raw.push_back(ex.response.text);
    std::string error;
    const auto j = extract_json_object(ex.response.text);
    if (!j) {
      error = "the reply did not contain a JSON object";
    } else {
      try {
        RetrievalStrategy s;
        s.anti_pattern = spec.name;
        if (!j->contains("direction") || !j->at("direction").is_string()) {
          throw ConfigError("missing string field 'direction'");
        }
        s.direction = parse_direction(j->at("direction").get<std::string>());
        if (!j->contains("rules") || !j->at("rules").is_array()) throw ConfigError("missing array field 'rules'");
        for (const auto& r : j->at("rules")) s.extractor.rules.push_back(rule_from_json(r));
        error = s.validation_error();
        if (error.empty()) {
          s.provenance = ex.request_digest;
          return s;
        }
      } catch (const ConfigError& e) {
        error = e.what();
      }
    }
    req.messages.push_back({"assistant", ex.response.text});
    req.messages.push_back({"user", "The reply violates the rule schema: " + error +
                                        ". Reply again with one corrected JSON object."});
  }
  throw SynthesisError("retrieval strategy synthesis for " + spec.name + " failed after " +
                           std::to_string(options.max_attempts) + " schema violations",
                       std::move(raw));
}

}  // namespace apaudit
