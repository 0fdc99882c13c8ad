#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"
#include "apaudit/retrieval.hpp"
#include "scripted_transport.hpp"

using namespace apaudit;
namespace fs = std::filesystem;

namespace {

MatcherRule rule(RuleTarget t, Capture c, SeedKind k, std::optional<std::string> name = std::nullopt,
                 std::optional<std::string> op = std::nullopt) {
  MatcherRule r;
  r.target = t;
  r.capture = c;
  r.seed_kind = k;
  r.name_pattern = std::move(name);
  r.op = std::move(op);
  return r;
}

RetrievalStrategy divisor_strategy() {
  RetrievalStrategy s;
  s.anti_pattern = "LZD";
  s.direction = Direction::Backward;
  s.extractor.rules = {rule(RuleTarget::BinaryOp, {CaptureKind::Rhs}, SeedKind::DangerousOperand, std::nullopt, "/|%")};
  return s;
}

std::string many_divisions(int n) {
  std::ostringstream out;
  out << "int f(int a, int b) {\n  int c = 0;\n";
  for (int i = 0; i < n; ++i) out << "  c = a / b;\n";
  out << "  return c;\n}\n";
  return out.str();
}

AntiPatternSpec lzd_spec() {
  AntiPatternSpec s;
  s.name = "LZD";
  s.bug_type = BugType::DBZ;
  s.description = "literal zero used as a divisor";
  s.buggy_examples = {{"b.c", "int f(void) {\n  int z = 0;\n  return 1 / z;\n}\n", true, {3}}};
  return s;
}

GatewayConfig live_config() {
  GatewayConfig c;
  c.mode = GatewayMode::Live;
  c.cassette_dir = fs::temp_directory_path() / "apaudit_retrieval_unused";
  c.retry.sleeper = [](std::chrono::milliseconds) {};
  return c;
}

const char* kGoodRules =
    R"J({"direction": "backward", "rules": [{"target": "binary_op", "operator": "/", "capture": "rhs", "seed_kind": "dangerous_operand"}], "rationale": "divisors"})J";

}  // namespace

TEST(Retrieval, DivisorRuleFindsOneSeed) {
  auto idx = index_sources({{"t.c", "void f(int a, int b) {\n  int c;\n  c = a / b;\n}\n"}});
  auto r = extract_seeds(idx, divisor_strategy(), {}, 100);
  ASSERT_EQ(r.seeds.size(), 1u);
  EXPECT_EQ(r.seeds[0].captured_ident, "b");
  EXPECT_EQ(r.seeds[0].line, 3);
  EXPECT_EQ(r.seeds[0].seed_kind, SeedKind::DangerousOperand);
  EXPECT_EQ(r.total_matches, 1u);
  EXPECT_FALSE(r.sampled);
}

TEST(Retrieval, NoMatchesGivesEmpty) {
  auto idx = index_sources({{"t.c", "int f(int a) {\n  return a + 1;\n}\n"}});
  auto r = extract_seeds(idx, divisor_strategy(), {}, 100);
  EXPECT_TRUE(r.seeds.empty());
  EXPECT_EQ(r.total_matches, 0u);
}

TEST(Retrieval, LiteralDivisorYieldsNoSeed) {
  auto idx = index_sources({{"t.c", "int f(int a) {\n  return a / 2;\n}\n"}});
  EXPECT_TRUE(extract_seeds(idx, divisor_strategy(), {}, 100).seeds.empty());
}

TEST(Retrieval, CapSamplesDeterministically) {
  auto idx = index_sources({{"t.c", many_divisions(250)}});
  auto a = extract_seeds(idx, divisor_strategy(), {}, 100, 7);
  auto b = extract_seeds(idx, divisor_strategy(), {}, 100, 7);
  auto c = extract_seeds(idx, divisor_strategy(), {}, 100, 8);
  EXPECT_EQ(a.total_matches, 250u);
  EXPECT_TRUE(a.sampled);
  ASSERT_EQ(a.seeds.size(), 100u);
  EXPECT_EQ(a.seeds, b.seeds);
  EXPECT_NE(a.seeds, c.seeds);
  auto d1 = extract_seeds(idx, divisor_strategy(), {}, 100);
  auto d2 = extract_seeds(idx, divisor_strategy(), {}, 100);
  EXPECT_EQ(d1.rng_seed, d2.rng_seed);
  EXPECT_EQ(d1.seeds, d2.seeds);
  EXPECT_THROW(extract_seeds(idx, divisor_strategy(), {}, 0), ContractError);
}

TEST(Retrieval, EverySeedReMatchesItsRule) {
  auto idx = index_sources({{"t.c", many_divisions(30)}});
  auto s = divisor_strategy();
  for (const auto& seed : extract_seeds(idx, s, {}, 10, 3).seeds) {
    const auto& fn = idx.function(seed.function_id);
    auto again = match_rule(fn, fn.statements[seed.statement], s.extractor.rules[seed.rule_index], seed.rule_index);
    ASSERT_EQ(again.size(), 1u);
    EXPECT_EQ(again[0], seed);
  }
}

TEST(Retrieval, ParallelEqualsSerial) {
  std::vector<std::pair<std::string, std::string>> files;
  for (int i = 0; i < 12; ++i) files.push_back({"d/f" + std::to_string(i) + ".c", many_divisions(i + 1)});
  auto idx = index_sources(files);
  for (std::size_t cap : {5u, 50u, 500u}) {
    auto p = extract_seeds(idx, divisor_strategy(), {}, cap, 11);
    auto s = extract_seeds_serial(idx, divisor_strategy(), {}, cap, 11);
    EXPECT_EQ(p.seeds, s.seeds);
    EXPECT_EQ(p.total_matches, s.total_matches);
  }
}

TEST(Retrieval, ScopeRestrictsFiles) {
  auto idx = index_sources({{"a/x.c", many_divisions(2)}, {"b/y.c", many_divisions(3)}});
  SeedScope scope{{"b/*"}};
  auto r = extract_seeds(idx, divisor_strategy(), scope, 100);
  EXPECT_EQ(r.total_matches, 3u);
  for (const auto& s : r.seeds) EXPECT_EQ(s.file, "b/y.c");
}

TEST(Retrieval, AllocationCallDeclarationParameterIndex) {
  auto idx = index_sources({{"t.c",
                             "void g(char *buf, int n) {\n"
                             "  char *p = malloc(n);\n"
                             "  memcpy(p, buf, n);\n"
                             "  int k = 3;\n"
                             "  buf[k] = 0;\n"
                             "}\n"}});
  const auto& fn = idx.functions().at(0);
  auto alloc = match_rule(fn, fn.statements[1], rule(RuleTarget::Allocation, {CaptureKind::Lhs}, SeedKind::FaultyValue), 0);
  ASSERT_EQ(alloc.size(), 1u);
  EXPECT_EQ(alloc[0].captured_ident, "p");
  auto call = match_rule(fn, fn.statements[2],
                         rule(RuleTarget::Call, {CaptureKind::Arg, 2}, SeedKind::DangerousOperand, "memcpy|memmove"), 0);
  ASSERT_EQ(call.size(), 1u);
  EXPECT_EQ(call[0].captured_ident, "n");
  auto decl = match_rule(fn, fn.statements[3],
                         rule(RuleTarget::Declaration, {CaptureKind::DeclaredIdent}, SeedKind::FaultyValue), 0);
  ASSERT_EQ(decl.size(), 1u);
  EXPECT_EQ(decl[0].captured_ident, "k");
  auto param = match_rule(fn, fn.statements[0],
                          rule(RuleTarget::Parameter, {CaptureKind::DeclaredIdent}, SeedKind::FaultyValue, "buf"), 0);
  ASSERT_EQ(param.size(), 1u);
  EXPECT_EQ(param[0].captured_ident, "buf");
  auto index = match_rule(fn, fn.statements[4],
                          rule(RuleTarget::IndexAccess, {CaptureKind::Index}, SeedKind::DangerousOperand), 0);
  ASSERT_EQ(index.size(), 1u);
  EXPECT_EQ(index[0].captured_ident, "k");
}

TEST(Strategy, ValidationAndRoundTrip) {
  auto s = divisor_strategy();
  EXPECT_TRUE(s.validation_error().empty());
  auto back = strategy_from_json(to_json(s));
  EXPECT_EQ(back, s);
  EXPECT_EQ(back.digest(), s.digest());

  auto mismatched = s;
  mismatched.direction = Direction::Forward;
  EXPECT_FALSE(mismatched.validation_error().empty());
  auto illegal = s;
  illegal.extractor.rules[0].capture = {CaptureKind::Arg, 0};
  EXPECT_THROW(illegal.validate(), ConfigError);
  RetrievalStrategy empty;
  EXPECT_FALSE(empty.validation_error().empty());

  auto j = to_json(s);
  j["extractor"]["rules"][0]["bogus"] = 1;
  EXPECT_THROW(strategy_from_json(j), ConfigError);
}

TEST(Synthesis, EmptySpecFailsBeforeAnyCall) {
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kGoodRules});
  Gateway g(live_config(), t);
  AntiPatternSpec spec = lzd_spec();
  spec.buggy_examples.clear();
  EXPECT_THROW(synthesize_retrieval_strategy(spec, g), ConfigError);
  EXPECT_EQ(t->calls, 0);
}

TEST(Synthesis, AcceptsFirstValidReply) {
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kGoodRules});
  Gateway g(live_config(), t);
  auto s = synthesize_retrieval_strategy(lzd_spec(), g);
  EXPECT_EQ(s.direction, Direction::Backward);
  EXPECT_EQ(s.anti_pattern, "LZD");
  EXPECT_EQ(s.provenance, request_digest(t->requests.at(0)));
  EXPECT_NE(t->requests[0].messages.back().content.find("1: int f(void) {"), std::string::npos);
  EXPECT_EQ(g.ledger().entries().at(0).stage, "synthesize_strategy");
}

TEST(Synthesis, RepromptsWithTheViolation) {
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{
      "I think you should look at divisions.",
      R"J({"direction": "backward", "rules": [{"target": "binary_op", "capture": "arg(0)", "seed_kind": "dangerous_operand"}]})J",
      kGoodRules});
  Gateway g(live_config(), t);
  auto s = synthesize_retrieval_strategy(lzd_spec(), g);
  EXPECT_EQ(t->calls, 3);
  const auto& last = t->requests.back().messages;
  EXPECT_EQ(last[last.size() - 2].role, "assistant");
  EXPECT_NE(last.back().content.find("not legal"), std::string::npos);
  EXPECT_EQ(s.provenance, request_digest(t->requests.back()));
}

TEST(Synthesis, GivesUpWithRawResponses) {
  auto t = std::make_shared<testsupport::ScriptedTransport>(
      [](const LlmRequest&) { return std::string("{\"direction\": \"sideways\", \"rules\": []}"); });
  Gateway g(live_config(), t);
  try {
    synthesize_retrieval_strategy(lzd_spec(), g);
    FAIL() << "expected SynthesisError";
  } catch (const SynthesisError& e) {
    EXPECT_EQ(e.raw_responses().size(), 3u);
  }
  EXPECT_EQ(t->calls, 3);
}
