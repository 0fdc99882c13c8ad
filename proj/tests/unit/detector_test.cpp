#include <gtest/gtest.h>

#include <filesystem>

#include "apaudit/detector.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"
#include "scripted_transport.hpp"

using namespace apaudit;
namespace fs = std::filesystem;

namespace {

const char* kSource =
    "int lit(int a) {\n"       // 1
    "  int z = 0;\n"           // 2
    "  return a / z;\n"        // 3
    "}\n"                      // 4
    "int checked(int a, int d) {\n"  // 5
    "  if (d != 0)\n"          // 6
    "    return a / d;\n"      // 7
    "  return 0;\n"            // 8
    "}\n"                      // 9
    "int broken(int a, int e) {\n"   // 10
    "  return a % e;\n"        // 11
    "}\n";                     // 12

RetrievalStrategy divisor_strategy() {
  RetrievalStrategy s;
  s.anti_pattern = "LZD";
  s.direction = Direction::Backward;
  MatcherRule r;
  r.target = RuleTarget::BinaryOp;
  r.op = "/|%";
  r.capture = {CaptureKind::Rhs};
  r.seed_kind = SeedKind::DangerousOperand;
  s.extractor.rules = {r};
  return s;
}

DetectionPrompt lzd_prompt() {
  DetectionPrompt p;
  p.anti_pattern = "LZD";
  p.bug_type = BugType::DBZ;
  p.semantics_summary = "A literal zero value is used as a divisor without validation.";
  p.few_shot_blocks = {{"b.c", true, {2}, "int f(int a) {\n  int z = 0;\n  return a / z;\n}\n", "z is zero."}};
  p.hints = ReasoningHintSet::defaults();
  p.output_schema = std::string(detection_output_schema());
  return p;
}

GatewayConfig live() {
  GatewayConfig c;
  c.mode = GatewayMode::Live;
  c.cassette_dir = fs::temp_directory_path() / "apaudit_detector_unused";
  c.profiles.at("claude-3-7-sonnet-thinking").price_per_million_in = 3.0;
  c.profiles.at("claude-3-7-sonnet-thinking").price_per_million_out = 15.0;
  c.retry.sleeper = [](std::chrono::milliseconds) {};
  return c;
}

const char* kFaithful =
    R"J({"verdict": "bug", "path": [{"origin": "t.c:2", "description": "z is assigned the literal 0"},
         {"origin": "t.c:3", "description": "a is divided by z"}], "explanation": "z is always zero at the division."})J";

const char* kFabricated =
    R"J({"verdict": "bug", "path": [{"origin": "t.c:2", "description": "z is assigned the literal 0"},
         {"origin": "t.c:40", "description": "z is reset to 0 again"}], "explanation": "see line 40."})J";

const char* kAllUpheld =
    R"J({"checks": [{"step": 1, "upheld": true, "reason": "ok"}, {"step": 2, "upheld": true, "reason": "ok"}], "reasons": "consistent"})J";

struct Fixture {
  CodeIndex index = index_sources({{"t.c", kSource}});
  SlicerConfig slicer;

  Seed seed_at(int line) const {
    for (const auto& s : extract_seeds(index, divisor_strategy(), {}, 100).seeds) {
      if (s.line == line) return s;
    }
    throw std::runtime_error("no seed at line " + std::to_string(line));
  }
  DetectionContext context_for(int line) const {
    return inline_slices(index, interprocedural_slice(index, seed_at(line), slicer), slicer);
  }
};

}  // namespace

TEST(Origin, Parsing) {
  auto s = parse_origin(" origin: src/a.c:17 ");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->file, "src/a.c");
  EXPECT_EQ(s->line, 17);
  EXPECT_EQ(s->origin(), "src/a.c:17");
  EXPECT_FALSE(parse_origin("a.c"));
  EXPECT_FALSE(parse_origin("a.c:0"));
  EXPECT_FALSE(parse_origin("a.c:12x"));
  EXPECT_FALSE(parse_origin(":3"));
}

TEST(Detect, FaithfulCandidateIsGrounded) {
  Fixture f;
  auto ctx = f.context_for(3);
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kFaithful});
  Gateway g(live(), t);
  auto d = detect(ctx, lzd_prompt(), f.seed_at(3), g);
  ASSERT_TRUE(d.candidate);
  ASSERT_EQ(d.candidate->path_steps.size(), 2u);
  EXPECT_EQ(d.candidate->path_steps[0].line, 2);
  EXPECT_EQ(d.candidate->path_steps[1].line, 3);
  EXPECT_TRUE(d.candidate->grounded());
  EXPECT_EQ(d.candidate->request_digest, request_digest(t->requests[0]));
  EXPECT_EQ(t->requests[0].messages[0].content, lzd_prompt().assemble());
  EXPECT_NE(t->requests[0].messages[1].content.find(ctx.rendered), std::string::npos);
  EXPECT_NEAR(d.cost.dollars, (2000 * 3.0 + std::string(kFaithful).size() * 15.0) / 1e6, 1e-12);
}

TEST(Detect, NoBugGivesNothing) {
  Fixture f;
  auto t = std::make_shared<testsupport::ScriptedTransport>(
      std::vector<std::string>{R"J({"verdict": "no_bug", "path": [], "explanation": "checked"})J"});
  Gateway g(live(), t);
  auto d = detect(f.context_for(7), lzd_prompt(), f.seed_at(7), g);
  EXPECT_FALSE(d.candidate);
  EXPECT_TRUE(d.diagnostics.empty());
}

TEST(Detect, MalformedRepliesReadAsNoBug) {
  Fixture f;
  auto t = std::make_shared<testsupport::ScriptedTransport>(
      [](const LlmRequest&) { return std::string(R"J({"verdict": "bug", "path": []})J"); });
  Gateway g(live(), t);
  auto d = detect(f.context_for(3), lzd_prompt(), f.seed_at(3), g);
  EXPECT_FALSE(d.candidate);
  EXPECT_EQ(t->calls, 3);
  ASSERT_EQ(d.diagnostics.size(), 1u);
  EXPECT_NE(d.diagnostics[0].find("no bug"), std::string::npos);
  EXPECT_EQ(t->requests[2].messages.size(), 6u);
}

TEST(Detect, FabricatedStepIsKeptUngrounded) {
  Fixture f;
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kFabricated});
  Gateway g(live(), t);
  auto d = detect(f.context_for(3), lzd_prompt(), f.seed_at(3), g);
  ASSERT_TRUE(d.candidate);
  EXPECT_TRUE(d.candidate->path_steps[0].grounded);
  EXPECT_FALSE(d.candidate->path_steps[1].grounded);
  EXPECT_FALSE(d.candidate->grounded());
}

TEST(Detect, EmptyContextIsAContractError) {
  auto t = std::make_shared<testsupport::ScriptedTransport>();
  Gateway g(live(), t);
  EXPECT_THROW(detect(DetectionContext{}, lzd_prompt(), Seed{}, g), ContractError);
  EXPECT_EQ(t->calls, 0);
}

TEST(Detect, GatewayFailurePropagates) {
  Fixture f;
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kFaithful});
  t->hard_fail = true;
  Gateway g(live(), t);
  EXPECT_THROW(detect(f.context_for(3), lzd_prompt(), f.seed_at(3), g), GatewayError);
}

TEST(Validate, ZeroStepsRejectedWithoutCall) {
  Fixture f;
  auto t = std::make_shared<testsupport::ScriptedTransport>();
  Gateway g(live(), t);
  auto v = validate(BugCandidate{}, f.context_for(3), g);
  EXPECT_FALSE(v.verdict.accepted);
  EXPECT_TRUE(v.verdict.request_digest.empty());
  EXPECT_EQ(t->calls, 0);
}

TEST(Validate, FaithfulAcceptedInSeparateConversation) {
  Fixture f;
  auto ctx = f.context_for(3);
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kFaithful, kAllUpheld});
  Gateway g(live(), t);
  auto cand = *detect(ctx, lzd_prompt(), f.seed_at(3), g).candidate;
  auto v = validate(cand, ctx, g, {3, "", "LZD"});
  EXPECT_TRUE(v.verdict.accepted);
  ASSERT_EQ(v.verdict.checks.size(), 2u);
  EXPECT_EQ(v.verdict.checks[0].claim, "t.c:2: z is assigned the literal 0");
  EXPECT_NE(v.verdict.request_digest, cand.request_digest);
  const LlmRequest& vr = t->requests[1];
  EXPECT_EQ(vr.stage, "validate");
  EXPECT_EQ(vr.messages.size(), 2u);
  for (const auto& m : vr.messages) {
    EXPECT_EQ(m.content.find(cand.explanation), std::string::npos);
    EXPECT_EQ(m.content.find("LZD"), std::string::npos);
  }
  EXPECT_NE(vr.messages[1].content.find("[t.c:3] a is divided by z"), std::string::npos);
}

TEST(Validate, FooledValidatorStillRejectsFabricatedLine) {
  Fixture f;
  auto ctx = f.context_for(3);
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kFabricated, kAllUpheld});
  Gateway g(live(), t);
  auto cand = *detect(ctx, lzd_prompt(), f.seed_at(3), g).candidate;
  auto v = validate(cand, ctx, g);
  EXPECT_FALSE(v.verdict.accepted);
  EXPECT_TRUE(v.verdict.checks[0].upheld);
  EXPECT_FALSE(v.verdict.checks[1].upheld);
  EXPECT_NE(v.verdict.checks[1].reason.find("t.c:40"), std::string::npos);
  EXPECT_EQ(t->calls, 2);
}

TEST(Validate, MissingOrMalformedChecksReject) {
  Fixture f;
  auto ctx = f.context_for(3);
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{
      kFaithful, R"J({"checks": [{"step": 1, "upheld": true, "reason": "ok"}], "reasons": "partial"})J"});
  Gateway g(live(), t);
  auto cand = *detect(ctx, lzd_prompt(), f.seed_at(3), g).candidate;
  auto v = validate(cand, ctx, g);
  EXPECT_FALSE(v.verdict.accepted);
  EXPECT_FALSE(v.verdict.checks[1].upheld);

  auto junk = std::make_shared<testsupport::ScriptedTransport>(
      [](const LlmRequest&) { return std::string(R"J({"checks": [{"step": 9, "upheld": true}]})J"); });
  Gateway g2(live(), junk);
  auto v2 = validate(cand, ctx, g2);
  EXPECT_FALSE(v2.verdict.accepted);
  EXPECT_EQ(junk->calls, 3);
  EXPECT_EQ(v2.verdict.checks.size(), 2u);
}

namespace {

// Answers by stage and by which function the context came from.
std::string pipeline_responder(const LlmRequest& r) {
  const std::string& user = r.messages[1].content;
  if (r.stage == "validate") return kAllUpheld;
  if (user.find("a % e") != std::string::npos) throw GatewayError("scripted outage");
  if (user.find("a / z") != std::string::npos) return kFaithful;
  return R"J({"verdict": "no_bug", "path": [], "explanation": "guarded"})J";
}

}  // namespace

TEST(Pipeline, OutcomesPartitionSeeds) {
  Fixture f;
  auto t = std::make_shared<testsupport::ScriptedTransport>(pipeline_responder);
  Gateway g(live(), t);
  PipelineConfig cfg;
  auto res = run_pipeline(f.index, divisor_strategy(), lzd_prompt(), cfg, g);
  const auto& c = res.log.counts;
  EXPECT_EQ(res.log.seeds.size(), 3u);
  EXPECT_EQ(c.total(), res.log.seeds.size());
  EXPECT_EQ(c.accepted, 1u);
  EXPECT_EQ(c.no_bug, 1u);
  EXPECT_EQ(c.errored, 1u);
  EXPECT_EQ(c.rejected, 0u);
  ASSERT_EQ(res.reports.size(), 1u);
  const BugReport& r = res.reports[0];
  EXPECT_EQ(r.anti_pattern, "LZD");
  EXPECT_EQ(r.run_id, res.log.run_id);
  EXPECT_TRUE(r.verdict.accepted);
  EXPECT_NE(r.verdict.request_digest, r.candidate.request_digest);
  EXPECT_EQ(res.log.k_max, 3);
  EXPECT_EQ(res.log.seed_cap, 100u);
  for (const auto& s : res.log.seeds) {
    if (s.outcome == SeedOutcome::Error) EXPECT_NE(s.error.find("scripted outage"), std::string::npos);
  }
  double sum = 0;
  for (const auto& s : res.log.seeds) sum += s.cost.dollars;
  EXPECT_NEAR(res.log.cost.dollars, sum, 1e-12);
}

TEST(Pipeline, ParallelMatchesSerial) {
  Fixture f;
  PipelineConfig cfg;
  cfg.parallelism = 4;
  auto t1 = std::make_shared<testsupport::ScriptedTransport>(pipeline_responder);
  auto t2 = std::make_shared<testsupport::ScriptedTransport>(pipeline_responder);
  Gateway g1(live(), t1), g2(live(), t2);
  auto p = run_pipeline(f.index, divisor_strategy(), lzd_prompt(), cfg, g1);
  auto s = run_pipeline_serial(f.index, divisor_strategy(), lzd_prompt(), cfg, g2);
  EXPECT_EQ(to_json(p.log).dump(), to_json(s.log).dump());
  EXPECT_EQ(reports_to_json(p.reports).dump(), reports_to_json(s.reports).dump());
}

TEST(Pipeline, ZeroSeedsAndMismatchedArtifacts) {
  auto idx = index_sources({{"t.c", "int f(int a) {\n  return a + 1;\n}\n"}});
  auto t = std::make_shared<testsupport::ScriptedTransport>(pipeline_responder);
  Gateway g(live(), t);
  auto res = run_pipeline(idx, divisor_strategy(), lzd_prompt(), {}, g);
  EXPECT_TRUE(res.reports.empty());
  EXPECT_EQ(res.log.counts.total(), 0u);
  EXPECT_EQ(t->calls, 0);

  auto other = divisor_strategy();
  other.anti_pattern = "OSO";
  EXPECT_THROW(run_pipeline(idx, other, lzd_prompt(), {}, g), ConfigError);
}

TEST(Pipeline, KeepsContextsAndRecordsKnobs) {
  Fixture f;
  auto t = std::make_shared<testsupport::ScriptedTransport>(pipeline_responder);
  Gateway g(live(), t);
  PipelineConfig cfg;
  cfg.slicer.k_max = 2;
  cfg.seed_cap = 2;
  cfg.keep_contexts = true;
  auto res = run_pipeline(f.index, divisor_strategy(), lzd_prompt(), cfg, g);
  EXPECT_EQ(res.log.k_max, 2);
  EXPECT_EQ(res.log.seed_cap, 2u);
  EXPECT_EQ(res.log.seeds.size(), 2u);
  EXPECT_TRUE(res.log.sampled);
  for (const auto& s : res.log.seeds) {
    if (s.outcome != SeedOutcome::Error) EXPECT_FALSE(s.context.empty());
  }
  auto j = to_json(res.log);
  EXPECT_EQ(j["k_max"], 2);
  EXPECT_EQ(j["seed_cap"], 2);
}

TEST(Reports, JsonRoundTrip) {
  Fixture f;
  auto t = std::make_shared<testsupport::ScriptedTransport>(pipeline_responder);
  Gateway g(live(), t);
  auto res = run_pipeline(f.index, divisor_strategy(), lzd_prompt(), {}, g);
  auto j = reports_to_json(res.reports);
  EXPECT_EQ(j["schema"], "apaudit.reports/1");
  auto back = reports_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back, res.reports);
  EXPECT_THROW(reports_from_json(nlohmann::json{{"schema", "other"}}), ConfigError);
  j["reports"][0].erase("verdict");
  EXPECT_THROW(reports_from_json(j), ConfigError);
}
