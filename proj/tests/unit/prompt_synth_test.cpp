#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"
#include "apaudit/prompt_synth.hpp"
#include "scripted_transport.hpp"

using namespace apaudit;
namespace fs = std::filesystem;

namespace {

AntiPatternSpec lzd_spec() {
  AntiPatternSpec s;
  s.name = "LZD";
  s.bug_type = BugType::DBZ;
  s.description = "a literal zero reaches a divisor";
  s.buggy_examples = {{"buggy.c", "int f(int a) {\n  int z = 0;\n  return a / z;\n}\n", true, {2, 3}}};
  s.nonbuggy_examples = {{"safe.c", "int g(int a, int d) {\n  if (d != 0)\n    return a / d;\n  return 0;\n}\n", false, {}}};
  return s;
}

const char* kSynthReply =
    R"J({"semantics_summary": "A literal zero value is used as a divisor: a variable assigned the constant 0 reaches a division or modulo without a non-zero check.",
        "annotations": [{"example": 1, "reasoning": "z is assigned 0 and divides a."},
                        {"example": 2, "reasoning": "d is checked against 0 before the division."}]})J";

GatewayConfig live() {
  GatewayConfig c;
  c.mode = GatewayMode::Live;
  c.cassette_dir = fs::temp_directory_path() / "apaudit_prompt_unused";
  c.retry.sleeper = [](std::chrono::milliseconds) {};
  return c;
}

DetectionPrompt draft_prompt() {
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kSynthReply});
  Gateway g(live(), t);
  return synthesize_detection_prompt(lzd_spec(), ReasoningHintSet::defaults(), g);
}

}  // namespace

TEST(Hints, DefaultsEnableAllThree) {
  auto h = ReasoningHintSet::defaults();
  EXPECT_EQ(h.enabled.size(), 3u);
  EXPECT_NO_THROW(h.validate());
  h.enabled.clear();
  EXPECT_THROW(h.validate(), ConfigError);
  auto blank = ReasoningHintSet::defaults();
  blank.pointer_hint = "  ";
  EXPECT_THROW(blank.validate(), ConfigError);
}

TEST(Hints, ShippedTemplatesMatchBuiltins) {
  auto shipped = ReasoningHintSet::from_directory(fs::path(APAUDIT_SOURCE_DIR) / "config" / "hints",
                                                  {HintCategory::Primitive, HintCategory::Pointer, HintCategory::Buffer});
  EXPECT_EQ(shipped, ReasoningHintSet::defaults());
}

TEST(Hints, DirectoryOverridesText) {
  auto dir = fs::temp_directory_path() / "apaudit_hints_override";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "pointer.txt") << "Track every alias.\n";
  }
  auto h = ReasoningHintSet::from_directory(dir, {HintCategory::Pointer});
  EXPECT_EQ(h.pointer_hint, "Track every alias.");
  EXPECT_EQ(h.primitive_hint, ReasoningHintSet::defaults().primitive_hint);
}

TEST(PromptSynth, SummaryAndLabeledBlocks) {
  auto p = draft_prompt();
  EXPECT_NE(p.semantics_summary.find("literal zero value is used as a divisor"), std::string::npos);
  ASSERT_EQ(p.few_shot_blocks.size(), 2u);
  EXPECT_TRUE(p.few_shot_blocks[0].buggy);
  EXPECT_FALSE(p.few_shot_blocks[1].buggy);
  EXPECT_EQ(p.few_shot_blocks[1].reasoning, "d is checked against 0 before the division.");
  EXPECT_EQ(p.output_schema, detection_output_schema());
  EXPECT_EQ(p.provenance.size(), 1u);
  const std::string text = p.assemble();
  const auto spec = lzd_spec();
  for (const auto* e : spec.ordered_examples()) EXPECT_NE(text.find(e->code), std::string::npos);
  EXPECT_NE(text.find("[non-buggy]"), std::string::npos);
  EXPECT_NE(text.find("\"verdict\""), std::string::npos);
}

TEST(PromptSynth, OnlyEnabledHintsAreAssembled) {
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kSynthReply});
  Gateway g(live(), t);
  auto hints = ReasoningHintSet::defaults();
  hints.enabled = {HintCategory::Primitive};
  auto p = synthesize_detection_prompt(lzd_spec(), hints, g);
  const std::string text = p.assemble();
  EXPECT_NE(text.find(hints.primitive_hint), std::string::npos);
  EXPECT_EQ(text.find(hints.pointer_hint), std::string::npos);
  EXPECT_EQ(text.find(hints.buffer_hint), std::string::npos);
}

TEST(PromptSynth, RetriesThenGivesUp) {
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{
      "not json", R"J({"semantics_summary": "x", "annotations": [{"example": 1, "reasoning": "r"}]})J", kSynthReply});
  Gateway g(live(), t);
  auto p = synthesize_detection_prompt(lzd_spec(), ReasoningHintSet::defaults(), g);
  EXPECT_EQ(t->calls, 3);
  EXPECT_NE(t->requests[2].messages.back().content.find("example 2 has no annotation"), std::string::npos);
  EXPECT_EQ(p.provenance.at(0), request_digest(t->requests[2]));

  auto bad = std::make_shared<testsupport::ScriptedTransport>([](const LlmRequest&) { return std::string("{}"); });
  Gateway g2(live(), bad);
  EXPECT_THROW(synthesize_detection_prompt(lzd_spec(), ReasoningHintSet::defaults(), g2), SynthesisError);
  EXPECT_EQ(bad->calls, 3);
}

TEST(PromptSynth, InvalidSpecFailsBeforeCalling) {
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{kSynthReply});
  Gateway g(live(), t);
  auto spec = lzd_spec();
  spec.buggy_examples.clear();
  EXPECT_THROW(synthesize_detection_prompt(spec, ReasoningHintSet::defaults(), g), ConfigError);
  EXPECT_EQ(t->calls, 0);
}

TEST(PromptSynth, JsonRoundTripAndTamperCheck) {
  auto p = draft_prompt();
  auto j = to_json(p);
  EXPECT_EQ(j.at("schema"), "apaudit.prompt/1");
  EXPECT_EQ(prompt_from_json(j), p);
  j["semantics_summary"] = "edited by hand";
  EXPECT_THROW(prompt_from_json(j), ConfigError);
  j.erase("content_digest");
  EXPECT_NO_THROW(prompt_from_json(j));
}

TEST(Reflection, RevisionBranch) {
  auto draft = draft_prompt();
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{
      R"J({"self_check": [{"example": 1, "predicted": "buggy"}, {"example": 2, "predicted": "buggy"}],
          "critique": "The summary does not say that a preceding != 0 check makes the division safe.",
          "revision": {"semantics_summary": "A literal zero value is used as a divisor with no dominating non-zero check on the divisor."}})J"});
  Gateway g(live(), t);
  auto r = reflect_and_refine(draft, lzd_spec(), g);
  EXPECT_TRUE(r.warnings.empty());
  ASSERT_EQ(r.prompt.reflection_log.size(), 1u);
  const auto& e = r.prompt.reflection_log[0];
  EXPECT_EQ(e.mislabeled, 1);
  EXPECT_EQ(e.draft_digest, draft.content_digest());
  EXPECT_EQ(e.revision_digest, r.prompt.content_digest());
  EXPECT_NE(e.draft_digest, e.revision_digest);
  EXPECT_NE(r.prompt.assemble(), draft.assemble());
  EXPECT_EQ(r.prompt.few_shot_blocks[0].reasoning, draft.few_shot_blocks[0].reasoning);
  EXPECT_EQ(t->requests[0].stage, "reflect_prompt");
}

TEST(Reflection, NoChangeBranch) {
  auto draft = draft_prompt();
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{
      R"J({"self_check": [{"example": 1, "predicted": "buggy"}, {"example": 2, "predicted": "non-buggy"}],
          "critique": "Both examples are classified correctly.", "revision": null})J"});
  Gateway g(live(), t);
  RefineOptions opt;
  opt.rounds = 3;
  auto r = reflect_and_refine(draft, lzd_spec(), g, opt);
  EXPECT_EQ(t->calls, 1);  // a no-change round ends reflection
  ASSERT_EQ(r.prompt.reflection_log.size(), 1u);
  EXPECT_EQ(r.prompt.reflection_log[0].draft_digest, r.prompt.reflection_log[0].revision_digest);
  EXPECT_EQ(r.prompt.reflection_log[0].mislabeled, 0);
  EXPECT_EQ(r.prompt.assemble(), draft.assemble());
}

TEST(Reflection, DisabledIsBitIdentical) {
  auto draft = draft_prompt();
  auto t = std::make_shared<testsupport::ScriptedTransport>();
  Gateway g(live(), t);
  RefineOptions opt;
  opt.enabled = false;
  auto r = reflect_and_refine(draft, lzd_spec(), g, opt);
  EXPECT_EQ(to_json(r.prompt).dump(), to_json(draft).dump());
  EXPECT_EQ(t->calls, 0);
}

TEST(Reflection, FailureKeepsDraft) {
  auto draft = draft_prompt();
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{"x"});
  t->hard_fail = true;
  Gateway g(live(), t);
  auto r = reflect_and_refine(draft, lzd_spec(), g);
  EXPECT_EQ(r.prompt, draft);
  ASSERT_EQ(r.warnings.size(), 1u);

  auto junk = std::make_shared<testsupport::ScriptedTransport>([](const LlmRequest&) { return std::string("nope"); });
  Gateway g2(live(), junk);
  auto r2 = reflect_and_refine(draft, lzd_spec(), g2);
  EXPECT_EQ(r2.prompt, draft);
  EXPECT_EQ(junk->calls, 3);
  EXPECT_EQ(r2.warnings.size(), 1u);
}
