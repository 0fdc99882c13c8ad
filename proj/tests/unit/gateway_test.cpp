#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"
#include "scripted_transport.hpp"

using namespace apaudit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("apaudit_gw_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

LlmRequest hello(const std::string& text = "hello") {
  LlmRequest r;
  r.model_id = "deepseek-r1";
  r.messages = {{"system", "sys"}, {"user", text}};
  r.stage = "detect";
  r.anti_pattern = "LZD";
  return r;
}

GatewayConfig config_for(const fs::path& dir, GatewayMode mode) {
  GatewayConfig c;
  c.mode = mode;
  c.cassette_dir = dir;
  c.profiles.at("deepseek-r1").price_per_million_in = 0.55;
  c.profiles.at("deepseek-r1").price_per_million_out = 2.19;
  c.retry.sleeper = [](std::chrono::milliseconds) {};
  return c;
}

}  // namespace

TEST(Canonical, DigestIgnoresTagsAndKeyOrder) {
  LlmRequest a = hello();
  LlmRequest b = hello();
  b.stage = "validate";
  b.anti_pattern = "OSO";
  EXPECT_EQ(request_digest(a), request_digest(b));
  auto j = canonical_request(a);
  auto back = request_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(request_digest(back), request_digest(a));
  EXPECT_EQ(request_digest(a).size(), 64u);
}

TEST(Canonical, NonMessageWhitespaceIsNormalizedButMessagesAreVerbatim) {
  LlmRequest a = hello();
  LlmRequest b = hello();
  b.model_id = "  deepseek-r1 ";
  EXPECT_EQ(request_digest(a), request_digest(b));
  LlmRequest c = hello("hello ");
  EXPECT_NE(request_digest(a), request_digest(c));
  LlmRequest d = hello();
  d.params.temperature = 0.2;
  EXPECT_NE(request_digest(a), request_digest(d));
}

TEST(Cost, PriceArithmetic) {
  ModelProfile p;
  p.price_per_million_in = 3.0;
  p.price_per_million_out = 15.0;
  EXPECT_NEAR(exchange_dollars(p, 120000, 30000), 0.81, 1e-12);
  EXPECT_EQ(exchange_dollars(p, 0, 0), 0.0);
}

TEST(Cost, TallyGroupsSumToTotal) {
  std::vector<LedgerEntry> e = {
      {"detect", "LZD", "m", "d1", 10, 5, 0.70, 1.0},
      {"validate", "LZD", "m", "d2", 10, 5, 0.70, 2.0},
      {"detect", "OSO", "m", "d3", 1, 1, 0.25, 0.5},
  };
  auto by_ap = tally_cost(e, CostGroup::AntiPattern);
  ASSERT_EQ(by_ap.rows.size(), 2u);
  EXPECT_EQ(by_ap.rows[0].group, "LZD");
  EXPECT_NEAR(by_ap.rows[0].dollars, 1.40, 1e-12);
  EXPECT_EQ(by_ap.rows[0].calls, 2u);
  EXPECT_NEAR(by_ap.total.dollars, 1.65, 1e-12);
  auto by_stage = tally_cost(e, CostGroup::Stage);
  double sum = 0;
  for (const auto& r : by_stage.rows) sum += r.dollars;
  EXPECT_NEAR(sum, by_stage.total.dollars, 1e-12);
  EXPECT_NEAR(by_stage.total.seconds, 3.5, 1e-12);
}

TEST(Gateway, RecordThenStrictReplay) {
  auto dir = fresh_dir("record");
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{"answer one"});
  Gateway rec(config_for(dir, GatewayMode::Record), t);
  auto ex = rec.complete(hello());
  EXPECT_FALSE(ex.replayed);
  EXPECT_EQ(ex.response.text, "answer one");
  EXPECT_TRUE(fs::exists(dir / (ex.request_digest + ".json")));

  Gateway rep(config_for(dir, GatewayMode::Replay), nullptr);
  auto again = rep.complete(hello());
  EXPECT_TRUE(again.replayed);
  EXPECT_EQ(again.response, ex.response);
  EXPECT_EQ(rep.ledger().size(), 1u);
  EXPECT_NEAR(rep.ledger().entries()[0].seconds, 0.25, 1e-12);
  EXPECT_EQ(t->calls, 1);
}

TEST(Gateway, StrictReplayMissNamesDigest) {
  auto dir = fresh_dir("miss");
  Gateway rep(config_for(dir, GatewayMode::Replay), nullptr);
  try {
    rep.complete(hello("never recorded"));
    FAIL() << "expected CassetteMiss";
  } catch (const CassetteMiss& e) {
    EXPECT_EQ(e.digest().size(), 64u);
    EXPECT_NE(std::string(e.what()).find(e.digest()), std::string::npos);
  }
}

TEST(Gateway, HybridFillsMissesOnly) {
  auto dir = fresh_dir("hybrid");
  auto t = std::make_shared<testsupport::ScriptedTransport>(
      [](const LlmRequest& r) { return "echo " + r.messages.back().content; });
  Gateway g(config_for(dir, GatewayMode::Hybrid), t);
  g.complete(hello("a"));
  g.complete(hello("a"));
  g.complete(hello("b"));
  EXPECT_EQ(t->calls, 2);
  EXPECT_EQ(g.ledger().size(), 3u);
}

TEST(Gateway, LiveDoesNotWriteCassettes) {
  auto dir = fresh_dir("live");
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{"x"});
  Gateway g(config_for(dir, GatewayMode::Live), t);
  g.complete(hello());
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Gateway, RetriesTransientFailuresWithBackoff) {
  auto dir = fresh_dir("retry");
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{"ok"});
  t->fail_next = 3;
  auto cfg = config_for(dir, GatewayMode::Live);
  std::vector<long> waits;
  cfg.retry.sleeper = [&](std::chrono::milliseconds d) { waits.push_back(static_cast<long>(d.count())); };
  Gateway g(cfg, t);
  EXPECT_EQ(g.complete(hello()).response.text, "ok");
  EXPECT_EQ(t->calls, 4);
  EXPECT_EQ(waits, (std::vector<long>{500, 1000, 2000}));
}

TEST(Gateway, GivesUpAfterMaxAttempts) {
  auto dir = fresh_dir("giveup");
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{"never"});
  t->fail_next = 10;
  Gateway g(config_for(dir, GatewayMode::Live), t);
  EXPECT_THROW(g.complete(hello()), TransportError);
  EXPECT_EQ(t->calls, 4);
  EXPECT_EQ(g.ledger().size(), 0u);
}

TEST(Gateway, NonRetryableFailsImmediately) {
  auto dir = fresh_dir("hard");
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{"never"});
  t->hard_fail = true;
  Gateway g(config_for(dir, GatewayMode::Live), t);
  EXPECT_THROW(g.complete(hello()), GatewayError);
  EXPECT_EQ(t->calls, 1);
}

TEST(Gateway, ProfileFillsDecodeParams) {
  auto dir = fresh_dir("profile");
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{"x"});
  Gateway g(config_for(dir, GatewayMode::Live), t);
  LlmRequest r = hello();
  r.model_id.clear();
  auto ex = g.complete(r);
  EXPECT_EQ(ex.request.model_id, "claude-3-7-sonnet-thinking");
  EXPECT_EQ(ex.request.params.max_reasoning_tokens, 2048);
  EXPECT_THROW(g.profile("no-such-model"), ConfigError);
}

TEST(Gateway, LedgerCostMatchesPrices) {
  auto dir = fresh_dir("ledger");
  auto t = std::make_shared<testsupport::ScriptedTransport>(std::vector<std::string>{"abcd"});
  Gateway g(config_for(dir, GatewayMode::Live), t);
  g.complete(hello());
  auto e = g.ledger().entries().at(0);
  EXPECT_EQ(e.tokens_in, 2000);
  EXPECT_EQ(e.tokens_out, 4);
  EXPECT_NEAR(e.dollars, 2000 * 0.55 / 1e6 + 4 * 2.19 / 1e6, 1e-15);
  EXPECT_EQ(e.stage, "detect");
  EXPECT_EQ(e.anti_pattern, "LZD");
}

TEST(Gateway, ModeParsing) {
  EXPECT_EQ(parse_gateway_mode("hybrid"), GatewayMode::Hybrid);
  EXPECT_EQ(to_string(GatewayMode::Replay), "replay");
  EXPECT_THROW(parse_gateway_mode("sometimes"), ConfigError);
}

TEST(ExtractJson, ToleratesFencesAndProse) {
  auto j = extract_json_object("Sure.\n```json\n{\"verdict\": \"bug\", \"n\": {\"x\": \"}\"}}\n```\nDone.");
  ASSERT_TRUE(j);
  EXPECT_EQ(j->at("verdict"), "bug");
  EXPECT_EQ(j->at("n").at("x"), "}");
  EXPECT_FALSE(extract_json_object("no json here"));
  EXPECT_FALSE(extract_json_object("{broken"));
  auto second = extract_json_object("{not json} then {\"a\": 1}");
  ASSERT_TRUE(second);
  EXPECT_EQ(second->at("a"), 1);
}
