#include <gtest/gtest.h>

#include <filesystem>

#include "apaudit/config.hpp"
#include "apaudit/errors.hpp"

using namespace apaudit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = APAUDIT_SOURCE_DIR;

json minimal() { return {{"schema", "apaudit.config/1"}}; }

}  // namespace

TEST(Config, ExampleLoads) {
  const AppConfig c = load_app_config(kRoot / "config" / "apaudit.example.json");
  EXPECT_GE(c.pipeline.seed_cap, 1);
  EXPECT_FALSE(c.gateway.default_model.empty());
  EXPECT_TRUE(c.gateway.profiles.count(c.gateway.default_model));
}

TEST(Config, FixtureConfigIsReplay) {
  const AppConfig c = load_app_config(kRoot / "tests" / "fixtures" / "e2e" / "apaudit.json");
  EXPECT_EQ(c.gateway.mode, GatewayMode::Replay);
  EXPECT_EQ(c.pipeline.slicer.k_max, 3);
  EXPECT_EQ(c.pipeline.seed_cap, 100);
  EXPECT_EQ(c.transport(), nullptr);
}

TEST(Config, DefaultsMatchDocumentedValues) {
  const AppConfig c = app_config_from_json(minimal(), "/base");
  EXPECT_EQ(c.pipeline.slicer.k_max, 3);
  EXPECT_EQ(c.pipeline.seed_cap, 100);
  EXPECT_TRUE(c.reflection.enabled);
  EXPECT_EQ(c.reflection.rounds, 1);
  EXPECT_EQ(c.match_window, 5);
  EXPECT_EQ(c.gateway.cassette_dir, fs::path("/base/cassettes"));
}

TEST(Config, UnknownKeysRejected) {
  json j = minimal();
  j["slicr"] = {{"k_max", 2}};
  EXPECT_THROW(app_config_from_json(j, "."), ConfigError);
  j = minimal();
  j["slicer"] = {{"kmax", 2}};
  EXPECT_THROW(app_config_from_json(j, "."), ConfigError);
  EXPECT_THROW(app_config_from_json(json{{"schema", "apaudit.config/2"}}, "."), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  json j = minimal();
  j["gateway"] = {{"cassette_dir", "tapes"}};
  j["prompt"] = {{"hints_dir", "hints"}};
  const AppConfig c = app_config_from_json(j, "/etc/apaudit");
  EXPECT_EQ(c.gateway.cassette_dir, fs::path("/etc/apaudit/tapes"));
  EXPECT_EQ(c.hints_dir, fs::path("/etc/apaudit/hints"));
  j["gateway"] = {{"cassette_dir", "/abs/tapes"}};
  EXPECT_EQ(app_config_from_json(j, "/etc/apaudit").gateway.cassette_dir, fs::path("/abs/tapes"));
}

TEST(Config, ModelMustNameKnownProvider) {
  json j = minimal();
  j["models"] = {{"mine", {{"provider", "acme"}, {"price_per_million_in", 1.0}, {"price_per_million_out", 2.0}}}};
  EXPECT_THROW(app_config_from_json(j, "."), ConfigError);
  j["providers"] = {{"acme", {{"api", "openai"}, {"base_url", "https://acme.invalid/v1"}, {"api_key_env", "ACME_KEY"}}}};
  const AppConfig c = app_config_from_json(j, ".");
  EXPECT_EQ(c.gateway.profiles.at("mine").provider, "acme");
  EXPECT_EQ(c.providers.at("acme").endpoint.base_url, "https://acme.invalid/v1");
}

TEST(Config, InvalidNumbersRejected) {
  json j = minimal();
  j["retrieval"] = {{"seed_cap", 0}};
  EXPECT_THROW(app_config_from_json(j, "."), ConfigError);
  j = minimal();
  j["parallelism"] = -1;
  EXPECT_THROW(app_config_from_json(j, "."), ConfigError);
  j = minimal();
  j["gateway"] = {{"default_model", "nobody"}};
  EXPECT_THROW(app_config_from_json(j, "."), ConfigError);
}
