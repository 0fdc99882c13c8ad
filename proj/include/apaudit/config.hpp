#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>

#include <json.hpp>

#include "apaudit/detector.hpp"
#include "apaudit/llm_gateway.hpp"
#include "apaudit/prompt_synth.hpp"

namespace apaudit {

/// Everything the CLI reads from its config file. Relative paths resolve
/// against the config file's directory.
struct AppConfig {
  GatewayConfig gateway;
  std::map<std::string, ProviderEndpoint> providers;
  PipelineConfig pipeline;
  std::filesystem::path hints_dir;  // empty: built-in hint texts
  std::set<HintCategory> hints = {HintCategory::Primitive, HintCategory::Pointer, HintCategory::Buffer};
  RefineOptions reflection;
  int match_window = 5;

  ReasoningHintSet hint_set() const;
  /// A live transport for the configured providers; null in strict replay mode.
  std::shared_ptr<Transport> transport() const;
};

/// Defaults: replay mode, K = 3, seed cap 100, every hint, one reflection round.
AppConfig default_app_config();

/// {"schema": "apaudit.config/1", ...}; unknown top-level keys are rejected.
/// Throws ConfigError.
AppConfig app_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
AppConfig load_app_config(const std::filesystem::path& file);

}  // namespace apaudit
