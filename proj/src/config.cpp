#include "apaudit/config.hpp"

#include <fstream>

#include "apaudit/errors.hpp"

namespace apaudit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

void read_model(const std::string& id, const json& m, ModelProfile& p) {
  reject_unknown(m,
                 {"provider", "max_output_tokens", "max_reasoning_tokens", "price_per_million_in",
                  "price_per_million_out", "temperature", "send_decode_params"},
                 "models." + id);
  p.model_id = id;
  p.provider = m.value("provider", p.provider);
  p.max_output_tokens = m.value("max_output_tokens", p.max_output_tokens);
  if (m.contains("max_reasoning_tokens")) {
    p.max_reasoning_tokens = m["max_reasoning_tokens"].is_null() ? std::optional<int>()
                                                                 : m["max_reasoning_tokens"].get<int>();
  }
  p.price_per_million_in = m.value("price_per_million_in", p.price_per_million_in);
  p.price_per_million_out = m.value("price_per_million_out", p.price_per_million_out);
  if (m.contains("temperature")) {
    p.temperature = m["temperature"].is_null() ? std::optional<double>() : m["temperature"].get<double>();
  }
  p.send_decode_params = m.value("send_decode_params", p.send_decode_params);
  p.validate();
}

}  // namespace

ReasoningHintSet AppConfig::hint_set() const {
  if (hints_dir.empty()) {
    ReasoningHintSet h = ReasoningHintSet::defaults();
    h.enabled = hints;
    return h;
  }
  return ReasoningHintSet::from_directory(hints_dir, hints);
}

std::shared_ptr<Transport> AppConfig::transport() const {
  if (gateway.mode == GatewayMode::Replay) return nullptr;
  return make_routing_transport(providers);
}

AppConfig default_app_config() {
  AppConfig c;
  c.providers["anthropic"] = {"anthropic", {"https://api.anthropic.com", "ANTHROPIC_API_KEY", 300}};
  c.providers["openai"] = {"openai", {"https://api.openai.com/v1", "OPENAI_API_KEY", 300}};
  c.providers["deepseek"] = {"openai", {"https://api.deepseek.com/v1", "DEEPSEEK_API_KEY", 300}};
  c.gateway.profiles.at("deepseek-r1").provider = "deepseek";
  c.gateway.cassette_dir = "cassettes";
  return c;
}

AppConfig app_config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object() || j.value("schema", "") != "apaudit.config/1") {
    throw ConfigError("config must have schema apaudit.config/1");
  }
  reject_unknown(j, {"schema", "gateway", "providers", "models", "slicer", "retrieval", "parallelism", "prompt", "matching"},
                 "config");
  AppConfig c = default_app_config();
  c.gateway.cassette_dir = resolve(base_dir, "cassettes");
  try {
    if (j.contains("gateway")) {
      const json& g = j["gateway"];
      reject_unknown(g, {"mode", "cassette_dir", "default_model", "retry"}, "gateway");
      if (g.contains("mode")) c.gateway.mode = parse_gateway_mode(g["mode"].get<std::string>());
      if (g.contains("cassette_dir")) c.gateway.cassette_dir = resolve(base_dir, g["cassette_dir"].get<std::string>());
      c.gateway.default_model = g.value("default_model", c.gateway.default_model);
      if (g.contains("retry")) {
        const json& r = g["retry"];
        reject_unknown(r, {"max_attempts", "initial_backoff_ms", "multiplier", "max_backoff_ms"}, "gateway.retry");
        c.gateway.retry.max_attempts = r.value("max_attempts", c.gateway.retry.max_attempts);
        c.gateway.retry.initial_backoff =
            std::chrono::milliseconds(r.value("initial_backoff_ms", c.gateway.retry.initial_backoff.count()));
        c.gateway.retry.multiplier = r.value("multiplier", c.gateway.retry.multiplier);
        c.gateway.retry.max_backoff =
            std::chrono::milliseconds(r.value("max_backoff_ms", c.gateway.retry.max_backoff.count()));
        if (c.gateway.retry.max_attempts < 1) throw ConfigError("gateway.retry.max_attempts must be at least 1");
      }
    }
    if (j.contains("providers")) {
      for (auto it = j["providers"].begin(); it != j["providers"].end(); ++it) {
        reject_unknown(*it, {"api", "base_url", "api_key_env", "timeout_seconds"}, "providers." + it.key());
        ProviderEndpoint p = c.providers.count(it.key()) ? c.providers[it.key()] : ProviderEndpoint{};
        p.api = it->value("api", p.api);
        p.endpoint.base_url = it->value("base_url", p.endpoint.base_url);
        p.endpoint.api_key_env = it->value("api_key_env", p.endpoint.api_key_env);
        p.endpoint.timeout_seconds = it->value("timeout_seconds", p.endpoint.timeout_seconds);
        c.providers[it.key()] = p;
      }
    }
    if (j.contains("models")) {
      for (auto it = j["models"].begin(); it != j["models"].end(); ++it) {
        ModelProfile& p = c.gateway.profiles[it.key()];
        read_model(it.key(), *it, p);
      }
    }
    if (!c.gateway.profiles.count(c.gateway.default_model)) {
      throw ConfigError("default model " + c.gateway.default_model + " has no profile");
    }
    for (const auto& [id, p] : c.gateway.profiles) {
      if (!c.providers.count(p.provider)) throw ConfigError("model " + id + " names unknown provider " + p.provider);
    }
    if (j.contains("slicer")) {
      const json& s = j["slicer"];
      reject_unknown(s, {"k_max", "context_char_budget", "include_control_deps"}, "slicer");
      c.pipeline.slicer.k_max = s.value("k_max", c.pipeline.slicer.k_max);
      c.pipeline.slicer.context_char_budget = s.value("context_char_budget", c.pipeline.slicer.context_char_budget);
      c.pipeline.slicer.include_control_deps = s.value("include_control_deps", c.pipeline.slicer.include_control_deps);
    }
    c.pipeline.slicer.validate();
    if (j.contains("retrieval")) {
      const json& r = j["retrieval"];
      reject_unknown(r, {"seed_cap", "rng_seed", "scope"}, "retrieval");
      c.pipeline.seed_cap = r.value("seed_cap", c.pipeline.seed_cap);
      if (r.contains("rng_seed") && !r["rng_seed"].is_null()) c.pipeline.rng_seed = r["rng_seed"].get<std::uint64_t>();
      if (r.contains("scope")) c.pipeline.scope.file_globs = r["scope"].get<std::vector<std::string>>();
      if (c.pipeline.seed_cap < 1) throw ConfigError("retrieval.seed_cap must be at least 1");
    }
    c.pipeline.parallelism = j.value("parallelism", c.pipeline.parallelism);
    if (c.pipeline.parallelism < 0) throw ConfigError("parallelism must be non-negative");
    if (j.contains("prompt")) {
      const json& p = j["prompt"];
      reject_unknown(p, {"hints_dir", "hints", "reflection", "reflection_rounds"}, "prompt");
      if (p.contains("hints_dir")) c.hints_dir = resolve(base_dir, p["hints_dir"].get<std::string>());
      if (p.contains("hints")) {
        c.hints.clear();
        for (const auto& h : p["hints"]) c.hints.insert(parse_hint_category(h.get<std::string>()));
      }
      c.reflection.enabled = p.value("reflection", c.reflection.enabled);
      c.reflection.rounds = p.value("reflection_rounds", c.reflection.rounds);
    }
    c.hint_set().validate();
    if (j.contains("matching")) {
      reject_unknown(j["matching"], {"window"}, "matching");
      c.match_window = j["matching"].value("window", c.match_window);
      if (c.match_window < 0) throw ConfigError("matching.window must be non-negative");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

AppConfig load_app_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config: " + file.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed config: " + file.string());
  return app_config_from_json(j, file.parent_path());
}

}  // namespace apaudit
