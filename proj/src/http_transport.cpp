#include <httplib.h>

#include <chrono>
#include <cstdlib>

#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"

namespace apaudit {
namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing '/'
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.prefix = path_start == std::string::npos ? std::string{} : url.substr(path_start);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

std::string api_key(const EndpointConfig& ep) {
  const char* v = std::getenv(ep.api_key_env.c_str());
  if (v == nullptr || *v == '\0') throw ConfigError("environment variable " + ep.api_key_env + " is not set");
  return v;
}

/// Posts JSON and classifies failures into retryable and fatal.
json post_json(const EndpointConfig& ep, const std::string& path, const httplib::Headers& headers,
               const json& body, double& latency_ms) {
  const SplitUrl url = split_url(ep.base_url);
  httplib::Client cli(url.origin);
  cli.set_connection_timeout(30);
  cli.set_read_timeout(ep.timeout_seconds);
  cli.set_write_timeout(60);
  const auto t0 = std::chrono::steady_clock::now();
  auto res = cli.Post(url.prefix + path, headers, body.dump(), "application/json");
  latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!res) throw TransportError("HTTP request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512));
  }
  if (res->status != 200) {
    throw GatewayError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512));
  }
  json j = json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw GatewayError("provider returned non-JSON body");
  return j;
}

class OpenAITransport final : public Transport {
 public:
  explicit OpenAITransport(EndpointConfig ep) : ep_(std::move(ep)) {}

  LlmResponse send(const LlmRequest& request, const ModelProfile& profile) override {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", request.model_id}, {"messages", messages}};
    if (profile.send_decode_params) {
      if (request.params.max_output_tokens) body["max_tokens"] = *request.params.max_output_tokens;
      if (request.params.temperature) body["temperature"] = *request.params.temperature;
    }
    const httplib::Headers headers = {{"Authorization", "Bearer " + api_key(ep_)}};
    LlmResponse out;
    const json j = post_json(ep_, "/chat/completions", headers, body, out.latency_ms);
    try {
      out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      out.tokens_in = j.at("usage").at("prompt_tokens").get<std::int64_t>();
      out.tokens_out = j.at("usage").at("completion_tokens").get<std::int64_t>();
    } catch (const json::exception& e) {
      throw GatewayError(std::string("unexpected chat/completions response: ") + e.what());
    }
    return out;
  }

 private:
  EndpointConfig ep_;
};

class AnthropicTransport final : public Transport {
 public:
  explicit AnthropicTransport(EndpointConfig ep) : ep_(std::move(ep)) {}

  LlmResponse send(const LlmRequest& request, const ModelProfile& profile) override {
    std::string system;
    json messages = json::array();
    for (const auto& m : request.messages) {
      if (m.role == "system") {
        if (!system.empty()) system += "\n\n";
        system += m.content;
      } else {
        messages.push_back({{"role", m.role}, {"content", m.content}});
      }
    }
    json body = {{"model", request.model_id},
                 {"messages", messages},
                 {"max_tokens", request.params.max_output_tokens.value_or(profile.max_output_tokens)}};
    if (!system.empty()) body["system"] = system;
    if (request.params.max_reasoning_tokens) {
      body["thinking"] = {{"type", "enabled"}, {"budget_tokens", *request.params.max_reasoning_tokens}};
    } else if (request.params.temperature) {
      body["temperature"] = *request.params.temperature;
    }
    const httplib::Headers headers = {{"x-api-key", api_key(ep_)}, {"anthropic-version", "2023-06-01"}};
    LlmResponse out;
    const json j = post_json(ep_, "/v1/messages", headers, body, out.latency_ms);
    try {
      for (const auto& block : j.at("content")) {
        if (block.value("type", "") == "text") out.text += block.at("text").get<std::string>();
      }
      out.tokens_in = j.at("usage").at("input_tokens").get<std::int64_t>();
      out.tokens_out = j.at("usage").at("output_tokens").get<std::int64_t>();
    } catch (const json::exception& e) {
      throw GatewayError(std::string("unexpected messages response: ") + e.what());
    }
    return out;
  }

 private:
  EndpointConfig ep_;
};

class RoutingTransport final : public Transport {
 public:
  explicit RoutingTransport(std::map<std::string, ProviderEndpoint> providers) {
    for (auto& [name, p] : providers) {
      if (p.api == "anthropic") routes_.emplace(name, std::make_unique<AnthropicTransport>(std::move(p.endpoint)));
      else if (p.api == "openai") routes_.emplace(name, std::make_unique<OpenAITransport>(std::move(p.endpoint)));
      else throw ConfigError("provider " + name + " has unknown api '" + p.api + "'");
    }
  }

  LlmResponse send(const LlmRequest& request, const ModelProfile& profile) override {
    auto it = routes_.find(profile.provider);
    if (it == routes_.end()) throw GatewayError("no endpoint configured for provider '" + profile.provider + "'");
    return it->second->send(request, profile);
  }

 private:
  std::map<std::string, std::unique_ptr<Transport>> routes_;
};

}  // namespace

std::unique_ptr<Transport> make_openai_transport(EndpointConfig endpoint) {
  return std::make_unique<OpenAITransport>(std::move(endpoint));
}

std::unique_ptr<Transport> make_anthropic_transport(EndpointConfig endpoint) {
  return std::make_unique<AnthropicTransport>(std::move(endpoint));
}

std::unique_ptr<Transport> make_provider_transport(EndpointConfig openai, EndpointConfig anthropic) {
  return make_routing_transport({{"openai", {"openai", std::move(openai)}}, {"anthropic", {"anthropic", std::move(anthropic)}}});
}

std::unique_ptr<Transport> make_routing_transport(std::map<std::string, ProviderEndpoint> providers) {
  return std::make_unique<RoutingTransport>(std::move(providers));
}

}  // namespace apaudit
