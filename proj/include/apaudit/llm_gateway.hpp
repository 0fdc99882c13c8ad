#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace apaudit {

struct ModelProfile {
  std::string model_id;
  std::string provider = "openai";  // names an endpoint; see make_routing_transport
  int max_output_tokens = 4096;
  std::optional<int> max_reasoning_tokens;
  double price_per_million_in = 0.0;
  double price_per_million_out = 0.0;
  std::optional<double> temperature;
  bool send_decode_params = true;  // false keeps the provider's defaults

  /// Throws ConfigError when limits or prices are out of range.
  void validate() const;
};

/// Profiles for the three evaluated models; prices are zero until configured.
std::map<std::string, ModelProfile> default_profiles();

struct Message {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const Message&) const = default;
};

struct DecodeParams {
  std::optional<int> max_output_tokens;
  std::optional<int> max_reasoning_tokens;
  std::optional<double> temperature;

  bool operator==(const DecodeParams&) const = default;
};

struct LlmRequest {
  std::string model_id;
  std::vector<Message> messages;
  DecodeParams params;
  // Ledger tags; not part of the request digest.
  std::string stage;
  std::string anti_pattern;
};

struct LlmResponse {
  std::string text;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double latency_ms = 0.0;

  bool operator==(const LlmResponse&) const = default;
};

struct LlmExchange {
  LlmRequest request;
  std::string request_digest;
  LlmResponse response;
  bool replayed = false;
};

/// Sorted keys, whitespace-normalized non-message strings, verbatim messages.
nlohmann::json canonical_request(const LlmRequest& request);

/// SHA-256 of the canonical request bytes.
std::string request_digest(const LlmRequest& request);

/// Reads a request from JSON ({model, messages, params}); key order is irrelevant.
LlmRequest request_from_json(const nlohmann::json& j);

enum class GatewayMode { Live, Record, Replay, Hybrid };

GatewayMode parse_gateway_mode(std::string_view s);
std::string_view to_string(GatewayMode m) noexcept;

class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError for retryable failures, GatewayError otherwise.
  virtual LlmResponse send(const LlmRequest& request, const ModelProfile& profile) = 0;
};

struct EndpointConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key_env = "APAUDIT_API_KEY";
  int timeout_seconds = 300;
};

/// OpenAI-compatible POST {base}/chat/completions.
std::unique_ptr<Transport> make_openai_transport(EndpointConfig endpoint);
/// Anthropic POST {base}/v1/messages with an extended-thinking budget.
std::unique_ptr<Transport> make_anthropic_transport(EndpointConfig endpoint);
/// Chooses per request by profile.provider.
std::unique_ptr<Transport> make_provider_transport(EndpointConfig openai, EndpointConfig anthropic);

struct ProviderEndpoint {
  std::string api = "openai";  // wire format: "openai" or "anthropic"
  EndpointConfig endpoint;
};

/// Routes each request to the endpoint named by profile.provider.
/// Throws ConfigError for an unknown api.
std::unique_ptr<Transport> make_routing_transport(std::map<std::string, ProviderEndpoint> providers);

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  std::function<void(std::chrono::milliseconds)> sleeper;  // defaults to sleep_for
};

struct LedgerEntry {
  std::string stage;
  std::string anti_pattern;
  std::string model_id;
  std::string request_digest;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double dollars = 0.0;
  double seconds = 0.0;

  bool operator==(const LedgerEntry&) const = default;
};

double exchange_dollars(const ModelProfile& profile, std::int64_t tokens_in, std::int64_t tokens_out) noexcept;

/// Append-only, thread-safe.
class CostLedger {
 public:
  void append(LedgerEntry e);
  /// Ordered by (stage, anti_pattern, request_digest) so output is independent of thread timing.
  std::vector<LedgerEntry> entries() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<LedgerEntry> entries_;
};

enum class CostGroup { Stage, AntiPattern };

struct CostRow {
  std::string group;
  std::size_t calls = 0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double dollars = 0.0;
  double seconds = 0.0;
};

struct CostTable {
  std::vector<CostRow> rows;  // sorted by group name
  CostRow total;
};

CostTable tally_cost(const std::vector<LedgerEntry>& entries, CostGroup group_by);

nlohmann::json ledger_to_json(const std::vector<LedgerEntry>& entries);
nlohmann::json cost_table_to_json(const CostTable& table);

/// One `<digest>.json` file per exchange.
class CassetteStore {
 public:
  explicit CassetteStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<LlmResponse> load(const std::string& digest) const;
  /// Write-temp-then-rename, so concurrent writers never expose partial files.
  void save(const LlmRequest& request, const std::string& digest, const LlmResponse& response) const;
  std::filesystem::path path_for(const std::string& digest) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct GatewayConfig {
  GatewayMode mode = GatewayMode::Replay;
  std::filesystem::path cassette_dir;
  std::map<std::string, ModelProfile> profiles = default_profiles();
  std::string default_model = "claude-3-7-sonnet-thinking";
  RetryPolicy retry;
};

class Gateway {
 public:
  /// transport may be null for pure replay.
  Gateway(GatewayConfig config, std::shared_ptr<Transport> transport);

  /// Fills model_id and decode params from the profile when unset.
  LlmExchange complete(LlmRequest request);
  LlmExchange complete(LlmRequest request, GatewayMode mode);

  const ModelProfile& profile(std::string_view model_id) const;
  const std::string& default_model() const noexcept { return config_.default_model; }
  GatewayMode mode() const noexcept { return config_.mode; }
  CostLedger& ledger() noexcept { return ledger_; }
  const CostLedger& ledger() const noexcept { return ledger_; }

 private:
  LlmResponse send_with_retry(const LlmRequest& request, const ModelProfile& profile);

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  CassetteStore store_;
  CostLedger ledger_;
};

/// First JSON object in an LLM reply, tolerating markdown fences and prose around it.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

}  // namespace apaudit
