#include "apaudit/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "apaudit/digest.hpp"
#include "apaudit/errors.hpp"

namespace apaudit {

using nlohmann::json;
namespace fs = std::filesystem;

void ModelProfile::validate() const {
  if (model_id.empty()) throw ConfigError("model profile without model_id");
  if (max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive for " + model_id);
  if (max_reasoning_tokens && *max_reasoning_tokens <= 0) {
    throw ConfigError("max_reasoning_tokens must be positive for " + model_id);
  }
  if (price_per_million_in < 0 || price_per_million_out < 0) {
    throw ConfigError("negative price for " + model_id);
  }
  if (provider.empty()) throw ConfigError("model profile " + model_id + " names no provider");
}

std::map<std::string, ModelProfile> default_profiles() {
  std::map<std::string, ModelProfile> out;
  ModelProfile claude;
  claude.model_id = "claude-3-7-sonnet-thinking";
  claude.provider = "anthropic";
  claude.max_output_tokens = 4096;
  claude.max_reasoning_tokens = 2048;
  out.emplace(claude.model_id, claude);

  ModelProfile r1;
  r1.model_id = "deepseek-r1";
  r1.max_output_tokens = 4096;
  out.emplace(r1.model_id, r1);

  // o4-mini runs with the provider defaults; no decode params are sent.
  ModelProfile o4;
  o4.model_id = "o4-mini";
  o4.max_output_tokens = 4096;
  o4.send_decode_params = false;
  out.emplace(o4.model_id, o4);
  return out;
}

namespace {

std::string normalize_ws(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (const char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

json canonical_request(const LlmRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", normalize_ws(m.role)}, {"content", m.content}});
  }
  json params = json::object();
  if (request.params.max_output_tokens) params["max_output_tokens"] = *request.params.max_output_tokens;
  if (request.params.max_reasoning_tokens) params["max_reasoning_tokens"] = *request.params.max_reasoning_tokens;
  if (request.params.temperature) params["temperature"] = *request.params.temperature;
  return {{"model", normalize_ws(request.model_id)}, {"messages", messages}, {"params", params}};
}

std::string request_digest(const LlmRequest& request) { return sha256_hex(canonical_request(request).dump()); }

LlmRequest request_from_json(const json& j) {
  LlmRequest r;
  r.model_id = j.at("model").get<std::string>();
  for (const auto& m : j.at("messages")) {
    r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  }
  if (j.contains("params")) {
    const auto& p = j.at("params");
    if (p.contains("max_output_tokens")) r.params.max_output_tokens = p.at("max_output_tokens").get<int>();
    if (p.contains("max_reasoning_tokens")) r.params.max_reasoning_tokens = p.at("max_reasoning_tokens").get<int>();
    if (p.contains("temperature")) r.params.temperature = p.at("temperature").get<double>();
  }
  return r;
}

GatewayMode parse_gateway_mode(std::string_view s) {
  if (s == "live") return GatewayMode::Live;
  if (s == "record") return GatewayMode::Record;
  if (s == "replay") return GatewayMode::Replay;
  if (s == "hybrid") return GatewayMode::Hybrid;
  throw ConfigError("unknown gateway mode: " + std::string(s));
}

std::string_view to_string(GatewayMode m) noexcept {
  switch (m) {
    case GatewayMode::Live: return "live";
    case GatewayMode::Record: return "record";
    case GatewayMode::Replay: return "replay";
    case GatewayMode::Hybrid: return "hybrid";
  }
  return "replay";
}

double exchange_dollars(const ModelProfile& profile, std::int64_t tokens_in, std::int64_t tokens_out) noexcept {
  return static_cast<double>(tokens_in) * profile.price_per_million_in / 1e6 +
         static_cast<double>(tokens_out) * profile.price_per_million_out / 1e6;
}

void CostLedger::append(LedgerEntry e) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(e));
}

std::vector<LedgerEntry> CostLedger::entries() const {
  std::vector<LedgerEntry> out;
  {
    std::lock_guard lock(mu_);
    out = entries_;
  }
  std::stable_sort(out.begin(), out.end(), [](const LedgerEntry& a, const LedgerEntry& b) {
    return std::tie(a.stage, a.anti_pattern, a.request_digest) < std::tie(b.stage, b.anti_pattern, b.request_digest);
  });
  return out;
}

std::size_t CostLedger::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

CostTable tally_cost(const std::vector<LedgerEntry>& entries, CostGroup group_by) {
  std::map<std::string, CostRow> groups;
  CostTable table;
  table.total.group = "total";
  for (const auto& e : entries) {
    const std::string& key = group_by == CostGroup::Stage ? e.stage : e.anti_pattern;
    CostRow& row = groups[key];
    row.group = key;
    for (CostRow* r : {&row, &table.total}) {
      ++r->calls;
      r->tokens_in += e.tokens_in;
      r->tokens_out += e.tokens_out;
      r->dollars += e.dollars;
      r->seconds += e.seconds;
    }
  }
  for (auto& [_, row] : groups) table.rows.push_back(row);
  return table;
}

json ledger_to_json(const std::vector<LedgerEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"stage", e.stage},
                   {"anti_pattern", e.anti_pattern},
                   {"model", e.model_id},
                   {"request_digest", e.request_digest},
                   {"tokens_in", e.tokens_in},
                   {"tokens_out", e.tokens_out},
                   {"dollars", e.dollars},
                   {"seconds", e.seconds}});
  }
  return arr;
}

json cost_table_to_json(const CostTable& table) {
  auto row_json = [](const CostRow& r) {
    return json{{"group", r.group},
                {"calls", r.calls},
                {"tokens_in", r.tokens_in},
                {"tokens_out", r.tokens_out},
                {"dollars", r.dollars},
                {"seconds", r.seconds}};
  };
  json rows = json::array();
  for (const auto& r : table.rows) rows.push_back(row_json(r));
  return {{"rows", rows}, {"total", row_json(table.total)}};
}

fs::path CassetteStore::path_for(const std::string& digest) const { return dir_ / (digest + ".json"); }

std::optional<LlmResponse> CassetteStore::load(const std::string& digest) const {
  std::ifstream in(path_for(digest), std::ios::binary);
  if (!in) return std::nullopt;
  json j;
  try {
    in >> j;
    const auto& r = j.at("response");
    LlmResponse resp;
    resp.text = r.at("text").get<std::string>();
    resp.tokens_in = r.at("tokens_in").get<std::int64_t>();
    resp.tokens_out = r.at("tokens_out").get<std::int64_t>();
    resp.latency_ms = r.value("latency_ms", 0.0);
    return resp;
  } catch (const json::exception& e) {
    throw GatewayError("corrupt cassette " + path_for(digest).string() + ": " + e.what());
  }
}

void CassetteStore::save(const LlmRequest& request, const std::string& digest, const LlmResponse& response) const {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  const json j = {{"schema", "apaudit.cassette/1"},
                  {"request_digest", digest},
                  {"request", canonical_request(request)},
                  {"response",
                   {{"text", response.text},
                    {"tokens_in", response.tokens_in},
                    {"tokens_out", response.tokens_out},
                    {"latency_ms", response.latency_ms}}}};
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const fs::path tmp = dir_ / ("." + digest + "." + std::to_string(rng()) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw GatewayError("cannot write cassette " + tmp.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path_for(digest), ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw GatewayError("cannot store cassette " + path_for(digest).string());
  }
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)), store_(config_.cassette_dir) {
  for (const auto& [_, p] : config_.profiles) p.validate();
  if (config_.mode != GatewayMode::Live && config_.cassette_dir.empty()) {
    throw ConfigError("gateway mode '" + std::string(to_string(config_.mode)) + "' needs a cassette directory");
  }
}

const ModelProfile& Gateway::profile(std::string_view model_id) const {
  auto it = config_.profiles.find(std::string(model_id));
  if (it == config_.profiles.end()) throw ConfigError("no model profile for '" + std::string(model_id) + "'");
  return it->second;
}

LlmExchange Gateway::complete(LlmRequest request) { return complete(std::move(request), config_.mode); }

LlmExchange Gateway::complete(LlmRequest request, GatewayMode mode) {
  if (request.model_id.empty()) request.model_id = config_.default_model;
  const ModelProfile& prof = profile(request.model_id);
  if (prof.send_decode_params) {
    if (!request.params.max_output_tokens) request.params.max_output_tokens = prof.max_output_tokens;
    if (!request.params.max_reasoning_tokens) request.params.max_reasoning_tokens = prof.max_reasoning_tokens;
    if (!request.params.temperature) request.params.temperature = prof.temperature;
  }
  LlmExchange ex;
  ex.request_digest = request_digest(request);
  std::optional<LlmResponse> hit;
  if (mode == GatewayMode::Replay || mode == GatewayMode::Hybrid) hit = store_.load(ex.request_digest);
  if (hit) {
    ex.response = std::move(*hit);
    ex.replayed = true;
  } else if (mode == GatewayMode::Replay) {
    throw CassetteMiss(ex.request_digest);
  } else {
    ex.response = send_with_retry(request, prof);
    if (mode != GatewayMode::Live) store_.save(request, ex.request_digest, ex.response);
  }
  ledger_.append({request.stage, request.anti_pattern, request.model_id, ex.request_digest, ex.response.tokens_in,
                  ex.response.tokens_out, exchange_dollars(prof, ex.response.tokens_in, ex.response.tokens_out),
                  ex.response.latency_ms / 1000.0});
  ex.request = std::move(request);
  return ex;
}

LlmResponse Gateway::send_with_retry(const LlmRequest& request, const ModelProfile& prof) {
  if (!transport_) throw GatewayError("no transport configured for mode " + std::string(to_string(config_.mode)));
  const RetryPolicy& rp = config_.retry;
  auto backoff = rp.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return transport_->send(request, prof);
    } catch (const TransportError& e) {
      if (attempt >= rp.max_attempts) {
        throw TransportError("transport failed after " + std::to_string(attempt) + " attempts: " + e.what());
      }
    }
    if (rp.sleeper) {
      rp.sleeper(backoff);
    } else {
      std::this_thread::sleep_for(backoff);
    }
    backoff = std::min(rp.max_backoff, std::chrono::milliseconds(static_cast<std::int64_t>(
                                           static_cast<double>(backoff.count()) * rp.multiplier)));
  }
}

std::optional<json> extract_json_object(std::string_view text) {
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = pos; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        json j = json::parse(text.substr(pos, i - pos + 1), nullptr, false);
        if (!j.is_discarded() && j.is_object()) return j;
        break;
      }
    }
    ++pos;
  }
  return std::nullopt;
}

}  // namespace apaudit
