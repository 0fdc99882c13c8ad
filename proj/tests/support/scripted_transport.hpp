#pragma once

// Offline Transport for tests: answers from a responder function or a queue,
// optionally failing the first N calls with a retryable error.

#include <atomic>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "apaudit/errors.hpp"
#include "apaudit/llm_gateway.hpp"

namespace testsupport {

class ScriptedTransport : public apaudit::Transport {
 public:
  using Responder = std::function<std::string(const apaudit::LlmRequest&)>;

  ScriptedTransport() = default;
  explicit ScriptedTransport(Responder r) : responder_(std::move(r)) {}
  explicit ScriptedTransport(std::vector<std::string> replies) : queue_(replies.begin(), replies.end()) {}

  apaudit::LlmResponse send(const apaudit::LlmRequest& request, const apaudit::ModelProfile&) override {
    std::lock_guard lock(mu_);
    ++calls;
    requests.push_back(request);
    if (fail_next > 0) {
      --fail_next;
      throw apaudit::TransportError("scripted 503");
    }
    if (hard_fail) throw apaudit::GatewayError("scripted 400");
    std::string text;
    if (responder_) {
      text = responder_(request);
    } else if (!queue_.empty()) {
      text = queue_.front();
      queue_.pop_front();
    } else {
      throw apaudit::GatewayError("script exhausted");
    }
    apaudit::LlmResponse r;
    r.text = text;
    r.tokens_in = static_cast<std::int64_t>(request.messages.size()) * 1000;
    r.tokens_out = static_cast<std::int64_t>(text.size());
    r.latency_ms = 250.0;
    return r;
  }

  int calls = 0;
  int fail_next = 0;
  bool hard_fail = false;
  std::vector<apaudit::LlmRequest> requests;

 private:
  std::mutex mu_;
  Responder responder_;
  std::deque<std::string> queue_;
};

}  // namespace testsupport
