#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace apaudit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad flags, missing inputs, malformed artifacts. Maps to the CLI's config exit status.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unknown function id, missing statement, and similar index lookups.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The LLM kept answering outside the requested schema.
class SynthesisError : public Error {
 public:
  SynthesisError(const std::string& what, std::vector<std::string> raw_responses)
      : Error(what), raw_responses_(std::move(raw_responses)) {}

  const std::vector<std::string>& raw_responses() const noexcept { return raw_responses_; }

 private:
  std::vector<std::string> raw_responses_;
};

class GatewayError : public Error {
 public:
  using Error::Error;
};

/// Retryable transport failure (connection errors, 429, 5xx).
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class CassetteMiss : public GatewayError {
 public:
  explicit CassetteMiss(std::string digest)
      : GatewayError("cassette miss for request " + digest), digest_(std::move(digest)) {}

  const std::string& digest() const noexcept { return digest_; }

 private:
  std::string digest_;
};

}  // namespace apaudit
