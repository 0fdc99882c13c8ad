#pragma once

// Deterministic stand-in for an LLM that authors the committed fixture
// cassettes. It knows the planted bug of every anti-pattern and answers each
// pipeline stage the way a careful auditor would; the adversarial role makes
// the detector cite a line that is not in the context and the validator agree.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "apaudit/llm_gateway.hpp"

namespace testsupport {

struct PlantedStep {
  std::string origin;  // file:line
  std::string description;
};

struct PlantedAntiPattern {
  std::string name;
  nlohmann::json strategy;  // reply to strategy synthesis
  std::string summary;
  std::string seed;  // file:line of the planted seed statement
  std::vector<PlantedStep> path;
  std::string explanation;
};

struct PlantedManifest {
  std::filesystem::path root;
  std::filesystem::path corpus;
  std::filesystem::path specs;
  std::vector<PlantedAntiPattern> anti_patterns;
  PlantedAntiPattern adversarial;  // name is the anti-pattern it attacks

  static PlantedManifest load(const std::filesystem::path& file);
  const PlantedAntiPattern& at(const std::string& name) const;
};

enum class AuthorRole { Faithful, Adversarial };

class FixtureAuthor : public apaudit::Transport {
 public:
  FixtureAuthor(PlantedManifest manifest, AuthorRole role) : manifest_(std::move(manifest)), role_(role) {}

  apaudit::LlmResponse send(const apaudit::LlmRequest& request, const apaudit::ModelProfile& profile) override;

  /// The reply text alone, for tests that inspect it.
  std::string reply(const apaudit::LlmRequest& request) const;

 private:
  std::string detect(const apaudit::LlmRequest& request) const;
  std::string validate(const apaudit::LlmRequest& request) const;

  PlantedManifest manifest_;
  AuthorRole role_;
};

/// file:line of the statement marked /* seed */ in a rendered context, or empty.
std::string seed_origin_in(const std::string& text);

}  // namespace testsupport
