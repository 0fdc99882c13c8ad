#include "fixture_author.hpp"

#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "apaudit/errors.hpp"

namespace testsupport {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

PlantedAntiPattern planted_from_json(const json& j, const std::string& name) {
  PlantedAntiPattern p;
  p.name = name;
  p.strategy = j.value("strategy", json());
  p.summary = j.value("summary", "");
  p.seed = j.at("seed").get<std::string>();
  for (const auto& s : j.at("path")) p.path.push_back({s.at("origin"), s.at("description")});
  p.explanation = j.at("explanation").get<std::string>();
  return p;
}

const std::string& first_user(const apaudit::LlmRequest& r) {
  for (const auto& m : r.messages) {
    if (m.role == "user") return m.content;
  }
  throw apaudit::GatewayError("fixture author: request has no user message");
}

// Example number -> buggy, as labeled in a synthesis or reflection request.
std::map<int, bool> example_labels(const std::string& text) {
  static const std::regex re(R"(Example (\d+) \[(buggy|non-buggy)\])");
  std::map<int, bool> out;
  for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) {
    out[std::stoi((*it)[1])] = (*it)[2] == "buggy";
  }
  return out;
}

bool has_origin(const std::string& text, const std::string& origin) {
  return text.find("/* origin: " + origin + " */") != std::string::npos;
}

std::int64_t approx_tokens(std::size_t chars) { return static_cast<std::int64_t>(chars / 4 + 1); }

}  // namespace

PlantedManifest PlantedManifest::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw apaudit::ConfigError("cannot open " + file.string());
  const json j = json::parse(in);
  if (j.value("schema", "") != "apaudit.planted/1") throw apaudit::ConfigError("not a planted manifest");
  PlantedManifest m;
  m.root = file.parent_path();
  m.corpus = m.root / j.at("corpus").get<std::string>();
  m.specs = m.root / j.at("specs").get<std::string>();
  for (const auto& a : j.at("anti_patterns")) m.anti_patterns.push_back(planted_from_json(a, a.at("name")));
  const json& adv = j.at("adversarial");
  m.adversarial = planted_from_json(adv, adv.at("anti_pattern"));
  return m;
}

const PlantedAntiPattern& PlantedManifest::at(const std::string& name) const {
  for (const auto& a : anti_patterns) {
    if (a.name == name) return a;
  }
  throw apaudit::LookupError("no planted bug for " + name);
}

std::string seed_origin_in(const std::string& text) {
  static const std::regex origin(R"(/\* origin: (\S+) \*/ /\* seed \*/)");
  std::smatch m;
  return std::regex_search(text, m, origin) ? m[1].str() : std::string();
}

apaudit::LlmResponse FixtureAuthor::send(const apaudit::LlmRequest& request, const apaudit::ModelProfile&) {
  apaudit::LlmResponse r;
  r.text = reply(request);
  std::size_t in_chars = 0;
  for (const auto& m : request.messages) in_chars += m.content.size();
  r.tokens_in = approx_tokens(in_chars);
  r.tokens_out = approx_tokens(r.text.size());
  r.latency_ms = 400.0 + static_cast<double>(r.tokens_out);
  return r;
}

std::string FixtureAuthor::reply(const apaudit::LlmRequest& request) const {
  if (request.stage == "synthesize_strategy") {
    json s = manifest_.at(request.anti_pattern).strategy;
    s["rationale"] = "Seeds sit on the operand where " + request.anti_pattern + " manifests or the value it starts from.";
    return s.dump(2);
  }
  if (request.stage == "synthesize_prompt") {
    const auto& ap = manifest_.at(request.anti_pattern);
    json notes = json::array();
    for (const auto& [k, buggy] : example_labels(first_user(request))) {
      notes.push_back({{"example", k},
                       {"reasoning", buggy ? "Trace the value used on the bug lines back to where it is produced. No "
                                             "check on that path rules out the faulty case, so the example is an "
                                             "instance of " + ap.name + "."
                                           : "The value reaching the risky operation is constrained by a check or "
                                             "handled on every path, so the example is not an instance of " +
                                                 ap.name + "."}});
    }
    return json{{"semantics_summary", ap.summary}, {"annotations", notes}}.dump(2);
  }
  if (request.stage == "reflect_prompt") {
    json checks = json::array();
    for (const auto& [k, buggy] : example_labels(first_user(request))) {
      checks.push_back({{"example", k}, {"predicted", buggy ? "buggy" : "non-buggy"}});
    }
    return json{{"self_check", checks},
                {"critique", "The draft classifies every example correctly; no revision is needed."},
                {"revision", nullptr}}
        .dump(2);
  }
  if (request.stage == "detect") return detect(request);
  if (request.stage == "validate") return validate(request);
  throw apaudit::GatewayError("fixture author: unexpected stage " + request.stage);
}

std::string FixtureAuthor::detect(const apaudit::LlmRequest& request) const {
  const std::string& ctx = first_user(request);
  const std::string seed = seed_origin_in(ctx);
  const PlantedAntiPattern* hit = nullptr;
  if (role_ == AuthorRole::Adversarial) {
    if (request.anti_pattern == manifest_.adversarial.name && seed == manifest_.adversarial.seed) {
      hit = &manifest_.adversarial;
    }
  } else {
    const auto& ap = manifest_.at(request.anti_pattern);
    if (seed == ap.seed) hit = &ap;
  }
  if (!hit) {
    return json{{"verdict", "no_bug"},
                {"path", json::array()},
                {"explanation", "The values reaching the seed statement are constrained on every path."}}
        .dump(2);
  }
  json path = json::array();
  for (const auto& s : hit->path) {
    if (role_ == AuthorRole::Faithful && !has_origin(ctx, s.origin)) {
      throw apaudit::GatewayError("fixture author: planted step " + s.origin + " is missing from the context of " +
                                  seed + ":\n" + ctx);
    }
    path.push_back({{"origin", s.origin}, {"description", s.description}});
  }
  return json{{"verdict", "bug"}, {"path", path}, {"explanation", hit->explanation}}.dump(2);
}

std::string FixtureAuthor::validate(const apaudit::LlmRequest& request) const {
  const std::string& text = first_user(request);
  static const std::regex step(R"(\n(\d+)\. \[([^\]]+)\] )");
  json checks = json::array();
  bool all = true;
  for (std::sregex_iterator it(text.begin(), text.end(), step), end; it != end; ++it) {
    const std::string origin = (*it)[2];
    const bool upheld = role_ == AuthorRole::Adversarial || has_origin(text, origin);
    all = all && upheld;
    checks.push_back({{"step", std::stoi((*it)[1])},
                      {"upheld", upheld},
                      {"reason", upheld ? "The statement at " + origin + " does what the step claims."
                                        : "No statement at " + origin + " appears in the code."}});
  }
  return json{{"checks", checks},
              {"reasons", all ? "Every step is supported by the cited code." : "Some steps cite code that is absent."}}
      .dump(2);
}

}  // namespace testsupport
