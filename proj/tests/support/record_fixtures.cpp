// Re-authors the committed end-to-end fixtures: cassettes for synthesis and
// scanning of the planted corpus, the synthesized artifacts, and the
// adversarial cassettes. Run after changing a prompt template or the corpus:
//
//   record_fixtures tests/fixtures/e2e
//
// Every exchange comes from FixtureAuthor, never from a provider.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "apaudit/config.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/retrieval.hpp"
#include "fixture_author.hpp"

using namespace apaudit;
namespace fs = std::filesystem;
using testsupport::AuthorRole;
using testsupport::FixtureAuthor;
using testsupport::PlantedManifest;

namespace {

void write_json(const fs::path& file, const nlohmann::json& j) {
  fs::create_directories(file.parent_path());
  std::ofstream(file, std::ios::binary | std::ios::trunc) << j.dump(2) << "\n";
}

Gateway recording_gateway(const AppConfig& cfg, const fs::path& cassettes, const PlantedManifest& m, AuthorRole role) {
  GatewayConfig g = cfg.gateway;
  g.mode = GatewayMode::Record;
  g.cassette_dir = cassettes;
  return Gateway(g, std::make_shared<FixtureAuthor>(m, role));
}

int check(bool ok, const std::string& what) {
  if (!ok) std::cerr << "FAILED: " << what << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: record_fixtures <fixture dir with planted.json>\n";
    return 2;
  }
  const fs::path root = argv[1];
  try {
    const PlantedManifest m = PlantedManifest::load(root / "planted.json");
    AppConfig cfg = load_app_config(root / "apaudit.json");
    cfg.pipeline.parallelism = 1;
    for (const char* d : {"cassettes", "artifacts", "adversarial"}) fs::remove_all(root / d);

    Gateway g = recording_gateway(cfg, root / "cassettes", m, AuthorRole::Faithful);
    std::vector<std::pair<RetrievalStrategy, DetectionPrompt>> artifacts;
    for (const auto& ap : m.anti_patterns) {
      const AntiPatternSpec spec = load_anti_pattern_spec(m.specs / ap.name);
      RetrievalStrategy s = synthesize_retrieval_strategy(spec, g);
      DetectionPrompt draft = synthesize_detection_prompt(spec, cfg.hint_set(), g);
      DetectionPrompt p = reflect_and_refine(draft, spec, g, cfg.reflection).prompt;
      write_json(root / "artifacts" / ap.name / "strategy.json", to_json(s));
      write_json(root / "artifacts" / ap.name / "prompt.json", to_json(p));
      artifacts.emplace_back(std::move(s), std::move(p));
    }

    const CodeIndex index = index_repository(m.corpus);
    int failures = 0;
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
      const auto& ap = m.anti_patterns[i];
      const PipelineResult r = run_pipeline(index, artifacts[i].first, artifacts[i].second, cfg.pipeline, g);
      const OutcomeCounts& c = r.log.counts;
      std::cout << ap.name << ": " << c.total() << " seeds, " << c.accepted << " accepted, " << c.rejected
                << " rejected, " << c.no_bug << " no bug, " << c.errored << " errors\n";
      for (const auto& s : r.log.seeds) {
        if (s.outcome == SeedOutcome::Error) std::cerr << s.error << "\n";
      }
      failures += check(c.accepted == 1 && c.rejected == 0 && c.errored == 0, ap.name + " outcome counts");
      if (r.reports.size() == 1) {
        const Seed& seed = r.reports[0].candidate.seed;
        failures += check(seed.file + ":" + std::to_string(seed.line) == ap.seed, ap.name + " planted seed");
      }
    }

    const auto& adv = m.adversarial;
    Gateway ga = recording_gateway(cfg, root / "adversarial" / "cassettes", m, AuthorRole::Adversarial);
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
      if (m.anti_patterns[i].name != adv.name) continue;
      const PipelineResult r = run_pipeline(index, artifacts[i].first, artifacts[i].second, cfg.pipeline, ga);
      std::cout << "adversarial " << adv.name << ": " << r.log.counts.rejected << " rejected, "
                << r.log.counts.accepted << " accepted\n";
      failures += check(r.log.counts.rejected == 1 && r.log.counts.accepted == 0, "adversarial outcome counts");
    }
    return failures == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
