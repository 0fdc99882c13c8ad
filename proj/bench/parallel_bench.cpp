// Serial reference versus OpenMP kernel for indexing, seed extraction and the
// per-seed pipeline.

#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "apaudit/config.hpp"
#include "apaudit/detector.hpp"
#include "program_gen.hpp"

using namespace apaudit;
namespace fs = std::filesystem;

namespace {

const fs::path kE2e = fs::path(APAUDIT_SOURCE_DIR) / "tests" / "fixtures" / "e2e";

nlohmann::json load(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

// A repository of generated C files, written once per process.
const fs::path& synthetic_repo() {
  static const fs::path root = [] {
    const fs::path dir = fs::temp_directory_path() / "apaudit_bench_repo";
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (std::uint32_t i = 0; i < 160; ++i) {
      std::ofstream(dir / ("f" + std::to_string(i) + ".c")) << progen::generate(i + 1, 30).source;
    }
    return dir;
  }();
  return root;
}

const CodeIndex& synthetic_index() {
  static const CodeIndex idx = index_repository_serial(synthetic_repo());
  return idx;
}

RetrievalStrategy strategy(const std::string& ap) {
  return strategy_from_json(load(kE2e / "artifacts" / ap / "strategy.json"));
}

void BM_IndexSerial(benchmark::State& st) {
  synthetic_repo();
  for (auto _ : st) benchmark::DoNotOptimize(index_repository_serial(synthetic_repo()));
}

void BM_IndexParallel(benchmark::State& st) {
  synthetic_repo();
  for (auto _ : st) benchmark::DoNotOptimize(index_repository(synthetic_repo()));
}

void BM_ExtractSerial(benchmark::State& st) {
  const auto s = strategy("LZD");
  synthetic_index();
  for (auto _ : st) benchmark::DoNotOptimize(extract_seeds_serial(synthetic_index(), s, {}, 100, 7));
}

void BM_ExtractParallel(benchmark::State& st) {
  const auto s = strategy("LZD");
  synthetic_index();
  for (auto _ : st) benchmark::DoNotOptimize(extract_seeds(synthetic_index(), s, {}, 100, 7));
}

// Replays the committed cassettes, so the timing covers slicing, inlining and
// response handling without any network.
template <bool Serial>
void BM_Pipeline(benchmark::State& st) {
  const AppConfig cfg = load_app_config(kE2e / "apaudit.json");
  const CodeIndex idx = index_repository(kE2e / "corpus");
  std::vector<std::pair<RetrievalStrategy, DetectionPrompt>> aps;
  for (const char* ap : {"ASO", "IZC", "LZD", "MSC", "NOF", "OSO", "UEC"}) {
    aps.emplace_back(strategy(ap), prompt_from_json(load(kE2e / "artifacts" / ap / "prompt.json")));
  }
  for (auto _ : st) {
    Gateway g(cfg.gateway, nullptr);
    for (const auto& [s, p] : aps) {
      benchmark::DoNotOptimize(Serial ? run_pipeline_serial(idx, s, p, cfg.pipeline, g)
                                      : run_pipeline(idx, s, p, cfg.pipeline, g));
    }
  }
}

void BM_PipelineSerial(benchmark::State& st) { BM_Pipeline<true>(st); }
void BM_PipelineParallel(benchmark::State& st) { BM_Pipeline<false>(st); }

}  // namespace

BENCHMARK(BM_IndexSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IndexParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExtractSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ExtractParallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PipelineSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PipelineParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
