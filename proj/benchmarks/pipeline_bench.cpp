#include <benchmark/benchmark.h>

#include <filesystem>

#include "phishintent/evaluation.hpp"
#include "phishintent/parser.hpp"
#include "phishintent/prompting.hpp"

using namespace phishintent;

namespace {

const std::filesystem::path kData = PHISHINTENT_DATA_DIR;

void BM_ParseStrict(benchmark::State& state) {
  const std::string text = render_response(true, IntentCategory::Link,
                                           "The sender pushes a login link with a deadline.",
                                           ExperimentKind::Exp3);
  for (auto _ : state) benchmark::DoNotOptimize(parse_response(text, ExperimentKind::Exp3));
}
BENCHMARK(BM_ParseStrict);

void BM_ParseLenient(benchmark::State& state) {
  const std::string text =
      "Sure, here is my assessment.\n\n**Phishing:** Yes\n- **Category:** phishing via link\n"
      "**Justification:** The sender pushes a login link with a deadline.\n";
  for (auto _ : state) benchmark::DoNotOptimize(parse_response(text, ExperimentKind::Exp3));
}
BENCHMARK(BM_ParseLenient);

void BM_BuildPrompt(benchmark::State& state) {
  const auto kind = static_cast<ExperimentKind>(state.range(0));
  const auto emails = load_dataset(kData / "fixtures" / "validation_100.csv");
  const auto shots = shots_for(load_few_shot_library(kData / "fewshot" / "examples.csv"), kind);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_prompt(emails[i++ % emails.size()], kind, ShotMode::Few, shots));
  }
}
BENCHMARK(BM_BuildPrompt)->DenseRange(0, 2);

void BM_Evaluate(benchmark::State& state) {
  const auto truth = load_dataset(kData / "fixtures" / "validation_100.csv");
  std::vector<RunRecord> runs;
  for (int model = 0; model < state.range(0); ++model) {
    for (const auto& email : truth) {
      RunRecord r;
      r.email_id = email.id;
      r.model_id = "model-" + std::to_string(model);
      r.kind = ExperimentKind::Exp3;
      r.raw_response = render_response(email.is_phishing(), email.intent, "because",
                                       ExperimentKind::Exp3);
      r.outcome = parse_response(r.raw_response, r.kind);
      runs.push_back(std::move(r));
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(runs, truth));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(runs.size()));
}
BENCHMARK(BM_Evaluate)->Arg(1)->Arg(4)->Arg(24);

}  // namespace

BENCHMARK_MAIN();
