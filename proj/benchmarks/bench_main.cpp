#include <benchmark/benchmark.h>

#include <algorithm>
#include <vector>

#include "rsspos/channel.hpp"
#include "rsspos/fit.hpp"
#include "rsspos/geometry.hpp"
#include "rsspos/nn.hpp"
#include "rsspos/random.hpp"

using namespace rsspos;

namespace {

std::vector<AnchorRange> noisy_ranges(Rng& rng, int anchors) {
  const LocalPoint truth{rng.uniform(20, 180), rng.uniform(-20, 20), 0.0};
  std::vector<AnchorRange> out;
  for (int i = 0; i < anchors; ++i) {
    const LocalPoint a{rng.uniform(0, 200), rng.uniform(-30, 30), 0.0};
    out.push_back({a, std::max(0.0, distance(a, truth) + rng.normal(0.0, 1.0))});
  }
  return out;
}

void BM_Multilaterate(benchmark::State& state) {
  Rng rng(1);
  std::vector<std::vector<AnchorRange>> cases;
  for (int i = 0; i < 64; ++i) cases.push_back(noisy_ranges(rng, static_cast<int>(state.range(0))));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(multilaterate(cases[i++ % cases.size()], SolveMode::TwoD));
  }
}
BENCHMARK(BM_Multilaterate)->Arg(3)->Arg(5);

void BM_FitPoly4(benchmark::State& state) {
  const auto survey = generate_survey(default_layout(), ChannelModel{}, 1);
  const auto input = filter_near_field(survey.for_rsu("ap200"), 60.0);
  for (auto _ : state) benchmark::DoNotOptimize(fit_poly4(input));
}
BENCHMARK(BM_FitPoly4);

void BM_GenerateSurvey(benchmark::State& state) {
  const auto layout = default_layout();
  const ChannelModel model;
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(generate_survey(layout, model, seed++));
}
BENCHMARK(BM_GenerateSurvey);

void BM_TrainNetwork(benchmark::State& state) {
  const auto survey = generate_survey(default_layout(), ChannelModel{}, 1);
  const auto data = dataset_from_survey(survey.samples);
  const auto splits = split_dataset(data.size(), 1);
  TrainConfig config;
  config.max_epochs = 1000;
  config.patience = 1000;  // fixed epoch count
  const auto model = init_mlp(3, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(train(model, data, splits, config));
}
BENCHMARK(BM_TrainNetwork)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
