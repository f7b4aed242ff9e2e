#include <benchmark/benchmark.h>

#include "saup/captioner.hpp"
#include "saup/datakit.hpp"
#include "saup/latent.hpp"
#include "saup/losses.hpp"
#include "saup/masks.hpp"
#include "saup/sort.hpp"
#include "saup/tokenizer.hpp"

namespace {

using namespace saup;

NormalizedTensor bench_input(uint64_t seed) {
  Rng rng(seed);
  ImageTensor img(3, ToyCaptioner::kInputSize, ToyCaptioner::kInputSize);
  for (double& v : img.values.data) v = rng.uniform();
  return normalize(img, NormalizationSpec::symmetric(
                            3, ToyCaptioner::kInputSize,
                            ToyCaptioner::kInputSize));
}

void BM_CaptionerLogprobs(benchmark::State& state) {
  ToyCaptioner model(1);
  NormalizedTensor z = bench_input(2);
  std::vector<int> prompt = tokenizer().encode("describe this image");
  std::vector<int> target = {17, 0};
  for (auto _ : state)
    benchmark::DoNotOptimize(model.token_logprobs(z, prompt, target));
}
BENCHMARK(BM_CaptionerLogprobs);

void BM_CaptionerGradient(benchmark::State& state) {
  ToyCaptioner model(1);
  NormalizedTensor z = bench_input(2);
  std::vector<int> prompt = tokenizer().encode("describe this image");
  std::vector<int> target = {17, 0};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        model.sequence_logprob_with_gradient(z, prompt, target));
}
BENCHMARK(BM_CaptionerGradient);

void BM_CombinedLossGradient(benchmark::State& state) {
  ToyCaptioner model(1);
  NormalizedTensor z = bench_input(2);
  SemanticSeparationObjective objective(
      tokenizer().encode("describe this image"), {17, 0},
      {{18, 0}, {19, 0}, {20, 0}, {21, 0}}, LossConfig{});
  for (auto _ : state) {
    Tensor3 grad;
    benchmark::DoNotOptimize(objective.value_and_gradient(model, z, grad));
  }
}
BENCHMARK(BM_CombinedLossGradient);

void BM_OptimizeEpoch(benchmark::State& state) {
  SyntheticConfig data_cfg;
  data_cfg.classes = 2;
  data_cfg.per_class = 7;
  AttackDataset ds = generate_synthetic(data_cfg);
  ToyCaptioner model(1);
  AttackConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(optimize(ds, model, cfg));
}
BENCHMARK(BM_OptimizeEpoch)->Unit(benchmark::kMillisecond);

void BM_FrameMask(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(make_frame_mask(3, 300, 300, 6));
}
BENCHMARK(BM_FrameMask);

void BM_Pca(benchmark::State& state) {
  Rng rng(3);
  Eigen::MatrixXd features(120, 32);
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    for (Eigen::Index j = 0; j < features.cols(); ++j)
      features(i, j) = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(pca(features, 3));
}
BENCHMARK(BM_Pca);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
