#include <benchmark/benchmark.h>

#include "gic/augment.hpp"
#include "gic/inference.hpp"
#include "gic/synth.hpp"
#include "gic/training.hpp"

using namespace gic;

namespace {

struct Fixture {
  Registry registry = default_registry(8, 2, 2, 64);
  ModelBundleF bundle;
  std::vector<Sample> samples;
  PreparedBatch batch;

  Fixture() {
    bundle = init_weights<float>(ExtractorConfig{}, DecoderConfig{}, registry.tasks,
                                 Setting::kTaskAgnosticGenerative, 1, 7);
    bundle.set_requires_grad(true);
    const DatasetSpec& d = *registry.dataset_by_name("Colon-1");
    samples = synth_generate(registry, d, Split::kTrain, 7);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 32 && i < samples.size(); ++i) idx.push_back(i);
    batch = prepare_batch(samples, idx, bundle, false, 0, 7, 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

} // namespace

static void BM_ExtractFeatures(benchmark::State& state) {
  Fixture& f = fixture();
  TapeF tape(false);
  for (auto _ : state) {
    TensorF feats = extract_features(tape, f.bundle, f.batch.images);
    benchmark::DoNotOptimize(feats.data());
  }
}
BENCHMARK(BM_ExtractFeatures);

static void BM_GenerativeLossForward(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    TapeF tape(false);
    TensorF loss = loss_generative(tape, f.bundle, f.batch);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_GenerativeLossForward);

static void BM_GenerativeTrainStep(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    TapeF tape;
    TensorF loss = loss_generative(tape, f.bundle, f.batch);
    tape.backward(loss);
    f.bundle.zero_grad();
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_GenerativeTrainStep);

static void BM_GreedyGenerate(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    Prediction p = greedy_generate(f.bundle, f.samples.front().image);
    benchmark::DoNotOptimize(p.token_ids.data());
  }
}
BENCHMARK(BM_GreedyGenerate);

static void BM_Augment(benchmark::State& state) {
  Fixture& f = fixture();
  Rng rng(3);
  for (auto _ : state) {
    TensorF img = augment(f.samples.front().image, rng);
    benchmark::DoNotOptimize(img.data());
  }
}
BENCHMARK(BM_Augment);

static void BM_SynthImage(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    TensorF img = synth_image(64, 2, 3, 4, ++seed);
    benchmark::DoNotOptimize(img.data());
  }
}
BENCHMARK(BM_SynthImage);

BENCHMARK_MAIN();
