#include <benchmark/benchmark.h>

#include "gic/ops.hpp"
#include "gic/parallel.hpp"
#include "gic/rng.hpp"

using namespace gic;

namespace {

TensorF random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  TensorF t = TensorF::zeros(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

} // namespace

static void BM_Conv2dStem(benchmark::State& state) {
  TensorF img = random_tensor({32, 3, 64, 64}, 1);
  TensorF ker = random_tensor({32, 3, 4, 4}, 2);
  TensorF bias = random_tensor({32}, 3);
  TapeF tape(false);
  for (auto _ : state) {
    TensorF out = conv2d(tape, img, ker, bias, 4, 0);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Conv2dStem);

static void BM_DepthwiseConv7x7(benchmark::State& state) {
  TensorF img = random_tensor({32, 32, 16, 16}, 1);
  TensorF ker = random_tensor({32, 1, 7, 7}, 2);
  TapeF tape(false);
  for (auto _ : state) {
    TensorF out = depthwise_conv2d(tape, img, ker, 1, 3);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_DepthwiseConv7x7);

static void BM_LinearForward(benchmark::State& state) {
  TensorF x = random_tensor({8192, 32}, 1);
  TensorF w = random_tensor({128, 32}, 2);
  TensorF b = random_tensor({128}, 3);
  TapeF tape(false);
  for (auto _ : state) {
    TensorF out = linear(tape, x, w, b);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_LinearForward);

static void BM_LinearTrainStep(benchmark::State& state) {
  TensorF x = random_tensor({8192, 32}, 1).set_requires_grad(true);
  TensorF w = random_tensor({128, 32}, 2).set_requires_grad(true);
  TensorF b = random_tensor({128}, 3).set_requires_grad(true);
  for (auto _ : state) {
    TapeF tape;
    TensorF out = linear(tape, x, w, b);
    TensorF loss = sum(tape, out);
    tape.backward(loss);
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_LinearTrainStep);

static void BM_Attention(benchmark::State& state) {
  TensorF q = random_tensor({32, 4, 6, 32}, 1);
  TensorF k = random_tensor({32, 4, 6, 32}, 2);
  TensorF v = random_tensor({32, 4, 6, 32}, 3);
  TapeF tape(false);
  for (auto _ : state) {
    TensorF out = attention(tape, q, k, v, true);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Attention);

static void BM_LayerNorm(benchmark::State& state) {
  TensorF x = random_tensor({8192, 128}, 1);
  TensorF g = TensorF::full({128}, 1.0f);
  TensorF s = TensorF::zeros({128});
  TapeF tape(false);
  for (auto _ : state) {
    TensorF out = layer_norm(tape, x, g, s, 1e-5f);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_LayerNorm);

static void BM_Gelu(benchmark::State& state) {
  TensorF x = random_tensor({8192, 128}, 1);
  TapeF tape(false);
  for (auto _ : state) {
    TensorF out = gelu(tape, x);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Gelu);

static void BM_SoftmaxRows(benchmark::State& state) {
  TensorF x = random_tensor({4096, 23}, 1);
  TapeF tape(false);
  for (auto _ : state) {
    TensorF out = softmax(tape, x);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_SoftmaxRows);

BENCHMARK_MAIN();
