#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive (plain loops, no shared code with the library) so they
// can serve as oracles for the optimized paths.

#include <cmath>
#include <cstdint>
#include <vector>

#include "gic/tensor.hpp"

namespace oracle {

// Quadruple-loop cross-correlation. Accumulation order per output element:
// input channel, kernel row, kernel column; bias added last. This matches the
// documented order of gic::conv2d exactly, so results must be bit-identical.
template <class S>
gic::Tensor<S> conv2d(const gic::Tensor<S>& input, const gic::Tensor<S>& kernel, const gic::Tensor<S>& bias,
                      int stride, int padding) {
  std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  std::size_t co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  std::size_t st = static_cast<std::size_t>(stride);
  std::size_t oh = (h + 2 * padding - kh) / st + 1;
  std::size_t ow = (w + 2 * padding - kw) / st + 1;
  gic::Tensor<S> out = gic::Tensor<S>::zeros({n, co, oh, ow});
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t oc = 0; oc < co; ++oc)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          S acc = 0;
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                long iy = static_cast<long>(y * st + i) - padding;
                long ix = static_cast<long>(x * st + j) - padding;
                if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 || ix >= static_cast<long>(w)) continue;
                acc += input[((in * ci + c) * h + iy) * w + ix] * kernel[((oc * ci + c) * kh + i) * kw + j];
              }
          out[((in * co + oc) * oh + y) * ow + x] = acc + bias[oc];
        }
  return out;
}

// Per-sample metric counting straight from truth/prediction lists
// (pred < 0 = out-of-vocabulary).
struct NaiveMetrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

inline NaiveMetrics naive_metrics(const std::vector<int>& truths, const std::vector<int>& preds, int num_classes) {
  NaiveMetrics m;
  std::size_t n = truths.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (truths[i] == preds[i]) ++correct;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (preds[i] == c && truths[i] == c) ++tp;
      if (preds[i] == c && truths[i] != c) ++fp;
      if (truths[i] == c && preds[i] != c) ++fn;
    }
    double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    double f = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    sum_p += p;
    sum_r += r;
    sum_f += f;
  }
  // Sum first, divide once: same mean convention as the library.
  m.macro_precision = sum_p / num_classes;
  m.macro_recall = sum_r / num_classes;
  m.macro_f1 = sum_f / num_classes;
  return m;
}

// Direct double-loop evaluation of the quadratic weighted kappa formula over
// an integer K x K matrix (rows = truth).
inline double kappa_double_loop(const std::vector<std::int64_t>& cm, int k) {
  double total = 0.0;
  for (auto v : cm) total += static_cast<double>(v);
  std::vector<double> row(static_cast<std::size_t>(k), 0.0), col(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      row[static_cast<std::size_t>(i)] += cm[static_cast<std::size_t>(i) * k + j] / total;
      col[static_cast<std::size_t>(j)] += cm[static_cast<std::size_t>(i) * k + j] / total;
    }
  double num = 0.0, den = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double w = static_cast<double>((i - j) * (i - j)) / ((k - 1.0) * (k - 1.0));
      num += w * (cm[static_cast<std::size_t>(i) * k + j] / total);
      den += w * row[static_cast<std::size_t>(i)] * col[static_cast<std::size_t>(j)];
    }
  return 1.0 - num / den;
}

// Warm-restart schedule by accumulating cycle start points (the library
// implementation decrements the epoch instead).
inline double scheduler_closed_form(double epoch, double base, double eta_min, double t0, double t_mult) {
  double start = 0.0;
  double t_i = t0;
  while (epoch >= start + t_i) {
    start += t_i;
    t_i *= t_mult;
  }
  double t_cur = epoch - start;
  return eta_min + (base - eta_min) * (1.0 + std::cos(3.141592653589793238462643 * t_cur / t_i)) / 2.0;
}

} // namespace oracle
