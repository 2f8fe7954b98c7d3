#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "gic/parallel.hpp"
#include "gic/tape.hpp"
#include "gic/tensor.hpp"

// Differentiable tensor operations. Conventions shared by every op:
//  - outputs are freshly allocated, row-major and contiguous;
//  - convolution is cross-correlation (no kernel flip);
//  - floating-point accumulation orders are fixed (documented per op) so
//    results are bit-identical for any worker count;
//  - backward closures add into input gradients, which makes accumulation
//    across multiple uses of a tensor additive.

namespace gic {

namespace detail {

template <class S>
void accumulate(Tensor<S>& t, const std::vector<S>& delta) {
  auto g = t.grad();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reductions
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> add(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  std::size_t n = a.size();
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) po[i] = pa[i] + pb[i];
  });
  if (tape.should_record({&a, &b})) {
    tape.record("add", out, [a, b, out]() mutable {
      auto go = out.grad();
      if (Tape<S>::needs_grad(a)) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (Tape<S>::needs_grad(b)) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> sub(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  if (tape.should_record({&a, &b})) {
    tape.record("sub", out, [a, b, out]() mutable {
      auto go = out.grad();
      if (Tape<S>::needs_grad(a)) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (Tape<S>::needs_grad(b)) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> mul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  if (tape.should_record({&a, &b})) {
    tape.record("mul", out, [a, b, out]() mutable {
      auto go = out.grad();
      if (Tape<S>::needs_grad(a)) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * b[i];
      }
      if (Tape<S>::needs_grad(b)) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * a[i];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> scale(Tape<S>& tape, const Tensor<S>& a, S c) {
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  if (tape.should_record({&a})) {
    tape.record("scale", out, [a, out, c]() mutable {
      auto go = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
    });
  }
  return out;
}

// Sum of all elements, in flat index order.
template <class S>
Tensor<S> sum(Tape<S>& tape, const Tensor<S>& a) {
  S acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
  Tensor<S> out = Tensor<S>::scalar(acc);
  if (tape.should_record({&a})) {
    tape.record("sum", out, [a, out]() mutable {
      S g0 = out.grad()[0];
      auto ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g0;
    });
  }
  return out;
}

template <class S>
Tensor<S> mean_all(Tape<S>& tape, const Tensor<S>& a) {
  S acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
  S inv = S(1) / static_cast<S>(a.size());
  Tensor<S> out = Tensor<S>::scalar(acc * inv);
  if (tape.should_record({&a})) {
    tape.record("mean", out, [a, out, inv]() mutable {
      S g0 = out.grad()[0] * inv;
      auto ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g0;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data movement
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> reshape(Tape<S>& tape, const Tensor<S>& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  Tensor<S> out(std::move(shape), std::vector<S>(a.values().begin(), a.values().end()));
  if (tape.should_record({&a})) {
    tape.record("reshape", out, [a, out]() mutable {
      auto go = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> permute(Tape<S>& tape, const Tensor<S>& a, const std::vector<std::size_t>& order) {
  std::size_t r = a.rank();
  if (order.size() != r) throw ShapeError("permute: order rank mismatch");
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = a.dim(order[i]);

  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * a.dim(i);
  // Stride of the input along each output axis.
  std::vector<std::size_t> axis_stride(r);
  for (std::size_t i = 0; i < r; ++i) axis_stride[i] = in_strides[order[i]];

  Tensor<S> out = Tensor<S>::zeros(out_shape);
  const S* pa = a.data();
  S* po = out.data();
  std::size_t n = a.size();
  // Odometer walk over the output index; input offset updated incrementally.
  std::vector<std::size_t> digit(r, 0);
  std::size_t in_off = 0;
  for (std::size_t i = 0; i < n; ++i) {
    po[i] = pa[in_off];
    for (std::size_t ax = r; ax-- > 0;) {
      if (++digit[ax] < out_shape[ax]) {
        in_off += axis_stride[ax];
        break;
      }
      digit[ax] = 0;
      in_off -= axis_stride[ax] * (out_shape[ax] - 1);
    }
  }
  if (tape.should_record({&a})) {
    tape.record("permute", out, [a, out, out_shape, axis_stride]() mutable {
      auto go = out.grad();
      auto ga = a.grad();
      std::size_t r = out_shape.size();
      std::vector<std::size_t> digit(r, 0);
      std::size_t in_off = 0;
      for (std::size_t i = 0; i < go.size(); ++i) {
        ga[in_off] += go[i];
        for (std::size_t ax = r; ax-- > 0;) {
          if (++digit[ax] < out_shape[ax]) {
            in_off += axis_stride[ax];
            break;
          }
          digit[ax] = 0;
          in_off -= axis_stride[ax] * (out_shape[ax] - 1);
        }
      }
    });
  }
  return out;
}

// Concatenates two rank-3 tensors along dim 1.
template <class S>
Tensor<S> concat_dim1(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
    throw ShapeError("concat_dim1: incompatible " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::size_t n = a.dim(0), la = a.dim(1), lb = b.dim(1), d = a.dim(2);
  Tensor<S> out = Tensor<S>::zeros({n, la + lb, d});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * la * d, la * d, out.data() + i * (la + lb) * d);
    std::copy_n(b.data() + i * lb * d, lb * d, out.data() + i * (la + lb) * d + la * d);
  }
  if (tape.should_record({&a, &b})) {
    tape.record("concat_dim1", out, [a, b, out, n, la, lb, d]() mutable {
      auto go = out.grad();
      if (Tape<S>::needs_grad(a)) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < la * d; ++j) ga[i * la * d + j] += go[i * (la + lb) * d + j];
      }
      if (Tape<S>::needs_grad(b)) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < lb * d; ++j) gb[i * lb * d + j] += go[i * (la + lb) * d + la * d + j];
      }
    });
  }
  return out;
}

// Slice [start, start+len) along dim 1 of a rank-3 tensor.
template <class S>
Tensor<S> slice_dim1(Tape<S>& tape, const Tensor<S>& a, std::size_t start, std::size_t len) {
  if (a.rank() != 3 || start + len > a.dim(1)) {
    throw ShapeError("slice_dim1: [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of " + shape_str(a.shape()));
  }
  std::size_t n = a.dim(0), s = a.dim(1), d = a.dim(2);
  Tensor<S> out = Tensor<S>::zeros({n, len, d});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + (i * s + start) * d, len * d, out.data() + i * len * d);
  }
  if (tape.should_record({&a})) {
    tape.record("slice_dim1", out, [a, out, n, s, d, start, len]() mutable {
      auto go = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < len * d; ++j) ga[(i * s + start) * d + j] += go[i * len * d + j];
    });
  }
  return out;
}

// Gathers rows of a rank-2 tensor.
template <class S>
Tensor<S> gather_rows(Tape<S>& tape, const Tensor<S>& a, std::vector<std::size_t> rows) {
  if (a.rank() != 2) throw ShapeError("gather_rows: need rank-2, got " + shape_str(a.shape()));
  std::size_t d = a.dim(1);
  for (std::size_t r : rows) {
    if (r >= a.dim(0)) throw ShapeError("gather_rows: row " + std::to_string(r) + " out of " + shape_str(a.shape()));
  }
  Tensor<S> out = Tensor<S>::zeros({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(a.data() + rows[i] * d, d, out.data() + i * d);
  if (tape.should_record({&a})) {
    tape.record("gather_rows", out, [a, out, rows = std::move(rows), d]() mutable {
      auto go = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) ga[rows[i] * d + j] += go[i * d + j];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding lookups
// ---------------------------------------------------------------------------

// table [V,D], ids flat with prod(lead_shape) entries -> lead_shape + [D].
template <class S>
Tensor<S> embedding(Tape<S>& tape, const Tensor<S>& table, const std::vector<int>& ids, Shape lead_shape) {
  if (table.rank() != 2) throw ShapeError("embedding: table must be rank-2");
  std::size_t v = table.dim(0), d = table.dim(1);
  if (shape_size(lead_shape) != ids.size()) throw ShapeError("embedding: ids/lead_shape mismatch");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw ShapeError("embedding: token id " + std::to_string(id) + " out of vocabulary of size " + std::to_string(v));
    }
  }
  Shape out_shape = lead_shape;
  out_shape.push_back(d);
  Tensor<S> out = Tensor<S>::zeros(out_shape);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(table.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  if (tape.should_record({&table})) {
    tape.record("embedding", out, [table, out, ids, v, d]() mutable {
      auto go = out.grad();
      auto gt = table.grad();
      // Per-table-row scan keeps accumulation order fixed under parallelism.
      parallel_for(v, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t row = lo; row < hi; ++row) {
          for (std::size_t i = 0; i < ids.size(); ++i) {
            if (static_cast<std::size_t>(ids[i]) != row) continue;
            for (std::size_t j = 0; j < d; ++j) gt[row * d + j] += go[i * d + j];
          }
        }
      });
    });
  }
  return out;
}

// x [N,S,D] plus the first S rows of table [P,D] broadcast over the batch.
template <class S>
Tensor<S> add_positions(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& table) {
  if (x.rank() != 3 || table.rank() != 2 || x.dim(2) != table.dim(1)) {
    throw ShapeError("add_positions: incompatible " + shape_str(x.shape()) + " and " + shape_str(table.shape()));
  }
  std::size_t n = x.dim(0), s = x.dim(1), d = x.dim(2);
  if (s > table.dim(0)) {
    throw ShapeError("add_positions: sequence length " + std::to_string(s) + " exceeds position table " +
                     shape_str(table.shape()));
  }
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < s; ++p)
      for (std::size_t j = 0; j < d; ++j) out[(i * s + p) * d + j] = x[(i * s + p) * d + j] + table[p * d + j];
  if (tape.should_record({&x, &table})) {
    tape.record("add_positions", out, [x, table, out, n, s, d]() mutable {
      auto go = out.grad();
      if (Tape<S>::needs_grad(x)) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (Tape<S>::needs_grad(table)) {
        auto gt = table.grad();
        for (std::size_t p = 0; p < s; ++p)
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gt[p * d + j] += go[(i * s + p) * d + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

namespace detail {

// out[r,o] = sum_k in[r,k] * w[o,k] (+ bias[o]), k ascending per output element.
template <class S>
void linear_forward(const S* in, const S* w, const S* bias, S* out, std::size_t rows, std::size_t din,
                    std::size_t dout) {
  // Transposed weight copy gives unit-stride inner loops.
  std::vector<S> wt(din * dout);
  for (std::size_t o = 0; o < dout; ++o)
    for (std::size_t k = 0; k < din; ++k) wt[k * dout + o] = w[o * din + k];
  parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      S* orow = out + r * dout;
      if (bias) {
        std::copy_n(bias, dout, orow);
      } else {
        std::fill_n(orow, dout, S(0));
      }
      const S* irow = in + r * din;
      for (std::size_t k = 0; k < din; ++k) {
        S a = irow[k];
        const S* wrow = wt.data() + k * dout;
        for (std::size_t o = 0; o < dout; ++o) orow[o] += a * wrow[o];
      }
    }
  });
}

} // namespace detail

template <class S>
Tensor<S> linear(Tape<S>& tape, const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>* bias_ptr) {
  if (input.rank() < 1 || weight.rank() != 2) {
    throw ShapeError("linear: weight must be rank-2, got " + shape_str(weight.shape()));
  }
  std::size_t din = weight.dim(1), dout = weight.dim(0);
  if (input.dim(input.rank() - 1) != din) {
    throw ShapeError("linear: input trailing extent " + std::to_string(input.dim(input.rank() - 1)) +
                     " != weight d_in " + std::to_string(din));
  }
  if (bias_ptr && (bias_ptr->rank() != 1 || bias_ptr->dim(0) != dout)) {
    throw ShapeError("linear: bias extent != d_out " + std::to_string(dout));
  }
  std::size_t rows = input.size() / din;
  Shape out_shape = input.shape();
  out_shape.back() = dout;
  Tensor<S> out = Tensor<S>::zeros(out_shape);
  detail::linear_forward(input.data(), weight.data(), bias_ptr ? bias_ptr->data() : nullptr, out.data(), rows, din,
                         dout);

  Tensor<S> bias = bias_ptr ? *bias_ptr : Tensor<S>();
  bool rec = bias_ptr ? tape.should_record({&input, &weight, bias_ptr}) : tape.should_record({&input, &weight});
  if (rec) {
    tape.record("linear", out, [input, weight, bias, out, rows, din, dout]() mutable {
      auto go = out.grad();
      const S* pgo = go.data();
      if (Tape<S>::needs_grad(input)) {
        auto gi = input.grad();
        S* pgi = gi.data();
        const S* pw = weight.data();
        // d_in[r,k] = sum_o go[r,o] * w[o,k], o ascending.
        parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t r = lo; r < hi; ++r) {
            const S* gorow = pgo + r * dout;
            S* girow = pgi + r * din;
            for (std::size_t o = 0; o < dout; ++o) {
              S g = gorow[o];
              const S* wrow = pw + o * din;
              for (std::size_t k = 0; k < din; ++k) girow[k] += g * wrow[k];
            }
          }
        });
      }
      if (Tape<S>::needs_grad(weight)) {
        auto gw = weight.grad();
        S* pgw = gw.data();
        const S* pin = input.data();
        // d_w[o,k] = sum_r go[r,o] * in[r,k], r ascending. The transposed
        // copy of go turns the row scan into unit-stride reads.
        std::vector<S> got(dout * rows);
        parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t r = lo; r < hi; ++r)
            for (std::size_t o = 0; o < dout; ++o) got[o * rows + r] = pgo[r * dout + o];
        });
        parallel_for(dout, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t o = lo; o < hi; ++o) {
            S* gwrow = pgw + o * din;
            const S* gcol = got.data() + o * rows;
            for (std::size_t r = 0; r < rows; ++r) {
              S g = gcol[r];
              const S* irow = pin + r * din;
              for (std::size_t k = 0; k < din; ++k) gwrow[k] += g * irow[k];
            }
          }
        });
      }
      if (bias.defined() && Tape<S>::needs_grad(bias)) {
        auto gb = bias.grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < dout; ++o) gb[o] += pgo[r * dout + o];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> linear(Tape<S>& tape, const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>& bias) {
  return linear(tape, input, weight, &bias);
}

template <class S>
Tensor<S> linear_nobias(Tape<S>& tape, const Tensor<S>& input, const Tensor<S>& weight) {
  return linear<S>(tape, input, weight, nullptr);
}

// ---------------------------------------------------------------------------
// Normalization and activations
// ---------------------------------------------------------------------------

// Standardizes the last axis (biased variance) then applies gain/shift.
template <class S>
Tensor<S> layer_norm(Tape<S>& tape, const Tensor<S>& input, const Tensor<S>& gain, const Tensor<S>& shift, S eps) {
  std::size_t d = input.dim(input.rank() - 1);
  if (gain.size() != d || shift.size() != d) {
    throw ShapeError("layer_norm: gain/shift extent != " + std::to_string(d));
  }
  if (!(eps > S(0))) throw ShapeError("layer_norm: eps must be > 0");
  std::size_t rows = input.size() / d;
  Tensor<S> out = Tensor<S>::zeros(input.shape());
  auto mean = std::make_shared<std::vector<S>>(rows);
  auto rstd = std::make_shared<std::vector<S>>(rows);
  const S* pin = input.data();
  const S* pg = gain.data();
  const S* pb = shift.data();
  S* po = out.data();
  parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      const S* x = pin + r * d;
      S m = 0;
      for (std::size_t j = 0; j < d; ++j) m += x[j];
      m /= static_cast<S>(d);
      S var = 0;
      for (std::size_t j = 0; j < d; ++j) var += (x[j] - m) * (x[j] - m);
      var /= static_cast<S>(d);
      S rs = S(1) / std::sqrt(var + eps);
      (*mean)[r] = m;
      (*rstd)[r] = rs;
      S* y = po + r * d;
      for (std::size_t j = 0; j < d; ++j) y[j] = (x[j] - m) * rs * pg[j] + pb[j];
    }
  });
  if (tape.should_record({&input, &gain, &shift})) {
    tape.record("layer_norm", out, [input, gain, shift, out, mean, rstd, rows, d]() mutable {
      auto go = out.grad();
      const S* pgo = go.data();
      const S* pin = input.data();
      const S* pg = gain.data();
      if (Tape<S>::needs_grad(input)) {
        auto gi = input.grad();
        S* pgi = gi.data();
        parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t r = lo; r < hi; ++r) {
            const S* x = pin + r * d;
            const S* dy = pgo + r * d;
            S m = (*mean)[r], rs = (*rstd)[r];
            S s1 = 0, s2 = 0;
            for (std::size_t j = 0; j < d; ++j) {
              S xhat = (x[j] - m) * rs;
              S dyw = dy[j] * pg[j];
              s1 += dyw;
              s2 += dyw * xhat;
            }
            s1 /= static_cast<S>(d);
            s2 /= static_cast<S>(d);
            S* gx = pgi + r * d;
            for (std::size_t j = 0; j < d; ++j) {
              S xhat = (x[j] - m) * rs;
              gx[j] += rs * (dy[j] * pg[j] - s1 - xhat * s2);
            }
          }
        });
      }
      if (Tape<S>::needs_grad(gain)) {
        auto gg = gain.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const S* x = pin + r * d;
          const S* dy = pgo + r * d;
          S m = (*mean)[r], rs = (*rstd)[r];
          for (std::size_t j = 0; j < d; ++j) gg[j] += dy[j] * (x[j] - m) * rs;
        }
      }
      if (Tape<S>::needs_grad(shift)) {
        auto gs = shift.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const S* dy = pgo + r * d;
          for (std::size_t j = 0; j < d; ++j) gs[j] += dy[j];
        }
      }
    });
  }
  return out;
}

// Exact error-function GELU: x/2 * (1 + erf(x/sqrt(2))). The forward pass
// saves the Gaussian CDF term for reuse in backward.
template <class S>
Tensor<S> gelu(Tape<S>& tape, const Tensor<S>& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const S* px = x.data();
  S* po = out.data();
  bool rec = tape.should_record({&x});
  auto cdf = std::make_shared<std::vector<S>>(rec ? x.size() : 0);
  parallel_for(x.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double v = static_cast<double>(px[i]);
      double c = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      if (rec) (*cdf)[i] = static_cast<S>(c);
      po[i] = static_cast<S>(v * c);
    }
  });
  if (rec) {
    tape.record("gelu", out, [x, out, cdf]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      const S* px = x.data();
      const S* pgo = go.data();
      S* pgx = gx.data();
      parallel_for(x.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          double v = static_cast<double>(px[i]);
          double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
          pgx[i] += pgo[i] * static_cast<S>(static_cast<double>((*cdf)[i]) + v * pdf);
        }
      });
    });
  }
  return out;
}

// Max-subtracted softmax over the last axis.
template <class S>
Tensor<S> softmax(Tape<S>& tape, const Tensor<S>& x) {
  std::size_t d = x.dim(x.rank() - 1);
  std::size_t rows = x.size() / d;
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const S* px = x.data();
  S* po = out.data();
  parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      const S* row = px + r * d;
      S* y = po + r * d;
      S m = row[0];
      for (std::size_t j = 1; j < d; ++j) m = std::max(m, row[j]);
      S z = 0;
      for (std::size_t j = 0; j < d; ++j) {
        y[j] = std::exp(row[j] - m);
        z += y[j];
      }
      S inv = S(1) / z;
      for (std::size_t j = 0; j < d; ++j) y[j] *= inv;
    }
  });
  if (tape.should_record({&x})) {
    tape.record("softmax", out, [x, out, rows, d]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      const S* p = out.data();
      const S* pgo = go.data();
      S* pgx = gx.data();
      parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
          const S* prow = p + r * d;
          const S* dy = pgo + r * d;
          S dot = 0;
          for (std::size_t j = 0; j < d; ++j) dot += dy[j] * prow[j];
          S* gxr = pgx + r * d;
          for (std::size_t j = 0; j < d; ++j) gxr[j] += prow[j] * (dy[j] - dot);
        }
      });
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

// Scaled dot-product attention: softmax(Q Kᵀ / sqrt(dk) + mask) V over the two
// trailing axes; leading axes are batch groups. The causal mask (aligned to
// the sequence end) forbids attending to later positions.
template <class S>
Tensor<S> attention(Tape<S>& tape, const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v, bool causal) {
  if (q.rank() < 2 || q.rank() != k.rank() || q.rank() != v.rank()) {
    throw ShapeError("attention: Q/K/V must share rank >= 2");
  }
  std::size_t r = q.rank();
  std::size_t dk = q.dim(r - 1);
  std::size_t tq = q.dim(r - 2);
  std::size_t tk = k.dim(r - 2);
  if (k.dim(r - 1) != dk) {
    throw ShapeError("attention: K trailing extent " + std::to_string(k.dim(r - 1)) + " != Q dk " + std::to_string(dk));
  }
  if (v.dim(r - 2) != tk) {
    throw ShapeError("attention: V rows " + std::to_string(v.dim(r - 2)) + " != K rows " + std::to_string(tk));
  }
  std::size_t dv = v.dim(r - 1);
  std::size_t groups = 1;
  for (std::size_t i = 0; i + 2 < r; ++i) {
    if (q.dim(i) != k.dim(i) || q.dim(i) != v.dim(i)) throw ShapeError("attention: leading extents differ");
    groups *= q.dim(i);
  }
  if (causal && tk < tq) throw ShapeError("attention: causal mask needs Tk >= Tq");

  Shape out_shape = q.shape();
  out_shape[r - 1] = dv;
  Tensor<S> out = Tensor<S>::zeros(out_shape);
  auto probs = std::make_shared<std::vector<S>>(groups * tq * tk);
  const S* pq = q.data();
  const S* pk = k.data();
  const S* pv = v.data();
  S* po = out.data();
  S* pp = probs->data();
  const S inv_sqrt_dk = S(1) / std::sqrt(static_cast<S>(dk));
  const std::size_t offset = tk - tq; // causal alignment to the end
  const S neg_inf = -std::numeric_limits<S>::infinity();

  parallel_for(groups, [&](std::size_t lo, std::size_t hi) {
    std::vector<S> scores(tk);
    for (std::size_t g = lo; g < hi; ++g) {
      const S* qg = pq + g * tq * dk;
      const S* kg = pk + g * tk * dk;
      const S* vg = pv + g * tk * dv;
      for (std::size_t i = 0; i < tq; ++i) {
        std::size_t limit = causal ? (i + offset + 1) : tk;
        for (std::size_t j = 0; j < tk; ++j) {
          if (j >= limit) {
            scores[j] = neg_inf;
            continue;
          }
          S acc = 0;
          for (std::size_t c = 0; c < dk; ++c) acc += qg[i * dk + c] * kg[j * dk + c];
          scores[j] = acc * inv_sqrt_dk;
        }
        S m = scores[0];
        for (std::size_t j = 1; j < limit && j < tk; ++j) m = std::max(m, scores[j]);
        S z = 0;
        S* prow = pp + (g * tq + i) * tk;
        for (std::size_t j = 0; j < tk; ++j) {
          prow[j] = j < limit ? std::exp(scores[j] - m) : S(0);
          z += prow[j];
        }
        S inv = S(1) / z;
        for (std::size_t j = 0; j < tk; ++j) prow[j] *= inv;
        S* orow = po + (g * tq + i) * dv;
        for (std::size_t c = 0; c < dv; ++c) orow[c] = S(0);
        for (std::size_t j = 0; j < limit && j < tk; ++j) {
          S w = prow[j];
          const S* vrow = vg + j * dv;
          for (std::size_t c = 0; c < dv; ++c) orow[c] += w * vrow[c];
        }
      }
    }
  });

  if (tape.should_record({&q, &k, &v})) {
    tape.record("attention", out, [q, k, v, out, probs, groups, tq, tk, dk, dv, inv_sqrt_dk]() mutable {
      auto go = out.grad();
      const S* pgo = go.data();
      const S* pq = q.data();
      const S* pk = k.data();
      const S* pv = v.data();
      const S* pp = probs->data();
      bool need_q = Tape<S>::needs_grad(q);
      bool need_k = Tape<S>::needs_grad(k);
      bool need_v = Tape<S>::needs_grad(v);
      S* pgq = need_q ? q.grad().data() : nullptr;
      S* pgk = need_k ? k.grad().data() : nullptr;
      S* pgv = need_v ? v.grad().data() : nullptr;
      parallel_for(groups, [&](std::size_t lo, std::size_t hi) {
        std::vector<S> dscores(tk);
        for (std::size_t g = lo; g < hi; ++g) {
          const S* qg = pq + g * tq * dk;
          const S* kg = pk + g * tk * dk;
          const S* vg = pv + g * tk * dv;
          for (std::size_t i = 0; i < tq; ++i) {
            const S* prow = pp + (g * tq + i) * tk;
            const S* dyrow = pgo + (g * tq + i) * dv;
            // dprobs then softmax backward; masked entries have p == 0.
            S dot = 0;
            for (std::size_t j = 0; j < tk; ++j) {
              S dp = 0;
              const S* vrow = vg + j * dv;
              for (std::size_t c = 0; c < dv; ++c) dp += dyrow[c] * vrow[c];
              dscores[j] = dp;
              dot += dp * prow[j];
            }
            for (std::size_t j = 0; j < tk; ++j) dscores[j] = prow[j] * (dscores[j] - dot) * inv_sqrt_dk;
            if (need_v && pgv) {
              for (std::size_t j = 0; j < tk; ++j) {
                S w = prow[j];
                if (w == S(0)) continue;
                S* gvrow = pgv + (g * tk + j) * dv;
                for (std::size_t c = 0; c < dv; ++c) gvrow[c] += w * dyrow[c];
              }
            }
            if (need_q && pgq) {
              S* gqrow = pgq + (g * tq + i) * dk;
              for (std::size_t j = 0; j < tk; ++j) {
                S ds = dscores[j];
                if (ds == S(0)) continue;
                const S* krow = kg + j * dk;
                for (std::size_t c = 0; c < dk; ++c) gqrow[c] += ds * krow[c];
              }
            }
            if (need_k && pgk) {
              const S* qrow = qg + i * dk;
              for (std::size_t j = 0; j < tk; ++j) {
                S ds = dscores[j];
                if (ds == S(0)) continue;
                S* gkrow = pgk + (g * tk + j) * dk;
                for (std::size_t c = 0; c < dk; ++c) gkrow[c] += ds * qrow[c];
              }
            }
          }
        }
      });
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolutions and pooling
// ---------------------------------------------------------------------------

namespace detail {

inline void check_conv_pre(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw, int stride, int padding) {
  if (stride < 1) throw ShapeError("conv: stride " + std::to_string(stride) + " < 1");
  if (padding < 0) throw ShapeError("conv: negative padding");
  if (kh > h + 2 * static_cast<std::size_t>(padding)) {
    throw ShapeError("conv: kernel height " + std::to_string(kh) + " exceeds padded input height " +
                     std::to_string(h + 2 * padding));
  }
  if (kw > w + 2 * static_cast<std::size_t>(padding)) {
    throw ShapeError("conv: kernel width " + std::to_string(kw) + " exceeds padded input width " +
                     std::to_string(w + 2 * padding));
  }
}

} // namespace detail

// Cross-correlation. Per output element the accumulation order is input
// channel, then kernel row, then kernel column; bias is added last.
template <class S>
Tensor<S> conv2d(Tape<S>& tape, const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias, int stride,
                 int padding) {
  if (input.rank() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (kernel.rank() != 4) throw ShapeError("conv2d: kernel must be [Co,Ci,kh,kw], got " + shape_str(kernel.shape()));
  std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  std::size_t co = kernel.dim(0), kci = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kci != ci) {
    throw ShapeError("conv2d: kernel input channels " + std::to_string(kci) + " != input channels " +
                     std::to_string(ci));
  }
  if (bias.size() != co) throw ShapeError("conv2d: bias extent != output channels " + std::to_string(co));
  detail::check_conv_pre(h, w, kh, kw, stride, padding);
  std::size_t st = static_cast<std::size_t>(stride);
  std::size_t oh = (h + 2 * padding - kh) / st + 1;
  std::size_t ow = (w + 2 * padding - kw) / st + 1;
  Tensor<S> out = Tensor<S>::zeros({n, co, oh, ow});
  const S* pin = input.data();
  const S* pkr = kernel.data();
  const S* pb = bias.data();
  S* po = out.data();
  parallel_for(n * co, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t nc = lo; nc < hi; ++nc) {
      std::size_t in = nc / co, oc = nc % co;
      const S* img = pin + in * ci * h * w;
      const S* ker = pkr + oc * ci * kh * kw;
      S* dst = po + nc * oh * ow;
      if (padding == 0) { // every tap is in bounds; same accumulation order
        for (std::size_t y = 0; y < oh; ++y) {
          for (std::size_t x = 0; x < ow; ++x) {
            S acc = 0;
            for (std::size_t c = 0; c < ci; ++c) {
              const S* ip = img + c * h * w + y * st * w + x * st;
              const S* kp = ker + c * kh * kw;
              for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j) acc += ip[i * w + j] * kp[i * kw + j];
            }
            dst[y * ow + x] = acc + pb[oc];
          }
        }
        continue;
      }
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          S acc = 0;
          for (std::size_t c = 0; c < ci; ++c) {
            for (std::size_t i = 0; i < kh; ++i) {
              std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * st + i) - padding;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t j = 0; j < kw; ++j) {
                std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * st + j) - padding;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                acc += img[(c * h + iy) * w + ix] * ker[(c * kh + i) * kw + j];
              }
            }
          }
          dst[y * ow + x] = acc + pb[oc];
        }
      }
    }
  });
  if (tape.should_record({&input, &kernel, &bias})) {
    tape.record("conv2d", out,
                [input, kernel, bias, out, n, ci, h, w, co, kh, kw, oh, ow, st, padding]() mutable {
      auto go = out.grad();
      const S* pgo = go.data();
      const S* pin = input.data();
      const S* pkr = kernel.data();
      if (Tape<S>::needs_grad(bias)) {
        auto gb = bias.grad();
        for (std::size_t in = 0; in < n; ++in)
          for (std::size_t oc = 0; oc < co; ++oc) {
            const S* src = pgo + (in * co + oc) * oh * ow;
            S acc = 0;
            for (std::size_t i = 0; i < oh * ow; ++i) acc += src[i];
            gb[oc] += acc;
          }
      }
      if (Tape<S>::needs_grad(kernel)) {
        auto gk = kernel.grad();
        S* pgk = gk.data();
        parallel_for(co, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t oc = lo; oc < hi; ++oc) {
            for (std::size_t c = 0; c < ci; ++c)
              for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j) {
                  S acc = 0;
                  for (std::size_t in = 0; in < n; ++in) {
                    const S* img = pin + (in * ci + c) * h * w;
                    const S* src = pgo + (in * co + oc) * oh * ow;
                    if (padding == 0) {
                      for (std::size_t y = 0; y < oh; ++y) {
                        const S* irow = img + (y * st + i) * w + j;
                        const S* grow = src + y * ow;
                        for (std::size_t x = 0; x < ow; ++x) acc += grow[x] * irow[x * st];
                      }
                      continue;
                    }
                    for (std::size_t y = 0; y < oh; ++y) {
                      std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * st + i) - padding;
                      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                      for (std::size_t x = 0; x < ow; ++x) {
                        std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * st + j) - padding;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        acc += src[y * ow + x] * img[iy * w + ix];
                      }
                    }
                  }
                  pgk[((oc * ci + c) * kh + i) * kw + j] += acc;
                }
          }
        });
      }
      if (Tape<S>::needs_grad(input)) {
        auto gi = input.grad();
        S* pgi = gi.data();
        parallel_for(n * ci, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t nc = lo; nc < hi; ++nc) {
            std::size_t in = nc / ci, c = nc % ci;
            S* gimg = pgi + nc * h * w;
            for (std::size_t oc = 0; oc < co; ++oc) {
              const S* src = pgo + (in * co + oc) * oh * ow;
              const S* ker = pkr + (oc * ci + c) * kh * kw;
              if (padding == 0) {
                for (std::size_t y = 0; y < oh; ++y)
                  for (std::size_t i = 0; i < kh; ++i) {
                    S* grow = gimg + (y * st + i) * w;
                    const S* srow = src + y * ow;
                    for (std::size_t x = 0; x < ow; ++x) {
                      S g = srow[x];
                      S* gp = grow + x * st;
                      for (std::size_t j = 0; j < kw; ++j) gp[j] += g * ker[i * kw + j];
                    }
                  }
                continue;
              }
              for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t i = 0; i < kh; ++i) {
                  std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * st + i) - padding;
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                  for (std::size_t x = 0; x < ow; ++x) {
                    S g = src[y * ow + x];
                    for (std::size_t j = 0; j < kw; ++j) {
                      std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * st + j) - padding;
                      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                      gimg[iy * w + ix] += g * ker[i * kw + j];
                    }
                  }
                }
            }
          }
        });
      }
    });
  }
  return out;
}

namespace detail {

// Copies one H x W plane into a zero-padded (H+2p) x (W+2p) buffer.
template <class S>
void pad_plane(const S* src, std::size_t h, std::size_t w, std::size_t pad, std::vector<S>& dst) {
  std::size_t pw = w + 2 * pad;
  std::fill(dst.begin(), dst.end(), S(0));
  for (std::size_t y = 0; y < h; ++y) std::copy_n(src + y * w, w, dst.data() + (y + pad) * pw + pad);
}

} // namespace detail

// Per-channel cross-correlation; kernel [C,1,kh,kw], no bias. The per-plane
// accumulation runs tap-major over a zero-padded copy, which keeps the
// summation order fixed while letting the pixel loops vectorize.
template <class S>
Tensor<S> depthwise_conv2d(Tape<S>& tape, const Tensor<S>& input, const Tensor<S>& kernel, int stride, int padding) {
  if (input.rank() != 4) throw ShapeError("depthwise_conv2d: input must be [N,C,H,W]");
  if (kernel.rank() != 4 || kernel.dim(1) != 1) {
    throw ShapeError("depthwise_conv2d: kernel must be [C,1,kh,kw], got " + shape_str(kernel.shape()));
  }
  std::size_t n = input.dim(0), ch = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (kernel.dim(0) != ch) {
    throw ShapeError("depthwise_conv2d: kernel channels " + std::to_string(kernel.dim(0)) + " != input channels " +
                     std::to_string(ch));
  }
  std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
  detail::check_conv_pre(h, w, kh, kw, stride, padding);
  std::size_t st = static_cast<std::size_t>(stride);
  std::size_t pad = static_cast<std::size_t>(padding);
  std::size_t oh = (h + 2 * pad - kh) / st + 1;
  std::size_t ow = (w + 2 * pad - kw) / st + 1;
  std::size_t pw = w + 2 * pad;
  Tensor<S> out = Tensor<S>::zeros({n, ch, oh, ow});
  const S* pin = input.data();
  const S* pkr = kernel.data();
  S* po = out.data();
  parallel_for(n * ch, [&](std::size_t lo, std::size_t hi) {
    std::vector<S> padded(pw * (h + 2 * pad));
    for (std::size_t nc = lo; nc < hi; ++nc) {
      std::size_t c = nc % ch;
      detail::pad_plane(pin + nc * h * w, h, w, pad, padded);
      const S* ker = pkr + c * kh * kw;
      S* dst = po + nc * oh * ow;
      std::fill_n(dst, oh * ow, S(0));
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          S kv = ker[i * kw + j];
          for (std::size_t y = 0; y < oh; ++y) {
            const S* row = padded.data() + (y * st + i) * pw + j;
            S* orow = dst + y * ow;
            if (st == 1) {
              for (std::size_t x = 0; x < ow; ++x) orow[x] += kv * row[x];
            } else {
              for (std::size_t x = 0; x < ow; ++x) orow[x] += kv * row[x * st];
            }
          }
        }
    }
  });
  if (tape.should_record({&input, &kernel})) {
    tape.record("depthwise_conv2d", out, [input, kernel, out, n, ch, h, w, kh, kw, oh, ow, st, pad, pw]() mutable {
      auto go = out.grad();
      const S* pgo = go.data();
      const S* pin = input.data();
      const S* pkr = kernel.data();
      if (Tape<S>::needs_grad(kernel)) {
        auto gk = kernel.grad();
        S* pgk = gk.data();
        parallel_for(ch, [&](std::size_t lo, std::size_t hi) {
          std::vector<S> padded(pw * (h + 2 * pad));
          for (std::size_t c = lo; c < hi; ++c) {
            for (std::size_t in = 0; in < n; ++in) {
              detail::pad_plane(pin + (in * ch + c) * h * w, h, w, pad, padded);
              const S* src = pgo + (in * ch + c) * oh * ow;
              for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j) {
                  S acc = 0;
                  for (std::size_t y = 0; y < oh; ++y) {
                    const S* row = padded.data() + (y * st + i) * pw + j;
                    const S* grow = src + y * ow;
                    if (st == 1) {
                      for (std::size_t x = 0; x < ow; ++x) acc += grow[x] * row[x];
                    } else {
                      for (std::size_t x = 0; x < ow; ++x) acc += grow[x] * row[x * st];
                    }
                  }
                  pgk[(c * kh + i) * kw + j] += acc;
                }
            }
          }
        });
      }
      if (Tape<S>::needs_grad(input)) {
        auto gi = input.grad();
        S* pgi = gi.data();
        parallel_for(n * ch, [&](std::size_t lo, std::size_t hi) {
          std::vector<S> gpad(pw * (h + 2 * pad));
          for (std::size_t nc = lo; nc < hi; ++nc) {
            std::size_t c = nc % ch;
            const S* src = pgo + nc * oh * ow;
            const S* ker = pkr + c * kh * kw;
            std::fill(gpad.begin(), gpad.end(), S(0));
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                S kv = ker[i * kw + j];
                for (std::size_t y = 0; y < oh; ++y) {
                  S* row = gpad.data() + (y * st + i) * pw + j;
                  const S* grow = src + y * ow;
                  if (st == 1) {
                    for (std::size_t x = 0; x < ow; ++x) row[x] += kv * grow[x];
                  } else {
                    for (std::size_t x = 0; x < ow; ++x) row[x * st] += kv * grow[x];
                  }
                }
              }
            S* gimg = pgi + nc * h * w;
            for (std::size_t y = 0; y < h; ++y)
              for (std::size_t x = 0; x < w; ++x) gimg[y * w + x] += gpad[(y + pad) * pw + x + pad];
          }
        });
      }
    });
  }
  return out;
}

// [N,C,H,W] -> [N,C] spatial mean.
template <class S>
Tensor<S> global_avg_pool(Tape<S>& tape, const Tensor<S>& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool: input must be [N,C,H,W]");
  std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<S> out = Tensor<S>::zeros({n, c});
  S inv = S(1) / static_cast<S>(hw);
  for (std::size_t i = 0; i < n * c; ++i) {
    const S* src = x.data() + i * hw;
    S acc = 0;
    for (std::size_t j = 0; j < hw; ++j) acc += src[j];
    out[i] = acc * inv;
  }
  if (tape.should_record({&x})) {
    tape.record("global_avg_pool", out, [x, out, n, c, hw, inv]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < n * c; ++i) {
        S g = go[i] * inv;
        S* dst = gx.data() + i * hw;
        for (std::size_t j = 0; j < hw; ++j) dst[j] += g;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-entropy
// ---------------------------------------------------------------------------

// Mean negative log-likelihood over positions whose target != ignore_index.
// logits may be [B,T,V] or [R,V]; targets has one entry per row.
template <class S>
Tensor<S> cross_entropy(Tape<S>& tape, const Tensor<S>& logits, const std::vector<int>& targets, int ignore_index) {
  if (logits.rank() < 2) throw ShapeError("cross_entropy: logits must have rank >= 2");
  std::size_t v = logits.dim(logits.rank() - 1);
  std::size_t rows = logits.size() / v;
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) +
                     " rows");
  }
  for (int t : targets) {
    if (t != ignore_index && (t < 0 || static_cast<std::size_t>(t) >= v)) {
      throw ShapeError("cross_entropy: target " + std::to_string(t) + " outside [0," + std::to_string(v) + ")");
    }
  }
  std::size_t count = 0;
  for (int t : targets)
    if (t != ignore_index) ++count;
  if (count == 0) throw Error("cross_entropy: empty loss support (all positions ignored)");

  std::vector<S> row_loss(rows, S(0));
  const S* pl = logits.data();
  parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      if (targets[r] == ignore_index) continue;
      const S* row = pl + r * v;
      S m = row[0];
      for (std::size_t j = 1; j < v; ++j) m = std::max(m, row[j]);
      S z = 0;
      for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - m);
      row_loss[r] = m + std::log(z) - row[targets[r]];
    }
  });
  S total = 0;
  for (std::size_t r = 0; r < rows; ++r) total += row_loss[r];
  S inv_count = S(1) / static_cast<S>(count);
  Tensor<S> out = Tensor<S>::scalar(total * inv_count);

  if (tape.should_record({&logits})) {
    tape.record("cross_entropy", out, [logits, out, targets, rows, v, inv_count, ignore_index]() mutable {
      S g0 = out.grad()[0] * inv_count;
      auto gl = logits.grad();
      const S* pl = logits.data();
      S* pgl = gl.data();
      parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
          if (targets[r] == ignore_index) continue;
          const S* row = pl + r * v;
          S* grow = pgl + r * v;
          S m = row[0];
          for (std::size_t j = 1; j < v; ++j) m = std::max(m, row[j]);
          S z = 0;
          for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - m);
          S inv_z = S(1) / z;
          for (std::size_t j = 0; j < v; ++j) {
            S p = std::exp(row[j] - m) * inv_z;
            grow[j] += g0 * (p - (static_cast<std::size_t>(targets[r]) == j ? S(1) : S(0)));
          }
        }
      });
    });
  }
  return out;
}

} // namespace gic
