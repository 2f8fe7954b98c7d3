#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gic/rng.hpp"
#include "gic/tape.hpp"
#include "gic/tensor.hpp"

namespace gic {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::size_t coords_checked = 0;
  std::string worst; // flat index and analytic/numeric values of the worst coordinate
};

namespace detail {

inline double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-2}); }

} // namespace detail

// fn must run a fresh forward pass on the given tape and return a scalar.
using GradFnD = std::function<TensorD(Tape<double>&, const TensorD&)>;

// Central-difference check of d fn / d input in double precision.
// Step h = 1e-4 * max(1, |x|); relative error uses a 1e-2 floor in the
// denominator so near-zero gradients are compared absolutely.
// max_coords == 0 checks every coordinate; otherwise a deterministic random
// subset of that size.
inline GradCheckReport grad_check(const GradFnD& fn, const TensorD& input, double tol, std::size_t max_coords = 0,
                                  std::uint64_t seed = 7) {
  TensorD x(Shape(input.shape()), std::vector<double>(input.values().begin(), input.values().end()), true);

  Tape<double> tape;
  TensorD loss = fn(tape, x);
  if (loss.size() != 1) throw ShapeError("grad_check: fn must return a scalar");
  // A loss that never touched the input has an all-zero analytic gradient.
  if (loss.node()->tape_output) tape.backward(loss);
  std::vector<double> analytic(x.size(), 0.0);
  if (x.has_grad()) analytic.assign(x.grad().begin(), x.grad().end());

  std::vector<std::size_t> coords(x.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  if (max_coords > 0 && max_coords < coords.size()) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_coords; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }

  GradCheckReport report;
  report.coords_checked = coords.size();
  for (std::size_t c : coords) {
    double orig = x[c];
    double h = 1e-4 * std::max(1.0, std::abs(orig));
    x[c] = orig + h;
    Tape<double> t1(false);
    double fp = fn(t1, x).item();
    x[c] = orig - h;
    Tape<double> t2(false);
    double fm = fn(t2, x).item();
    x[c] = orig;
    double numeric = (fp - fm) / (2.0 * h);
    double a = analytic[c];
    double rel = detail::rel_err(a, numeric);
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = "coord " + std::to_string(c) + " analytic " + std::to_string(a) + " numeric " +
                     std::to_string(numeric);
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

// Checks d loss / d param for a tensor the loss closure reads in place (e.g.
// a model weight). The caller must have set requires_grad on the tensor; its
// gradient buffer is reset here before the analytic pass.
inline GradCheckReport grad_check_inplace(const std::function<TensorD(Tape<double>&)>& loss_fn, const TensorD& param,
                                          double tol, std::size_t max_coords = 0, std::uint64_t seed = 7) {
  param.ensure_grad();
  param.zero_grad();
  Tape<double> tape;
  TensorD loss = loss_fn(tape);
  if (loss.size() != 1) throw ShapeError("grad_check_inplace: loss must be a scalar");
  tape.backward(loss);
  std::vector<double> analytic(param.grad().begin(), param.grad().end());

  std::vector<std::size_t> coords(param.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  if (max_coords > 0 && max_coords < coords.size()) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_coords; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }

  GradCheckReport report;
  report.coords_checked = coords.size();
  for (std::size_t c : coords) {
    double orig = param[c];
    double h = 1e-4 * std::max(1.0, std::abs(orig));
    param[c] = orig + h;
    Tape<double> t1(false);
    double fp = loss_fn(t1).item();
    param[c] = orig - h;
    Tape<double> t2(false);
    double fm = loss_fn(t2).item();
    param[c] = orig;
    double numeric = (fp - fm) / (2.0 * h);
    double rel = detail::rel_err(analytic[c], numeric);
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = "coord " + std::to_string(c) + " analytic " + std::to_string(analytic[c]) + " numeric " +
                     std::to_string(numeric);
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

} // namespace gic
