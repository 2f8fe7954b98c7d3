#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gic/data.hpp"
#include "gic/inference.hpp"
#include "gic/model.hpp"

namespace gic {

// Rows are ground truth, columns predictions. Generative evaluations carry
// one extra trailing column counting out-of-vocabulary generations.
struct ConfusionMatrix {
  int num_classes = 0;
  bool has_oov = false;
  std::vector<std::int64_t> counts; // num_classes x (num_classes + has_oov)

  ConfusionMatrix() = default;
  ConfusionMatrix(int k, bool oov)
      : num_classes(k), has_oov(oov), counts(static_cast<std::size_t>(k) * (k + (oov ? 1 : 0)), 0) {}

  int cols() const { return num_classes + (has_oov ? 1 : 0); }
  std::int64_t& at(int truth, int col) { return counts[static_cast<std::size_t>(truth) * cols() + col]; }
  std::int64_t at(int truth, int col) const { return counts[static_cast<std::size_t>(truth) * cols() + col]; }

  // pred < 0 counts as out-of-vocabulary.
  void add(int truth, int pred);

  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(int r) const;
  std::int64_t col_sum(int c) const; // class columns only
  std::int64_t oov_total() const;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::optional<double> accuracy_grading; // grading tasks, absent without non-benign truth rows
  double macro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::optional<double> kappa_quadratic; // grading tasks
  std::optional<double> valid_label_rate; // generative evaluations
  std::int64_t sample_count = 0;
};

double accuracy(const ConfusionMatrix& cm);

// Accuracy over rows whose ground truth is not the benign class; absent when
// no such row exists.
std::optional<double> accuracy_grading(const ConfusionMatrix& cm, int benign_class);

// Per-class precision/recall/F1 averaged uniformly; 0/0 counts as 0.
// OOV predictions enter recall denominators but are never a precision class.
double macro_f1(const ConfusionMatrix& cm);
double macro_precision(const ConfusionMatrix& cm);
double macro_recall(const ConfusionMatrix& cm);

// Quadratic weighted kappa over the square class-by-class part (OOV column
// excluded), computed on proportions in double precision. Absent when the
// chance-agreement denominator degenerates.
std::optional<double> quadratic_weighted_kappa(const ConfusionMatrix& cm);

double valid_label_rate(std::span<const Prediction> predictions);

// Pure assembly from per-sample outcomes; the model-driven evaluate() and the
// test stubs share this path.
struct EvalOutcome {
  ConfusionMatrix cm;
  MetricsReport report;
  std::vector<Prediction> predictions; // one per sample, in input order
};

EvalOutcome assemble_metrics(const TaskSpec& task, const std::vector<int>& truths, const std::vector<int>& preds,
                             bool generative, std::vector<Prediction> predictions = {});

// Routes through greedy generation (generative bundles) or head argmax and
// assembles the report. All samples must belong to one task.
EvalOutcome evaluate(const ModelBundleF& bundle, std::span<const Sample> samples, int resize_to = 0);

// Flat key-value rendering (one "key\tvalue" line per field; absent metrics
// are omitted).
std::string metrics_to_kv(const MetricsReport& report);

} // namespace gic
