#include "gic/metrics.hpp"

#include <cmath>

#include "gic/augment.hpp"
#include "gic/ops.hpp"

namespace gic {

void ConfusionMatrix::add(int truth, int pred) {
  if (truth < 0 || truth >= num_classes) throw DataError("confusion: truth class " + std::to_string(truth));
  if (pred >= num_classes) throw DataError("confusion: predicted class " + std::to_string(pred));
  if (pred < 0) {
    if (!has_oov) throw DataError("confusion: OOV prediction in a head-based evaluation");
    at(truth, num_classes) += 1;
  } else {
    at(truth, pred) += 1;
  }
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int i = 0; i < num_classes; ++i) t += at(i, i);
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int r) const {
  std::int64_t t = 0;
  for (int c = 0; c < cols(); ++c) t += at(r, c);
  return t;
}

std::int64_t ConfusionMatrix::col_sum(int c) const {
  std::int64_t t = 0;
  for (int r = 0; r < num_classes; ++r) t += at(r, c);
  return t;
}

std::int64_t ConfusionMatrix::oov_total() const {
  if (!has_oov) return 0;
  std::int64_t t = 0;
  for (int r = 0; r < num_classes; ++r) t += at(r, num_classes);
  return t;
}

double accuracy(const ConfusionMatrix& cm) {
  std::int64_t n = cm.total();
  if (n == 0) throw DataError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

std::optional<double> accuracy_grading(const ConfusionMatrix& cm, int benign_class) {
  std::int64_t correct = 0, total = 0;
  for (int r = 0; r < cm.num_classes; ++r) {
    if (r == benign_class) continue;
    total += cm.row_sum(r);
    correct += cm.at(r, r);
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

struct PerClass {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PerClass per_class_scores(const ConfusionMatrix& cm, int c) {
  PerClass s;
  std::int64_t tp = cm.at(c, c);
  std::int64_t col = cm.col_sum(c);
  std::int64_t row = cm.row_sum(c);
  s.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
  s.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
  s.f1 = (s.precision + s.recall) > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

} // namespace

double macro_f1(const ConfusionMatrix& cm) {
  double acc = 0.0;
  for (int c = 0; c < cm.num_classes; ++c) acc += per_class_scores(cm, c).f1;
  return acc / cm.num_classes;
}

double macro_precision(const ConfusionMatrix& cm) {
  double acc = 0.0;
  for (int c = 0; c < cm.num_classes; ++c) acc += per_class_scores(cm, c).precision;
  return acc / cm.num_classes;
}

double macro_recall(const ConfusionMatrix& cm) {
  double acc = 0.0;
  for (int c = 0; c < cm.num_classes; ++c) acc += per_class_scores(cm, c).recall;
  return acc / cm.num_classes;
}

std::optional<double> quadratic_weighted_kappa(const ConfusionMatrix& cm) {
  int k = cm.num_classes;
  if (k < 2) return std::nullopt;
  std::int64_t n = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) n += cm.at(i, j);
  if (n == 0) return std::nullopt;

  std::vector<double> obs(static_cast<std::size_t>(k) * k);
  std::vector<double> row(static_cast<std::size_t>(k), 0.0), col(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double o = static_cast<double>(cm.at(i, j)) / static_cast<double>(n);
      obs[static_cast<std::size_t>(i) * k + j] = o;
      row[static_cast<std::size_t>(i)] += o;
      col[static_cast<std::size_t>(j)] += o;
    }
  }
  double num = 0.0, den = 0.0;
  double norm = static_cast<double>((k - 1)) * (k - 1);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double w = static_cast<double>((i - j)) * (i - j) / norm;
      num += w * obs[static_cast<std::size_t>(i) * k + j];
      den += w * row[static_cast<std::size_t>(i)] * col[static_cast<std::size_t>(j)];
    }
  }
  if (den == 0.0) return std::nullopt;
  return 1.0 - num / den;
}

double valid_label_rate(std::span<const Prediction> predictions) {
  if (predictions.empty()) return 0.0;
  std::int64_t valid = 0;
  for (const auto& p : predictions)
    if (!p.oov()) ++valid;
  return static_cast<double>(valid) / static_cast<double>(predictions.size());
}

EvalOutcome assemble_metrics(const TaskSpec& task, const std::vector<int>& truths, const std::vector<int>& preds,
                             bool generative, std::vector<Prediction> predictions) {
  if (truths.size() != preds.size()) throw DataError("assemble_metrics: truth/prediction size mismatch");
  EvalOutcome out;
  out.cm = ConfusionMatrix(task.num_classes(), generative);
  for (std::size_t i = 0; i < truths.size(); ++i) out.cm.add(truths[i], preds[i]);
  out.report.sample_count = static_cast<std::int64_t>(truths.size());
  out.report.accuracy = accuracy(out.cm);
  out.report.macro_f1 = macro_f1(out.cm);
  out.report.macro_precision = macro_precision(out.cm);
  out.report.macro_recall = macro_recall(out.cm);
  if (task.grading) {
    out.report.accuracy_grading = accuracy_grading(out.cm, task.benign_class);
    out.report.kappa_quadratic = quadratic_weighted_kappa(out.cm);
  }
  if (generative) {
    out.report.valid_label_rate = valid_label_rate(predictions);
  }
  out.predictions = std::move(predictions);
  return out;
}

std::string metrics_to_kv(const MetricsReport& report) {
  auto fmt = [](double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::string out;
  out += "samples\t" + std::to_string(report.sample_count) + "\n";
  out += "accuracy\t" + fmt(report.accuracy) + "\n";
  if (report.accuracy_grading) out += "accuracy_grading\t" + fmt(*report.accuracy_grading) + "\n";
  out += "macro_f1\t" + fmt(report.macro_f1) + "\n";
  out += "macro_precision\t" + fmt(report.macro_precision) + "\n";
  out += "macro_recall\t" + fmt(report.macro_recall) + "\n";
  if (report.kappa_quadratic) out += "kappa_quadratic\t" + fmt(*report.kappa_quadratic) + "\n";
  if (report.valid_label_rate) out += "valid_label_rate\t" + fmt(*report.valid_label_rate) + "\n";
  return out;
}

EvalOutcome evaluate(const ModelBundleF& bundle, std::span<const Sample> samples, int resize_to) {
  if (samples.empty()) throw DataError("evaluate: no samples");
  int task_id = samples.front().task_id;
  for (const auto& s : samples) {
    if (s.task_id != task_id) throw DataError("evaluate: samples span multiple tasks");
  }
  const TaskSpec* task = nullptr;
  for (const auto& t : bundle.tasks)
    if (t.id == task_id) task = &t;
  if (!task) throw DataError("evaluate: bundle does not register task id " + std::to_string(task_id));

  std::vector<int> truths, preds;
  truths.reserve(samples.size());
  preds.reserve(samples.size());

  if (is_generative(bundle.setting)) {
    std::vector<Prediction> predictions;
    predictions.reserve(samples.size());
    for (const auto& s : samples) {
      TensorF img = resize_to > 0 ? resize_bilinear(s.image, resize_to) : s.image;
      Prediction p = greedy_generate(bundle, img, -1, task_id);
      truths.push_back(s.class_id);
      preds.push_back(p.class_id);
      predictions.push_back(std::move(p));
    }
    return assemble_metrics(*task, truths, preds, true, std::move(predictions));
  }

  std::vector<Prediction> predictions;
  predictions.reserve(samples.size());
  for (const auto& s : samples) {
    TensorF img = resize_to > 0 ? resize_bilinear(s.image, resize_to) : s.image;
    TapeF tape(false);
    TensorF batch = reshape(tape, img, {1, img.dim(0), img.dim(1), img.dim(2)});
    TensorF feats = extract_features(tape, bundle, batch);
    TensorF logits = classify_head(tape, bundle, feats, task_id);
    int cls = argmax_lowest(logits.values());
    truths.push_back(s.class_id);
    preds.push_back(cls);
    Prediction p;
    p.text = task->labels[static_cast<std::size_t>(cls)];
    p.task_id = task_id;
    p.class_id = cls;
    predictions.push_back(std::move(p));
  }
  return assemble_metrics(*task, truths, preds, false, std::move(predictions));
}

} // namespace gic
