#include "gic/inference.hpp"

#include <cmath>

#include "gic/ops.hpp"

namespace gic {

int argmax_lowest(std::span<const float> values) {
  if (values.empty()) throw ShapeError("argmax_lowest: empty input");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

Prediction greedy_decode(const StepFn& step, const Vocabulary& vocab, int max_steps) {
  Prediction pred;
  for (int s = 0; s < max_steps; ++s) {
    std::vector<float> logits = step(pred.token_ids);
    int id = argmax_lowest(logits);
    // Max probability under a stable softmax of this step's logits.
    float m = logits[static_cast<std::size_t>(id)];
    double z = 0.0;
    for (float l : logits) z += std::exp(static_cast<double>(l - m));
    pred.step_max_probs.push_back(static_cast<float>(1.0 / z));
    pred.token_ids.push_back(id);
    if (id == Vocabulary::kEos) break;
  }
  pred.text = decode(pred.token_ids, vocab);
  return pred;
}

std::optional<std::pair<int, int>> match_label(const std::string& text, const std::vector<TaskSpec>& tasks,
                                               int task_hint) {
  std::string canonical = canonicalize_label(text);
  if (task_hint >= 0) {
    for (const auto& t : tasks) {
      if (t.id != task_hint) continue;
      int cls = t.class_of(canonical);
      if (cls >= 0) return std::make_pair(t.id, cls);
      break;
    }
    return std::nullopt;
  }
  for (const auto& t : tasks) {
    int cls = t.class_of(canonical);
    if (cls >= 0) return std::make_pair(t.id, cls);
  }
  return std::nullopt;
}

Prediction greedy_generate(const ModelBundleF& bundle, const TensorF& image, int max_steps, int task_hint) {
  if (!is_generative(bundle.setting)) throw Error("greedy_generate: non-generative bundle");
  if (image.rank() != 3) throw ShapeError("greedy_generate: image must be [3,H,W]");
  if (max_steps < 0) max_steps = bundle.seq_len - 1;

  TapeF tape(false);
  TensorF batch = reshape(tape, image, {1, image.dim(0), image.dim(1), image.dim(2)});
  TensorF feats = extract_features(tape, bundle, batch);
  TensorF prefix = project(tape, bundle, feats);

  Prediction pred = greedy_decode(
      [&](const std::vector<int>& generated) {
        TapeF step_tape(false);
        TensorF logits = decode_step(step_tape, bundle, prefix, generated);
        return std::vector<float>(logits.values().begin(), logits.values().end());
      },
      bundle.vocab, max_steps);

  if (auto matched = match_label(pred.text, bundle.tasks, task_hint)) {
    pred.task_id = matched->first;
    pred.class_id = matched->second;
  }
  return pred;
}

} // namespace gic
