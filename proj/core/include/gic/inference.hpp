#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gic/data.hpp"
#include "gic/model.hpp"

namespace gic {

struct Prediction {
  std::string text;                  // canonical generated label text
  std::vector<int> token_ids;        // generated ids after BOS (EOS included when emitted)
  std::vector<float> step_max_probs; // max softmax probability per step
  int task_id = -1;                  // resolved task, -1 when unknown
  int class_id = -1;                 // matched class within task, -1 = out-of-vocabulary

  bool oov() const { return class_id < 0; }
};

// Ties resolve to the lowest index, which keeps decoding deterministic.
int argmax_lowest(std::span<const float> values);

// Greedy loop over an arbitrary next-token function (the model path wraps
// decode_step; tests may substitute a stub table).
using StepFn = std::function<std::vector<float>(const std::vector<int>& generated)>;
Prediction greedy_decode(const StepFn& step, const Vocabulary& vocab, int max_steps);

// Exact match of canonicalized text against registered labels. task_hint
// resolves labels shared between tasks (e.g. "benign"); without a hint the
// first task in registry order wins.
std::optional<std::pair<int, int>> match_label(const std::string& text, const std::vector<TaskSpec>& tasks,
                                               int task_hint = -1);

// Runs greedy generation (argmax per step, stop at EOS or max_steps) for one
// [3,H,W] image. max_steps < 0 uses T-1.
Prediction greedy_generate(const ModelBundleF& bundle, const TensorF& image, int max_steps = -1, int task_hint = -1);

} // namespace gic
