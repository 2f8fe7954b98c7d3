#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "gic/data.hpp"
#include "gic/model.hpp"
#include "gic/tape.hpp"

namespace gic {

struct SchedulerConfig {
  double eta_min = 0.0;
  double t0 = 10.0;   // first cycle length in epochs
  double t_mult = 2.0; // cycle length multiplier at each restart
};

// Cosine segment value at position t_cur of a cycle of length t_i:
// eta_min + (base - eta_min) * (1 + cos(pi * t_cur / t_i)) / 2.
// At t_cur = 0 this is exactly base; at t_cur = t_i exactly eta_min.
double cosine_segment(double t_cur, double t_i, double base, double eta_min);

// Warm-restart schedule over a fractional epoch position. Cycles are
// half-open: the restart instant belongs to the new cycle, so the value at a
// restart is the base rate.
double scheduler_lr(double epoch, double base_lr, const SchedulerConfig& cfg);

struct TrainConfig {
  Setting setting = Setting::kTaskAgnosticGenerative;
  int epochs = 60;
  double lr = 3e-4; // toy-scale default; production-scale runs use 1e-5
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  SchedulerConfig scheduler;
  std::uint64_t seed = 0;
  int eval_every = 1;
  double early_stop_val_acc = -1.0; // disabled when < 0
  bool augment_images = true;
  int resize_to = 0;      // 0 keeps the native size
  double clip_norm = 0.0; // 0 disables clipping
  int ts_task = -1;       // task id for the task-specific setting
};

struct EpochStats {
  double train_loss = 0.0;
  double lr_last = 0.0;
  std::map<int, double> val_acc; // dataset id -> accuracy
  double mean_val_acc = 0.0;
  std::map<int, double> head_grad_norm; // task id -> summed grad norm (head settings)
};

struct TrainTrace {
  std::vector<double> step_lr;
  std::vector<double> step_epoch; // fractional epoch at each step
  std::vector<double> step_loss;
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_acc = -1.0;
};

struct TrainData {
  std::vector<Sample> train;
  std::map<int, std::vector<Sample>> val; // dataset id -> samples
};

// Stacked images + encoded token targets for one batch.
struct PreparedBatch {
  TensorF images;              // [N,3,H,W]
  std::vector<int> tokens;     // N * T ids (generative)
  std::vector<int> class_ids;  // N
  std::vector<int> task_ids;   // N
};

PreparedBatch prepare_batch(const std::vector<Sample>& corpus, const std::vector<std::size_t>& indices,
                            const ModelBundleF& bundle, bool augment_images, int resize_to, std::uint64_t seed,
                            std::uint64_t epoch);

// Token-level cross-entropy of the teacher-forced pass, PAD ignored.
TensorF loss_generative(TapeF& tape, const ModelBundleF& bundle, const PreparedBatch& batch);

// Per-sample cross-entropy routed through the head of the sample's own task;
// heads of absent tasks stay off the tape entirely. The batch loss is the
// sample-count weighted mean of the per-task means.
TensorF loss_heads(TapeF& tape, const ModelBundleF& bundle, const PreparedBatch& batch);

// Full loop: augment -> resize -> forward -> loss -> backward -> AdamW with
// the scheduled rate; per-epoch validation; best checkpoint by mean
// validation accuracy. Throws DivergenceError on a non-finite loss.
struct TrainResult {
  ModelBundleF best;
  TrainTrace trace;
};

using EpochCallback = std::function<void(int epoch, const EpochStats&)>;

TrainResult train(ModelBundleF& bundle, const TrainData& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = nullptr);

} // namespace gic
