#include "gic/training.hpp"

#include <cmath>

#include "gic/adamw.hpp"
#include "gic/augment.hpp"
#include "gic/metrics.hpp"
#include "gic/ops.hpp"
#include "gic/parallel.hpp"

namespace gic {

double cosine_segment(double t_cur, double t_i, double base, double eta_min) {
  return eta_min + 0.5 * (base - eta_min) * (1.0 + std::cos(3.141592653589793238462643 * t_cur / t_i));
}

double scheduler_lr(double epoch, double base_lr, const SchedulerConfig& cfg) {
  if (epoch < 0) throw ConfigError("scheduler_lr: negative epoch");
  if (cfg.t0 <= 0 || cfg.t_mult < 1) throw ConfigError("scheduler_lr: need t0 > 0 and t_mult >= 1");
  double t_i = cfg.t0;
  double t_cur = epoch;
  while (t_cur >= t_i) {
    t_cur -= t_i;
    t_i *= cfg.t_mult;
  }
  return cosine_segment(t_cur, t_i, base_lr, cfg.eta_min);
}

PreparedBatch prepare_batch(const std::vector<Sample>& corpus, const std::vector<std::size_t>& indices,
                            const ModelBundleF& bundle, bool augment_images, int resize_to, std::uint64_t seed,
                            std::uint64_t epoch) {
  if (indices.empty()) throw DataError("prepare_batch: empty batch");
  PreparedBatch batch;
  std::size_t n = indices.size();
  const Sample& first = corpus.at(indices[0]);
  std::size_t hw = resize_to > 0 ? static_cast<std::size_t>(resize_to) : first.image.dim(1);
  batch.images = TensorF::zeros({n, 3, hw, hw});
  batch.class_ids.resize(n);
  batch.task_ids.resize(n);
  bool generative = is_generative(bundle.setting);
  if (generative) batch.tokens.resize(n * static_cast<std::size_t>(bundle.seq_len));

  std::size_t plane = 3 * hw * hw;
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Sample& s = corpus.at(indices[i]);
      TensorF img = s.image;
      if (augment_images) {
        Rng rng(Rng::fold_all(seed, {0x61756721ULL /*"aug!"*/, epoch, static_cast<std::uint64_t>(s.dataset_id),
                                     static_cast<std::uint64_t>(s.index)}));
        img = augment(img, rng);
      }
      if (resize_to > 0 && (img.dim(1) != hw || img.dim(2) != hw)) img = resize_bilinear(img, resize_to);
      if (img.size() != plane) {
        throw DataError("prepare_batch: sample image " + shape_str(img.shape()) + " does not match batch layout");
      }
      std::copy_n(img.data(), plane, batch.images.data() + i * plane);
      batch.class_ids[i] = s.class_id;
      batch.task_ids[i] = s.task_id;
      if (generative) {
        TokenSequence seq = encode(s.label, bundle.vocab, bundle.seq_len);
        std::copy(seq.ids.begin(), seq.ids.end(),
                  batch.tokens.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(bundle.seq_len)));
      }
    }
  });
  return batch;
}

TensorF loss_generative(TapeF& tape, const ModelBundleF& bundle, const PreparedBatch& batch) {
  TensorF logits = forward_teacher_forced(tape, bundle, batch.images, batch.tokens);
  return cross_entropy(tape, logits, batch.tokens, Vocabulary::kPad);
}

TensorF loss_heads(TapeF& tape, const ModelBundleF& bundle, const PreparedBatch& batch) {
  if (is_generative(bundle.setting)) throw Error("loss_heads: generative bundle has no heads");
  std::size_t n = batch.images.dim(0);
  TensorF feats = extract_features(tape, bundle, batch.images);

  // Group sample rows by task; only heads of present tasks touch the tape.
  std::map<int, std::vector<std::size_t>> rows_by_task;
  for (std::size_t i = 0; i < n; ++i) rows_by_task[batch.task_ids[i]].push_back(i);

  TensorF total;
  for (const auto& [task_id, rows] : rows_by_task) {
    TensorF task_feats = gather_rows(tape, feats, rows);
    TensorF logits = classify_head(tape, bundle, task_feats, task_id);
    std::vector<int> targets;
    targets.reserve(rows.size());
    for (std::size_t r : rows) targets.push_back(batch.class_ids[r]);
    TensorF ce = cross_entropy(tape, logits, targets, /*ignore_index=*/-1);
    TensorF weighted = scale(tape, ce, static_cast<float>(rows.size()) / static_cast<float>(n));
    total = total.defined() ? add(tape, total, weighted) : weighted;
  }
  return total;
}

namespace {

double validation_accuracy(const ModelBundleF& bundle, const std::vector<Sample>& samples, int resize_to) {
  return evaluate(bundle, samples, resize_to).report.accuracy;
}

double grad_norm(const ModelBundleF& bundle, const HeadWeights<float>& head) {
  double acc = 0.0;
  (void)bundle;
  for (const Tensor<float>* t : {&head.w, &head.b}) {
    if (!t->has_grad()) continue;
    for (float g : t->grad()) acc += static_cast<double>(g) * g;
  }
  return std::sqrt(acc);
}

} // namespace

TrainResult train(ModelBundleF& bundle, const TrainData& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (bundle.setting != cfg.setting) throw ConfigError("train: bundle setting does not match config setting");
  if (cfg.epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (cfg.lr <= 0) throw ConfigError("train: lr must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");

  TrainResult result;
  result.trace.best_epoch = -1;
  if (cfg.epochs == 0) {
    result.best = clone_bundle(bundle);
    return result;
  }
  if (data.train.empty()) throw DataError("train: empty training corpus");

  bundle.set_requires_grad(true);
  std::vector<TensorF> params;
  params.reserve(bundle.params.size());
  for (auto& [name, t] : bundle.params) params.push_back(t);
  AdamWConfig<float> ocfg;
  ocfg.lr = static_cast<float>(cfg.lr);
  ocfg.beta1 = static_cast<float>(cfg.beta1);
  ocfg.beta2 = static_cast<float>(cfg.beta2);
  ocfg.eps = static_cast<float>(cfg.eps);
  ocfg.weight_decay = static_cast<float>(cfg.weight_decay);
  AdamW<float> optimizer(params, ocfg);

  bool generative = is_generative(cfg.setting);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto batches = make_epoch_batches(data.train.size(), static_cast<std::size_t>(cfg.batch_size), cfg.seed,
                                      static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    EpochStats stats;
    if (!generative) {
      for (const auto& h : bundle.heads) stats.head_grad_norm[h.task_id] = 0.0;
    }
    for (std::size_t step = 0; step < batches.size(); ++step) {
      double frac_epoch = static_cast<double>(epoch) + static_cast<double>(step) / static_cast<double>(batches.size());
      double lr = scheduler_lr(frac_epoch, cfg.lr, cfg.scheduler);
      optimizer.set_lr(static_cast<float>(lr));

      PreparedBatch batch = prepare_batch(data.train, batches[step], bundle, cfg.augment_images, cfg.resize_to,
                                          cfg.seed, static_cast<std::uint64_t>(epoch));
      TapeF tape;
      TensorF loss = generative ? loss_generative(tape, bundle, batch) : loss_heads(tape, bundle, batch);
      double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                              std::to_string(step));
      }
      tape.backward(loss);

      if (cfg.clip_norm > 0) {
        double norm_sq = 0.0;
        for (auto& p : params) {
          if (!p.has_grad()) continue;
          for (float g : p.grad()) norm_sq += static_cast<double>(g) * g;
        }
        double norm = std::sqrt(norm_sq);
        if (norm > cfg.clip_norm) {
          float f = static_cast<float>(cfg.clip_norm / norm);
          for (auto& p : params) {
            if (!p.has_grad()) continue;
            for (auto& g : p.grad()) g *= f;
          }
        }
      }
      if (!generative) {
        for (const auto& h : bundle.heads) stats.head_grad_norm[h.task_id] += grad_norm(bundle, h);
      }
      optimizer.step();
      optimizer.zero_grad();

      loss_sum += loss_value;
      result.trace.step_lr.push_back(lr);
      result.trace.step_epoch.push_back(frac_epoch);
      result.trace.step_loss.push_back(loss_value);
      stats.lr_last = lr;
    }
    stats.train_loss = loss_sum / static_cast<double>(batches.size());

    bool eval_now = cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs);
    if (eval_now && !data.val.empty()) {
      double acc_sum = 0.0;
      for (const auto& [dataset_id, samples] : data.val) {
        double acc = validation_accuracy(bundle, samples, cfg.resize_to);
        stats.val_acc[dataset_id] = acc;
        acc_sum += acc;
      }
      stats.mean_val_acc = acc_sum / static_cast<double>(data.val.size());
      if (stats.mean_val_acc > result.trace.best_val_acc) {
        result.trace.best_val_acc = stats.mean_val_acc;
        result.trace.best_epoch = epoch;
        result.best = clone_bundle(bundle);
      }
    }
    result.trace.epochs.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);
    if (eval_now && cfg.early_stop_val_acc > 0 && stats.mean_val_acc >= cfg.early_stop_val_acc) break;
  }
  if (result.trace.best_epoch < 0) result.best = clone_bundle(bundle); // no validation ran
  return result;
}

} // namespace gic
