#include "gic/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gic/adamw.hpp"
#include "gic/checkpoint.hpp"
#include "gic/complexity.hpp"
#include "gic/inference.hpp"
#include "gic/metrics.hpp"
#include "gic/ops.hpp"
#include "gic/rng.hpp"
#include "gic/synth.hpp"

namespace gic {

namespace {

using json = nlohmann::json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const TaskSpec& resolve_ts_task(const Registry& registry, const std::string& name) {
  for (const auto& t : registry.tasks) {
    if (t.name == name) return t;
  }
  throw ConfigError("config: unknown task \"" + name + "\" for the task-specific setting");
}

std::vector<Sample> load_split(const RunConfig& cfg, const Registry& registry, const DatasetSpec& dataset,
                               Split split) {
  if (cfg.data.source == DataSource::kSynthetic) {
    return synth_generate(registry, dataset, split, cfg.seed);
  }
  return load_image_folder(cfg.data.root, registry, dataset.name, split);
}

ModelBundleF build_bundle(const RunConfig& cfg, const Registry& registry) {
  std::vector<TaskSpec> tasks;
  if (cfg.setting == Setting::kTaskSpecific) {
    tasks = {resolve_ts_task(registry, cfg.ts_task_name)};
  } else {
    tasks = registry.tasks;
  }
  return init_weights<float>(cfg.extractor, cfg.decoder, tasks, cfg.setting, cfg.n_prefix, cfg.seed);
}

} // namespace

TrainData build_train_data(const RunConfig& cfg, const Registry& registry) {
  TrainData data;
  int ts_task = cfg.setting == Setting::kTaskSpecific ? resolve_ts_task(registry, cfg.ts_task_name).id : -1;
  for (const auto& d : registry.datasets) {
    if (d.role == DatasetRole::kExternalTest) continue; // never in a training stream
    if (ts_task >= 0 && d.task_id != ts_task) continue;
    auto tr = load_split(cfg, registry, d, Split::kTrain);
    data.train.insert(data.train.end(), std::make_move_iterator(tr.begin()), std::make_move_iterator(tr.end()));
    data.val[d.id] = load_split(cfg, registry, d, Split::kVal);
  }
  if (data.train.empty()) throw DataError("no training data for the configured setting");
  return data;
}

void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  Registry registry = registry_from_config(cfg.data);
  std::filesystem::create_directories(out_dir);
  json counts = json::object();
  for (const auto& d : registry.datasets) {
    json per_split = json::object();
    for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
      if (!d.has_split(split)) continue;
      auto samples = synth_generate(registry, d, split, cfg.seed);
      export_image_folder(out_dir, registry, samples);
      per_split[split_name(split)] = samples.size();
    }
    counts[d.name] = per_split;
  }
  json manifest;
  manifest["seed"] = cfg.seed;
  manifest["image_size"] = cfg.data.image_size;
  manifest["per_class"] = {{"train", cfg.data.train_per_class},
                           {"val", cfg.data.val_per_class},
                           {"test", cfg.data.test_per_class}};
  manifest["counts"] = counts;
  std::ofstream mf(out_dir / "manifest.json", std::ios::trunc);
  mf << manifest.dump(2) << "\n";
  if (!mf) throw DataError("cmd_synth: cannot write manifest under " + out_dir.string());
}

void cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  Registry registry = registry_from_config(cfg.data);
  TrainData data = build_train_data(cfg, registry);
  ModelBundleF bundle = build_bundle(cfg, registry);
  TrainResult result = train(bundle, data, cfg.train);

  std::filesystem::create_directories(out_dir);
  checkpoint_save(result.best, out_dir / "best.ckpt");
  checkpoint_save(bundle, out_dir / "last.ckpt");

  std::ofstream trace(out_dir / "trace.tsv", std::ios::trunc);
  trace << "epoch\tlr\ttrain_loss";
  std::vector<int> val_ids;
  for (const auto& [id, _] : data.val) val_ids.push_back(id);
  for (int id : val_ids) trace << "\tval_acc:" << registry.dataset(id).name;
  trace << "\tmean_val_acc\n";
  for (std::size_t e = 0; e < result.trace.epochs.size(); ++e) {
    const EpochStats& st = result.trace.epochs[e];
    trace << e << "\t" << fmt_double(st.lr_last) << "\t" << fmt_double(st.train_loss);
    for (int id : val_ids) {
      auto it = st.val_acc.find(id);
      trace << "\t" << (it == st.val_acc.end() ? "" : fmt_double(it->second));
    }
    trace << "\t" << (st.val_acc.empty() ? "" : fmt_double(st.mean_val_acc)) << "\n";
  }
  if (!trace) throw DataError("cmd_train: cannot write trace under " + out_dir.string());

  std::ofstream echo(out_dir / "config.json", std::ios::trunc);
  echo << run_config_to_json(cfg);
  if (!echo) throw DataError("cmd_train: cannot write config echo under " + out_dir.string());
}

void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::string& data_root, Split split,
              const std::filesystem::path& out_dir) {
  RunConfig eff = cfg;
  if (!data_root.empty()) {
    eff.data.source = DataSource::kFolder;
    eff.data.root = data_root;
  }
  Registry registry = registry_from_config(eff.data);
  ModelBundleF bundle = checkpoint_load(checkpoint);
  for (const auto& bt : bundle.tasks) {
    const TaskSpec& rt = registry.task(bt.id);
    if (rt.labels != bt.labels) {
      throw DataError("cmd_eval: task \"" + bt.name + "\" labels differ between checkpoint and registry");
    }
  }

  std::filesystem::create_directories(out_dir);
  std::ofstream results(out_dir / "results.tsv", std::ios::trunc);
  results << "dataset\ttask\tsetting\tsplit\tsamples\tacc\tacc_g\tmacro_f1\tmacro_precision\tmacro_recall\tkappa_w"
             "\tvalid_label_rate\n";
  std::ofstream preds(out_dir / "predictions.tsv", std::ios::trunc);
  preds << "dataset\tsample\ttruth\tprediction\tpred_class\tvalid\tstep_max_probs\n";

  for (const auto& d : registry.datasets) {
    bool registered = false;
    for (const auto& bt : bundle.tasks) registered |= bt.id == d.task_id;
    if (!registered || !d.has_split(split)) continue;
    std::vector<Sample> samples = load_split(eff, registry, d, split);
    EvalOutcome outcome = evaluate(bundle, samples, cfg.train.resize_to);
    const TaskSpec& task = registry.task(d.task_id);

    results << d.name << "\t" << task.name << "\t" << setting_name(bundle.setting) << "\t" << split_name(split) << "\t"
            << outcome.report.sample_count << "\t" << fmt_double(outcome.report.accuracy) << "\t"
            << (outcome.report.accuracy_grading ? fmt_double(*outcome.report.accuracy_grading) : "") << "\t"
            << fmt_double(outcome.report.macro_f1) << "\t" << fmt_double(outcome.report.macro_precision) << "\t"
            << fmt_double(outcome.report.macro_recall) << "\t"
            << (outcome.report.kappa_quadratic ? fmt_double(*outcome.report.kappa_quadratic) : "") << "\t"
            << (outcome.report.valid_label_rate ? fmt_double(*outcome.report.valid_label_rate) : "") << "\n";

    std::ofstream kv(out_dir / (d.name + ".metrics.txt"), std::ios::trunc);
    kv << metrics_to_kv(outcome.report);
    if (!kv) throw DataError("cmd_eval: cannot write metrics for " + d.name);

    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Prediction& p = outcome.predictions[i];
      preds << d.name << "\t" << samples[i].index << "\t" << samples[i].label << "\t" << p.text << "\t" << p.class_id
            << "\t" << (p.oov() ? 0 : 1) << "\t";
      for (std::size_t s = 0; s < p.step_max_probs.size(); ++s) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.5f", p.step_max_probs[s]);
        preds << (s ? "," : "") << buf;
      }
      preds << "\n";
    }
  }
  if (!results || !preds) throw DataError("cmd_eval: cannot write outputs under " + out_dir.string());
}

void cmd_profile(const RunConfig& cfg, const std::string& checkpoint, const std::filesystem::path& out_dir) {
  Registry registry = registry_from_config(cfg.data);
  ModelBundleF bundle = checkpoint.empty() ? build_bundle(cfg, registry) : checkpoint_load(checkpoint);
  ComplexityReport report = count_complexity(bundle, cfg.data.image_size, cfg.data.image_size);

  // Synthetic timing batch over the bundle's first task.
  const TaskSpec& task = bundle.tasks.front();
  std::vector<Sample> timing;
  for (int i = 0; i < cfg.train.batch_size; ++i) {
    Sample s;
    int cls = i % task.num_classes();
    s.image = synth_image(cfg.data.image_size, task.id, cls, task.num_classes(),
                          Rng::fold_all(cfg.seed, {0x70726f66ULL /*"prof"*/, static_cast<std::uint64_t>(i)}));
    s.class_id = cls;
    s.label = task.labels[static_cast<std::size_t>(cls)];
    s.dataset_id = 0;
    s.task_id = task.id;
    s.index = i;
    timing.push_back(std::move(s));
  }
  std::vector<std::size_t> all(timing.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  PreparedBatch batch = prepare_batch(timing, all, bundle, false, 0, cfg.seed, 0);

  bundle.set_requires_grad(true);
  std::vector<TensorF> params;
  for (auto& [n, t] : bundle.params) params.push_back(t);
  AdamW<float> opt(params, AdamWConfig<float>{});

  auto train_step = [&]() {
    TapeF tape;
    TensorF loss = is_generative(bundle.setting) ? loss_generative(tape, bundle, batch)
                                                 : loss_heads(tape, bundle, batch);
    tape.backward(loss);
    opt.step();
    opt.zero_grad();
  };
  auto infer_one = [&]() {
    if (is_generative(bundle.setting)) {
      greedy_generate(bundle, timing.front().image, -1, task.id);
    } else {
      TapeF tape(false);
      const TensorF& img = timing.front().image;
      TensorF b = reshape(tape, img, {1, img.dim(0), img.dim(1), img.dim(2)});
      TensorF feats = extract_features(tape, bundle, b);
      classify_head(tape, bundle, feats, task.id);
    }
  };

  auto time_median = [](const std::function<void()>& fn, int warmups, int iters) {
    for (int i = 0; i < warmups; ++i) fn();
    std::vector<double> ms(static_cast<std::size_t>(iters));
    for (int i = 0; i < iters; ++i) {
      auto t0 = std::chrono::steady_clock::now();
      fn();
      auto t1 = std::chrono::steady_clock::now();
      ms[static_cast<std::size_t>(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    std::sort(ms.begin(), ms.end());
    return ms[ms.size() / 2];
  };

  report.train_ms_per_image = time_median(train_step, 3, 21) / cfg.train.batch_size;
  report.infer_ms_per_image = time_median(infer_one, 3, 21);

  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir / "profile.txt", std::ios::trunc);
  out << "flops_per_image\t" << fmt_double(report.flops_per_image) << "\n";
  out << "parameter_count\t" << report.parameter_count << "\n";
  out << "train_ms_per_image\t" << fmt_double(report.train_ms_per_image) << "\n";
  out << "infer_ms_per_image\t" << fmt_double(report.infer_ms_per_image) << "\n";
  out << "timing_batch_size\t" << cfg.train.batch_size << "\n";
  out << "image_size\t" << cfg.data.image_size << "\n";
  out << "convention\t" << report.convention << "\n";
  if (!out) throw DataError("cmd_profile: cannot write profile under " + out_dir.string());
}

} // namespace gic
