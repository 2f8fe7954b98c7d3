#include "gic/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gic {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for \"" + std::string(key) + "\": " + e.what());
  }
}

} // namespace

bool RunConfig::operator==(const RunConfig& o) const {
  return setting == o.setting && seed == o.seed && n_prefix == o.n_prefix &&
         extractor.depths == o.extractor.depths && extractor.widths == o.extractor.widths &&
         extractor.kernel_size == o.extractor.kernel_size && extractor.stem_stride == o.extractor.stem_stride &&
         extractor.in_channels == o.extractor.in_channels && decoder.layers == o.decoder.layers &&
         decoder.heads == o.decoder.heads && decoder.d_model == o.decoder.d_model && data == o.data &&
         train.epochs == o.train.epochs && train.lr == o.train.lr && train.weight_decay == o.train.weight_decay &&
         train.beta1 == o.train.beta1 && train.beta2 == o.train.beta2 && train.eps == o.train.eps &&
         train.batch_size == o.train.batch_size && train.scheduler.eta_min == o.train.scheduler.eta_min &&
         train.scheduler.t0 == o.train.scheduler.t0 && train.scheduler.t_mult == o.train.scheduler.t_mult &&
         train.eval_every == o.train.eval_every && train.early_stop_val_acc == o.train.early_stop_val_acc &&
         train.augment_images == o.train.augment_images && train.resize_to == o.train.resize_to &&
         train.clip_norm == o.train.clip_norm && out_dir == o.out_dir && threads == o.threads &&
         ts_task_name == o.ts_task_name;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("config: parse error: " + std::string(e.what()));
  }
  check_keys(j, "top level", {"setting", "seed", "n_prefix", "model", "data", "train", "out_dir", "threads"});

  RunConfig cfg;
  cfg.setting = parse_setting(get_or<std::string>(j, "setting", "task_agnostic_generative"));
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
  cfg.n_prefix = get_or<int>(j, "n_prefix", 1);
  cfg.out_dir = get_or<std::string>(j, "out_dir", "");
  cfg.threads = get_or<int>(j, "threads", 0);

  if (j.contains("model")) {
    const json& jm = j.at("model");
    check_keys(jm, "model", {"extractor", "decoder"});
    if (jm.contains("extractor")) {
      const json& je = jm.at("extractor");
      check_keys(je, "model.extractor", {"depths", "widths", "kernel_size", "stem_stride", "in_channels"});
      cfg.extractor.depths = get_or<std::vector<int>>(je, "depths", cfg.extractor.depths);
      cfg.extractor.widths = get_or<std::vector<int>>(je, "widths", cfg.extractor.widths);
      cfg.extractor.kernel_size = get_or<int>(je, "kernel_size", cfg.extractor.kernel_size);
      cfg.extractor.stem_stride = get_or<int>(je, "stem_stride", cfg.extractor.stem_stride);
      cfg.extractor.in_channels = get_or<int>(je, "in_channels", cfg.extractor.in_channels);
    }
    if (jm.contains("decoder")) {
      const json& jd = jm.at("decoder");
      check_keys(jd, "model.decoder", {"layers", "heads", "d_model"});
      cfg.decoder.layers = get_or<int>(jd, "layers", cfg.decoder.layers);
      cfg.decoder.heads = get_or<int>(jd, "heads", cfg.decoder.heads);
      cfg.decoder.d_model = get_or<int>(jd, "d_model", cfg.decoder.d_model);
    }
  }

  if (j.contains("data")) {
    const json& jd = j.at("data");
    check_keys(jd, "data",
               {"source", "root", "image_size", "train_per_class", "val_per_class", "test_per_class"});
    std::string source = get_or<std::string>(jd, "source", "synthetic");
    if (source == "synthetic") {
      cfg.data.source = DataSource::kSynthetic;
    } else if (source == "folder") {
      cfg.data.source = DataSource::kFolder;
    } else {
      throw ConfigError("config: data.source must be \"synthetic\" or \"folder\"");
    }
    cfg.data.root = get_or<std::string>(jd, "root", "");
    cfg.data.image_size = get_or<int>(jd, "image_size", cfg.data.image_size);
    cfg.data.train_per_class = get_or<int>(jd, "train_per_class", cfg.data.train_per_class);
    cfg.data.val_per_class = get_or<int>(jd, "val_per_class", cfg.data.val_per_class);
    cfg.data.test_per_class = get_or<int>(jd, "test_per_class", cfg.data.test_per_class);
    if (cfg.data.source == DataSource::kFolder && cfg.data.root.empty()) {
      throw ConfigError("config: data.root is required for the folder source");
    }
  }

  if (j.contains("train")) {
    const json& jt = j.at("train");
    check_keys(jt, "train",
               {"epochs", "lr", "weight_decay", "beta1", "beta2", "eps", "batch_size", "scheduler", "eval_every",
                "early_stop_val_acc", "augment", "resize_to", "clip_norm", "task"});
    cfg.train.epochs = get_or<int>(jt, "epochs", cfg.train.epochs);
    cfg.train.lr = get_or<double>(jt, "lr", cfg.train.lr);
    cfg.train.weight_decay = get_or<double>(jt, "weight_decay", cfg.train.weight_decay);
    cfg.train.beta1 = get_or<double>(jt, "beta1", cfg.train.beta1);
    cfg.train.beta2 = get_or<double>(jt, "beta2", cfg.train.beta2);
    cfg.train.eps = get_or<double>(jt, "eps", cfg.train.eps);
    cfg.train.batch_size = get_or<int>(jt, "batch_size", cfg.train.batch_size);
    if (jt.contains("scheduler")) {
      const json& js = jt.at("scheduler");
      check_keys(js, "train.scheduler", {"eta_min", "t0", "t_mult"});
      cfg.train.scheduler.eta_min = get_or<double>(js, "eta_min", cfg.train.scheduler.eta_min);
      cfg.train.scheduler.t0 = get_or<double>(js, "t0", cfg.train.scheduler.t0);
      cfg.train.scheduler.t_mult = get_or<double>(js, "t_mult", cfg.train.scheduler.t_mult);
    }
    cfg.train.eval_every = get_or<int>(jt, "eval_every", cfg.train.eval_every);
    cfg.train.early_stop_val_acc = get_or<double>(jt, "early_stop_val_acc", cfg.train.early_stop_val_acc);
    cfg.train.augment_images = get_or<bool>(jt, "augment", cfg.train.augment_images);
    cfg.train.resize_to = get_or<int>(jt, "resize_to", cfg.train.resize_to);
    cfg.train.clip_norm = get_or<double>(jt, "clip_norm", cfg.train.clip_norm);
    cfg.ts_task_name = get_or<std::string>(jt, "task", "");
  }

  cfg.train.setting = cfg.setting;
  cfg.train.seed = cfg.seed;

  cfg.extractor.validate();
  if (cfg.decoder.layers < 1 || cfg.decoder.heads < 1 || cfg.decoder.d_model < 1 ||
      cfg.decoder.d_model % cfg.decoder.heads != 0) {
    throw ConfigError("config: decoder d_model must be positive and divisible by heads");
  }
  if (cfg.n_prefix < 1) throw ConfigError("config: n_prefix must be >= 1");
  if (cfg.setting == Setting::kTaskSpecific && cfg.ts_task_name.empty()) {
    throw ConfigError("config: the task-specific setting requires train.task");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["setting"] = setting_name(cfg.setting);
  j["seed"] = cfg.seed;
  j["n_prefix"] = cfg.n_prefix;
  j["model"]["extractor"] = {{"depths", cfg.extractor.depths},
                             {"widths", cfg.extractor.widths},
                             {"kernel_size", cfg.extractor.kernel_size},
                             {"stem_stride", cfg.extractor.stem_stride},
                             {"in_channels", cfg.extractor.in_channels}};
  j["model"]["decoder"] = {{"layers", cfg.decoder.layers}, {"heads", cfg.decoder.heads}, {"d_model", cfg.decoder.d_model}};
  j["data"] = {{"source", cfg.data.source == DataSource::kSynthetic ? "synthetic" : "folder"},
               {"root", cfg.data.root},
               {"image_size", cfg.data.image_size},
               {"train_per_class", cfg.data.train_per_class},
               {"val_per_class", cfg.data.val_per_class},
               {"test_per_class", cfg.data.test_per_class}};
  json jt;
  jt["epochs"] = cfg.train.epochs;
  jt["lr"] = cfg.train.lr;
  jt["weight_decay"] = cfg.train.weight_decay;
  jt["beta1"] = cfg.train.beta1;
  jt["beta2"] = cfg.train.beta2;
  jt["eps"] = cfg.train.eps;
  jt["batch_size"] = cfg.train.batch_size;
  jt["scheduler"] = {{"eta_min", cfg.train.scheduler.eta_min},
                     {"t0", cfg.train.scheduler.t0},
                     {"t_mult", cfg.train.scheduler.t_mult}};
  jt["eval_every"] = cfg.train.eval_every;
  jt["early_stop_val_acc"] = cfg.train.early_stop_val_acc;
  jt["augment"] = cfg.train.augment_images;
  jt["resize_to"] = cfg.train.resize_to;
  jt["clip_norm"] = cfg.train.clip_norm;
  if (!cfg.ts_task_name.empty()) jt["task"] = cfg.ts_task_name;
  j["train"] = jt;
  j["out_dir"] = cfg.out_dir;
  j["threads"] = cfg.threads;
  return j.dump(2) + "\n";
}

Registry registry_from_config(const DataConfig& cfg) {
  return default_registry(cfg.train_per_class, cfg.val_per_class, cfg.test_per_class, cfg.image_size);
}

} // namespace gic
