#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gic/data.hpp"
#include "gic/model.hpp"
#include "gic/training.hpp"

namespace gic {

enum class DataSource { kSynthetic, kFolder };

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  std::string root;        // folder source only
  int image_size = 64;
  int train_per_class = 200;
  int val_per_class = 50;
  int test_per_class = 50;

  bool operator==(const DataConfig&) const = default;
};

// One experiment, fully described: every run is reproducible from this plus
// the seed it contains. Unknown keys in the file are hard errors.
struct RunConfig {
  Setting setting = Setting::kTaskAgnosticGenerative;
  std::uint64_t seed = 0;
  int n_prefix = 1;
  ExtractorConfig extractor;
  DecoderConfig decoder;
  DataConfig data;
  TrainConfig train;
  std::string out_dir;
  int threads = 0; // 0 = hardware default
  std::string ts_task_name; // task-specific setting only

  bool operator==(const RunConfig&) const;
};

RunConfig parse_run_config(const std::string& json_text); // throws ConfigError
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg); // canonical echo form

Registry registry_from_config(const DataConfig& cfg);

} // namespace gic
