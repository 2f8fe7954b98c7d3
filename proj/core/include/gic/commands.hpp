#pragma once

#include <filesystem>
#include <string>

#include "gic/config.hpp"

namespace gic {

// Batch entry points behind the CLI. All of them throw typed errors
// (ConfigError / DataError / DivergenceError) which the binary maps to exit
// codes; none of them mutates its input data directories.

// Writes the synthetic corpus as an image-folder tree plus manifest.json.
void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Trains per the config; the output directory receives exactly
// best.ckpt, last.ckpt, trace.tsv and config.json (the reparseable echo).
void cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Evaluates a checkpoint on every registered dataset with the given split;
// writes results.tsv (one row per dataset) and predictions.tsv (one row per
// sample). data_root overrides the config data source with an image folder.
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::string& data_root,
              Split split, const std::filesystem::path& out_dir);

// Analytic FLOPs/parameters plus measured wall-clock per-image times
// (median of 21 timed iterations after 3 warm-ups); writes profile.txt.
void cmd_profile(const RunConfig& cfg, const std::string& checkpoint, const std::filesystem::path& out_dir);

// Assembles training data for a config (exposed for tests and the trainer).
TrainData build_train_data(const RunConfig& cfg, const Registry& registry);

} // namespace gic
