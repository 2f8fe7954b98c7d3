// gic: task-agnostic generative image classification experiments.
//
// Subcommands: synth, train, eval, profile.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical divergence.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "gic/commands.hpp"
#include "gic/error.hpp"
#include "gic/parallel.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out;
  long long seed = -1;
  int threads = -1;
};

gic::RunConfig load_config(const CommonArgs& args, bool required) {
  gic::RunConfig cfg;
  if (!args.config.empty()) {
    cfg = gic::load_run_config(args.config);
  } else if (required) {
    throw gic::ConfigError("--config is required");
  }
  if (args.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(args.seed);
    cfg.train.seed = cfg.seed;
  }
  if (args.threads > 0) cfg.threads = args.threads;
  if (cfg.threads > 0) gic::set_thread_count(cfg.threads);
  return cfg;
}

std::string out_dir(const CommonArgs& args, const gic::RunConfig& cfg) {
  if (!args.out.empty()) return args.out;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  throw gic::ConfigError("--out (or out_dir in the config) is required");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-agnostic generative image classifier"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* cmd, bool with_data) {
    cmd->add_option("--config", args.config, "run configuration file (JSON)");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
    if (with_data) {
      cmd->add_option("--checkpoint", args.checkpoint, "checkpoint path");
      cmd->add_option("--data", args.data, "image-folder root (overrides the config data source)");
      cmd->add_option("--split", args.split, "split to evaluate: train, val or test");
    }
  };

  CLI::App* synth = app.add_subcommand("synth", "write the synthetic corpus as an image folder");
  add_common(synth, false);
  CLI::App* train = app.add_subcommand("train", "train a model per the config");
  add_common(train, false);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint, one results row per dataset");
  add_common(eval, true);
  CLI::App* profile = app.add_subcommand("profile", "analytic FLOPs/params plus timed per-image costs");
  add_common(profile, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      gic::RunConfig cfg = load_config(args, true);
      gic::cmd_synth(cfg, out_dir(args, cfg));
    } else if (train->parsed()) {
      gic::RunConfig cfg = load_config(args, true);
      gic::cmd_train(cfg, out_dir(args, cfg));
    } else if (eval->parsed()) {
      gic::RunConfig cfg = load_config(args, true);
      if (args.checkpoint.empty()) throw gic::ConfigError("eval: --checkpoint is required");
      gic::cmd_eval(cfg, args.checkpoint, args.data, gic::parse_split(args.split), out_dir(args, cfg));
    } else if (profile->parsed()) {
      gic::RunConfig cfg = load_config(args, true);
      gic::cmd_profile(cfg, args.checkpoint, out_dir(args, cfg));
    }
  } catch (const gic::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const gic::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const gic::DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
