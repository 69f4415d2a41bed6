#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "tsr/errors.hpp"
#include "tsr_cli/config.hpp"
#include "tsr_cli/plot.hpp"
#include "tsr_cli/runner.hpp"

namespace {

using tsr::cli::RunConfig;

const std::vector<std::pair<std::string, std::string>> kFlags = {
    {"arch", "Dash-separated layer widths, e.g. 784-50-10"},
    {"strategy", "Curvature strategy (TwoStage, TrustRegionClassic, OnlyPositive, SaddleFree, ...)"},
    {"method", "First-order baseline instead of a strategy (adam, rmsprop, sgd-momentum)"},
    {"epochs", "Number of epochs"},
    {"batch-size", "Minibatch size (multiple of the class count)"},
    {"reg", "L2 regularization coefficient"},
    {"reg-bias", "Regularize biases too (0/1)"},
    {"eps0", "Bootstrap step factor"},
    {"seed", "Seed for data, init and sampling"},
    {"data-images", "IDX images file (plain or gzip)"},
    {"data-labels", "IDX labels file (plain or gzip)"},
    {"synth", "Synthetic blobs C,n,d,spread[,noise]"},
    {"limit", "Use a class-balanced prefix of N samples"},
    {"time-budget", "Training seconds per run (0: epochs only)"},
    {"out", "Output directory"},
    {"init", "sparse, gaussian or saddle"},
    {"init-nnz", "Nonzero incoming weights per unit for sparse init"},
    {"init-scale", "Standard deviation of initial weights"},
    {"saddle-scale", "Standard deviation for the saddle init"},
    {"step-size", "Baseline step size"},
    {"wall-clock", "Record wall_clock_s in the CSV (0/1)"},
    {"max-halvings", "Backtracking cap"},
};

struct CommonFlags {
  std::string config;
  std::map<std::string, std::string> values;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "key=value config file; flags override it");
  for (const auto& [name, help] : kFlags) cmd->add_option("--" + name, flags.values[name], help);
}

RunConfig build_config(CLI::App* cmd, const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config.empty()) {
    for (const auto& [k, v] : tsr::cli::read_config_file(flags.config)) tsr::cli::apply_setting(cfg, k, v);
  }
  for (const auto& [name, help] : kFlags) {
    if (cmd->count("--" + name) > 0) tsr::cli::apply_setting(cfg, name, flags.values.at(name));
  }
  tsr::cli::validate(cfg);
  return cfg;
}

void print_log(const tsr::cli::RunLog& log) {
  std::printf("%-24s iterations=%zu", log.label.c_str(), log.iterations);
  if (!log.records.empty()) {
    std::printf(" loss %.6g -> %.6g acc=%.4f", log.records.front().full_train_loss,
                log.records.back().full_train_loss, log.records.back().train_accuracy);
  }
  std::printf(" csv=%s\n", log.csv_path.string().c_str());
}

int fail(const std::string& kind, const std::string& what) {
  std::fprintf(stderr, "error: %s: %s\n", kind.c_str(), what.c_str());
  return kind == "config" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage subspace trust-region training harness"};
  app.require_subcommand(1);

  CommonFlags train_flags, ablate_flags, compare_flags;
  CLI::App* train = app.add_subcommand("train", "Train one network and log per-epoch CSV");
  add_common(train, train_flags);

  CLI::App* ablate = app.add_subcommand("ablate", "Run several strategies on shared seeds");
  add_common(ablate, ablate_flags);
  std::vector<std::string> strategies;
  ablate->add_option("--strategies", strategies, "Strategies to run (default: all six)")->delimiter(',');

  CLI::App* compare = app.add_subcommand("compare", "TwoStage against Adam and RMSProp on a time budget");
  add_common(compare, compare_flags);

  CLI::App* plot = app.add_subcommand("plot", "Render CSV logs as an SVG line chart");
  std::vector<std::string> csvs;
  std::string svg_out = "plot.svg";
  tsr::cli::PlotOptions plot_opts;
  plot->add_option("csv", csvs, "Run CSV files")->required();
  plot->add_option("-o,--output", svg_out, "SVG output path");
  plot->add_option("--x", plot_opts.x_column, "x column (epoch or wall_clock_s)");
  plot->add_option("--y", plot_opts.y_column, "y column");
  plot->add_flag("--log-y", plot_opts.log_y, "Logarithmic y axis");
  plot->add_option("--title", plot_opts.title, "Chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what());
  }

  try {
    if (train->parsed()) {
      const RunConfig cfg = build_config(train, train_flags);
      const tsr::cli::RunLog log = tsr::cli::run_train(cfg);
      print_log(log);
      if (log.aborted) return fail("aborted", log.error);
    } else if (ablate->parsed()) {
      const RunConfig cfg = build_config(ablate, ablate_flags);
      std::vector<tsr::StrategyKind> kinds;
      for (const std::string& s : strategies) kinds.push_back(tsr::parse_strategy(s));
      if (kinds.empty()) kinds = tsr::all_strategies();
      const tsr::Dataset data = tsr::cli::load_data(cfg);
      bool any_failed = false;
      for (const auto& [name, log] : tsr::cli::run_ablation(cfg, data, kinds)) {
        print_log(log);
        if (log.aborted) {
          any_failed = true;
          std::fprintf(stderr, "error: run %s: %s\n", name.c_str(), log.error.c_str());
        }
      }
      if (any_failed) return 1;
    } else if (compare->parsed()) {
      const RunConfig cfg = build_config(compare, compare_flags);
      const tsr::Dataset data = tsr::cli::load_data(cfg);
      bool any_failed = false;
      for (const auto& [name, log] : tsr::cli::run_compare(cfg, data, tsr::cli::compare_entries(cfg))) {
        print_log(log);
        if (log.aborted) {
          any_failed = true;
          std::fprintf(stderr, "error: run %s: %s\n", name.c_str(), log.error.c_str());
        }
      }
      if (any_failed) return 1;
    } else if (plot->parsed()) {
      std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
      tsr::cli::emit_plot(paths, svg_out, plot_opts);
      std::printf("wrote %s\n", svg_out.c_str());
    }
  } catch (const tsr::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
