#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsr/baselines.hpp"
#include "tsr/data.hpp"
#include "tsr/netcore.hpp"
#include "tsr/optimizer.hpp"

namespace tsr::cli {

enum class InitMode { Sparse, Gaussian, Saddle };

/// Everything a run needs. Keys of the key=value config format match the
/// long flag names (arch, strategy, method, epochs, batch-size, ...).
struct RunConfig {
  std::string arch = "784-50-10";
  StrategyKind strategy = StrategyKind::TwoStage;
  std::optional<FirstOrderMethod> method;  // set: run a first-order baseline
  int epochs = 10;
  std::size_t minibatch_size = 500;
  double reg_coeff = 1e-4;
  bool regularize_bias = false;
  double eps0 = 0.01;
  std::uint64_t seed = 0;
  std::filesystem::path data_images;
  std::filesystem::path data_labels;
  std::optional<SynthSpec> synth;
  std::size_t train_limit = 0;  // 0: whole set
  double time_budget = 0.0;     // seconds of training time, 0: none
  std::filesystem::path out_dir = "out";
  InitMode init = InitMode::Sparse;
  std::size_t init_nnz = 15;
  double init_scale = 1.0;
  double saddle_scale = 1e-6;
  double step_size = 1e-3;      // baselines only
  bool record_wall_clock = false;
  int max_halvings = 50;
};

std::vector<LayerSpec> parse_arch(const std::string& arch);
std::string format_arch(const std::vector<LayerSpec>& specs);

/// "C,n,d,spread" or "C,n,d,spread,noise".
SynthSpec parse_synth(const std::string& text);
InitMode parse_init(const std::string& name);
std::string_view to_string(InitMode mode);

/// Flat key=value lines; blank lines and lines starting with '#' are skipped.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Throws ConfigError on an unknown key or a malformed value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Range checks; throws ConfigError.
void validate(const RunConfig& cfg);

/// Loads the configured data source and applies the sample cap.
Dataset load_data(const RunConfig& cfg);

/// First `limit` samples taking an equal share (remainder to the lowest
/// class ids) of each class in file order.
Dataset balanced_head(const Dataset& data, std::size_t limit);

/// Initial parameters for the configured architecture and init mode.
NetParams initial_params(const RunConfig& cfg, const std::vector<LayerSpec>& specs);

/// "# tsr-runlog v1 ..." line echoing the configuration.
std::string describe(const RunConfig& cfg);

std::string method_label(const RunConfig& cfg);

}  // namespace tsr::cli
