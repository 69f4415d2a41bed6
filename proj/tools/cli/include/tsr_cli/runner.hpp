#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsr_cli/config.hpp"

namespace tsr::cli {

inline constexpr const char* kCsvColumns =
    "epoch,wall_clock_s,full_train_loss,mean_minibatch_loss,train_accuracy,"
    "stage1_accept_rate,mean_delta1,eig_min,eig_max";

/// One CSV row. Optional fields are written as empty cells.
struct EpochRecord {
  double epoch = 0.0;  // fractional when a time budget cuts an epoch short
  std::optional<double> wall_clock_s;
  double full_train_loss = 0.0;
  std::optional<double> mean_minibatch_loss;
  double train_accuracy = 0.0;
  std::optional<double> stage1_accept_rate;
  std::optional<double> mean_delta1;
  std::optional<double> eig_min;
  std::optional<double> eig_max;
};

struct RunLog {
  std::string label;
  std::vector<EpochRecord> records;
  /// Training seconds (evaluation excluded), recorded even when the CSV omits it.
  std::vector<double> elapsed;
  std::vector<std::size_t> first_batch_indices;
  /// FNV-1a over every sampled index, in order.
  std::uint64_t sampler_fingerprint = 0;
  std::size_t iterations = 0;
  /// Minibatches whose loss went up across the update.
  std::size_t minibatch_increases = 0;
  double orthonormality_max = 0.0;
  bool aborted = false;
  std::string error;
  std::filesystem::path csv_path;
};

std::string format_record(const EpochRecord& r);

/// Bootstrap then epochs x (train size / minibatch size) iterations, one CSV
/// row per epoch (plus epoch 0 at the initial point). The CSV is flushed
/// after every row. Numeric failures end the run with aborted = true.
RunLog run_train(const RunConfig& cfg, const Dataset& data,
                 const std::optional<std::filesystem::path>& csv_path);

/// Loads data per cfg and writes <out>/train.csv.
RunLog run_train(const RunConfig& cfg);

/// One run per strategy on shared seeds; <out>/ablate_<name>.csv each and
/// <out>/ablate_combined.csv. Failures are recorded per run.
std::map<std::string, RunLog> run_ablation(const RunConfig& base, const Dataset& data,
                                           const std::vector<StrategyKind>& strategies);

struct CompareEntry {
  std::string label;
  RunConfig cfg;
};

/// TwoStage plus Adam and RMSProp at step sizes base.step_size x {0.3, 1, 3}.
std::vector<CompareEntry> compare_entries(const RunConfig& base);

/// Budgeted runs with wall clock recorded; <out>/compare_<label>.csv each
/// and <out>/compare_combined.csv (method, wall_clock_s, full_train_loss).
std::map<std::string, RunLog> run_compare(const RunConfig& base, const Dataset& data,
                                          const std::vector<CompareEntry>& entries);

}  // namespace tsr::cli
