#include "tsr_cli/runner.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include "tsr/errors.hpp"

namespace tsr::cli {

namespace {

using Clock = std::chrono::steady_clock;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

class Stopwatch {
 public:
  void start() {
    t0_ = Clock::now();
    running_ = true;
  }
  void stop() {
    if (!running_) return;
    total_ += std::chrono::duration<double>(Clock::now() - t0_).count();
    running_ = false;
  }
  double seconds() const { return total_; }

 private:
  Clock::time_point t0_;
  double total_ = 0.0;
  bool running_ = false;
};

class CsvWriter {
 public:
  CsvWriter(const std::optional<std::filesystem::path>& path, const std::string& header) {
    if (!path) return;
    if (path->has_parent_path()) std::filesystem::create_directories(path->parent_path());
    out_.open(*path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot write " + path->string());
    out_ << header << '\n' << kCsvColumns << '\n';
    out_.flush();
  }
  void write(const EpochRecord& r) {
    if (!out_.is_open()) return;
    out_ << format_record(r) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct EpochStats {
  std::size_t iterations = 0;
  double minibatch_loss = 0.0;
  std::size_t accepted = 0;
  double delta1 = 0.0;
  std::optional<double> eig_min;
  std::optional<double> eig_max;

  void add_eigs(double lo, double hi) {
    eig_min = eig_min ? std::min(*eig_min, lo) : lo;
    eig_max = eig_max ? std::max(*eig_max, hi) : hi;
  }
};

class Sampler {
 public:
  Sampler(const Dataset& data, const SamplerConfig& cfg, RunLog& log)
      : data_(data), cfg_(cfg), rng_(cfg.seed), log_(log) {}

  Batch next() {
    Batch b = stratified_minibatch(data_, cfg_, rng_);
    if (log_.first_batch_indices.empty()) log_.first_batch_indices = b.source_index;
    for (std::size_t i : b.source_index) {
      for (int k = 0; k < 8; ++k) {
        hash_ ^= (static_cast<std::uint64_t>(i) >> (8 * k)) & 0xffu;
        hash_ *= 0x100000001b3ull;
      }
    }
    log_.sampler_fingerprint = hash_;
    return b;
  }

 private:
  const Dataset& data_;
  SamplerConfig cfg_;
  std::mt19937_64 rng_;
  RunLog& log_;
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

void check_shapes(const std::vector<LayerSpec>& specs, const Dataset& data) {
  if (specs.front().in_dim != static_cast<std::size_t>(data.inputs.cols())) {
    throw ConfigError("arch input width " + std::to_string(specs.front().in_dim) +
                      " does not match the data dimension " + std::to_string(data.inputs.cols()));
  }
  if (specs.back().out_dim != static_cast<std::size_t>(data.num_classes)) {
    throw ConfigError("arch output width " + std::to_string(specs.back().out_dim) +
                      " does not match the class count " + std::to_string(data.num_classes));
  }
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_')) c = '_';
  }
  return s;
}

}  // namespace

std::string format_record(const EpochRecord& r) {
  return num(r.epoch) + "," + cell(r.wall_clock_s) + "," + num(r.full_train_loss) + "," +
         cell(r.mean_minibatch_loss) + "," + num(r.train_accuracy) + "," +
         cell(r.stage1_accept_rate) + "," + cell(r.mean_delta1) + "," + cell(r.eig_min) + "," +
         cell(r.eig_max);
}

RunLog run_train(const RunConfig& cfg, const Dataset& data,
                 const std::optional<std::filesystem::path>& csv_path) {
  validate(cfg);
  const std::vector<LayerSpec> specs = parse_arch(cfg.arch);
  check_shapes(specs, data);
  const LossConfig loss_cfg{cfg.reg_coeff, cfg.regularize_bias};
  const std::size_t num_layers = specs.size();
  const SamplerConfig sampler_cfg{cfg.minibatch_size, num_layers, cfg.seed};
  validate_sampler(sampler_cfg, data.num_classes);
  const std::size_t per_epoch = std::max<std::size_t>(1, data.size() / cfg.minibatch_size);

  RunLog log;
  log.label = method_label(cfg);
  if (csv_path) log.csv_path = *csv_path;
  CsvWriter csv(csv_path, describe(cfg));
  Sampler sampler(data, sampler_cfg, log);
  const Batch everything = full_batch(data);
  Stopwatch clock;

  auto record = [&](double epoch, NetParams const& params, const EpochStats* stats) {
    EpochRecord r;
    r.epoch = epoch;
    if (cfg.record_wall_clock) r.wall_clock_s = clock.seconds();
    r.full_train_loss = loss_only(params, everything, loss_cfg);
    r.train_accuracy = accuracy(params, everything);
    if (stats != nullptr && stats->iterations > 0) {
      const auto n = static_cast<double>(stats->iterations);
      r.mean_minibatch_loss = stats->minibatch_loss / n;
      if (!cfg.method) {
        r.stage1_accept_rate = static_cast<double>(stats->accepted) / n;
        r.mean_delta1 = stats->delta1 / n;
        r.eig_min = stats->eig_min;
        r.eig_max = stats->eig_max;
      }
    }
    log.records.push_back(r);
    log.elapsed.push_back(clock.seconds());
    csv.write(r);
  };
  auto out_of_time = [&] { return cfg.time_budget > 0.0 && clock.seconds() >= cfg.time_budget; };

  const NetParams params0 = initial_params(cfg, specs);
  record(0.0, params0, nullptr);

  const OptimizerOptions options{cfg.max_halvings, cfg.eps0};
  std::optional<TwoStageState> state;
  std::optional<FirstOrderState> baseline;
  BlockVector baseline_weights;

  try {
    if (cfg.method) {
      baseline = make_first_order(*cfg.method, params0.weights(), cfg.step_size);
      baseline_weights = params0.weights();
    } else {
      const Batch first = sampler.next();
      clock.start();
      state = bootstrap(params0, first, cfg.eps0, loss_cfg, cfg.seed);
      clock.stop();
    }
  } catch (const NumericError& e) {
    log.aborted = true;
    log.error = std::string(e.kind()) + ": " + e.what();
    return log;
  } catch (const DegenerateError& e) {
    log.aborted = true;
    log.error = std::string(e.kind()) + ": " + e.what();
    return log;
  }

  bool stop = false;
  for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    EpochStats stats;
    std::size_t done = 0;
    try {
      for (; done < per_epoch; ++done) {
        const Batch mb = sampler.next();
        if (baseline) {
          clock.start();
          const LossAndGradient lg = loss_and_gradient(NetParams(baseline_weights), mb, loss_cfg);
          first_order_step(*baseline, baseline_weights, lg.gradient);
          clock.stop();
          const double after = loss_only(NetParams(baseline_weights), mb, loss_cfg);
          if (after > lg.loss) ++log.minibatch_increases;
          stats.minibatch_loss += lg.loss;
        } else {
          const std::vector<Batch> subs = split_subminibatches(mb, num_layers);
          clock.start();
          const StepReport rep = variant_iterate(cfg.strategy, *state, mb, subs, loss_cfg, options);
          clock.stop();
          if (rep.loss_after_stage2 > rep.loss_before) ++log.minibatch_increases;
          stats.minibatch_loss += rep.loss_before;
          if (rep.stage1_executed) ++stats.accepted;
          stats.delta1 += state->delta1;
          if (rep.model_built) stats.add_eigs(rep.eig_min, rep.eig_max);
          log.orthonormality_max = std::max(log.orthonormality_max, rep.orthonormality_error);
        }
        ++stats.iterations;
        ++log.iterations;
        if (out_of_time()) {
          ++done;
          stop = true;
          break;
        }
      }
    } catch (const NumericError& e) {
      clock.stop();
      log.aborted = true;
      log.error = std::string(e.kind()) + ": " + e.what();
      stop = true;
    }
    if (log.aborted) break;
    const double at = done == per_epoch ? static_cast<double>(epoch)
                                        : (epoch - 1) + static_cast<double>(done) / static_cast<double>(per_epoch);
    record(at, baseline ? NetParams(baseline_weights) : state->params, &stats);
  }
  return log;
}

RunLog run_train(const RunConfig& cfg) {
  validate(cfg);
  const Dataset data = load_data(cfg);
  return run_train(cfg, data, cfg.out_dir / "train.csv");
}

std::map<std::string, RunLog> run_ablation(const RunConfig& base, const Dataset& data,
                                           const std::vector<StrategyKind>& strategies) {
  if (strategies.empty()) throw ConfigError("ablation needs at least one strategy");
  std::map<std::string, RunLog> out;
  std::vector<std::string> order;
  for (StrategyKind s : strategies) {
    RunConfig cfg = base;
    cfg.strategy = s;
    cfg.method.reset();
    const std::string name(to_string(s));
    const auto path = cfg.out_dir / ("ablate_" + name + ".csv");
    RunLog log;
    try {
      log = run_train(cfg, data, path);
    } catch (const Error& e) {
      log.label = name;
      log.csv_path = path;
      log.aborted = true;
      log.error = std::string(e.kind()) + ": " + e.what();
    }
    order.push_back(name);
    out[name] = std::move(log);
  }

  std::filesystem::create_directories(base.out_dir);
  std::ofstream combined(base.out_dir / "ablate_combined.csv", std::ios::binary | std::ios::trunc);
  if (!combined) throw IoError("cannot write " + (base.out_dir / "ablate_combined.csv").string());
  combined << "# tsr-ablation v1\nstrategy," << kCsvColumns << '\n';
  for (const std::string& name : order) {
    const RunLog& log = out[name];
    for (const EpochRecord& r : log.records) combined << name << ',' << format_record(r) << '\n';
    if (log.aborted) combined << "# " << name << " failed: " << log.error << '\n';
  }
  return out;
}

std::vector<CompareEntry> compare_entries(const RunConfig& base) {
  std::vector<CompareEntry> out;
  RunConfig two = base;
  two.method.reset();
  two.strategy = StrategyKind::TwoStage;
  out.push_back({"TwoStage", two});
  for (FirstOrderMethod m : {FirstOrderMethod::Adam, FirstOrderMethod::RMSProp}) {
    for (double factor : {0.3, 1.0, 3.0}) {
      RunConfig cfg = base;
      cfg.method = m;
      cfg.step_size = base.step_size * factor;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3g", cfg.step_size);
      out.push_back({std::string(to_string(m)) + "-" + buf, cfg});
    }
  }
  return out;
}

std::map<std::string, RunLog> run_compare(const RunConfig& base, const Dataset& data,
                                          const std::vector<CompareEntry>& entries) {
  if (entries.empty()) throw ConfigError("compare needs at least one method");
  std::map<std::string, RunLog> out;
  for (const CompareEntry& e : entries) {
    RunConfig cfg = e.cfg;
    cfg.record_wall_clock = true;
    const auto path = base.out_dir / ("compare_" + file_safe(e.label) + ".csv");
    RunLog log;
    try {
      log = run_train(cfg, data, path);
    } catch (const Error& err) {
      log.csv_path = path;
      log.aborted = true;
      log.error = std::string(err.kind()) + ": " + err.what();
    }
    log.label = e.label;
    out[e.label] = std::move(log);
  }

  std::filesystem::create_directories(base.out_dir);
  std::ofstream combined(base.out_dir / "compare_combined.csv", std::ios::binary | std::ios::trunc);
  if (!combined) throw IoError("cannot write " + (base.out_dir / "compare_combined.csv").string());
  combined << "# tsr-compare v1\nmethod,epoch,wall_clock_s,full_train_loss\n";
  for (const CompareEntry& e : entries) {
    const RunLog& log = out[e.label];
    for (const EpochRecord& r : log.records) {
      combined << e.label << ',' << num(r.epoch) << ',' << cell(r.wall_clock_s) << ','
               << num(r.full_train_loss) << '\n';
    }
    if (log.aborted) combined << "# " << e.label << " failed: " << log.error << '\n';
  }
  return out;
}

}  // namespace tsr::cli
