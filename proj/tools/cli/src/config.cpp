#include "tsr_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tsr/errors.hpp"

namespace tsr::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": integer out of range '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
  if (l == "0" || l == "false" || l == "no" || l == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<LayerSpec> parse_arch(const std::string& arch) {
  const std::vector<std::string> parts = split(arch, '-');
  if (parts.size() < 3) {
    throw ConfigError("arch '" + arch + "' needs at least an input, one hidden and an output width");
  }
  std::vector<std::size_t> widths;
  for (const std::string& p : parts) {
    const std::uint64_t w = to_unsigned("arch", p);
    if (w == 0) throw ConfigError("arch '" + arch + "' has a zero width");
    widths.push_back(static_cast<std::size_t>(w));
  }
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) specs.push_back({widths[i], widths[i + 1]});
  return specs;
}

std::string format_arch(const std::vector<LayerSpec>& specs) {
  std::string out = std::to_string(specs.front().in_dim);
  for (const LayerSpec& s : specs) out += "-" + std::to_string(s.out_dim);
  return out;
}

SynthSpec parse_synth(const std::string& text) {
  const std::vector<std::string> parts = split(text, ',');
  if (parts.size() != 4 && parts.size() != 5) {
    throw ConfigError("synth: expected C,n,d,spread[,noise], got '" + text + "'");
  }
  SynthSpec s;
  s.classes = static_cast<int>(to_unsigned("synth", parts[0]));
  s.per_class = static_cast<std::size_t>(to_unsigned("synth", parts[1]));
  s.dim = static_cast<std::size_t>(to_unsigned("synth", parts[2]));
  s.spread = to_double("synth", parts[3]);
  if (parts.size() == 5) s.noise = to_double("synth", parts[4]);
  return s;
}

InitMode parse_init(const std::string& name) {
  if (name == "sparse") return InitMode::Sparse;
  if (name == "gaussian") return InitMode::Gaussian;
  if (name == "saddle") return InitMode::Saddle;
  throw ConfigError("init: expected sparse, gaussian or saddle, got '" + name + "'");
}

std::string_view to_string(InitMode mode) {
  switch (mode) {
    case InitMode::Sparse: return "sparse";
    case InitMode::Gaussian: return "gaussian";
    case InitMode::Saddle: return "saddle";
  }
  return "unknown";
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "arch") {
    (void)parse_arch(value);
    cfg.arch = value;
  } else if (key == "strategy") {
    cfg.strategy = parse_strategy(value);
    cfg.method.reset();
  } else if (key == "method") {
    std::string l = value;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "none" || l.empty()) {
      cfg.method.reset();
    } else {
      cfg.method = parse_first_order(value);
    }
  } else if (key == "epochs") {
    cfg.epochs = static_cast<int>(to_unsigned(key, value));
  } else if (key == "batch-size") {
    cfg.minibatch_size = static_cast<std::size_t>(to_unsigned(key, value));
  } else if (key == "reg") {
    cfg.reg_coeff = to_double(key, value);
  } else if (key == "reg-bias") {
    cfg.regularize_bias = to_bool(key, value);
  } else if (key == "eps0") {
    cfg.eps0 = to_double(key, value);
  } else if (key == "seed") {
    cfg.seed = to_unsigned(key, value);
  } else if (key == "data-images") {
    cfg.data_images = value;
  } else if (key == "data-labels") {
    cfg.data_labels = value;
  } else if (key == "synth") {
    cfg.synth = parse_synth(value);
  } else if (key == "limit") {
    cfg.train_limit = static_cast<std::size_t>(to_unsigned(key, value));
  } else if (key == "time-budget") {
    cfg.time_budget = to_double(key, value);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "init") {
    cfg.init = parse_init(value);
  } else if (key == "init-nnz") {
    cfg.init_nnz = static_cast<std::size_t>(to_unsigned(key, value));
  } else if (key == "init-scale") {
    cfg.init_scale = to_double(key, value);
  } else if (key == "saddle-scale") {
    cfg.saddle_scale = to_double(key, value);
  } else if (key == "step-size") {
    cfg.step_size = to_double(key, value);
  } else if (key == "wall-clock") {
    cfg.record_wall_clock = to_bool(key, value);
  } else if (key == "max-halvings") {
    cfg.max_halvings = static_cast<int>(to_unsigned(key, value));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void validate(const RunConfig& cfg) {
  (void)parse_arch(cfg.arch);
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (cfg.minibatch_size == 0) throw ConfigError("batch-size must be positive");
  if (!(cfg.reg_coeff >= 0.0)) throw ConfigError("reg must be nonnegative");
  if (!(cfg.eps0 > 0.0)) throw ConfigError("eps0 must be positive");
  if (!(cfg.time_budget >= 0.0)) throw ConfigError("time-budget must be nonnegative");
  if (!(cfg.step_size > 0.0)) throw ConfigError("step-size must be positive");
  if (!(cfg.init_scale > 0.0) || !(cfg.saddle_scale > 0.0)) {
    throw ConfigError("init scales must be positive");
  }
  if (cfg.init_nnz == 0) throw ConfigError("init-nnz must be positive");
  if (cfg.max_halvings < 1) throw ConfigError("max-halvings must be positive");
  const bool idx = !cfg.data_images.empty() || !cfg.data_labels.empty();
  if (idx && (cfg.data_images.empty() || cfg.data_labels.empty())) {
    throw ConfigError("data-images and data-labels must be given together");
  }
  if (idx && cfg.synth) throw ConfigError("choose either IDX data or synth, not both");
  if (!idx && !cfg.synth) throw ConfigError("no data source: give data-images/data-labels or synth");
}

Dataset balanced_head(const Dataset& data, std::size_t limit) {
  if (limit == 0 || limit >= data.size()) return data;
  const auto c = static_cast<std::size_t>(data.num_classes);
  std::vector<std::size_t> quota(c, limit / c);
  for (std::size_t k = 0; k < limit % c; ++k) ++quota[k];
  std::vector<std::size_t> keep;
  for (std::size_t cls = 0; cls < c; ++cls) {
    const auto& members = data.class_index[cls];
    const std::size_t take = std::min(quota[cls], members.size());
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(keep.begin(), keep.end());
  const Batch b = gather(data, keep);
  return make_dataset(b.inputs, b.targets, data.num_classes);
}

Dataset load_data(const RunConfig& cfg) {
  Dataset d = cfg.synth ? synth_gaussian(*cfg.synth, cfg.seed) : load_idx(cfg.data_images, cfg.data_labels);
  return balanced_head(d, cfg.train_limit);
}

NetParams initial_params(const RunConfig& cfg, const std::vector<LayerSpec>& specs) {
  switch (cfg.init) {
    case InitMode::Sparse: {
      std::size_t widest = 0;
      for (const LayerSpec& s : specs) widest = std::max(widest, s.in_dim);
      return init_sparse(specs, cfg.seed, std::min(cfg.init_nnz, widest), cfg.init_scale);
    }
    case InitMode::Gaussian:
      return init_gaussian(specs, cfg.seed, cfg.init_scale);
    case InitMode::Saddle:
      // every weight tiny: the origin is a saddle of the regularized loss
      return init_gaussian(specs, cfg.seed, cfg.saddle_scale);
  }
  throw ConfigError("unknown init mode");
}

std::string method_label(const RunConfig& cfg) {
  if (cfg.method) return std::string(to_string(*cfg.method));
  return std::string(to_string(cfg.strategy));
}

std::string describe(const RunConfig& cfg) {
  std::string data;
  if (cfg.synth) {
    data = "synth:" + std::to_string(cfg.synth->classes) + "," + std::to_string(cfg.synth->per_class) +
           "," + std::to_string(cfg.synth->dim) + "," + fmt(cfg.synth->spread) + "," + fmt(cfg.synth->noise);
  } else {
    data = "idx:" + cfg.data_images.filename().string();
  }
  std::string out = "# tsr-runlog v1 arch=" + cfg.arch + " activation=tanh output=softmax"
                    " loss=cross-entropy reg=" + fmt(cfg.reg_coeff) +
                    " reg_bias=" + (cfg.regularize_bias ? "1" : "0") + " method=" + method_label(cfg) +
                    " epochs=" + std::to_string(cfg.epochs) +
                    " batch=" + std::to_string(cfg.minibatch_size) + " seed=" + std::to_string(cfg.seed) +
                    " init=" + std::string(to_string(cfg.init)) + " data=" + data +
                    " limit=" + std::to_string(cfg.train_limit);
  if (cfg.method) {
    out += " step=" + fmt(cfg.step_size);
  } else {
    out += " eps0=" + fmt(cfg.eps0);
  }
  if (cfg.time_budget > 0.0) out += " budget=" + fmt(cfg.time_budget);
  return out;
}

}  // namespace tsr::cli
