#include "tsr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include <zlib.h>

#include "tsr/errors.hpp"

namespace tsr {

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08X", v);
  return buf;
}

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = (std::uint32_t{bytes_[pos_]} << 24) |
                            (std::uint32_t{bytes_[pos_ + 1]} << 16) |
                            (std::uint32_t{bytes_[pos_ + 2]} << 8) | std::uint32_t{bytes_[pos_ + 3]};
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw IoError(std::string(what_) + " file is truncated (wanted " + std::to_string(n) +
                    " more bytes at offset " + std::to_string(pos_) + ")");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  const char* what_;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

// gzread passes uncompressed files through unchanged.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  for (;;) {
    const int got = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (got < 0) {
      int errnum = 0;
      const std::string msg = gzerror(f, &errnum);
      gzclose(f);
      throw IoError("error reading " + path.string() + ": " + msg);
    }
    if (got == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + got);
  }
  gzclose(f);
  return out;
}

std::size_t bounded(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> d(lo, hi);
  return d(rng);
}

}  // namespace

Dataset make_dataset(Matrix inputs, std::vector<int> labels, int num_classes) {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw ConsistencyError("dataset has " + std::to_string(inputs.rows()) + " rows but " +
                           std::to_string(labels.size()) + " labels");
  }
  if (!inputs.allFinite()) throw ConsistencyError("dataset features are not finite");
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw ConsistencyError("negative label " + std::to_string(y));
    max_label = std::max(max_label, y);
  }
  if (num_classes < 0) num_classes = max_label + 1;
  if (max_label >= num_classes) {
    throw ConsistencyError("label " + std::to_string(max_label) + " exceeds class count " +
                           std::to_string(num_classes));
  }
  Dataset d;
  d.inputs = std::move(inputs);
  d.labels = std::move(labels);
  d.num_classes = num_classes;
  d.class_index.assign(static_cast<std::size_t>(num_classes), {});
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    d.class_index[static_cast<std::size_t>(d.labels[i])].push_back(i);
  }
  return d;
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  ByteReader img(images, "images");
  const std::uint32_t img_magic = img.u32();
  if (img_magic != kIdxImagesMagic) {
    throw FormatError("images file: expected magic " + hex32(kIdxImagesMagic) + ", observed " +
                      hex32(img_magic));
  }
  const std::uint32_t n = img.u32();
  const std::uint32_t rows = img.u32();
  const std::uint32_t cols = img.u32();
  const std::size_t dim = std::size_t{rows} * cols;
  const auto pixels = img.take(std::size_t{n} * dim);

  ByteReader lab(labels, "labels");
  const std::uint32_t lab_magic = lab.u32();
  if (lab_magic != kIdxLabelsMagic) {
    throw FormatError("labels file: expected magic " + hex32(kIdxLabelsMagic) + ", observed " +
                      hex32(lab_magic));
  }
  const std::uint32_t n_labels = lab.u32();
  if (n_labels != n) {
    throw ConsistencyError("images file holds " + std::to_string(n) + " samples but labels file " +
                           std::to_string(n_labels));
  }
  const auto raw_labels = lab.take(n_labels);

  Matrix inputs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(pixels[i * dim + j]) / 255.0;
    }
  }
  std::vector<int> ys(raw_labels.begin(), raw_labels.end());
  return make_dataset(std::move(inputs), std::move(ys));
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const std::vector<std::uint8_t> images = read_file(images_path);
  const std::vector<std::uint8_t> labels = read_file(labels_path);
  return parse_idx(images, labels);
}

std::vector<std::uint8_t> encode_idx_images(const Matrix& inputs, std::uint32_t rows,
                                            std::uint32_t cols) {
  if (static_cast<std::size_t>(inputs.cols()) != std::size_t{rows} * cols) {
    throw ContractError("image dimensions do not match the feature count");
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + static_cast<std::size_t>(inputs.size()));
  put_u32(out, kIdxImagesMagic);
  put_u32(out, static_cast<std::uint32_t>(inputs.rows()));
  put_u32(out, rows);
  put_u32(out, cols);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
      const double v = inputs(i, j);
      if (!(v >= 0.0 && v <= 1.0)) throw ContractError("pixel value outside [0, 1]");
      out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  put_u32(out, kIdxLabelsMagic);
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) {
    if (y < 0 || y > 255) throw ContractError("label does not fit in a byte");
    out.push_back(static_cast<std::uint8_t>(y));
  }
  return out;
}

Dataset head(const Dataset& data, std::size_t limit) {
  if (limit == 0 || limit >= data.size()) return data;
  std::vector<int> labels(data.labels.begin(), data.labels.begin() + static_cast<long>(limit));
  return make_dataset(data.inputs.topRows(static_cast<Eigen::Index>(limit)), std::move(labels),
                      data.num_classes);
}

Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(indices.size()), data.inputs.cols());
  b.targets.reserve(indices.size());
  b.source_index.assign(indices.begin(), indices.end());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= data.size()) throw ContractError("sample index out of range");
    b.inputs.row(static_cast<Eigen::Index>(k)) = data.inputs.row(static_cast<Eigen::Index>(indices[k]));
    b.targets.push_back(data.labels[indices[k]]);
  }
  return b;
}

Batch full_batch(const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gather(data, all);
}

void validate_sampler(const SamplerConfig& cfg, int num_classes) {
  if (num_classes <= 0) throw ConfigError("dataset has no classes");
  const auto c = static_cast<std::size_t>(num_classes);
  if (cfg.minibatch_size == 0 || cfg.minibatch_size % c != 0) {
    throw ConfigError("minibatch size " + std::to_string(cfg.minibatch_size) +
                      " is not a positive multiple of the class count " + std::to_string(c));
  }
  if (cfg.sub_count == 0 || cfg.minibatch_size < cfg.sub_count) {
    throw ConfigError("minibatch size must be at least the sub-minibatch count");
  }
}

Batch stratified_minibatch(const Dataset& data, const SamplerConfig& cfg, std::mt19937_64& rng) {
  validate_sampler(cfg, data.num_classes);
  const std::size_t per_class = cfg.minibatch_size / static_cast<std::size_t>(data.num_classes);
  std::vector<std::size_t> chosen;
  chosen.reserve(cfg.minibatch_size);
  std::vector<std::size_t> pool;
  for (std::size_t c = 0; c < data.class_index.size(); ++c) {
    const auto& members = data.class_index[c];
    if (members.size() < per_class) {
      throw SamplingError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                          " samples but " + std::to_string(per_class) + " are needed");
    }
    pool = members;
    for (std::size_t i = 0; i < per_class; ++i) {
      std::swap(pool[i], pool[bounded(rng, i, pool.size() - 1)]);
      chosen.push_back(pool[i]);
    }
  }
  for (std::size_t i = chosen.size(); i > 1; --i) {
    std::swap(chosen[i - 1], chosen[bounded(rng, 0, i - 1)]);
  }
  return gather(data, chosen);
}

std::vector<Batch> split_subminibatches(const Batch& batch, std::size_t parts) {
  if (parts == 0) throw SplitError("cannot split into zero parts");
  if (batch.size() < parts) {
    throw SplitError("batch of " + std::to_string(batch.size()) + " samples cannot be split into " +
                     std::to_string(parts) + " parts");
  }
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return batch.targets[a] < batch.targets[b];
  });
  std::vector<std::vector<std::size_t>> members(parts);
  for (std::size_t k = 0; k < order.size(); ++k) members[k % parts].push_back(order[k]);

  std::vector<Batch> out(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    std::sort(members[p].begin(), members[p].end());
    Batch& b = out[p];
    b.inputs.resize(static_cast<Eigen::Index>(members[p].size()), batch.inputs.cols());
    for (std::size_t k = 0; k < members[p].size(); ++k) {
      const std::size_t src = members[p][k];
      b.inputs.row(static_cast<Eigen::Index>(k)) = batch.inputs.row(static_cast<Eigen::Index>(src));
      b.targets.push_back(batch.targets[src]);
      if (!batch.source_index.empty()) b.source_index.push_back(batch.source_index[src]);
    }
  }
  return out;
}

Dataset synth_gaussian(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2) throw ConfigError("synthetic data needs at least two classes");
  if (spec.per_class == 0) throw ConfigError("synthetic data needs at least one sample per class");
  if (spec.dim < static_cast<std::size_t>(spec.classes)) {
    throw ConfigError("synthetic dimension must be at least the class count");
  }
  if (!(spec.spread >= 0.0) || !(spec.noise >= 0.0)) {
    throw ConfigError("synthetic spread and noise must be nonnegative");
  }
  const auto c = static_cast<std::size_t>(spec.classes);
  const std::size_t n = c * spec.per_class;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  std::vector<int> y(n);
  // classes interleaved so that any prefix stays roughly balanced
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % c;
    y[i] = static_cast<int>(cls);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      const double mean = (j == cls) ? spec.spread : 0.0;
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mean + spec.noise * gauss(rng);
    }
  }
  return make_dataset(std::move(x), std::move(y), spec.classes);
}

}  // namespace tsr
