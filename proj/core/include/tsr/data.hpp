#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "tsr/block_vector.hpp"
#include "tsr/netcore.hpp"

namespace tsr {

/// Immutable labelled sample set. Rows of `inputs` are samples.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::vector<std::size_t>> class_index;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Builds class_index and validates labels. num_classes < 0 means max label + 1.
Dataset make_dataset(Matrix inputs, std::vector<int> labels, int num_classes = -1);

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Parses big-endian IDX images/labels; pixels are scaled by 1/255.
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

/// Reads IDX files, plain or gzip-compressed.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Serializes inputs as IDX images (values must be k/255 for an exact
/// round trip; anything in [0, 1] is rounded to the nearest byte).
std::vector<std::uint8_t> encode_idx_images(const Matrix& inputs, std::uint32_t rows,
                                            std::uint32_t cols);
std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels);

/// First `limit` samples (all when limit is 0 or exceeds the size).
Dataset head(const Dataset& data, std::size_t limit);

/// Rows `indices` of the dataset as a batch (source_index is filled).
Batch gather(const Dataset& data, std::span<const std::size_t> indices);
Batch full_batch(const Dataset& data);

struct SamplerConfig {
  std::size_t minibatch_size = 500;
  std::size_t sub_count = 2;
  std::uint64_t seed = 0;
};

/// Throws ConfigError unless minibatch_size is a positive multiple of the
/// class count and at least sub_count.
void validate_sampler(const SamplerConfig& cfg, int num_classes);

/// minibatch_size / C samples per class, drawn without replacement, then
/// shuffled. Throws SamplingError naming a class whose pool is too small.
Batch stratified_minibatch(const Dataset& data, const SamplerConfig& cfg, std::mt19937_64& rng);

/// Partition into `parts` slices whose sizes differ by at most one. Samples
/// are dealt round-robin in class order so each slice stays class balanced
/// as far as divisibility allows.
std::vector<Batch> split_subminibatches(const Batch& batch, std::size_t parts);

struct SynthSpec {
  int classes = 4;
  std::size_t per_class = 50;
  std::size_t dim = 8;
  /// Distance scale of the class means (spread * e_c).
  double spread = 3.0;
  /// Standard deviation of the isotropic noise around each mean.
  double noise = 1.0;
};

/// Gaussian blobs around scaled simplex vertices; deterministic for a seed.
Dataset synth_gaussian(const SynthSpec& spec, std::uint64_t seed);

}  // namespace tsr
