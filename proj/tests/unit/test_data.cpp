#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "test_support.hpp"

using namespace tsr;

namespace {

std::vector<std::uint8_t> be32(std::initializer_list<std::uint32_t> words) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t w : words) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(w >> s));
  }
  return out;
}

std::vector<std::uint8_t> image_fixture() {
  std::vector<std::uint8_t> bytes = be32({0x803, 2, 3, 3});
  for (int i = 0; i < 18; ++i) bytes.push_back(static_cast<std::uint8_t>(i * 14));
  return bytes;
}

std::vector<std::uint8_t> label_fixture(std::initializer_list<std::uint8_t> labels) {
  std::vector<std::uint8_t> bytes = be32({0x801, static_cast<std::uint32_t>(labels.size())});
  bytes.insert(bytes.end(), labels);
  return bytes;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tsr_test_data_" + name);
}

void write_plain(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_gzip(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  gzFile f = gzopen(p.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
}

Dataset labelled(std::size_t per_class, int classes) {
  std::vector<int> y;
  for (std::size_t i = 0; i < per_class * static_cast<std::size_t>(classes); ++i) y.push_back(static_cast<int>(i % classes));
  Matrix x(static_cast<Eigen::Index>(y.size()), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = static_cast<double>(i);
  return make_dataset(x, y, classes);
}

std::map<int, std::size_t> class_counts(const Batch& b) {
  std::map<int, std::size_t> m;
  for (int t : b.targets) ++m[t];
  return m;
}

}  // namespace

TEST_CASE("IDX fixture parses to scaled pixels") {
  const Dataset d = parse_idx(image_fixture(), label_fixture({3, 7}));
  REQUIRE(d.inputs.rows() == 2);
  REQUIRE(d.inputs.cols() == 9);
  for (int i = 0; i < 18; ++i) CHECK(d.inputs(i / 9, i % 9) == static_cast<double>(i * 14) / 255.0);
  CHECK(d.labels == std::vector<int>{3, 7});
}

TEST_CASE("label fixture keeps its order") {
  std::vector<std::uint8_t> images = be32({0x803, 3, 1, 1});
  images.insert(images.end(), {0, 128, 255});
  const Dataset d = parse_idx(images, label_fixture({0, 5, 9}));
  CHECK(d.labels == std::vector<int>{0, 5, 9});
  CHECK(d.num_classes == 10);
}

TEST_CASE("wrong magic is rejected with the expected value") {
  const std::vector<std::uint8_t> labels = label_fixture({1, 2});
  try {
    (void)parse_idx(labels, labels);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("0x00000803") != std::string::npos);
    CHECK(std::string(e.what()).find("0x00000801") != std::string::npos);
    CHECK(std::string(e.kind()) == "format");
  }
  const std::vector<std::uint8_t> images = image_fixture();
  CHECK_THROWS_AS(parse_idx(images, images), FormatError);
}

TEST_CASE("count mismatch and truncation") {
  CHECK_THROWS_AS(parse_idx(image_fixture(), label_fixture({1, 2, 3})), ConsistencyError);
  std::vector<std::uint8_t> cut = image_fixture();
  cut.resize(cut.size() - 1);
  CHECK_THROWS_AS(parse_idx(cut, label_fixture({1, 2})), IoError);
  CHECK_THROWS_AS(parse_idx(std::vector<std::uint8_t>{8, 0}, label_fixture({1})), IoError);
}

TEST_CASE("encode then parse round trips") {
  std::mt19937_64 rng(1);
  Matrix x(7, 12);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = static_cast<double>(rng() % 256) / 255.0;
  }
  const std::vector<int> y{0, 1, 2, 3, 4, 5, 9};
  const Dataset d = parse_idx(encode_idx_images(x, 3, 4), encode_idx_labels(y));
  CHECK(d.inputs == x);
  CHECK(d.labels == y);
  CHECK(encode_idx_images(d.inputs, 3, 4) == encode_idx_images(x, 3, 4));
  CHECK_THROWS_AS(encode_idx_images(x, 5, 5), ContractError);
}

TEST_CASE("load_idx reads plain and gzip files alike") {
  const auto ip = temp_file("img"), lp = temp_file("lbl");
  const auto igz = temp_file("img.gz"), lgz = temp_file("lbl.gz");
  write_plain(ip, image_fixture());
  write_plain(lp, label_fixture({4, 2}));
  write_gzip(igz, image_fixture());
  write_gzip(lgz, label_fixture({4, 2}));
  const Dataset a = load_idx(ip, lp);
  const Dataset b = load_idx(igz, lgz);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  CHECK_THROWS_AS(load_idx(temp_file("missing"), lp), IoError);
  for (const auto& p : {ip, lp, igz, lgz}) std::filesystem::remove(p);
}

TEST_CASE("make_dataset validation and class index") {
  CHECK_THROWS_AS(make_dataset(Matrix::Zero(3, 2), {0, 1}), ConsistencyError);
  CHECK_THROWS_AS(make_dataset(Matrix::Zero(2, 2), {0, -1}), ConsistencyError);
  CHECK_THROWS_AS(make_dataset(Matrix::Zero(2, 2), {0, 4}, 3), ConsistencyError);
  const Dataset d = make_dataset(Matrix::Zero(4, 1), {1, 0, 1, 1});
  CHECK(d.num_classes == 2);
  CHECK(d.class_index[1] == std::vector<std::size_t>{0, 2, 3});
  CHECK(head(d, 2).labels == std::vector<int>{1, 0});
  CHECK(head(d, 0).size() == 4);
}

TEST_CASE("stratified minibatch is exactly balanced and reproducible") {
  const Dataset d = labelled(30, 10);
  SamplerConfig cfg;
  cfg.minibatch_size = 100;
  std::mt19937_64 r1(5), r2(5);
  const Batch a = stratified_minibatch(d, cfg, r1);
  const Batch b = stratified_minibatch(d, cfg, r2);
  for (const auto& [cls, n] : class_counts(a)) CHECK(n == 10);
  CHECK(a.source_index == b.source_index);
  std::vector<std::size_t> sorted = a.source_index;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(d.labels[a.source_index[k]] == a.targets[k]);
}

TEST_CASE("stratified sampling is uniform within each class") {
  const Dataset d = labelled(8, 4);
  SamplerConfig cfg;
  cfg.minibatch_size = 8;  // 2 of 8 per class
  std::mt19937_64 rng(99);
  std::vector<std::size_t> hits(d.size(), 0);
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    for (std::size_t i : stratified_minibatch(d, cfg, rng).source_index) ++hits[i];
  }
  const double p = 2.0 / 8.0;
  const double mean = draws * p;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  for (std::size_t h : hits) CHECK(std::abs(static_cast<double>(h) - mean) <= 3.0 * sigma);
}

TEST_CASE("sampler configuration errors") {
  const Dataset d = labelled(3, 4);
  CHECK_THROWS_AS(validate_sampler(SamplerConfig{10, 2, 0}, 4), ConfigError);
  CHECK_THROWS_AS(validate_sampler(SamplerConfig{4, 8, 0}, 4), ConfigError);
  CHECK_NOTHROW(validate_sampler(SamplerConfig{8, 2, 0}, 4));
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(stratified_minibatch(d, SamplerConfig{16, 2, 0}, rng), SamplingError);
}

TEST_CASE("sub-minibatch sizes") {
  const Dataset d = labelled(10, 10);
  const Batch all = full_batch(d);
  for (const Batch& part : split_subminibatches(all, 4)) CHECK(part.size() == 25);
  const Batch ten = gather(d, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  std::vector<std::size_t> sizes;
  for (const Batch& part : split_subminibatches(ten, 3)) sizes.push_back(part.size());
  CHECK(sizes == std::vector<std::size_t>{4, 3, 3});
  CHECK_THROWS_AS(split_subminibatches(ten, 0), SplitError);
  CHECK_THROWS_AS(split_subminibatches(ten, 11), SplitError);
}

TEST_CASE("sub-minibatches of a balanced batch are balanced and partition it") {
  const Dataset d = labelled(10, 10);
  SamplerConfig cfg;
  cfg.minibatch_size = 100;
  std::mt19937_64 rng(3);
  const Batch b = stratified_minibatch(d, cfg, rng);
  const std::vector<Batch> parts = split_subminibatches(b, 5);
  std::vector<std::size_t> seen;
  for (const Batch& part : parts) {
    for (const auto& [cls, n] : class_counts(part)) CHECK(n == 2);
    CHECK(class_counts(part).size() == 10);
    seen.insert(seen.end(), part.source_index.begin(), part.source_index.end());
    for (std::size_t k = 0; k < part.size(); ++k) {
      CHECK(part.inputs(static_cast<Eigen::Index>(k), 0) == static_cast<double>(part.source_index[k]));
    }
  }
  std::vector<std::size_t> orig = b.source_index;
  std::sort(seen.begin(), seen.end());
  std::sort(orig.begin(), orig.end());
  CHECK(seen == orig);
}

TEST_CASE("synthetic blobs") {
  SynthSpec spec;
  spec.classes = 3;
  spec.per_class = 20;
  spec.dim = 5;
  spec.spread = 2.0;
  spec.noise = 0.0;
  const Dataset flat = synth_gaussian(spec, 1);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    Vector mean = Vector::Zero(5);
    mean[flat.labels[i]] = 2.0;
    CHECK(flat.inputs.row(static_cast<Eigen::Index>(i)).transpose() == mean);
  }
  spec.spread = 0.0;
  CHECK(synth_gaussian(spec, 2).inputs.isZero(0.0));

  spec.classes = 4;
  spec.per_class = 250;
  spec.dim = 6;
  spec.spread = 10.0;
  spec.noise = 1.0;
  const Dataset d = synth_gaussian(spec, 3);
  CHECK(d.inputs == synth_gaussian(spec, 3).inputs);
  CHECK(d.inputs != synth_gaussian(spec, 4).inputs);
  Matrix means = Matrix::Zero(4, 6);
  for (std::size_t i = 0; i < d.size(); ++i) means.row(d.labels[i]) += d.inputs.row(static_cast<Eigen::Index>(i));
  means /= 250.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    Eigen::Index best = 0;
    (means.rowwise() - d.inputs.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
    if (best == d.labels[i]) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(d.size()) >= 0.99);

  spec.dim = 2;
  CHECK_THROWS_AS(synth_gaussian(spec, 0), ConfigError);
}

TEST_CASE("bundled MNIST subset loads") {
  const std::filesystem::path dir = TSR_TEST_DATA_DIR;
  if (!std::filesystem::exists(dir / "images-idx3-ubyte.gz")) return;
  const Dataset d = load_idx(dir / "images-idx3-ubyte.gz", dir / "labels-idx1-ubyte.gz");
  CHECK(d.size() == 5000);
  CHECK(d.inputs.cols() == 784);
  CHECK(d.num_classes == 10);
  for (const auto& idx : d.class_index) CHECK(idx.size() == 500);
  CHECK(d.inputs.minCoeff() >= 0.0);
  CHECK(d.inputs.maxCoeff() <= 1.0);
}
