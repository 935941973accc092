#include "signsym/datasets.hpp"

#include <algorithm>
#include <filesystem>

#include "signsym/binary_io.hpp"
#include "signsym/network.hpp"
#include "signsym/rng.hpp"

namespace signsym {

Tensor Dataset::label_tensor() const {
  Tensor t({labels.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) t[i] = labels[i];
  return t;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.inputs = gather_rows(inputs, rows);
  out.classes = classes;
  for (auto r : rows) out.labels.push_back(labels.at(r));
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return subset(rows);
}

DatasetName parse_dataset(std::string_view text) {
  if (text == "mnist") return DatasetName::mnist;
  if (text == "cifar10") return DatasetName::cifar10;
  if (text == "synthetic-blobs" || text == "blobs") return DatasetName::synthetic_blobs;
  throw ConfigError("unknown dataset '" + std::string(text) + "'");
}

std::string_view name(DatasetName dataset) {
  switch (dataset) {
    case DatasetName::mnist: return "mnist";
    case DatasetName::cifar10: return "cifar10";
    case DatasetName::synthetic_blobs: return "synthetic-blobs";
  }
  return "?";
}

namespace {

std::uint32_t big_endian_u32(io::ByteReader& r) {
  const auto raw = r.get_raw(4);
  std::uint32_t v = 0;
  for (char c : raw) v = (v << 8) | static_cast<unsigned char>(c);
  return v;
}

}  // namespace

Dataset parse_idx(std::string_view image_bytes, std::string_view label_bytes) {
  io::ByteReader images(image_bytes, "IDX images");
  if (const auto magic = big_endian_u32(images); magic != 0x00000803)
    images.fail("bad magic number " + std::to_string(magic));
  const std::size_t count = big_endian_u32(images);
  const std::size_t rows = big_endian_u32(images);
  const std::size_t cols = big_endian_u32(images);
  if (rows == 0 || cols == 0) images.fail("zero image extent");
  if (images.remaining() != count * rows * cols)
    images.fail("expected " + std::to_string(count * rows * cols) + " pixel bytes, found " +
                std::to_string(images.remaining()));

  io::ByteReader labels(label_bytes, "IDX labels");
  if (const auto magic = big_endian_u32(labels); magic != 0x00000801)
    labels.fail("bad magic number " + std::to_string(magic));
  const std::size_t label_count = big_endian_u32(labels);
  if (label_count != count) labels.fail("label count " + std::to_string(label_count) + " != image count " + std::to_string(count));
  if (labels.remaining() != count) labels.fail("expected " + std::to_string(count) + " label bytes");
  if (count == 0) images.fail("empty dataset");

  Dataset ds;
  ds.inputs = Tensor({count, 1, rows, cols});
  const auto pixels = images.get_raw(count * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) ds.inputs[i] = static_cast<unsigned char>(pixels[i]) / 255.0;
  const auto raw = labels.get_raw(count);
  ds.labels.reserve(count);
  for (char c : raw) {
    const int label = static_cast<unsigned char>(c);
    if (label > 9) labels.fail("label " + std::to_string(label) + " out of range");
    ds.labels.push_back(label);
  }
  ds.classes = 10;
  return ds;
}

Dataset load_mnist(const std::string& dir, Split split) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  const auto base = std::filesystem::path(dir);
  return parse_idx(io::read_file((base / (prefix + "-images-idx3-ubyte")).string()),
                   io::read_file((base / (prefix + "-labels-idx1-ubyte")).string()));
}

Dataset parse_cifar10(std::string_view bytes) {
  constexpr std::size_t kRecord = 1 + 3072;
  io::ByteReader r(bytes, "CIFAR-10 batch");
  if (bytes.empty()) r.fail("empty batch");
  if (bytes.size() % kRecord != 0)
    r.fail("size " + std::to_string(bytes.size()) + " is not a multiple of the 3073-byte record");
  const std::size_t count = bytes.size() / kRecord;
  Dataset ds;
  ds.inputs = Tensor({count, 3, 32, 32});
  ds.classes = 10;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = r.get<std::uint8_t>();
    if (label > 9) r.fail("label " + std::to_string(label) + " out of range");
    ds.labels.push_back(label);
    const auto pixels = r.get_raw(3072);
    for (std::size_t p = 0; p < 3072; ++p) ds.inputs[i * 3072 + p] = static_cast<unsigned char>(pixels[p]) / 255.0;
  }
  return ds;
}

Dataset load_cifar10(const std::string& dir, Split split) {
  std::vector<std::string> files;
  const auto base = std::filesystem::path(dir);
  if (split == Split::test) {
    files.push_back((base / "test_batch.bin").string());
  } else {
    for (int b = 1; b <= 5; ++b) {
      auto p = base / ("data_batch_" + std::to_string(b) + ".bin");
      if (std::filesystem::exists(p)) files.push_back(p.string());
    }
    if (files.empty()) throw IoError("no CIFAR-10 data_batch_*.bin files in '" + dir + "'");
  }
  std::string all;
  for (const auto& f : files) all += io::read_file(f);
  return parse_cifar10(all);
}

Dataset make_blobs(const BlobOptions& options, Split split) {
  if (options.classes == 0 || options.dim == 0) throw ConfigError("blobs need positive classes and dim");
  if (options.classes > 64) throw ConfigError("blobs support at most 64 classes");
  SeededRng center_rng(options.seed, 0xb10b);
  const Tensor centers = sample_uniform(center_rng, {options.classes, options.dim}, 0.2, 0.8);
  const std::size_t per_class = split == Split::train ? options.train_per_class : options.test_per_class;
  if (per_class == 0) throw ConfigError("blobs need at least one sample per class");
  SeededRng rng(options.seed, split == Split::train ? 0x7a1 : 0x7e5);
  const std::size_t n = per_class * options.classes;
  Dataset ds;
  ds.inputs = Tensor({n, options.dim});
  ds.classes = options.classes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % options.classes;
    ds.labels.push_back(static_cast<int>(c));
    for (std::size_t j = 0; j < options.dim; ++j)
      ds.inputs(i, j) = std::clamp(centers(c, j) + options.spread * rng.normal(), 0.0, 1.0);
  }
  return ds;
}

Dataset load_dataset(const DatasetSource& source, Split split) {
  switch (source.name) {
    case DatasetName::mnist: return load_mnist(source.dir, split);
    case DatasetName::cifar10: return load_cifar10(source.dir, split);
    case DatasetName::synthetic_blobs: return make_blobs(source.blobs, split);
  }
  throw ConfigError("unknown dataset");
}

}  // namespace signsym
