#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "signsym/tensor.hpp"

namespace signsym {

struct Dataset {
  Tensor inputs;            // (N, ...) scaled to [0, 1]
  std::vector<int> labels;  // class per row
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Labels as a 1-D tensor, the target form the losses accept.
  Tensor label_tensor() const;
  /// First `n` rows (all when n == 0 or n >= size()).
  Dataset head(std::size_t n) const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

enum class Split : std::uint8_t { train, test };

enum class DatasetName : std::uint8_t { mnist, cifar10, synthetic_blobs };
DatasetName parse_dataset(std::string_view text);
std::string_view name(DatasetName dataset);

/// MNIST IDX pair (magic 0x00000803 images, 0x00000801 labels, big-endian
/// dimensions) → (N, 1, rows, cols).
Dataset parse_idx(std::string_view image_bytes, std::string_view label_bytes);
/// Reads {train,t10k}-{images-idx3,labels-idx1}-ubyte from `dir`.
Dataset load_mnist(const std::string& dir, Split split);

/// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes
/// (channel-major 32×32) → (N, 3, 32, 32).
Dataset parse_cifar10(std::string_view bytes);
/// Train: every data_batch_{1..5}.bin present in `dir`; test: test_batch.bin.
Dataset load_cifar10(const std::string& dir, Split split);

struct BlobOptions {
  std::size_t classes = 10;
  std::size_t dim = 64;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 30;
  double spread = 0.15;  // per-coordinate standard deviation
  std::uint64_t seed = 0;
};

/// Seeded Gaussian clusters; centers uniform in [0.2, 0.8]^dim, samples
/// clamped to [0, 1]. Shape (N, dim).
Dataset make_blobs(const BlobOptions& options, Split split);

struct DatasetSource {
  DatasetName name = DatasetName::synthetic_blobs;
  std::string dir;  // mnist / cifar10
  BlobOptions blobs;
};

Dataset load_dataset(const DatasetSource& source, Split split);

}  // namespace signsym
