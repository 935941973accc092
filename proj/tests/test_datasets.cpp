#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "signsym/binary_io.hpp"
#include "signsym/datasets.hpp"
#include "signsym/errors.hpp"

using namespace signsym;
namespace fs = std::filesystem;

namespace {

std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8), static_cast<char>(v)};
}

std::string idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  std::string out = be32(0x803) + be32(count) + be32(rows) + be32(cols);
  for (std::uint32_t i = 0; i < count * rows * cols; ++i) out += static_cast<char>(i % 256);
  return out;
}

std::string idx_labels(std::uint32_t count) {
  std::string out = be32(0x801) + be32(count);
  for (std::uint32_t i = 0; i < count; ++i) out += static_cast<char>(i % 10);
  return out;
}

std::string format_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("IDX parsing") {
  const Dataset d = parse_idx(idx_images(3, 4, 5), idx_labels(3));
  CHECK(d.inputs.shape() == Shape{3, 1, 4, 5});
  CHECK(d.labels == std::vector<int>{0, 1, 2});
  CHECK(d.inputs[1] == doctest::Approx(1.0 / 255.0));
  CHECK(d.inputs.values().maxCoeff() <= 1.0);
  CHECK(d.label_tensor().shape() == Shape{3});
}

TEST_CASE("IDX errors carry byte offsets") {
  std::string bad = idx_images(3, 4, 5);
  bad[3] = 0x02;
  CHECK(format_error([&] { parse_idx(bad, idx_labels(3)); }).find("offset") != std::string::npos);
  const std::string truncated = idx_images(3, 4, 5).substr(0, 40);
  const std::string msg = format_error([&] { parse_idx(truncated, idx_labels(3)); });
  CHECK(msg.find("offset") != std::string::npos);
  CHECK_THROWS_AS(parse_idx(idx_images(3, 4, 5), idx_labels(2)), FormatError);
  CHECK_THROWS_AS(parse_idx(idx_images(3, 4, 5), idx_labels(3).substr(0, 9)), FormatError);
  CHECK_THROWS_AS(parse_idx("", idx_labels(3)), FormatError);
}

TEST_CASE("CIFAR-10 batches") {
  std::string bytes;
  for (int r = 0; r < 3; ++r) {
    bytes += static_cast<char>(r * 4);
    for (int i = 0; i < 3072; ++i) bytes += static_cast<char>((i + r) % 256);
  }
  const Dataset d = parse_cifar10(bytes);
  CHECK(d.inputs.shape() == Shape{3, 3, 32, 32});
  CHECK(d.labels == std::vector<int>{0, 4, 8});
  CHECK(d.labels.front() >= 0);
  CHECK(d.labels.front() <= 9);
  CHECK_THROWS_AS(parse_cifar10(bytes.substr(0, 3073 + 10)), FormatError);
  std::string bad_label = bytes;
  bad_label[0] = 12;
  CHECK_THROWS_AS(parse_cifar10(bad_label), FormatError);

  const fs::path dir = fs::temp_directory_path() / "signsym_cifar_test";
  fs::create_directories(dir);
  io::write_file((dir / "data_batch_1.bin").string(), bytes);
  io::write_file((dir / "test_batch.bin").string(), bytes.substr(0, 3073));
  CHECK(load_cifar10(dir.string(), Split::train).size() == 3);
  CHECK(load_cifar10(dir.string(), Split::test).size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("synthetic blobs") {
  BlobOptions o;
  o.seed = 5;
  const Dataset a = make_blobs(o, Split::train), b = make_blobs(o, Split::train);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  CHECK(a.inputs.shape() == Shape{o.classes * o.train_per_class, o.dim});
  CHECK(a.inputs.values().minCoeff() >= 0);
  CHECK(a.inputs.values().maxCoeff() <= 1);
  CHECK(make_blobs(o, Split::test).size() == o.classes * o.test_per_class);
  o.seed = 6;
  CHECK_FALSE(make_blobs(o, Split::train).inputs == a.inputs);
  CHECK(parse_dataset("synthetic-blobs") == DatasetName::synthetic_blobs);
  CHECK_THROWS_AS(parse_dataset("imagenet"), ConfigError);
}

TEST_CASE("bundled MNIST subset matches its headers") {
  const std::string dir = std::string(SIGNSYM_DATA_DIR) + "/mnist";
  for (auto [split, images, labels] : {std::tuple{Split::train, "train-images-idx3-ubyte", "train-labels-idx1-ubyte"},
                                       {Split::test, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}}) {
    const std::string image_bytes = io::read_file(dir + "/" + images);
    const std::uint32_t count = (static_cast<std::uint32_t>(static_cast<unsigned char>(image_bytes[4])) << 24) |
                                (static_cast<std::uint32_t>(static_cast<unsigned char>(image_bytes[5])) << 16) |
                                (static_cast<std::uint32_t>(static_cast<unsigned char>(image_bytes[6])) << 8) |
                                static_cast<std::uint32_t>(static_cast<unsigned char>(image_bytes[7]));
    CHECK(image_bytes.size() == 16 + std::size_t{count} * 28 * 28);
    CHECK(io::read_file(dir + "/" + labels).size() == 8 + std::size_t{count});
    const Dataset d = load_mnist(dir, split);
    CHECK(d.inputs.shape() == Shape{count, 1, 28, 28});
    CHECK(d.size() == count);
    CHECK(d.classes == 10);
    std::vector<int> per_class(10);
    for (int l : d.labels) ++per_class[static_cast<std::size_t>(l)];
    for (int c : per_class) CHECK(c == static_cast<int>(count / 10));
  }
  CHECK_THROWS_AS(load_mnist("/nonexistent", Split::train), IoError);
}
