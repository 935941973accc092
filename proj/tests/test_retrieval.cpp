#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "signsym/errors.hpp"
#include "signsym/retrieval.hpp"
#include "signsym/rng.hpp"

using namespace signsym;

namespace {

HashCode random_code(SeededRng& rng, std::size_t bits) {
  HashCode c;
  for (std::size_t i = 0; i < bits; ++i) c.bits.push_back(rng.below(2) ? 1 : -1);
  return c;
}

HashCode code(std::initializer_list<int> bits) {
  HashCode c;
  for (int b : bits) c.bits.push_back(static_cast<std::int8_t>(b));
  return c;
}

// precision-at-hit enumeration over a full sort, written independently of the index
double brute_force_ap(const HashCode& q, LabelSet ql, const std::vector<HashCode>& codes,
                      const std::vector<LabelSet>& labels, const std::vector<std::uint64_t>& ids, std::size_t k) {
  std::vector<std::tuple<int, std::uint64_t, bool>> rows;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    int d = 0;
    for (std::size_t b = 0; b < q.size(); ++b) d += q.bits[b] != codes[i].bits[b];
    rows.emplace_back(d, ids[i], (ql & labels[i]) != 0);
  }
  std::sort(rows.begin(), rows.end());
  double sum = 0;
  int hits = 0;
  for (std::size_t i = 0; i < std::min(k, rows.size()); ++i)
    if (std::get<2>(rows[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  return hits ? sum / hits : 0.0;
}

}  // namespace

TEST_CASE("binarize") {
  const std::vector<double> u{0.3, -0.2, 0.0};
  CHECK(binarize(u) == code({1, -1, -1}));
  SeededRng rng(1, 1);
  std::vector<double> v(40), neg(40);
  for (std::size_t i = 0; i < 40; ++i) {
    v[i] = rng.uniform(-1, 1);
    neg[i] = -v[i];
  }
  const HashCode b = binarize(v);
  std::vector<double> as_floats(b.bits.begin(), b.bits.end());
  CHECK(binarize(as_floats) == b);
  CHECK(hamming(b, binarize(neg)) == 40);
}

TEST_CASE("hamming") {
  SeededRng rng(2, 2);
  const HashCode a = random_code(rng, 32);
  CHECK(hamming(a, a) == 0);
  HashCode flipped = a;
  for (auto& bit : flipped.bits) bit = static_cast<std::int8_t>(-bit);
  CHECK(hamming(a, flipped) == 32);
  for (int i = 0; i < 1000; ++i) {
    const HashCode x = random_code(rng, 32), y = random_code(rng, 32);
    CHECK(static_cast<long>(hamming(x, y)) == (32 - dot(x, y)) / 2);
    CHECK(hamming(x, y) == hamming(y, x));
  }
  CHECK_THROWS_AS(hamming(code({1}), code({1, 1})), DimensionError);
}

TEST_CASE("rank") {
  SeededRng rng(3, 3);
  std::vector<HashCode> codes;
  for (int i = 0; i < 50; ++i) codes.push_back(random_code(rng, 16));
  std::vector<std::uint64_t> ids(50);
  std::iota(ids.begin(), ids.end(), 100);
  std::shuffle(ids.begin(), ids.end(), std::mt19937_64(4));
  const RetrievalIndex index(codes, std::vector<LabelSet>(50, 1), ids);
  const HashCode q = random_code(rng, 16);
  std::vector<std::pair<std::size_t, std::uint64_t>> oracle;
  for (std::size_t i = 0; i < 50; ++i) oracle.emplace_back(hamming(q, codes[i]), ids[i]);
  std::sort(oracle.begin(), oracle.end());
  const auto ranked = rank(q, index);
  REQUIRE(ranked.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) CHECK(ranked[i] == oracle[i].second);
  CHECK(rank(codes[7], index).front() == ids[7]);
  CHECK(rank(q, index, 5).size() == 5);
  const RetrievalIndex same({code({1, 1}), code({1, 1}), code({1, 1})}, {1, 1, 1}, {9, 2, 5});
  CHECK(rank(code({-1, 1}), same) == std::vector<std::uint64_t>{2, 5, 9});
  CHECK_THROWS_AS(rank(q, RetrievalIndex()), RangeError);
  CHECK_THROWS_AS(RetrievalIndex({code({1}), code({1})}, {1, 1}, {3, 3}), ConfigError);
}

TEST_CASE("map_at_k hand examples") {
  const RetrievalIndex index({code({1, 1, 1}), code({1, 1, -1}), code({1, -1, -1}), code({-1, -1, -1})},
                             {single_label(0), single_label(1), single_label(0), single_label(1)}, {0, 1, 2, 3});
  // only relevant item at rank 1
  const RetrievalIndex one({code({1, 1}), code({-1, -1})}, {single_label(0), single_label(1)}, {0, 1});
  CHECK(map_at_k({{code({1, 1}), single_label(0)}}, one, 5) == 1.0);
  // relevant at ranks 1 and 3
  CHECK(map_at_k({{code({1, 1, 1}), single_label(0)}}, index, 5) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(map_at_k({{code({1, 1}), single_label(5)}}, one, 5) == 0.0);
  CHECK_THROWS_AS(map_at_k({}, index, 0), RangeError);
}

TEST_CASE("map_at_k equals brute-force enumeration") {
  SeededRng rng(5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(200), bits = 4 + rng.below(29), k = 1 + rng.below(n + 10);
    std::vector<HashCode> codes;
    std::vector<LabelSet> labels;
    for (std::size_t i = 0; i < n; ++i) {
      codes.push_back(random_code(rng, bits));
      labels.push_back(rng.next_u64() & 0x1f);
    }
    std::vector<std::uint64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), std::mt19937_64(static_cast<std::uint64_t>(trial)));
    const RetrievalIndex index(codes, labels, ids);
    std::vector<Query> queries;
    double expected = 0;
    for (int q = 0; q < 5; ++q) {
      queries.push_back({random_code(rng, bits), rng.next_u64() & 0x1f});
      expected += brute_force_ap(queries.back().code, queries.back().labels, codes, labels, ids, k);
    }
    const double got = map_at_k(queries, index, k);
    CHECK(got == doctest::Approx(expected / 5).epsilon(1e-15));
    CHECK(got >= 0);
    CHECK(got <= 1);
  }
}

TEST_CASE("hamming triangle inequality") {
  SeededRng rng(6, 6);
  std::size_t violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const HashCode a = random_code(rng, 32), b = random_code(rng, 32), c = random_code(rng, 32);
    violations += hamming(a, c) > hamming(a, b) + hamming(b, c);
  }
  CHECK(violations == 0);
}

TEST_CASE("index persistence") {
  SeededRng rng(7, 7);
  std::vector<HashCode> codes;
  std::vector<LabelSet> labels;
  std::vector<std::uint64_t> ids;
  for (std::uint64_t i = 0; i < 30; ++i) {
    codes.push_back(random_code(rng, 40));
    labels.push_back(rng.next_u64());
    ids.push_back(i * 7 + 3);
  }
  const RetrievalIndex index(codes, labels, ids);
  const std::string bytes = encode_index(index);
  CHECK(bytes.size() == 4 + 4 + 4 + 8 + 30 * (8 + 2 * 4 + 8));
  const RetrievalIndex back = decode_index(bytes);
  CHECK(back.codes() == codes);
  CHECK(back.labels() == labels);
  CHECK(back.ids() == ids);
  // bit 0 of item 0 lives in the lowest bit of its first little-endian word
  CHECK(((static_cast<unsigned char>(bytes[20 + 8]) & 1) != 0) == (codes[0].bits[0] > 0));
  const auto path = (std::filesystem::temp_directory_path() / "signsym_index_test.bin").string();
  save_index(path, index);
  CHECK(load_index(path).ids() == ids);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(decode_index(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_index("SSIY" + bytes.substr(4)), FormatError);
}
