#include "signsym/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "signsym/binary_io.hpp"

namespace signsym {

HashCode binarize(std::span<const double> u) {
  HashCode code;
  code.bits.reserve(u.size());
  for (double v : u) {
    if (!std::isfinite(v)) throw NonFiniteError("binarize: non-finite activation");
    code.bits.push_back(v > 0 ? 1 : -1);
  }
  return code;
}

Tensor binarize_rows(const Tensor& codes) {
  require_finite(codes, "binarize_rows");
  Tensor out(codes.shape());
  out.values() = (codes.values() > 0.0).select(Tensor::Storage::Ones(codes.values().size()), -1.0);
  return out;
}

std::vector<HashCode> codes_from_rows(const Tensor& codes) {
  std::vector<HashCode> out;
  out.reserve(codes.rows());
  for (std::size_t i = 0; i < codes.rows(); ++i) out.push_back(binarize(codes.span().subspan(i * codes.cols(), codes.cols())));
  return out;
}

std::size_t hamming(const HashCode& a, const HashCode& b) {
  if (a.size() != b.size())
    throw DimensionError("hamming: code lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a.bits[i] != b.bits[i];
  return d;
}

long dot(const HashCode& a, const HashCode& b) {
  if (a.size() != b.size()) throw DimensionError("dot: code length mismatch");
  long s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.bits[i] * b.bits[i];
  return s;
}

RetrievalIndex::RetrievalIndex(std::vector<HashCode> codes, std::vector<LabelSet> labels,
                               std::vector<std::uint64_t> ids)
    : codes_(std::move(codes)), labels_(std::move(labels)), ids_(std::move(ids)) {
  if (codes_.size() != labels_.size() || codes_.size() != ids_.size())
    throw DimensionError("retrieval index: codes, labels and ids must have equal lengths");
  for (const auto& c : codes_) {
    if (c.size() != code_bits()) throw DimensionError("retrieval index: mixed code lengths");
    for (auto b : c.bits)
      if (b != 1 && b != -1) throw RangeError("retrieval index: code entries must be ±1");
  }
  std::unordered_set<std::uint64_t> seen;
  for (auto id : ids_)
    if (!seen.insert(id).second) throw ConfigError("retrieval index: duplicate id " + std::to_string(id));
}

RetrievalIndex RetrievalIndex::from_rows(const Tensor& codes, const std::vector<LabelSet>& labels) {
  std::vector<std::uint64_t> ids(codes.rows());
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  return RetrievalIndex(codes_from_rows(codes), labels, std::move(ids));
}

std::vector<std::size_t> rank_positions(const HashCode& query, const RetrievalIndex& index, std::size_t depth) {
  if (index.size() == 0) throw RangeError("rank: empty index");
  const auto& codes = index.codes();
  const auto& ids = index.ids();
  std::vector<std::size_t> distance(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) distance[i] = hamming(query, codes[i]);
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    return distance[a] != distance[b] ? distance[a] < distance[b] : ids[a] < ids[b];
  };
  if (depth == 0 || depth >= order.size()) {
    std::sort(order.begin(), order.end(), before);
  } else {
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth), order.end(), before);
    order.resize(depth);
  }
  return order;
}

std::vector<std::uint64_t> rank(const HashCode& query, const RetrievalIndex& index, std::size_t depth) {
  std::vector<std::uint64_t> out;
  for (auto pos : rank_positions(query, index, depth)) out.push_back(index.ids()[pos]);
  return out;
}

double average_precision_at_k(const Query& query, const RetrievalIndex& index, std::size_t k) {
  if (k < 1) throw RangeError("map_at_k: cutoff must be >= 1");
  const auto top = rank_positions(query.code, index, k);
  double precision_sum = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top.size(); ++i) {
    if (!relevant(query.labels, index.labels()[top[i]])) continue;
    ++hits;
    precision_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return precision_sum / static_cast<double>(std::max<std::size_t>(1, hits));
}

double map_at_k(const std::vector<Query>& queries, const RetrievalIndex& index, std::size_t k) {
  if (k < 1) throw RangeError("map_at_k: cutoff must be >= 1");
  if (queries.empty()) return 0.0;
  double total = 0;
  for (const auto& q : queries) total += average_precision_at_k(q, index, k);
  return total / static_cast<double>(queries.size());
}

namespace {
constexpr std::string_view kIndexMagic = "SSIX";
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

std::string encode_index(const RetrievalIndex& index) {
  io::ByteWriter w;
  w.put_raw(kIndexMagic);
  w.put(kIndexVersion);
  const std::size_t bits = index.code_bits();
  const std::size_t words = (bits + 31) / 32;
  w.put(static_cast<std::uint32_t>(bits));
  w.put(static_cast<std::uint64_t>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    w.put(index.ids()[i]);
    for (std::size_t word = 0; word < words; ++word) {
      std::uint32_t packed = 0;
      for (std::size_t b = word * 32; b < std::min(bits, word * 32 + 32); ++b)
        if (index.codes()[i].bits[b] > 0) packed |= std::uint32_t{1} << (b % 32);
      w.put(packed);
    }
    w.put(index.labels()[i]);
  }
  return w.bytes();
}

RetrievalIndex decode_index(std::string_view bytes) {
  io::ByteReader r(bytes, "index");
  if (r.get_raw(4) != kIndexMagic) r.fail("bad magic");
  if (r.get<std::uint32_t>() != kIndexVersion) r.fail("unsupported version");
  const auto bits = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  const std::size_t words = (bits + 31) / 32;
  if (count > r.remaining() / (16 + 4 * words)) r.fail("item count exceeds file size");
  std::vector<HashCode> codes(count);
  std::vector<LabelSet> labels(count);
  std::vector<std::uint64_t> ids(count);
  for (std::size_t i = 0; i < count; ++i) {
    ids[i] = r.get<std::uint64_t>();
    codes[i].bits.resize(bits);
    for (std::size_t word = 0; word < words; ++word) {
      const auto packed = r.get<std::uint32_t>();
      for (std::size_t b = word * 32; b < std::min<std::size_t>(bits, word * 32 + 32); ++b)
        codes[i].bits[b] = (packed >> (b % 32)) & 1u ? 1 : -1;
    }
    labels[i] = r.get<std::uint64_t>();
  }
  if (!r.done()) r.fail("trailing bytes");
  return RetrievalIndex(std::move(codes), std::move(labels), std::move(ids));
}

void save_index(const std::string& path, const RetrievalIndex& index) { io::write_file(path, encode_index(index)); }

RetrievalIndex load_index(const std::string& path) { return decode_index(io::read_file(path)); }

}  // namespace signsym
