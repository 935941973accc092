#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "signsym/tensor.hpp"

namespace signsym {

/// ±1 code; zero activations binarize to −1.
struct HashCode {
  std::vector<std::int8_t> bits;

  std::size_t size() const { return bits.size(); }
  friend bool operator==(const HashCode&, const HashCode&) = default;
};

/// bit_i = +1 if u_i > 0 else −1.
HashCode binarize(std::span<const double> u);
/// Row-wise binarize, returned as a ±1 tensor of the same shape.
Tensor binarize_rows(const Tensor& codes);
std::vector<HashCode> codes_from_rows(const Tensor& codes);

std::size_t hamming(const HashCode& a, const HashCode& b);
/// aᵀb over ±1 entries.
long dot(const HashCode& a, const HashCode& b);

/// Labels are a bitmap: bit c set when the item carries label c (c < 64).
using LabelSet = std::uint64_t;

inline LabelSet single_label(int label) { return LabelSet{1} << label; }
inline bool relevant(LabelSet a, LabelSet b) { return (a & b) != 0; }

class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  RetrievalIndex(std::vector<HashCode> codes, std::vector<LabelSet> labels, std::vector<std::uint64_t> ids);

  /// Ids 0..n−1 in row order.
  static RetrievalIndex from_rows(const Tensor& codes, const std::vector<LabelSet>& labels);

  std::size_t size() const { return codes_.size(); }
  std::size_t code_bits() const { return codes_.empty() ? 0 : codes_.front().size(); }
  const std::vector<HashCode>& codes() const { return codes_; }
  const std::vector<LabelSet>& labels() const { return labels_; }
  const std::vector<std::uint64_t>& ids() const { return ids_; }

 private:
  std::vector<HashCode> codes_;
  std::vector<LabelSet> labels_;
  std::vector<std::uint64_t> ids_;
};

/// Positions into the index ordered by (Hamming distance, id) ascending,
/// truncated to `depth` (0 = all).
std::vector<std::size_t> rank_positions(const HashCode& query, const RetrievalIndex& index, std::size_t depth = 0);

/// Item ids in ranked order.
std::vector<std::uint64_t> rank(const HashCode& query, const RetrievalIndex& index, std::size_t depth = 0);

struct Query {
  HashCode code;
  LabelSet labels = 0;
};

/// AP over the top-k ranked items: Σ P(i)·rel(i) / max(1, relevant in top k).
double average_precision_at_k(const Query& query, const RetrievalIndex& index, std::size_t k);

/// Mean of average_precision_at_k over the queries.
double map_at_k(const std::vector<Query>& queries, const RetrievalIndex& index, std::size_t k);

/// Index file: "SSIX" u32 version=1 u32 code_bits u64 count, then per item
/// u64 id, ceil(code_bits/32) × u32 code words, u64 label bitmap. Code bit
/// b lives in word b/32 at bit position b%32 (LSB first) and is set for +1.
/// All integers little-endian.
std::string encode_index(const RetrievalIndex& index);
RetrievalIndex decode_index(std::string_view bytes);
void save_index(const std::string& path, const RetrievalIndex& index);
RetrievalIndex load_index(const std::string& path);

}  // namespace signsym
