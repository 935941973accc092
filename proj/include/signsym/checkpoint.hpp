#pragma once

#include <optional>
#include <string>

#include "signsym/feedback.hpp"
#include "signsym/network.hpp"

namespace signsym {

/// A network plus, optionally, the feedback state it was fine-tuned with.
///
/// Binary layout (all integers little-endian, doubles as IEEE-754 bit
/// patterns):
///   "SSCK" u32 version=1 u64 init_seed u8 head_kind u64 head_size
///   shape(input) u32 layer_count, then per layer
///     u8 kind u8 activation u8 padding shape(in) shape(out) tensor(W) tensor(b)
///   u8 has_feedback [u8 rule u64 seed u64 redraws u32 n, n × (tensor(B) tensor(M))]
/// where shape = u32 rank + rank × u64, and tensor = u8 present [shape + f64 data].
struct Checkpoint {
  Network net;
  std::optional<FeedbackState> feedback;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace signsym
