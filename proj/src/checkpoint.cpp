#include "signsym/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "signsym/binary_io.hpp"

namespace signsym {

namespace io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace io

namespace {

constexpr std::string_view kMagic = "SSCK";
constexpr std::uint32_t kVersion = 1;

void put_shape(io::ByteWriter& w, const Shape& shape) {
  w.put(static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) w.put(static_cast<std::uint64_t>(d));
}

void put_tensor(io::ByteWriter& w, const Tensor& t) {
  w.put(static_cast<std::uint8_t>(!t.absent()));
  if (t.absent()) return;
  put_shape(w, t.shape());
  for (double v : t.span()) w.put_f64(v);
}

Shape get_shape(io::ByteReader& r) {
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) r.fail("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    d = r.get<std::uint64_t>();
    if (d == 0) r.fail("zero dimension");
  }
  return shape;
}

Tensor get_tensor(io::ByteReader& r) {
  const auto present = r.get<std::uint8_t>();
  if (!present) return {};
  Shape shape = get_shape(r);
  if (shape.empty()) r.fail("tensor without dimensions");
  const std::size_t n = element_count(shape);
  if (n > r.remaining() / 8) r.fail("tensor data truncated");
  Tensor t(shape);
  for (auto& v : t.span()) v = r.get_f64();
  return t;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const Network& net = ckpt.net;
  io::ByteWriter w;
  w.put_raw(kMagic);
  w.put(kVersion);
  w.put(net.init_seed());
  w.put(static_cast<std::uint8_t>(net.head().kind));
  w.put(static_cast<std::uint64_t>(net.head().size));
  put_shape(w, net.input_shape());
  w.put(static_cast<std::uint32_t>(net.depth()));
  for (const Layer& l : net.layers()) {
    w.put(static_cast<std::uint8_t>(l.kind));
    w.put(static_cast<std::uint8_t>(l.activation));
    w.put(static_cast<std::uint8_t>(l.padding));
    put_shape(w, l.input_shape);
    put_shape(w, l.output_shape);
    put_tensor(w, l.weight);
    put_tensor(w, l.bias);
  }
  w.put(static_cast<std::uint8_t>(ckpt.feedback.has_value()));
  if (ckpt.feedback) {
    const FeedbackState& fb = *ckpt.feedback;
    w.put(static_cast<std::uint8_t>(fb.rule));
    w.put(fb.seed);
    w.put(fb.redraws);
    w.put(static_cast<std::uint32_t>(fb.random_feedback.size()));
    for (std::size_t l = 0; l < fb.random_feedback.size(); ++l) {
      put_tensor(w, fb.random_feedback[l]);
      put_tensor(w, l < fb.magnitudes.size() ? fb.magnitudes[l] : Tensor{});
    }
  }
  return w.bytes();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.get_raw(4) != kMagic) r.fail("bad magic");
  if (const auto version = r.get<std::uint32_t>(); version != kVersion)
    r.fail("unsupported version " + std::to_string(version));
  const auto seed = r.get<std::uint64_t>();
  const auto head_kind = r.get<std::uint8_t>();
  if (head_kind > 1) r.fail("unknown head kind");
  const auto head_size = r.get<std::uint64_t>();
  Shape input = get_shape(r);
  const auto count = r.get<std::uint32_t>();
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    Layer l;
    const auto kind = r.get<std::uint8_t>();
    const auto act = r.get<std::uint8_t>();
    const auto pad = r.get<std::uint8_t>();
    if (kind > 3 || act > 3 || pad > 1) r.fail("bad layer tag");
    l.kind = static_cast<LayerKind>(kind);
    l.activation = static_cast<Activation>(act);
    l.padding = static_cast<Padding>(pad);
    l.input_shape = get_shape(r);
    l.output_shape = get_shape(r);
    l.weight = get_tensor(r);
    l.bias = get_tensor(r);
    if (l.has_weights() && (l.weight.absent() || l.bias.absent())) r.fail("weight layer without parameters");
    layers.push_back(std::move(l));
  }
  Checkpoint ckpt;
  try {
    ckpt.net = Network(std::move(input), std::move(layers),
                       Head{static_cast<Head::Kind>(head_kind), static_cast<std::size_t>(head_size)}, seed);
  } catch (const std::invalid_argument& e) {
    r.fail(std::string("inconsistent network: ") + e.what());
  }
  if (r.get<std::uint8_t>()) {
    FeedbackState fb;
    const auto rule = r.get<std::uint8_t>();
    if (rule > 4) r.fail("unknown feedback rule");
    fb.rule = static_cast<FeedbackRule>(rule);
    fb.seed = r.get<std::uint64_t>();
    fb.redraws = r.get<std::uint64_t>();
    const auto slots = r.get<std::uint32_t>();
    if (slots != ckpt.net.depth()) r.fail("feedback slot count does not match layer count");
    for (std::uint32_t l = 0; l < slots; ++l) {
      fb.random_feedback.push_back(get_tensor(r));
      fb.magnitudes.push_back(get_tensor(r));
    }
    ckpt.feedback = std::move(fb);
  }
  if (!r.done()) r.fail("trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { io::write_file(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace signsym
