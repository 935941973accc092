#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "signsym/conv.hpp"
#include "signsym/tensor.hpp"

namespace signsym {

enum class LayerKind : std::uint8_t { dense = 0, conv2d = 1, maxpool2 = 2, flatten = 3 };
enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2, sigmoid = 3 };

std::string_view name(LayerKind kind);
std::string_view name(Activation act);
Activation parse_activation(std::string_view text);

/// f(a), applied elementwise.
Tensor activate(Activation act, const Tensor& pre);
/// f'(a), elementwise.
Tensor activation_derivative(Activation act, const Tensor& pre);

struct Layer {
  LayerKind kind = LayerKind::dense;
  Activation activation = Activation::identity;
  Padding padding = Padding::valid;
  Tensor weight;  // dense: out×in, conv2d: out_ch×in_ch×kh×kw
  Tensor bias;    // dense: out, conv2d: out_ch
  Shape input_shape;   // per example
  Shape output_shape;  // per example

  bool has_weights() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
};

struct Head {
  enum class Kind : std::uint8_t { classifier = 0, hasher = 1 };
  Kind kind = Kind::classifier;
  std::size_t size = 0;  // class count or code bits

  static Head classifier(std::size_t classes) { return {Kind::classifier, classes}; }
  static Head hasher(std::size_t bits) { return {Kind::hasher, bits}; }
  friend bool operator==(const Head&, const Head&) = default;
};

/// Backbone layer description used to build a Network.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;   // dense outputs or conv output channels
  std::size_t kernel = 0;  // conv kernel extent (square)
  Activation activation = Activation::relu;
  Padding padding = Padding::valid;
};

/// Parses a comma-separated backbone descriptor such as
/// "conv4x3,pool,conv8x3,pool,flatten,dense32". Suffixes ":tanh", ":sigmoid",
/// ":identity" override the default relu; "conv8x3s" selects same padding.
std::vector<LayerSpec> parse_architecture(std::string_view text);

/// Feedforward stack whose last layer is the task head (dense; identity
/// activation for a classifier, tanh for a hasher).
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<Layer> layers, Head head, std::uint64_t init_seed);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t depth() const { return layers_.size(); }
  std::size_t head_index() const { return layers_.size() - 1; }
  const Head& head() const { return head_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::size_t parameter_count() const;

  /// Checks that every layer's shapes chain and the head is well formed.
  void validate() const;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  Head head_;
  std::uint64_t init_seed_ = 0;
};

/// Builds a network with fan-in scaled uniform init, one RNG stream per layer.
Network make_network(const Shape& input_shape, const std::vector<LayerSpec>& backbone, Head head,
                     std::uint64_t seed);

/// Copy of `net` with its head layer replaced by a freshly initialized one.
Network with_fresh_head(const Network& net, Head head, std::uint64_t seed);

/// Kaiming-style uniform bound for a layer with this fan-in.
double init_bound(std::size_t fan_in);

struct ForwardTrace {
  Tensor input;
  std::vector<Tensor> pre;   // a_l
  std::vector<Tensor> post;  // h_l = f(a_l)

  const Tensor& output() const { return post.back(); }
  /// Input to layer l (h_{l-1}, or x for l = 0).
  const Tensor& layer_input(std::size_t l) const { return l == 0 ? input : post[l - 1]; }
};

ForwardTrace forward(const Network& net, const Tensor& batch);

/// Head output only.
Tensor predict_scores(const Network& net, const Tensor& batch);

/// Arg-max class per row (classifier head).
std::vector<int> predict_labels(const Network& net, const Tensor& batch);

enum class LossKind : std::uint8_t { squared_error = 0, cross_entropy = 1, pairwise_hash = 2 };

std::string_view name(LossKind kind);

/// Throws ConfigError for loss/head pairings that are not allowed.
void check_loss_head(LossKind kind, const Head& head);

/// Mean loss over the batch.
///
/// squared_error: target has the output's shape; per-row E = ½Σ(y−ŷ)².
/// cross_entropy: output holds logits; target is 1-D class indices (N) or
///   one-hot rows (N×C).
/// pairwise_hash: output holds tanh codes u (N×k); target is class indices
///   as a 1-D tensor (N) or multi-hot rows (N×C), and two rows are similar when they share a
///   label. L = mean over pairs i<j of s·d + (1−s)·max(0, k/2 − d) with
///   d = ½(k − u_iᵀu_j).
double loss(LossKind kind, const Tensor& output, const Tensor& target);

/// N·∂loss/∂output, i.e. each row's own gradient for per-example losses.
/// Averaging the resulting weight gradients over the batch recovers the
/// gradient of loss() exactly.
Tensor loss_grad_output(LossKind kind, const Tensor& output, const Tensor& target);

/// Gathers the listed rows of a batch tensor.
Tensor gather_rows(const Tensor& batch, const std::vector<std::size_t>& rows);

}  // namespace signsym
