#include "signsym/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "signsym/rng.hpp"

namespace signsym {

std::string_view name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

std::string_view name(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(std::string_view text) {
  for (auto act : {Activation::identity, Activation::relu, Activation::tanh, Activation::sigmoid})
    if (name(act) == text) return act;
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

std::string_view name(LossKind kind) {
  switch (kind) {
    case LossKind::squared_error: return "squared-error";
    case LossKind::cross_entropy: return "cross-entropy";
    case LossKind::pairwise_hash: return "pairwise-hash";
  }
  return "?";
}

Tensor activate(Activation act, const Tensor& pre) {
  Tensor out(pre.shape());
  switch (act) {
    case Activation::identity: out.values() = pre.values(); break;
    case Activation::relu: out.values() = pre.values().max(0.0); break;
    case Activation::tanh: out.values() = pre.values().tanh(); break;
    case Activation::sigmoid: out.values() = 1.0 / (1.0 + (-pre.values()).exp()); break;
  }
  return out;
}

Tensor activation_derivative(Activation act, const Tensor& pre) {
  Tensor out(pre.shape());
  switch (act) {
    case Activation::identity: out.values().setOnes(); break;
    case Activation::relu: out.values() = (pre.values() > 0.0).cast<double>(); break;
    case Activation::tanh: out.values() = 1.0 - pre.values().tanh().square(); break;
    case Activation::sigmoid: {
      const Tensor::Storage s = 1.0 / (1.0 + (-pre.values()).exp());
      out.values() = s * (1.0 - s);
      break;
    }
  }
  return out;
}

std::vector<LayerSpec> parse_architecture(std::string_view text) {
  std::vector<LayerSpec> specs;
  std::stringstream ss{std::string(text)};
  std::string token;
  while (std::getline(ss, token, ',')) {
    token.erase(std::remove_if(token.begin(), token.end(), ::isspace), token.end());
    if (token.empty()) continue;
    LayerSpec spec;
    std::string body = token;
    if (auto colon = token.find(':'); colon != std::string::npos) {
      body = token.substr(0, colon);
      spec.activation = parse_activation(token.substr(colon + 1));
    }
    try {
      if (body == "pool") {
        spec.kind = LayerKind::maxpool2;
        spec.activation = Activation::identity;
      } else if (body == "flatten") {
        spec.kind = LayerKind::flatten;
        spec.activation = Activation::identity;
      } else if (body.rfind("dense", 0) == 0) {
        spec.kind = LayerKind::dense;
        spec.units = std::stoul(body.substr(5));
      } else if (body.rfind("conv", 0) == 0) {
        spec.kind = LayerKind::conv2d;
        auto x = body.find('x');
        if (x == std::string::npos) throw ConfigError("conv layer needs <channels>x<kernel>");
        spec.units = std::stoul(body.substr(4, x - 4));
        std::string kernel = body.substr(x + 1);
        if (!kernel.empty() && kernel.back() == 's') {
          spec.padding = Padding::same;
          kernel.pop_back();
        }
        spec.kernel = std::stoul(kernel);
      } else {
        throw ConfigError("unknown layer '" + token + "'");
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("malformed layer '" + token + "'");
    }
    if ((spec.kind == LayerKind::dense || spec.kind == LayerKind::conv2d) && spec.units == 0)
      throw ConfigError("layer '" + token + "' has zero width");
    specs.push_back(spec);
  }
  return specs;
}

double init_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

namespace {

Layer build_layer(const LayerSpec& spec, const Shape& in, SeededRng& rng, std::size_t index) {
  Layer layer;
  layer.kind = spec.kind;
  layer.activation = spec.activation;
  layer.padding = spec.padding;
  layer.input_shape = in;
  const std::string where = "layer " + std::to_string(index) + ": ";
  switch (spec.kind) {
    case LayerKind::dense: {
      const std::size_t fan_in = element_count(in);
      const double b = init_bound(fan_in);
      layer.weight = sample_uniform(rng, {spec.units, fan_in}, -b, b);
      layer.bias = Tensor({spec.units});
      layer.output_shape = {spec.units};
      break;
    }
    case LayerKind::conv2d: {
      if (in.size() != 3) throw DimensionError(where + "conv2d expects (C,H,W) input, got " + to_string(in));
      if (spec.kernel == 0) throw ConfigError(where + "conv2d kernel must be positive");
      const std::size_t fan_in = in[0] * spec.kernel * spec.kernel;
      const double b = init_bound(fan_in);
      layer.weight = sample_uniform(rng, {spec.units, in[0], spec.kernel, spec.kernel}, -b, b);
      layer.bias = Tensor({spec.units});
      layer.output_shape = {spec.units, conv_out_extent(in[1], spec.kernel, spec.padding),
                            conv_out_extent(in[2], spec.kernel, spec.padding)};
      break;
    }
    case LayerKind::maxpool2:
      if (in.size() != 3 || in[1] < 2 || in[2] < 2)
        throw DimensionError(where + "maxpool2 expects (C,H,W) with H,W >= 2, got " + to_string(in));
      layer.output_shape = {in[0], in[1] / 2, in[2] / 2};
      break;
    case LayerKind::flatten:
      layer.output_shape = {element_count(in)};
      break;
  }
  return layer;
}

Layer head_layer(Head head, const Shape& in, std::uint64_t seed, std::size_t index, std::uint64_t salt) {
  if (head.size == 0) throw ConfigError("head size must be positive");
  LayerSpec spec;
  spec.kind = LayerKind::dense;
  spec.units = head.size;
  spec.activation = head.kind == Head::Kind::hasher ? Activation::tanh : Activation::identity;
  SeededRng rng(seed, stream_id(index, salt));
  return build_layer(spec, in, rng, index);
}

constexpr std::uint64_t kLayerSalt = 0x1417;
constexpr std::uint64_t kFreshHeadSalt = 0x4ead;

}  // namespace

Network::Network(Shape input_shape, std::vector<Layer> layers, Head head, std::uint64_t init_seed)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), head_(head), init_seed_(init_seed) {
  validate();
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    if (l.has_weights()) n += l.weight.size() + l.bias.size();
  return n;
}

void Network::validate() const {
  if (layers_.empty()) throw ConfigError("network has no layers");
  Shape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (l.input_shape != cur)
      throw DimensionError(where + "expects input " + to_string(l.input_shape) + " but receives " + to_string(cur));
    if (l.kind == LayerKind::dense) {
      if (l.weight.rank() != 2 || l.weight.dim(1) != element_count(cur) || l.bias.size() != l.weight.dim(0) ||
          l.output_shape != Shape{l.weight.dim(0)})
        throw DimensionError(where + "dense weight " + to_string(l.weight.shape()) + " inconsistent with input " +
                             to_string(cur));
    } else if (l.kind == LayerKind::conv2d) {
      if (l.weight.rank() != 4 || cur.size() != 3 || l.weight.dim(1) != cur[0] || l.bias.size() != l.weight.dim(0))
        throw DimensionError(where + "conv kernel " + to_string(l.weight.shape()) + " inconsistent with input " +
                             to_string(cur));
    }
    cur = l.output_shape;
  }
  const Layer& head = layers_.back();
  if (head.kind != LayerKind::dense || head.output_shape != Shape{head_.size})
    throw ConfigError("last layer must be a dense head of size " + std::to_string(head_.size));
  if (head_.kind == Head::Kind::hasher && head.activation != Activation::tanh)
    throw ConfigError("hasher head must use tanh activation");
}

Network make_network(const Shape& input_shape, const std::vector<LayerSpec>& backbone, Head head,
                     std::uint64_t seed) {
  std::vector<Layer> layers;
  Shape cur = input_shape;
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    SeededRng rng(seed, stream_id(i, kLayerSalt));
    layers.push_back(build_layer(backbone[i], cur, rng, i));
    cur = layers.back().output_shape;
  }
  layers.push_back(head_layer(head, cur, seed, backbone.size(), kLayerSalt));
  return Network(input_shape, std::move(layers), head, seed);
}

Network with_fresh_head(const Network& net, Head head, std::uint64_t seed) {
  std::vector<Layer> layers = net.layers();
  const std::size_t index = layers.size() - 1;
  layers.back() = head_layer(head, layers.back().input_shape, seed, index, kFreshHeadSalt);
  return Network(net.input_shape(), std::move(layers), head, net.init_seed());
}

namespace {

Tensor layer_pre_activation(const Layer& layer, const Tensor& in) {
  switch (layer.kind) {
    case LayerKind::dense: {
      Tensor out({in.rows(), layer.weight.dim(0)});
      out.matrix().noalias() = in.matrix() * layer.weight.matrix().transpose();
      out.matrix().rowwise() += layer.bias.values().matrix().transpose();
      return out;
    }
    case LayerKind::conv2d: return conv2d_forward(in, layer.weight, layer.bias, layer.padding);
    case LayerKind::maxpool2: return maxpool2_forward(in);
    case LayerKind::flatten: return in.reshaped({in.rows(), element_count(layer.output_shape)});
  }
  return {};
}

}  // namespace

ForwardTrace forward(const Network& net, const Tensor& batch) {
  Shape expected{batch.rows()};
  expected.insert(expected.end(), net.input_shape().begin(), net.input_shape().end());
  if (batch.absent() || batch.shape() != expected) {
    // accept flat rows for a flat input layer of the same size
    if (batch.absent() || batch.rank() < 2 || batch.cols() != element_count(net.input_shape()))
      throw DimensionError("layer 0: input batch " + (batch.absent() ? std::string("<absent>") : to_string(batch.shape())) +
                           " does not match expected per-example shape " + to_string(net.input_shape()));
  }
  require_finite(batch, "forward");

  ForwardTrace trace;
  trace.input = batch.reshaped(expected);
  trace.pre.reserve(net.depth());
  trace.post.reserve(net.depth());
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layer(l);
    Tensor pre = layer_pre_activation(layer, trace.layer_input(l));
    if (!pre.all_finite()) throw NonFiniteError("layer " + std::to_string(l) + ": non-finite pre-activation");
    Tensor post = activate(layer.activation, pre);
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(std::move(post));
  }
  return trace;
}

Tensor predict_scores(const Network& net, const Tensor& batch) { return forward(net, batch).output(); }

std::vector<int> predict_labels(const Network& net, const Tensor& batch) {
  const Tensor scores = predict_scores(net, batch);
  std::vector<int> labels(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    Eigen::Index arg = 0;
    scores.matrix().row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    labels[i] = static_cast<int>(arg);
  }
  return labels;
}

Tensor gather_rows(const Tensor& batch, const std::vector<std::size_t>& rows) {
  Shape shape = batch.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  const std::size_t n = batch.cols();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= batch.rows()) throw RangeError("gather_rows: row index out of range");
    std::copy_n(batch.data() + rows[i] * n, n, out.data() + i * n);
  }
  return out;
}

void check_loss_head(LossKind kind, const Head& head) {
  if (kind == LossKind::pairwise_hash && head.kind != Head::Kind::hasher)
    throw ConfigError("pairwise-hash loss requires a hasher head");
  if (kind == LossKind::cross_entropy && head.kind != Head::Kind::classifier)
    throw ConfigError("cross-entropy loss requires a classifier head");
}

namespace {

/// Class-index or one-hot/multi-hot targets as dense N×C rows.
Tensor target_rows(const Tensor& output, const Tensor& target, std::string_view what) {
  const std::size_t n = output.rows(), c = output.cols();
  if (target.rank() == 2 && target.rows() == n && (what != "cross-entropy" || target.cols() == c)) return target;
  if (target.rank() == 1 && target.size() == n) {
    std::size_t classes = c;
    if (what != "cross-entropy") {
      double top = 0;
      for (auto v : target.span()) top = std::max(top, v);
      classes = static_cast<std::size_t>(top) + 1;
    }
    Tensor hot({n, classes});
    for (std::size_t i = 0; i < n; ++i) {
      const double v = target[i];
      if (v < 0 || v != std::floor(v) || static_cast<std::size_t>(v) >= classes)
        throw RangeError(std::string(what) + ": class index " + std::to_string(v) + " out of range");
      hot(i, static_cast<std::size_t>(v)) = 1.0;
    }
    return hot;
  }
  throw DimensionError(std::string(what) + ": target " + to_string(target.shape()) + " incompatible with output " +
                       to_string(output.shape()));
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p(logits.shape());
  auto in = logits.matrix();
  auto out = p.matrix();
  for (Eigen::Index i = 0; i < in.rows(); ++i) {
    const double m = in.row(i).maxCoeff();
    out.row(i) = (in.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return p;
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double m = row.maxCoeff();
  return m + std::log((row.array() - m).exp().sum());
}

/// Similarity s_ij and the hinge activity for the pairwise hash loss.
struct PairTerms {
  double loss = 0;
  Tensor grad;  // ∂L/∂u
};

PairTerms pairwise_terms(const Tensor& codes, const Tensor& target) {
  const std::size_t n = codes.rows();
  const double k = static_cast<double>(codes.cols());
  const double margin = k / 2.0;
  const Tensor labels = target_rows(codes, target, "pairwise-hash");
  PairTerms out{0.0, Tensor(codes.shape())};
  if (n < 2) return out;
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  auto u = codes.matrix();
  auto lab = labels.matrix();
  auto g = out.grad.matrix();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const bool similar = lab.row(ii).dot(lab.row(jj)) > 0;
      const double d = 0.5 * (k - u.row(ii).dot(u.row(jj)));
      double coeff = 0;  // ∂term/∂d
      if (similar) {
        out.loss += d;
        coeff = 1.0;
      } else if (margin - d > 0) {
        out.loss += margin - d;
        coeff = -1.0;
      }
      if (coeff != 0) {
        g.row(ii) += (coeff * -0.5 / pairs) * u.row(jj);
        g.row(jj) += (coeff * -0.5 / pairs) * u.row(ii);
      }
    }
  out.loss /= pairs;
  return out;
}

}  // namespace

double loss(LossKind kind, const Tensor& output, const Tensor& target) {
  require_finite(output, "loss");
  require_finite(target, "loss");
  const double n = static_cast<double>(output.rows());
  switch (kind) {
    case LossKind::squared_error:
      require_same_shape(output, target, "squared-error loss");
      return 0.5 * (output.values() - target.values()).square().sum() / n;
    case LossKind::cross_entropy: {
      const Tensor hot = target_rows(output, target, "cross-entropy");
      double total = 0;
      for (Eigen::Index i = 0; i < output.matrix().rows(); ++i) {
        const double lse = log_sum_exp(output.matrix().row(i));
        total += (hot.matrix().row(i).array() * (lse - output.matrix().row(i).array())).sum();
      }
      return total / n;
    }
    case LossKind::pairwise_hash: return pairwise_terms(output, target).loss;
  }
  return 0;
}

Tensor loss_grad_output(LossKind kind, const Tensor& output, const Tensor& target) {
  require_finite(output, "loss_grad_output");
  require_finite(target, "loss_grad_output");
  switch (kind) {
    case LossKind::squared_error: {
      require_same_shape(output, target, "squared-error loss");
      return Tensor(output.shape(), Tensor::Storage(output.values() - target.values()));
    }
    case LossKind::cross_entropy: {
      const Tensor hot = target_rows(output, target, "cross-entropy");
      Tensor grad = softmax_rows(output);
      auto g = grad.matrix();
      for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i) = g.row(i) * hot.matrix().row(i).sum() - hot.matrix().row(i);
      return grad;
    }
    case LossKind::pairwise_hash: {
      Tensor grad = pairwise_terms(output, target).grad;
      grad.values() *= static_cast<double>(output.rows());
      return grad;
    }
  }
  return {};
}

}  // namespace signsym
