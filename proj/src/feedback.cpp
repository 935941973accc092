#include "signsym/feedback.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "signsym/rng.hpp"

namespace signsym {

std::string_view name(FeedbackRule rule) {
  switch (rule) {
    case FeedbackRule::bp: return "BP";
    case FeedbackRule::fa: return "FA";
    case FeedbackRule::usf: return "uSF";
    case FeedbackRule::frsf: return "frSF";
    case FeedbackRule::brsf: return "brSF";
  }
  return "?";
}

FeedbackRule parse_rule(std::string_view text) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto rule : kAllRules) {
    std::string n(name(rule));
    for (auto& c : n) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (n == lower) return rule;
  }
  throw ConfigError("unknown feedback rule '" + std::string(text) + "'");
}

bool is_sign_symmetric(FeedbackRule rule) {
  return rule == FeedbackRule::usf || rule == FeedbackRule::frsf || rule == FeedbackRule::brsf;
}

bool uses_magnitudes(FeedbackRule rule) { return rule == FeedbackRule::frsf || rule == FeedbackRule::brsf; }

namespace {

constexpr std::uint64_t kFeedbackSalt = 0xfeed;
constexpr std::uint64_t kMagnitudeSalt = 0x3a6;

/// Uniform on (0, 1].
Tensor draw_magnitudes(const Shape& shape, std::uint64_t seed, std::size_t layer, std::uint64_t generation) {
  SeededRng rng(seed, stream_id(stream_id(layer, kMagnitudeSalt), generation));
  Tensor m(shape);
  for (auto& v : m.span()) v = 1.0 - rng.uniform01();
  return m;
}

std::size_t fan_in(const Layer& layer) { return layer.weight.size() / layer.weight.dim(0); }

}  // namespace

Shape feedback_shape(const Layer& layer) {
  if (layer.kind == LayerKind::dense) return {layer.weight.dim(1), layer.weight.dim(0)};
  return layer.weight.shape();
}

FeedbackState FeedbackState::create(const Network& net, FeedbackRule rule, std::uint64_t seed) {
  FeedbackState state;
  state.rule = rule;
  state.seed = seed;
  state.random_feedback.resize(net.depth());
  state.magnitudes.resize(net.depth());
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layer(l);
    if (!layer.has_weights()) continue;
    if (rule == FeedbackRule::fa) {
      SeededRng rng(seed, stream_id(l, kFeedbackSalt));
      const double s = init_bound(fan_in(layer));
      state.random_feedback[l] = sample_uniform(rng, feedback_shape(layer), -s, s);
    } else if (uses_magnitudes(rule)) {
      state.magnitudes[l] = draw_magnitudes(feedback_shape(layer), seed, l, 0);
    }
  }
  return state;
}

void FeedbackState::redraw_magnitudes() {
  ++redraws;
  for (std::size_t l = 0; l < magnitudes.size(); ++l)
    if (!magnitudes[l].absent()) magnitudes[l] = draw_magnitudes(magnitudes[l].shape(), seed, l, redraws);
}

std::uint64_t FeedbackState::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& b : random_feedback)
    if (!b.absent()) h = content_hash(b, h);
  for (const auto& m : magnitudes)
    if (!m.absent()) h = content_hash(m, h);
  return h;
}

Tensor feedback_matrix(FeedbackRule rule, const Tensor& weight, const FeedbackState& state, std::size_t layer) {
  const bool dense = weight.rank() == 2;
  auto transported = [&] { return dense ? transpose(weight) : weight; };
  const Shape expected = dense ? Shape{weight.dim(1), weight.dim(0)} : weight.shape();
  auto slot = [&](const std::vector<Tensor>& slots, const char* what) -> const Tensor& {
    if (state.rule != rule || layer >= slots.size() || slots[layer].absent())
      throw StateError(std::string("feedback state has no ") + what + " for layer " + std::to_string(layer) +
                       " under rule " + std::string(name(rule)));
    if (slots[layer].shape() != expected)
      throw StateError(std::string(what) + " for layer " + std::to_string(layer) + " has shape " +
                       to_string(slots[layer].shape()) + ", expected " + to_string(expected));
    return slots[layer];
  };
  switch (rule) {
    case FeedbackRule::bp: return transported();
    case FeedbackRule::fa: return slot(state.random_feedback, "B");
    case FeedbackRule::usf: return sign_of(transported());
    case FeedbackRule::frsf:
    case FeedbackRule::brsf: return hadamard(slot(state.magnitudes, "M"), sign_of(transported()));
  }
  throw StateError("unknown feedback rule");
}

namespace {

/// Carries layer l's error signal back to its input using feedback V.
Tensor transport(const Layer& layer, std::size_t l, const Tensor& delta, const Tensor& layer_input,
                 FeedbackRule rule, const FeedbackState& state) {
  switch (layer.kind) {
    case LayerKind::dense: {
      const Tensor v = feedback_matrix(rule, layer.weight, state, l);  // in×out
      Tensor grad(layer_input.shape());
      grad.matrix().noalias() = delta.matrix() * v.matrix().transpose();
      return grad;
    }
    case LayerKind::conv2d: {
      const Tensor v = feedback_matrix(rule, layer.weight, state, l);
      return conv2d_backward_input(delta, v, layer_input.shape(), layer.padding);
    }
    case LayerKind::maxpool2: return maxpool2_backward(layer_input, delta);
    case LayerKind::flatten: return delta.reshaped(layer_input.shape());
  }
  return {};
}

void check_trace(const Network& net, const ForwardTrace& trace, const Tensor& loss_grad) {
  if (trace.pre.size() != net.depth() || trace.post.size() != net.depth())
    throw DimensionError("trace has " + std::to_string(trace.pre.size()) + " layers, network has " +
                         std::to_string(net.depth()));
  if (loss_grad.shape() != trace.output().shape())
    throw DimensionError("layer " + std::to_string(net.head_index()) + ": loss gradient " +
                         to_string(loss_grad.shape()) + " does not match output " + to_string(trace.output().shape()));
  require_finite(loss_grad, "backward_error_signals");
}

struct BackwardPass {
  std::vector<Tensor> deltas;
  Tensor input_grad;
};

BackwardPass run_backward(const Network& net, const ForwardTrace& trace, FeedbackRule rule,
                          const FeedbackState& state, const Tensor& loss_grad, bool to_input) {
  check_trace(net, trace, loss_grad);
  BackwardPass out;
  out.deltas.resize(net.depth());
  Tensor upstream = loss_grad;
  for (std::size_t l = net.depth(); l-- > 0;) {
    const Layer& layer = net.layer(l);
    if (upstream.shape() != trace.pre[l].shape())
      throw DimensionError("layer " + std::to_string(l) + ": error signal " + to_string(upstream.shape()) +
                           " does not match pre-activation " + to_string(trace.pre[l].shape()));
    out.deltas[l] = layer.activation == Activation::identity
                        ? upstream
                        : hadamard(upstream, activation_derivative(layer.activation, trace.pre[l]));
    if (l > 0 || to_input) upstream = transport(layer, l, out.deltas[l], trace.layer_input(l), rule, state);
  }
  if (to_input) out.input_grad = std::move(upstream);
  return out;
}

}  // namespace

std::vector<Tensor> backward_error_signals(const Network& net, const ForwardTrace& trace, FeedbackRule rule,
                                           const FeedbackState& state, const Tensor& loss_grad) {
  return run_backward(net, trace, rule, state, loss_grad, false).deltas;
}

Tensor input_gradient(const Network& net, const ForwardTrace& trace, FeedbackRule rule, const FeedbackState& state,
                      const Tensor& loss_grad) {
  return run_backward(net, trace, rule, state, loss_grad, true).input_grad;
}

Gradients pseudo_gradients(const Network& net, const ForwardTrace& trace, const std::vector<Tensor>& deltas) {
  if (deltas.size() != net.depth())
    throw DimensionError("got " + std::to_string(deltas.size()) + " error signals for " +
                         std::to_string(net.depth()) + " layers");
  Gradients g;
  g.weight.resize(net.depth());
  g.bias.resize(net.depth());
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layer(l);
    if (!layer.has_weights()) continue;
    const Tensor& delta = deltas[l];
    const Tensor& in = trace.layer_input(l);
    const double inv_n = 1.0 / static_cast<double>(in.rows());
    if (delta.shape() != trace.pre[l].shape())
      throw DimensionError("layer " + std::to_string(l) + ": error signal " + to_string(delta.shape()) +
                           " does not match pre-activation " + to_string(trace.pre[l].shape()));
    if (layer.kind == LayerKind::dense) {
      Tensor gw(layer.weight.shape());
      gw.matrix().noalias() = delta.matrix().transpose() * in.matrix();
      gw.values() *= inv_n;
      Tensor gb(layer.bias.shape());
      gb.values() = delta.matrix().colwise().sum().transpose().array() * inv_n;
      g.weight[l] = std::move(gw);
      g.bias[l] = std::move(gb);
    } else {
      Tensor gw = conv2d_backward_weight(in, delta, layer.weight.shape(), layer.padding);
      gw.values() *= inv_n;
      Tensor gb(layer.bias.shape());
      const std::size_t channels = delta.dim(1), plane = delta.dim(2) * delta.dim(3);
      for (std::size_t n = 0; n < delta.dim(0); ++n)
        for (std::size_t c = 0; c < channels; ++c)
          gb[c] += Eigen::Map<const Eigen::ArrayXd>(delta.data() + (n * channels + c) * plane,
                                                    static_cast<Eigen::Index>(plane))
                       .sum();
      gb.values() *= inv_n;
      g.weight[l] = std::move(gw);
      g.bias[l] = std::move(gb);
    }
  }
  return g;
}

AdamState AdamState::create(const Network& net, LearningRates lr) {
  AdamState adam;
  adam.lr = lr;
  adam.m_weight.resize(net.depth());
  adam.v_weight.resize(net.depth());
  adam.m_bias.resize(net.depth());
  adam.v_bias.resize(net.depth());
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layer(l);
    if (!layer.has_weights()) continue;
    adam.m_weight[l] = zeros_like(layer.weight);
    adam.v_weight[l] = zeros_like(layer.weight);
    adam.m_bias[l] = zeros_like(layer.bias);
    adam.v_bias[l] = zeros_like(layer.bias);
  }
  return adam;
}

namespace {

void adam_step(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, const AdamState& adam, double lr) {
  Tensor::Storage g = grad.values() + adam.weight_decay * param.values();
  m.values() = adam.beta1 * m.values() + (1.0 - adam.beta1) * g;
  v.values() = adam.beta2 * v.values() + (1.0 - adam.beta2) * g.square();
  const double t = static_cast<double>(adam.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  param.values() -= lr * (m.values() / c1) / ((v.values() / c2).sqrt() + adam.eps);
}

}  // namespace

void weight_update(Network& net, const ForwardTrace& trace, const std::vector<Tensor>& deltas, AdamState& adam,
                   FeedbackState& state) {
  if (adam.m_weight.size() != net.depth()) throw StateError("ADAM state was created for a different network");
  const Gradients g = pseudo_gradients(net, trace, deltas);
  ++adam.step;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    Layer& layer = net.layers()[l];
    if (!layer.has_weights()) continue;
    if (adam.m_weight[l].shape() != layer.weight.shape())
      throw DimensionError("layer " + std::to_string(l) + ": ADAM moments do not match weight shape");
    const double lr = l == net.head_index() ? adam.lr.head : adam.lr.backbone;
    adam_step(layer.weight, g.weight[l], adam.m_weight[l], adam.v_weight[l], adam, lr);
    adam_step(layer.bias, g.bias[l], adam.m_bias[l], adam.v_bias[l], adam, lr);
  }
  if (state.rule == FeedbackRule::brsf) state.redraw_magnitudes();
}

TrainReport train(Network& net, FeedbackState& state, const Tensor& inputs, const Tensor& targets, LossKind loss_kind,
                  const TrainOptions& options, AdamState* adam) {
  if (inputs.absent() || inputs.rows() == 0) throw RangeError("train: empty dataset");
  if (targets.rows() != inputs.rows())
    throw DimensionError("train: " + std::to_string(inputs.rows()) + " inputs but " +
                         std::to_string(targets.rows()) + " targets");
  if (options.batch_size == 0) throw ConfigError("train: batch size must be positive");
  check_loss_head(loss_kind, net.head());

  AdamState local;
  if (!adam) {
    local = AdamState::create(net, options.lr);
    adam = &local;
  }

  TrainReport report;
  const std::size_t n = inputs.rows();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (options.shuffle) {
      SeededRng rng(options.seed, stream_id(epoch, 0x5bf1e));
      rng.shuffle(std::span<std::size_t>(order));
    }
    double total = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      if (options.max_updates && report.updates >= options.max_updates) break;
      const std::size_t end = std::min(n, start + options.batch_size);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      const Tensor x = gather_rows(inputs, rows);
      const Tensor y = gather_rows(targets, rows);
      const ForwardTrace trace = forward(net, x);
      total += loss(loss_kind, trace.output(), y);
      ++batches;
      const auto deltas =
          backward_error_signals(net, trace, state.rule, state, loss_grad_output(loss_kind, trace.output(), y));
      weight_update(net, trace, deltas, *adam, state);
      ++report.updates;
    }
    if (batches) report.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return report;
}

}  // namespace signsym
