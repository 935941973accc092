#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "signsym/network.hpp"
#include "signsym/tensor.hpp"

namespace signsym {

/// Credit-assignment rule: which matrix carries the error signal backwards.
///
///   bp    V = Wᵀ
///   fa    V = B        (fixed random)
///   usf   V = sign(Wᵀ)
///   frsf  V = M ∘ sign(Wᵀ), M fixed
///   brsf  V = M ∘ sign(Wᵀ), M redrawn after every parameter update
enum class FeedbackRule : std::uint8_t { bp = 0, fa = 1, usf = 2, frsf = 3, brsf = 4 };

inline constexpr FeedbackRule kAllRules[] = {FeedbackRule::bp, FeedbackRule::fa, FeedbackRule::usf,
                                             FeedbackRule::frsf, FeedbackRule::brsf};

std::string_view name(FeedbackRule rule);
FeedbackRule parse_rule(std::string_view text);
bool is_sign_symmetric(FeedbackRule rule);
bool uses_magnitudes(FeedbackRule rule);

/// Per-layer feedback matrices, indexed by the weight layer they replace.
///
/// Dense layers store V in Wᵀ layout (in×out); conv layers store it in the
/// kernel layout, since transposed convolution does the transposition.
/// Slots for weight-free layers, and slots a rule does not use, stay absent.
struct FeedbackState {
  FeedbackRule rule = FeedbackRule::bp;
  std::uint64_t seed = 0;
  std::vector<Tensor> random_feedback;  // B_l (fa)
  std::vector<Tensor> magnitudes;       // M_l (frsf, brsf), entries in (0, 1]
  std::uint64_t redraws = 0;            // brsf redraw counter

  static FeedbackState create(const Network& net, FeedbackRule rule, std::uint64_t seed);

  /// Draws fresh magnitudes for every weight layer (brsf after an update).
  void redraw_magnitudes();

  /// Hash of all B_l and M_l, for immutability checks.
  std::uint64_t fingerprint() const;
};

/// Shape of the feedback slot for a weight layer.
Shape feedback_shape(const Layer& layer);

/// V for weight layer `layer` of the network whose weight is `weight`.
Tensor feedback_matrix(FeedbackRule rule, const Tensor& weight, const FeedbackState& state, std::size_t layer);

/// δ_l for every layer, seeded by δ_L = loss_grad ∘ f′(a_L) and carried back
/// by δ_l = (V_{l+1} δ_{l+1}) ∘ f′(a_l). Weight-free layers (pool, flatten)
/// route the signal unchanged in value.
std::vector<Tensor> backward_error_signals(const Network& net, const ForwardTrace& trace, FeedbackRule rule,
                                           const FeedbackState& state, const Tensor& loss_grad);

/// The error signal carried one step past layer 0, i.e. the input gradient
/// as seen through the rule's transport (exact for bp).
Tensor input_gradient(const Network& net, const ForwardTrace& trace, FeedbackRule rule, const FeedbackState& state,
                      const Tensor& loss_grad);

struct Gradients {
  std::vector<Tensor> weight;  // absent for weight-free layers
  std::vector<Tensor> bias;
};

/// Batch-mean pseudo-gradients δ_l h_{l−1}ᵀ (and mean δ_l for biases).
Gradients pseudo_gradients(const Network& net, const ForwardTrace& trace, const std::vector<Tensor>& deltas);

struct LearningRates {
  double backbone = 1e-5;
  double head = 1e-4;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0005;
  LearningRates lr;
  std::uint64_t step = 0;
  std::vector<Tensor> m_weight, v_weight, m_bias, v_bias;

  static AdamState create(const Network& net, LearningRates lr);
};

/// One ADAM step on g = pseudo-gradient + λW for every weight layer, then a
/// magnitude redraw when the rule is brsf.
void weight_update(Network& net, const ForwardTrace& trace, const std::vector<Tensor>& deltas, AdamState& adam,
                   FeedbackState& state);

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  LearningRates lr;
  std::uint64_t seed = 0;
  std::size_t max_updates = 0;  // 0 = unlimited
  bool shuffle = true;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::size_t updates = 0;
};

/// Mini-batch training under the state's rule. `targets` rows align with
/// `inputs` rows. Deterministic for fixed options.
TrainReport train(Network& net, FeedbackState& state, const Tensor& inputs, const Tensor& targets, LossKind loss_kind,
                  const TrainOptions& options, AdamState* adam = nullptr);

}  // namespace signsym
