#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "signsym/feedback.hpp"
#include "signsym/network.hpp"

namespace signsym {

enum class AttackFamily : std::uint8_t { fgsm = 0, pgd = 1, hag = 2, boundary = 3, hsja = 4 };

std::string_view name(AttackFamily family);
AttackFamily parse_attack(std::string_view text);
bool is_white_box(AttackFamily family);

struct AttackSpec {
  AttackFamily family = AttackFamily::fgsm;
  double epsilon = 0.0;         // L∞ budget (white-box)
  double alpha = 0.0;           // step size (PGD, HAG)
  std::size_t steps = 1;        // iterations (PGD, HAG)
  std::size_t query_budget = 1000;  // black-box only
  double lo = 0.0;              // valid data range
  double hi = 1.0;
  std::uint64_t seed = 0;       // black-box randomness

  /// Throws ConfigError / RangeError when the parameters cannot run.
  void validate() const;
};

struct AdversarialResult {
  Tensor x_adv;
  std::vector<bool> success;  // per row
  std::size_t queries_used = 0;
  double achieved_linf = 0.0;  // max over rows
  double achieved_l2 = 0.0;    // max over rows
  std::vector<std::size_t> hamming_shift;  // HAG only, per row
};

/// White-box access: the network together with the rule used to carry the
/// loss gradient back to the input. BP gives the exact input gradient; any
/// other rule reproduces the deployed model's own transport.
class GradientModel {
 public:
  GradientModel(const Network& net, FeedbackRule rule, FeedbackState state);
  static GradientModel backprop(const Network& net);

  const Network& network() const { return *net_; }
  FeedbackRule rule() const { return rule_; }

  /// ∂(objective)/∂x as transported by the rule, given the gradient of the
  /// objective with respect to the network output.
  Tensor input_gradient(const Tensor& x, const std::function<Tensor(const Tensor& output)>& output_grad) const;

 private:
  const Network* net_;
  FeedbackRule rule_;
  FeedbackState state_;
};

/// x_adv = clip_range(x + ε·sign(∇ₓ CE(f(x), y*))).
AdversarialResult fgsm(const GradientModel& model, const Tensor& x, const std::vector<int>& labels,
                       const AttackSpec& spec);

/// x_t = Clip_x^ε(x_{t−1} + α·sign(∇ CE)), then range clip; starts at x.
AdversarialResult pgd(const GradientModel& model, const Tensor& x, const std::vector<int>& labels,
                      const AttackSpec& spec);

/// Hamming attack: signed gradient ascent on −b₀ᵀ h(x_adv)/k where h is the
/// tanh code and b₀ = binarize(h(x)). Success when at least k/4 bits flip.
AdversarialResult hag(const GradientModel& model, const Tensor& x, const AttackSpec& spec);

/// HAG objective value per row, for the given reference codes b₀ (±1 rows).
std::vector<double> hag_surrogate(const Network& net, const Tensor& x, const Tensor& reference_codes);

/// Label-only access for decision-based attacks. x is a single example with
/// a leading batch dimension of 1.
class LabelOracle {
 public:
  virtual ~LabelOracle() = default;
  virtual int predict(const Tensor& x) const = 0;
};

class NetworkLabelOracle final : public LabelOracle {
 public:
  explicit NetworkLabelOracle(const Network& net) : net_(net) {}
  int predict(const Tensor& x) const override { return predict_labels(net_, x).front(); }

 private:
  const Network& net_;
};

/// Called with every accepted iterate of a decision-based attack.
using AcceptObserver = std::function<void(const Tensor& x_adv)>;

/// Decision-based Boundary Attack (L2): starts from a misclassified noise
/// image and walks along the boundary toward x with adaptive orthogonal and
/// source-directed steps. Throws StartNotFoundError when no adversarial
/// start is found within the query budget.
AdversarialResult boundary_attack(const LabelOracle& oracle, const Tensor& x, int label, const AttackSpec& spec,
                                  const AcceptObserver& observer = {});

/// HopSkipJump (L2): boundary binary search, Monte-Carlo estimate of the
/// boundary normal from label flips, and a geometric step-size search.
AdversarialResult hsja(const LabelOracle& oracle, const Tensor& x, int label, const AttackSpec& spec,
                       const AcceptObserver& observer = {});

/// Elementwise clip of `candidate` into the ε-ball around `origin` and the
/// data range.
Tensor clip_to_ball(const Tensor& candidate, const Tensor& origin, double epsilon, double lo, double hi);

}  // namespace signsym
