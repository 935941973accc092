#include "signsym/attacks.hpp"

#include <cmath>
#include <optional>

#include "signsym/retrieval.hpp"
#include "signsym/rng.hpp"

namespace signsym {

std::string_view name(AttackFamily family) {
  switch (family) {
    case AttackFamily::fgsm: return "FGSM";
    case AttackFamily::pgd: return "PGD";
    case AttackFamily::hag: return "HAG";
    case AttackFamily::boundary: return "Boundary";
    case AttackFamily::hsja: return "HSJA";
  }
  return "?";
}

AttackFamily parse_attack(std::string_view text) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "fgsm") return AttackFamily::fgsm;
  if (lower == "pgd") return AttackFamily::pgd;
  if (lower == "hag") return AttackFamily::hag;
  if (lower == "boundary" || lower == "ba") return AttackFamily::boundary;
  if (lower == "hsja" || lower == "hopskipjump") return AttackFamily::hsja;
  throw ConfigError("unknown attack '" + std::string(text) + "'");
}

bool is_white_box(AttackFamily family) {
  return family == AttackFamily::fgsm || family == AttackFamily::pgd || family == AttackFamily::hag;
}

void AttackSpec::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0) throw ConfigError("attack epsilon must be >= 0");
  if (!(lo < hi)) throw ConfigError("attack data range must satisfy lo < hi");
  switch (family) {
    case AttackFamily::fgsm: break;
    case AttackFamily::pgd:
    case AttackFamily::hag:
      if (!(alpha > 0)) throw ConfigError(std::string(name(family)) + " requires step size alpha > 0");
      if (steps < 1) throw ConfigError(std::string(name(family)) + " requires at least one step");
      break;
    case AttackFamily::boundary:
    case AttackFamily::hsja:
      if (query_budget < 1) throw ConfigError("black-box attacks need a positive query budget");
      break;
  }
}

GradientModel::GradientModel(const Network& net, FeedbackRule rule, FeedbackState state)
    : net_(&net), rule_(rule), state_(std::move(state)) {}

GradientModel GradientModel::backprop(const Network& net) {
  return GradientModel(net, FeedbackRule::bp, FeedbackState::create(net, FeedbackRule::bp, 0));
}

Tensor GradientModel::input_gradient(const Tensor& x,
                                     const std::function<Tensor(const Tensor& output)>& output_grad) const {
  const ForwardTrace trace = forward(*net_, x);
  Tensor g = signsym::input_gradient(*net_, trace, rule_, state_, output_grad(trace.output()));
  return g.reshaped(x.shape());
}

Tensor clip_to_ball(const Tensor& candidate, const Tensor& origin, double epsilon, double lo, double hi) {
  require_same_shape(candidate, origin, "clip_to_ball");
  Tensor out(candidate.shape());
  out.values() = candidate.values()
                     .min(origin.values() + epsilon)
                     .max(origin.values() - epsilon)
                     .min(hi)
                     .max(lo);
  return out;
}

namespace {

void finish_norms(AdversarialResult& r, const Tensor& x) {
  const std::size_t n = x.rows();
  r.achieved_linf = 0;
  r.achieved_l2 = 0;
  if (n == 0) return;
  const auto diff = (r.x_adv.matrix() - x.matrix()).eval();
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    r.achieved_linf = std::max(r.achieved_linf, diff.row(i).cwiseAbs().maxCoeff());
    r.achieved_l2 = std::max(r.achieved_l2, diff.row(i).norm());
  }
}

Tensor label_tensor(const std::vector<int>& labels, std::size_t rows) {
  if (labels.size() != rows)
    throw DimensionError("attack: " + std::to_string(rows) + " inputs but " + std::to_string(labels.size()) +
                         " labels");
  Tensor t({rows});
  for (std::size_t i = 0; i < rows; ++i) t[i] = labels[i];
  return t;
}

/// One signed step from `current`, projected into the ε-ball around `origin`.
Tensor signed_step(const Tensor& current, const Tensor& origin, const Tensor& grad, double step, const AttackSpec& spec) {
  Tensor moved(current.shape());
  moved.values() = current.values() + step * grad.values().sign();
  return clip_to_ball(moved, origin, spec.epsilon, spec.lo, spec.hi);
}

AdversarialResult classify_outcome(const Network& net, Tensor x_adv, const Tensor& x, const std::vector<int>& labels) {
  AdversarialResult r;
  const auto predicted = predict_labels(net, x_adv);
  r.success.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) r.success[i] = predicted[i] != labels[i];
  r.x_adv = std::move(x_adv);
  finish_norms(r, x);
  return r;
}

void check_input(const Tensor& x, const AttackSpec& spec) {
  require_finite(x, "attack input");
  if ((x.values() < spec.lo).any() || (x.values() > spec.hi).any())
    throw RangeError("attack input lies outside the data range");
}

AdversarialResult iterate_signed_steps(const GradientModel& model, const Tensor& x, const std::vector<int>& labels,
                                       double step, std::size_t steps, const AttackSpec& spec) {
  const Tensor target = label_tensor(labels, x.rows());
  auto ce_grad = [&](const Tensor& out) { return loss_grad_output(LossKind::cross_entropy, out, target); };
  Tensor current = x;
  for (std::size_t t = 0; t < steps; ++t)
    current = signed_step(current, x, model.input_gradient(current, ce_grad), step, spec);
  return classify_outcome(model.network(), std::move(current), x, labels);
}

}  // namespace

AdversarialResult fgsm(const GradientModel& model, const Tensor& x, const std::vector<int>& labels,
                       const AttackSpec& spec) {
  spec.validate();
  check_input(x, spec);
  return iterate_signed_steps(model, x, labels, spec.epsilon, 1, spec);
}

AdversarialResult pgd(const GradientModel& model, const Tensor& x, const std::vector<int>& labels,
                      const AttackSpec& spec) {
  spec.validate();
  check_input(x, spec);
  return iterate_signed_steps(model, x, labels, spec.alpha, spec.steps, spec);
}

std::vector<double> hag_surrogate(const Network& net, const Tensor& x, const Tensor& reference_codes) {
  const Tensor codes = predict_scores(net, x);
  require_same_shape(codes, reference_codes, "hag_surrogate");
  const double k = static_cast<double>(codes.cols());
  std::vector<double> out(codes.rows());
  for (std::size_t i = 0; i < codes.rows(); ++i)
    out[i] = -codes.matrix().row(static_cast<Eigen::Index>(i)).dot(
                 reference_codes.matrix().row(static_cast<Eigen::Index>(i))) /
             k;
  return out;
}

AdversarialResult hag(const GradientModel& model, const Tensor& x, const AttackSpec& spec) {
  const Network& net = model.network();
  if (net.head().kind != Head::Kind::hasher) throw ConfigError("HAG requires a network with a hasher head");
  spec.validate();
  check_input(x, spec);

  const Tensor reference = binarize_rows(predict_scores(net, x));
  const double bits = static_cast<double>(reference.cols());
  // ascent on J = −b₀ᵀh/k  ⇔  descent direction of b₀ᵀh; dJ/dh = −b₀/k per row
  auto objective_grad = [&](const Tensor&) {
    Tensor g(reference.shape());
    g.values() = -reference.values() / bits;
    return g;
  };
  Tensor current = x;
  for (std::size_t t = 0; t < spec.steps; ++t)
    current = signed_step(current, x, model.input_gradient(current, objective_grad), spec.alpha, spec);

  AdversarialResult r;
  const Tensor codes = binarize_rows(predict_scores(net, current));
  r.success.resize(x.rows());
  r.hamming_shift.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::size_t flips = 0;
    for (std::size_t b = 0; b < codes.cols(); ++b) flips += codes(i, b) != reference(i, b);
    r.hamming_shift[i] = flips;
    r.success[i] = 4 * flips >= codes.cols();
  }
  r.x_adv = std::move(current);
  finish_norms(r, x);
  return r;
}

// ---------------------------------------------------------------------------
// Decision-based attacks

namespace {

struct BudgetExhausted {};

/// Counts label queries and stops the attack once the budget is spent.
class QueryCounter {
 public:
  QueryCounter(const LabelOracle& oracle, int label, std::size_t budget)
      : oracle_(oracle), label_(label), budget_(budget) {}

  bool adversarial(const Tensor& x) {
    if (used_ >= budget_) throw BudgetExhausted{};
    ++used_;
    return oracle_.predict(x) != label_;
  }
  std::size_t used() const { return used_; }
  std::size_t remaining() const { return budget_ - used_; }

 private:
  const LabelOracle& oracle_;
  int label_;
  std::size_t budget_;
  std::size_t used_ = 0;
};

double l2_distance(const Tensor& a, const Tensor& b) { return (a.values() - b.values()).matrix().norm(); }

Tensor blend(const Tensor& x, const Tensor& adv, double t) {
  Tensor out(x.shape());
  out.values() = (1.0 - t) * x.values() + t * adv.values();
  return out;
}

Tensor clip_range(Tensor t, double lo, double hi) {
  t.values() = t.values().max(lo).min(hi);
  return t;
}

/// Bisection on the segment x → adv (adv adversarial); returns the
/// adversarial endpoint once the bracket is narrower than `tolerance`.
Tensor boundary_search(QueryCounter& q, const Tensor& x, const Tensor& adv, double tolerance) {
  double low = 0.0, high = 1.0;
  while (high - low > tolerance) {
    const double mid = 0.5 * (low + high);
    if (q.adversarial(blend(x, adv, mid)))
      high = mid;
    else
      low = mid;
  }
  return blend(x, adv, high);
}

Tensor find_start(QueryCounter& q, const Tensor& x, const AttackSpec& spec, SeededRng& rng) {
  try {
    while (true) {
      Tensor candidate = sample_uniform(rng, x.shape(), spec.lo, spec.hi);
      if (q.adversarial(candidate)) return candidate;
    }
  } catch (const BudgetExhausted&) {
    throw StartNotFoundError("no adversarial starting point within " + std::to_string(spec.query_budget) +
                             " queries");
  }
}

struct Tracker {
  Tensor best;
  double best_distance = 0;
  const Tensor* origin;
  const AcceptObserver* observer;

  void accept(const Tensor& candidate) {
    best = candidate;
    best_distance = l2_distance(candidate, *origin);
    if (*observer) (*observer)(best);
  }
};

AdversarialResult black_box_result(const Tensor& x, Tensor x_adv, bool success, std::size_t queries) {
  AdversarialResult r;
  r.x_adv = std::move(x_adv);
  r.success = {success};
  r.queries_used = queries;
  finish_norms(r, x);
  return r;
}

void check_single(const Tensor& x, const AttackSpec& spec, AttackFamily family) {
  if (spec.family != family) throw ConfigError("attack spec family does not match " + std::string(name(family)));
  spec.validate();
  if (x.absent() || x.rows() != 1) throw DimensionError("decision-based attacks take a single example (batch of 1)");
  check_input(x, spec);
}

constexpr double kBinarySearchTolerance = 1e-3;

}  // namespace

AdversarialResult boundary_attack(const LabelOracle& oracle, const Tensor& x, int label, const AttackSpec& spec,
                                  const AcceptObserver& observer) {
  check_single(x, spec, AttackFamily::boundary);
  QueryCounter q(oracle, label, spec.query_budget);
  SeededRng rng(spec.seed, 0xb0a);
  if (q.adversarial(x)) return black_box_result(x, x, true, q.used());

  Tracker track{{}, 0, &x, &observer};
  track.accept(find_start(q, x, spec, rng));
  try {
    track.accept(boundary_search(q, x, track.best, kBinarySearchTolerance));

    double spherical_step = 0.01;
    double source_step = 0.01;
    std::size_t trials = 0, successes = 0;
    const Eigen::Index dims = static_cast<Eigen::Index>(x.size());
    while (true) {
      const Tensor::Storage direction = track.best.values() - x.values();
      const double distance = direction.matrix().norm();
      if (distance == 0) break;
      const Tensor::Storage unit = direction / distance;

      // orthogonal perturbation on the sphere of radius `distance` around x
      Tensor::Storage eta(dims);
      for (Eigen::Index i = 0; i < dims; ++i) eta[i] = rng.normal();
      eta -= (eta * unit).sum() * unit;
      const double eta_norm = eta.matrix().norm();
      if (eta_norm > 0) eta *= spherical_step * distance / eta_norm;
      Tensor::Storage moved = direction + eta;
      moved *= distance / moved.matrix().norm();
      moved *= 1.0 - source_step;

      Tensor candidate = clip_range(Tensor(x.shape(), Tensor::Storage(x.values() + moved)), spec.lo, spec.hi);
      const bool adversarial = q.adversarial(candidate);
      ++trials;
      if (adversarial && l2_distance(candidate, x) < distance) {
        ++successes;
        track.accept(candidate);
      }
      if (trials == 10) {
        const double rate = static_cast<double>(successes) / static_cast<double>(trials);
        if (rate > 0.5) {
          spherical_step = std::min(spherical_step * 1.5, 0.5);
          source_step = std::min(source_step * 1.5, 0.5);
        } else if (rate < 0.2) {
          spherical_step = std::max(spherical_step / 1.5, 1e-6);
          source_step = std::max(source_step / 1.5, 1e-6);
        }
        trials = successes = 0;
      }
    }
  } catch (const BudgetExhausted&) {
  }
  return black_box_result(x, track.best, true, q.used());
}

AdversarialResult hsja(const LabelOracle& oracle, const Tensor& x, int label, const AttackSpec& spec,
                       const AcceptObserver& observer) {
  check_single(x, spec, AttackFamily::hsja);
  QueryCounter q(oracle, label, spec.query_budget);
  SeededRng rng(spec.seed, 0x45a);
  if (q.adversarial(x)) return black_box_result(x, x, true, q.used());

  Tracker track{{}, 0, &x, &observer};
  track.accept(find_start(q, x, spec, rng));
  const Eigen::Index dims = static_cast<Eigen::Index>(x.size());
  const double d = static_cast<double>(dims);
  const double theta = 1.0 / (d * std::sqrt(d));
  constexpr std::size_t kInitialSamples = 20;
  constexpr std::size_t kMaxSamples = 200;
  try {
    track.accept(boundary_search(q, x, track.best, kBinarySearchTolerance));
    for (std::size_t t = 1;; ++t) {
      const double distance = track.best_distance;
      if (distance == 0) break;
      const double delta = t == 1 ? 0.1 * (spec.hi - spec.lo) : std::sqrt(d) * theta * distance;
      std::size_t samples = std::min<std::size_t>(
          kMaxSamples, static_cast<std::size_t>(static_cast<double>(kInitialSamples) * std::sqrt(static_cast<double>(t))));
      samples = std::max<std::size_t>(2, std::min(samples, q.remaining() / 2));

      // Monte-Carlo estimate of the boundary normal at the current point
      std::vector<Tensor::Storage> probes;
      std::vector<double> votes;
      for (std::size_t b = 0; b < samples; ++b) {
        Tensor::Storage u(dims);
        for (Eigen::Index i = 0; i < dims; ++i) u[i] = rng.normal();
        u /= u.matrix().norm();
        Tensor probe = clip_range(Tensor(x.shape(), Tensor::Storage(track.best.values() + delta * u)), spec.lo,
                                  spec.hi);
        votes.push_back(q.adversarial(probe) ? 1.0 : -1.0);
        probes.push_back((probe.values() - track.best.values()) / delta);
      }
      double mean_vote = 0;
      for (double v : votes) mean_vote += v;
      mean_vote /= static_cast<double>(votes.size());
      const double baseline = std::abs(mean_vote) == 1.0 ? 0.0 : mean_vote;
      Tensor::Storage grad = Tensor::Storage::Zero(dims);
      for (std::size_t b = 0; b < probes.size(); ++b) grad += (votes[b] - baseline) * probes[b];
      const double grad_norm = grad.matrix().norm();
      if (grad_norm == 0) continue;
      grad /= grad_norm;

      // geometric step search along the estimate
      double step = distance / std::sqrt(static_cast<double>(t));
      Tensor candidate;
      while (true) {
        candidate = clip_range(Tensor(x.shape(), Tensor::Storage(track.best.values() + step * grad)), spec.lo, spec.hi);
        if (q.adversarial(candidate)) break;
        step /= 2;
        if (step < 1e-12 * (1.0 + distance)) break;
      }
      if (step < 1e-12 * (1.0 + distance)) continue;

      Tensor projected = boundary_search(q, x, candidate, kBinarySearchTolerance);
      if (l2_distance(projected, x) < track.best_distance) track.accept(projected);
    }
  } catch (const BudgetExhausted&) {
  }
  return black_box_result(x, track.best, true, q.used());
}

}  // namespace signsym
