#include <doctest.h>

#include <cmath>
#include <map>

#include "signsym/attacks.hpp"
#include "signsym/datasets.hpp"
#include "signsym/errors.hpp"
#include "support.hpp"

using namespace signsym;
using namespace signsym::testing;

namespace {

AttackSpec white_box(AttackFamily family, double eps, double alpha = 0, std::size_t steps = 1) {
  AttackSpec s;
  s.family = family;
  s.epsilon = eps;
  s.alpha = alpha;
  s.steps = steps;
  return s;
}

AttackSpec black_box(AttackFamily family, std::size_t budget, std::uint64_t seed) {
  AttackSpec s;
  s.family = family;
  s.query_budget = budget;
  s.seed = seed;
  return s;
}

std::vector<int> labels_of(const Network& net, const Tensor& x) { return predict_labels(net, x); }

/// sign(w·x + c) > 0 → class 1; never touches a network.
class LinearOracle final : public LabelOracle {
 public:
  LinearOracle(double w0, double w1, double c) : w0_(w0), w1_(w1), c_(c) {}
  int predict(const Tensor& x) const override { return w0_ * x[0] + w1_ * x[1] + c_ > 0 ? 1 : 0; }
  double distance(const Tensor& x) const {
    return std::abs(w0_ * x[0] + w1_ * x[1] + c_) / std::hypot(w0_, w1_);
  }

 private:
  double w0_, w1_, c_;
};

/// Labels read from a fixed 8×8 grid of cells over [0,1]²: a table, not a model.
class LookupOracle final : public LabelOracle {
 public:
  LookupOracle() {
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) table_[i * 8 + j] = (i + 2 * j) % 3;
  }
  int predict(const Tensor& x) const override {
    ++calls;
    auto cell = [](double v) { return std::min(7, static_cast<int>(v * 8)); };
    return table_[cell(x[0]) * 8 + cell(x[1])];
  }
  mutable std::size_t calls = 0;

 private:
  int table_[64];
};

Network trained_xor_classifier() {
  Network net = make_network({2}, parse_architecture("dense8:tanh"), Head::classifier(2), 1);
  auto state = FeedbackState::create(net, FeedbackRule::bp, 0);
  TrainOptions options;
  options.epochs = 1500;
  options.batch_size = 4;
  options.lr = {0.05, 0.05};
  train(net, state, xor_inputs(), Tensor::vector({0, 1, 1, 0}), LossKind::cross_entropy, options);
  return net;
}

}  // namespace

TEST_CASE("zero budget leaves the input unchanged") {
  const Network net = make_network({6}, parse_architecture("dense5:tanh"), Head::classifier(3), 2);
  const GradientModel model = GradientModel::backprop(net);
  const Tensor x = random_tensor(1, {10, 6}, 0, 1);
  std::vector<int> labels = labels_of(net, x);
  labels[3] = (labels[3] + 1) % 3;
  for (auto family : {AttackFamily::fgsm, AttackFamily::pgd}) {
    const auto r = family == AttackFamily::fgsm ? fgsm(model, x, labels, white_box(family, 0))
                                                : pgd(model, x, labels, white_box(family, 0, 0.1, 3));
    CHECK(r.x_adv == x);
    for (std::size_t i = 0; i < 10; ++i) CHECK(r.success[i] == (i == 3));
  }
  const Network hasher = make_network({6}, parse_architecture("dense5:tanh"), Head::hasher(8), 2);
  const auto r = hag(GradientModel::backprop(hasher), x, white_box(AttackFamily::hag, 0, 0.1, 3));
  for (auto shift : r.hamming_shift) CHECK(shift == 0);
}

TEST_CASE("one-pixel FGSM step") {
  Network net = make_network({1}, {}, Head::classifier(2), 0);
  net.layers()[0].weight = Tensor::from_rows({{1.0}, {-1.0}});
  const GradientModel model = GradientModel::backprop(net);
  // ∂CE/∂x for label 1 is p₀ + 1 − p₁ > 0, so the step is +ε
  const auto r = fgsm(model, Tensor::from_rows({{0.5}}), {1}, white_box(AttackFamily::fgsm, 0.1));
  CHECK(r.x_adv[0] == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("PGD with one full step is FGSM") {
  const Network net = make_network({1, 6, 6}, parse_architecture("conv2x3:relu,flatten,dense6:tanh"),
                                   Head::classifier(4), 3);
  for (auto rule : {FeedbackRule::bp, FeedbackRule::usf, FeedbackRule::brsf}) {
    const GradientModel model(net, rule, FeedbackState::create(net, rule, 1));
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      const Tensor x = random_tensor(trial, {5, 1, 6, 6}, 0, 1);
      const std::vector<int> labels{0, 1, 2, 3, 0};
      const double eps = 0.01 + 0.02 * static_cast<double>(trial);
      CHECK(pgd(model, x, labels, white_box(AttackFamily::pgd, eps, eps, 1)).x_adv ==
            fgsm(model, x, labels, white_box(AttackFamily::fgsm, eps)).x_adv);
    }
  }
}

TEST_CASE("white-box iterates stay in the ball and the data range") {
  const Network net = make_network({8}, parse_architecture("dense6:tanh"), Head::classifier(3), 5);
  const Network hasher = make_network({8}, parse_architecture("dense6:tanh"), Head::hasher(6), 5);
  SeededRng rng(1, 2);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor x = sample_uniform(rng, {2, 8}, 0, 1);
    const double eps = rng.uniform(0, 0.6), alpha = rng.uniform(0.001, 0.5);
    const std::size_t steps = 1 + rng.below(6);
    const std::vector<int> labels{static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};
    for (const auto& r : {pgd(GradientModel::backprop(net), x, labels, white_box(AttackFamily::pgd, eps, alpha, steps)),
                          hag(GradientModel::backprop(hasher), x, white_box(AttackFamily::hag, eps, alpha, steps))}) {
      violations += r.achieved_linf > eps + 1e-9;
      violations += (r.x_adv.values() < 0).any() || (r.x_adv.values() > 1).any();
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("FGSM flips a trained XOR classifier") {
  const Network net = trained_xor_classifier();
  const std::vector<int> labels{0, 1, 1, 0};
  REQUIRE(labels_of(net, xor_inputs()) == labels);
  const auto r = fgsm(GradientModel::backprop(net), xor_inputs(), labels, white_box(AttackFamily::fgsm, 0.3));
  int flipped = 0;
  for (bool s : r.success) flipped += s;
  CHECK(flipped >= 1);
}

TEST_CASE("PGD is at least as strong as FGSM on a trained model") {
  BlobOptions blobs;
  blobs.seed = 3;
  const Dataset train_set = make_blobs(blobs, Split::train), test_set = make_blobs(blobs, Split::test);
  Network net = make_network({blobs.dim}, parse_architecture("dense32"), Head::classifier(blobs.classes), 4);
  auto state = FeedbackState::create(net, FeedbackRule::bp, 0);
  TrainOptions options;
  options.epochs = 30;
  options.lr = {3e-3, 3e-3};
  train(net, state, train_set.inputs, train_set.label_tensor(), LossKind::cross_entropy, options);
  const GradientModel model = GradientModel::backprop(net);
  for (double eps : {0.01, 0.05, 0.1}) {
    auto robust = [&](const AdversarialResult& r) {
      std::size_t ok = 0;
      for (bool s : r.success) ok += !s;
      return ok;
    };
    const auto f = fgsm(model, test_set.inputs, test_set.labels, white_box(AttackFamily::fgsm, eps));
    const auto p = pgd(model, test_set.inputs, test_set.labels, white_box(AttackFamily::pgd, eps, eps / 3, 5));
    CHECK(robust(p) <= robust(f));
  }
}

TEST_CASE("HAG surrogate and success rule") {
  const Network net = make_network({5}, parse_architecture("dense7:tanh"), Head::hasher(12), 8);
  const Tensor x = random_tensor(2, {4, 5}, 0, 1);
  const Tensor h = predict_scores(net, x);
  const auto s = hag_surrogate(net, x, sign_of(h));
  for (std::size_t i = 0; i < 4; ++i) {
    double expect = 0;
    for (std::size_t b = 0; b < 12; ++b) expect -= std::abs(h(i, b)) / 12;
    CHECK(s[i] == doctest::Approx(expect).epsilon(1e-14));
    CHECK(s[i] >= -1);
  }
  const auto r = hag(GradientModel::backprop(net), x, white_box(AttackFamily::hag, 0.5, 0.2, 5));
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.success[i] == (4 * r.hamming_shift[i] >= 12));
  const Network classifier = make_network({5}, parse_architecture("dense7:tanh"), Head::classifier(3), 8);
  CHECK_THROWS_AS(hag(GradientModel::backprop(classifier), x, white_box(AttackFamily::hag, 0.1, 0.1, 1)), ConfigError);
}

TEST_CASE("attack spec validation") {
  const Network net = make_network({3}, {}, Head::classifier(2), 0);
  const GradientModel model = GradientModel::backprop(net);
  const Tensor x = Tensor::from_rows({{0.2, 0.3, 0.4}});
  CHECK_THROWS_AS(fgsm(model, x, {0}, white_box(AttackFamily::fgsm, -0.1)), ConfigError);
  CHECK_THROWS_AS(pgd(model, x, {0}, white_box(AttackFamily::pgd, 0.1, 0.0, 3)), ConfigError);
  CHECK_THROWS_AS(pgd(model, x, {0}, white_box(AttackFamily::pgd, 0.1, 0.1, 0)), ConfigError);
  CHECK_THROWS_AS(fgsm(model, Tensor::from_rows({{0.2, 1.3, 0.4}}), {0}, white_box(AttackFamily::fgsm, 0.1)), RangeError);
  CHECK(parse_attack("hopskipjump") == AttackFamily::hsja);
  CHECK(parse_attack("PGD") == AttackFamily::pgd);
}

TEST_CASE("boundary attack approaches the analytic boundary distance") {
  int within = 0, trials = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeededRng rng(seed, 1);
    const LinearOracle oracle(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.3, 0.3));
    const Tensor x = Tensor::from_rows({{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)}});
    const int label = oracle.predict(x);
    std::size_t accepted = 0;
    bool always_adversarial = true;
    double last = std::numeric_limits<double>::infinity();
    bool non_increasing = true;
    AdversarialResult r;
    try {
      r = boundary_attack(oracle, x, label, black_box(AttackFamily::boundary, 1000, seed), [&](const Tensor& adv) {
        ++accepted;
        always_adversarial &= oracle.predict(adv) != label;
        const double dist = std::hypot(adv[0] - x[0], adv[1] - x[1]);
        non_increasing &= dist <= last;
        last = dist;
      });
    } catch (const StartNotFoundError&) {
      continue;  // the hyperplane may not cross the unit square
    }
    ++trials;
    CHECK(r.queries_used <= 1000);
    CHECK(always_adversarial);
    CHECK(non_increasing);
    CHECK(accepted >= 1);
    within += r.achieved_l2 <= 1.5 * oracle.distance(x);
  }
  REQUIRE(trials >= 10);
  CHECK(within == trials);
}

TEST_CASE("HSJA is no worse than the boundary attack on a linear model") {
  int wins = 0, trials = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SeededRng rng(seed, 2);
    const LinearOracle oracle(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.3, 0.3));
    const Tensor x = Tensor::from_rows({{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)}});
    const int label = oracle.predict(x);
    try {
      const auto b = boundary_attack(oracle, x, label, black_box(AttackFamily::boundary, 200, seed));
      const auto h = hsja(oracle, x, label, black_box(AttackFamily::hsja, 200, seed));
      CHECK(h.queries_used <= 200);
      ++trials;
      wins += h.achieved_l2 <= b.achieved_l2;
    } catch (const StartNotFoundError&) {
    }
  }
  REQUIRE(trials >= 10);
  CHECK(static_cast<double>(wins) >= 0.6 * trials);
}

TEST_CASE("decision-based attacks only query labels") {
  const LookupOracle table;
  for (auto family : {AttackFamily::boundary, AttackFamily::hsja}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Tensor x = Tensor::from_rows({{0.1 + 0.15 * static_cast<double>(seed), 0.42}});
      const int label = table.predict(x);
      table.calls = 0;
      const AttackSpec spec = black_box(family, 300, seed);
      const auto r = family == AttackFamily::boundary ? boundary_attack(table, x, label, spec)
                                                      : hsja(table, x, label, spec);
      CHECK(r.queries_used == table.calls);
      CHECK(r.queries_used <= 300);
      CHECK(table.predict(r.x_adv) != label);
    }
  }
}

TEST_CASE("decision-based attacks are deterministic") {
  const Network net = make_network({1, 6, 6}, parse_architecture("conv2x3:relu,flatten,dense6:tanh"),
                                   Head::classifier(3), 7);
  const NetworkLabelOracle oracle(net);
  const Tensor x = random_tensor(4, {1, 1, 6, 6}, 0, 1);
  const int label = oracle.predict(x);
  for (auto family : {AttackFamily::boundary, AttackFamily::hsja}) {
    const AttackSpec spec = black_box(family, 400, 12);
    auto run = [&] {
      return family == AttackFamily::boundary ? boundary_attack(oracle, x, label, spec) : hsja(oracle, x, label, spec);
    };
    const auto a = run(), b = run();
    CHECK(a.x_adv == b.x_adv);
    CHECK(a.queries_used == b.queries_used);
    CHECK(a.queries_used <= 400);
    CHECK(oracle.predict(a.x_adv) != label);
  }
  // already misclassified: nothing to do
  const auto r = boundary_attack(oracle, x, (label + 1) % 3, black_box(AttackFamily::boundary, 50, 0));
  CHECK(r.x_adv == x);
  CHECK(r.success.front());
}

TEST_CASE("start search respects the budget") {
  const LinearOracle never(0, 0, 1);  // every input is class 1
  const Tensor x = Tensor::from_rows({{0.5, 0.5}});
  CHECK_THROWS_AS(boundary_attack(never, x, 1, black_box(AttackFamily::boundary, 25, 0)), StartNotFoundError);
  CHECK_THROWS_AS(hsja(never, x, 1, black_box(AttackFamily::hsja, 25, 0)), StartNotFoundError);
}
