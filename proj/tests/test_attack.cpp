#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "advcm/attack.hpp"

using namespace advcm;

namespace {

/// loss = w . x — constant gradient, the strongest analytic cross-check.
class LinearTarget : public AttackTarget {
 public:
  explicit LinearTarget(std::vector<float> w) : w_(std::move(w)) {}
  int bins() const override { return static_cast<int>(w_.size()); }
  int frames() const override { return 1; }
  double loss(const std::vector<float>& x, int) override {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(w_[i]) * x[i];
    ++forward_calls;
    return acc;
  }
  double loss_and_grad(const std::vector<float>& x, int label, std::vector<float>& g) override {
    g = w_;
    ++grad_calls;
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(w_[i]) * x[i];
    return acc;
  }
  int grad_calls = 0;
  int forward_calls = 0;

 private:
  std::vector<float> w_;
};

/// loss = -(x - c)^2 in one dimension; maximum at c.
class QuadraticTarget : public AttackTarget {
 public:
  explicit QuadraticTarget(double c) : c_(c) {}
  int bins() const override { return 1; }
  int frames() const override { return 1; }
  double loss(const std::vector<float>& x, int) override {
    double d = static_cast<double>(x[0]) - c_;
    return -d * d;
  }
  double loss_and_grad(const std::vector<float>& x, int label, std::vector<float>& g) override {
    double d = static_cast<double>(x[0]) - c_;
    g = {static_cast<float>(-2.0 * d)};
    return -d * d;
  }

 private:
  double c_;
};

/// Wiggly separable loss with a flat (zero-gradient) start: plain PGD from
/// the origin cannot move, so restarts dominate.
class WigglyTarget : public AttackTarget {
 public:
  explicit WigglyTarget(std::vector<float> x0) : x0_(std::move(x0)) {}
  int bins() const override { return static_cast<int>(x0_.size()); }
  int frames() const override { return 1; }
  double loss(const std::vector<float>& x, int) override {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
      acc += -std::cos(4.0 * (static_cast<double>(x[i]) - x0_[i]));
    return acc;
  }
  double loss_and_grad(const std::vector<float>& x, int label, std::vector<float>& g) override {
    g.resize(x.size());
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      double d = static_cast<double>(x[i]) - x0_[i];
      acc += -std::cos(4.0 * d);
      g[i] = static_cast<float>(4.0 * std::sin(4.0 * d));
    }
    return acc;
  }

 private:
  std::vector<float> x0_;
};

/// Small fixed two-layer network, sigmoid hidden layer.
class TinyMlpTarget : public AttackTarget {
 public:
  TinyMlpTarget(int dim, uint64_t seed) : dim_(dim) {
    Rng rng(seed);
    w1_.resize(static_cast<size_t>(dim) * kHidden);
    for (auto& v : w1_) v = static_cast<float>(rng.normal() * 0.8);
    w2_.resize(kHidden);
    for (auto& v : w2_) v = static_cast<float>(rng.normal());
  }
  int bins() const override { return dim_; }
  int frames() const override { return 1; }
  double loss(const std::vector<float>& x, int label) override {
    std::vector<float> unused;
    return eval(x, label, nullptr);
  }
  double loss_and_grad(const std::vector<float>& x, int label, std::vector<float>& g) override {
    return eval(x, label, &g);
  }

 private:
  static constexpr int kHidden = 6;
  double eval(const std::vector<float>& x, int label, std::vector<float>* grad) {
    std::vector<double> h(kHidden), s(kHidden);
    for (int j = 0; j < kHidden; ++j) {
      double acc = 0.0;
      for (int i = 0; i < dim_; ++i) acc += static_cast<double>(x[i]) * w1_[i * kHidden + j];
      h[j] = acc;
      s[j] = 1.0 / (1.0 + std::exp(-acc));
    }
    double out = 0.0;
    for (int j = 0; j < kHidden; ++j) out += s[j] * w2_[j];
    double sign = label == 0 ? 1.0 : -1.0;
    if (grad) {
      grad->assign(static_cast<size_t>(dim_), 0.0f);
      for (int j = 0; j < kHidden; ++j) {
        double dj = sign * w2_[j] * s[j] * (1.0 - s[j]);
        for (int i = 0; i < dim_; ++i)
          (*grad)[static_cast<size_t>(i)] += static_cast<float>(dj * w1_[i * kHidden + j]);
      }
    }
    return sign * out;
  }
  int dim_;
  std::vector<float> w1_, w2_;
};

double linf(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("fgsm on a linear surrogate moves exactly eps along sign(w)") {
  LinearTarget t({1.0f, -2.0f});
  std::vector<float> x = {0.5f, 0.25f};
  auto adv = fgsm(t, x, 0, 0.1);
  CHECK(adv.perturbed[0] == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(adv.perturbed[1] == doctest::Approx(0.15).epsilon(1e-7));
  CHECK(t.grad_calls == 1);  // exactly one forward/backward pass
}

TEST_CASE("fgsm with zero epsilon returns the input bit-exactly") {
  LinearTarget t({0.3f, 0.0f, -0.7f});
  std::vector<float> x = {0.1f, -0.0f, 0.9f};
  auto adv = fgsm(t, x, 0, 0.0);
  CHECK(adv.perturbed == x);
  CHECK(adv.max_abs_delta == 0.0);
}

TEST_CASE("fgsm sign(0) contributes no perturbation") {
  LinearTarget t({0.0f, 2.0f});
  std::vector<float> x = {0.5f, 0.5f};
  auto adv = fgsm(t, x, 0, 1.0);
  CHECK(adv.perturbed[0] == 0.5f);
  CHECK(adv.perturbed[1] == doctest::Approx(1.5));
}

TEST_CASE("fgsm increases the loss on a tiny trained model (constructed case)") {
  TinyMlpTarget t(12, 99);
  Rng rng(1);
  std::vector<float> x(12);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  double before = t.loss(x, 0);
  auto adv = fgsm(t, x, 0, 0.05);
  CHECK(adv.achieved_loss >= before);
  CHECK(t.loss(adv.perturbed, 0) >= before);
}

TEST_CASE("pgd equals fgsm on linear models when alpha = eps/K") {
  LinearTarget t({0.5f, -1.5f, 2.0f, -0.25f});
  std::vector<float> x = {0.1f, 0.2f, 0.3f, 0.4f};
  for (double eps : {0.1, 1.0, 5.0}) {
    auto f = fgsm(t, x, 0, eps);
    AttackConfig cfg;
    cfg.method = AttackMethod::Pgd;
    cfg.epsilon = eps;
    cfg.iterations = 10;
    cfg.alpha = 0.0;  // derived eps/K
    auto p = pgd(t, x, 0, cfg);
    CHECK(p.perturbed == f.perturbed);  // exact equality, not approximate
  }
}

TEST_CASE("auto-derived alpha satisfies eps = K * alpha exactly") {
  AttackConfig cfg;
  cfg.epsilon = 1.0;
  cfg.iterations = 10;
  CHECK(cfg.step() == 0.1);
  CHECK(cfg.iterations * cfg.step() == cfg.epsilon);
  cfg.epsilon = 5.0;
  cfg.iterations = 4;
  CHECK(cfg.iterations * cfg.step() == cfg.epsilon);
}

TEST_CASE("pgd iterates stay inside the ball even when steps overshoot") {
  QuadraticTarget t(0.05);  // optimum inside the ball
  std::vector<float> x = {0.0f};
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.iterations = 25;
  cfg.alpha = 0.3;  // step three times the radius
  auto adv = pgd(t, x, 0, cfg);
  CHECK(std::abs(adv.perturbed[0] - x[0]) <= 0.1 + kLinfSlack);
}

TEST_CASE("pgd_restarts with R=1 and no random init reduces to pgd") {
  TinyMlpTarget t(8, 5);
  Rng rng(2);
  std::vector<float> x(8);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  AttackConfig cfg;
  cfg.epsilon = 0.5;
  cfg.iterations = 6;
  cfg.restarts = 1;
  cfg.random_init = false;
  auto a = pgd(t, x, 1, cfg);
  auto b = pgd_restarts(t, x, 1, cfg);
  CHECK(a.perturbed == b.perturbed);
  CHECK(a.achieved_loss == b.achieved_loss);
}

TEST_CASE("pgd_restarts returns the max-loss restart") {
  TinyMlpTarget t(8, 6);
  Rng rng(3);
  std::vector<float> x(8);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  AttackConfig cfg;
  cfg.epsilon = 1.0;
  cfg.iterations = 5;
  cfg.restarts = 5;
  cfg.seed = 17;
  auto adv = pgd_restarts(t, x, 0, cfg);
  REQUIRE(adv.restart_losses.size() == 5);
  double best = adv.restart_losses[0];
  for (double l : adv.restart_losses) {
    CHECK(adv.achieved_loss >= l);
    best = std::max(best, l);
  }
  CHECK(adv.achieved_loss == best);
}

TEST_CASE("restarts escape flat starts that trap plain pgd") {
  Rng rng(4);
  int wins = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<float> x(6);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
    WigglyTarget t(x);  // gradient is exactly zero at x
    AttackConfig cfg;
    cfg.epsilon = 1.0;
    cfg.iterations = 8;
    cfg.restarts = 5;
    cfg.seed = 1000 + static_cast<uint64_t>(trial);
    auto plain = pgd(t, x, 0, cfg);
    auto multi = pgd_restarts(t, x, 0, cfg);
    if (multi.achieved_loss >= plain.achieved_loss) ++wins;
  }
  CHECK(wins >= 45);  // >= 90% of trials
}

TEST_CASE("l-inf soundness over methods and epsilons") {
  Rng rng(5);
  TinyMlpTarget mlp(10, 31);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<float> x(10);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-6, 6));
    double eps = trial % 4 == 3 ? rng.uniform(0.0, 5.0) : std::vector<double>{0.1, 1.0, 5.0}[trial % 3];
    AttackConfig cfg;
    cfg.method = trial % 2 == 0 ? AttackMethod::Fgsm : AttackMethod::Pgd;
    cfg.epsilon = eps;
    cfg.iterations = 5;
    cfg.restarts = 2;
    cfg.seed = static_cast<uint64_t>(trial);
    auto adv = run_attack(mlp, x, trial % 2, cfg);
    CHECK(linf(adv.perturbed, x) <= eps + kLinfSlack);
    CHECK(adv.max_abs_delta <= eps + kLinfSlack);
  }
}

TEST_CASE("attack_corpus: empty in, order preserved, deterministic, parallel-stable") {
  TinyMlpTarget t(6, 77);
  AttackConfig cfg;
  cfg.method = AttackMethod::Pgd;
  cfg.epsilon = 1.0;
  cfg.iterations = 4;
  cfg.restarts = 2;
  cfg.seed = 9;

  CHECK(attack_corpus(t, {}, cfg).empty());

  Rng rng(6);
  std::vector<AttackInput> items;
  for (int i = 0; i < 6; ++i) {
    AttackInput it;
    it.id = "utt" + std::to_string(i);
    it.label = i % 2;
    it.log_power.resize(6);
    for (auto& v : it.log_power) v = static_cast<float>(rng.uniform(-2, 2));
    items.push_back(std::move(it));
  }
  auto serial = attack_corpus(t, items, cfg, 1);
  REQUIRE(serial.size() == items.size());
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].utterance_id == items[i].id);
    CHECK(linf(serial[i].perturbed, items[i].log_power) <= cfg.epsilon + kLinfSlack);
  }
  auto rerun = attack_corpus(t, items, cfg, 1);
  auto parallel = attack_corpus(t, items, cfg, 3);
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].perturbed == rerun[i].perturbed);
    CHECK(serial[i].perturbed == parallel[i].perturbed);
  }
}

TEST_CASE("attack seeds depend on the utterance, not the position") {
  AttackConfig cfg;
  cfg.seed = 5;
  CHECK(derive_attack_seed(cfg, "a") != derive_attack_seed(cfg, "b"));
  CHECK(derive_attack_seed(cfg, "a") == derive_attack_seed(cfg, "a"));
}

TEST_CASE("config validation") {
  AttackConfig cfg;
  cfg.epsilon = -1.0;
  CHECK_THROWS(cfg.validate());
  cfg.epsilon = 1.0;
  cfg.iterations = 0;
  CHECK_THROWS(cfg.validate());
  cfg.iterations = 10;
  cfg.restarts = 0;
  CHECK_THROWS(cfg.validate());
}
