#include "advcm/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advcm/threading.hpp"

namespace advcm {

void AttackConfig::validate() const {
  if (epsilon < 0.0) throw std::invalid_argument("AttackConfig: epsilon must be >= 0");
  if (iterations < 1) throw std::invalid_argument("AttackConfig: iterations must be >= 1");
  if (restarts < 1) throw std::invalid_argument("AttackConfig: restarts must be >= 1");
  if (alpha < 0.0) throw std::invalid_argument("AttackConfig: alpha must be >= 0");
  if (alpha == 0.0 && epsilon > 0.0 && iterations <= 0)
    throw std::invalid_argument("AttackConfig: cannot derive alpha");
}

double ModelTarget::loss(const std::vector<float>& log_power, int label) {
  auto x = log_power_to_tensor(log_power, spec_.input_h, spec_.input_w, false);
  ForwardOptions opt;  // eval mode
  auto l = model_loss(spec_, params_, x, {label}, opt);
  return static_cast<double>(l->data[0]);
}

double ModelTarget::loss_and_grad(const std::vector<float>& log_power, int label,
                                  std::vector<float>& grad) {
  auto x = log_power_to_tensor(log_power, spec_.input_h, spec_.input_w, true);
  ForwardOptions opt;
  auto l = model_loss(spec_, params_, x, {label}, opt);
  backward(l);
  grad = x->grad;
  return static_cast<double>(l->data[0]);
}

namespace {

void check_gradient(const std::vector<float>& g, double loss, const std::string& id) {
  if (!std::isfinite(loss))
    throw std::runtime_error("attack: non-finite loss on utterance '" + id + "'");
  for (float v : g)
    if (!std::isfinite(v))
      throw std::runtime_error("attack: non-finite gradient on utterance '" + id + "'");
}

inline float sign_of(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

double max_abs_delta(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

/// One PGD run; `delta0` is the (already in-ball) starting perturbation. The
/// perturbation accumulates in double so the constant-gradient case lands on
/// exactly the same floats as a single FGSM step of the full budget.
std::vector<float> pgd_run(AttackTarget& target, const std::vector<float>& x0,
                           const std::vector<double>& delta0, int label, const AttackConfig& cfg,
                           const std::string& id) {
  const double eps = cfg.epsilon;
  const double alpha = cfg.step();
  std::vector<double> delta = delta0;
  std::vector<float> cur(x0.size());
  std::vector<float> grad;
  auto materialize = [&] {
    for (size_t i = 0; i < cur.size(); ++i)
      cur[i] = static_cast<float>(static_cast<double>(x0[i]) + delta[i]);
  };
  materialize();
  // Candidates within accumulated rounding of the ball boundary saturate to
  // exactly +-eps, so K derived steps spend the budget bit-exactly.
  const double snap = eps * 1e-12;
  for (int k = 0; k < cfg.iterations; ++k) {
    double loss = target.loss_and_grad(cur, label, grad);
    check_gradient(grad, loss, id);
    if (eps == 0.0) continue;
    for (size_t i = 0; i < delta.size(); ++i) {
      double v = delta[i] + alpha * static_cast<double>(sign_of(grad[i]));
      if (v >= eps - snap)
        delta[i] = eps;
      else if (v <= -eps + snap)
        delta[i] = -eps;
      else
        delta[i] = v;
    }
    materialize();
  }
  return cur;
}

}  // namespace

AdversarialExample fgsm(AttackTarget& target, const std::vector<float>& x, int label,
                        double epsilon, const std::string& id) {
  if (epsilon < 0.0) throw std::invalid_argument("fgsm: epsilon must be >= 0");
  AdversarialExample adv;
  adv.utterance_id = id;
  adv.label = label;
  adv.config.method = AttackMethod::Fgsm;
  adv.config.epsilon = epsilon;

  std::vector<float> grad;
  double base_loss = target.loss_and_grad(x, label, grad);
  check_gradient(grad, base_loss, id);
  if (epsilon == 0.0) {
    adv.perturbed = x;
    adv.achieved_loss = base_loss;
    adv.max_abs_delta = 0.0;
    return adv;
  }
  adv.perturbed.resize(x.size());
  const float eps = static_cast<float>(epsilon);
  for (size_t i = 0; i < x.size(); ++i) adv.perturbed[i] = x[i] + eps * sign_of(grad[i]);
  adv.achieved_loss = target.loss(adv.perturbed, label);
  adv.max_abs_delta = max_abs_delta(adv.perturbed, x);
  return adv;
}

AdversarialExample pgd(AttackTarget& target, const std::vector<float>& x, int label,
                       const AttackConfig& cfg, const std::string& id) {
  cfg.validate();
  AdversarialExample adv;
  adv.utterance_id = id;
  adv.label = label;
  adv.config = cfg;
  adv.config.method = AttackMethod::Pgd;
  adv.perturbed = pgd_run(target, x, std::vector<double>(x.size(), 0.0), label, cfg, id);
  adv.achieved_loss = target.loss(adv.perturbed, label);
  adv.restart_losses = {adv.achieved_loss};
  adv.max_abs_delta = max_abs_delta(adv.perturbed, x);
  return adv;
}

AdversarialExample pgd_restarts(AttackTarget& target, const std::vector<float>& x, int label,
                                const AttackConfig& cfg, const std::string& id) {
  cfg.validate();
  AdversarialExample adv;
  adv.utterance_id = id;
  adv.label = label;
  adv.config = cfg;
  adv.config.method = AttackMethod::Pgd;
  Rng rng(cfg.seed);
  std::vector<float> best;
  double best_loss = 0.0;
  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<double> delta0(x.size(), 0.0);
    if (cfg.random_init && cfg.epsilon > 0.0) {
      for (auto& v : delta0) v = rng.uniform(-cfg.epsilon, cfg.epsilon);
    }
    std::vector<float> end = pgd_run(target, x, delta0, label, cfg, id);
    double loss = target.loss(end, label);
    adv.restart_losses.push_back(loss);
    if (r == 0 || loss > best_loss) {
      best_loss = loss;
      best = std::move(end);
    }
  }
  adv.perturbed = std::move(best);
  adv.achieved_loss = best_loss;
  adv.max_abs_delta = max_abs_delta(adv.perturbed, x);
  return adv;
}

AdversarialExample run_attack(AttackTarget& target, const std::vector<float>& x, int label,
                              const AttackConfig& cfg, const std::string& id) {
  if (cfg.method == AttackMethod::Fgsm) return fgsm(target, x, label, cfg.epsilon, id);
  if (cfg.restarts == 1 && !cfg.random_init) return pgd(target, x, label, cfg, id);
  return pgd_restarts(target, x, label, cfg, id);
}

uint64_t derive_attack_seed(const AttackConfig& cfg, const std::string& utterance_id) {
  return Rng::derive(cfg.seed, utterance_id);
}

std::vector<AdversarialExample> attack_corpus(AttackTarget& target,
                                              const std::vector<AttackInput>& items,
                                              const AttackConfig& cfg, int parallelism) {
  cfg.validate();
  std::vector<AdversarialExample> out(items.size());
  parallel_for(static_cast<int64_t>(items.size()), parallelism, [&](int64_t i) {
    AttackConfig local = cfg;
    local.seed = derive_attack_seed(cfg, items[i].id);
    out[i] = run_attack(target, items[i].log_power, items[i].label, local, items[i].id);
  });
  return out;
}

}  // namespace advcm
