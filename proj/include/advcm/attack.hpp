#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advcm/model.hpp"

namespace advcm {

enum class AttackMethod { Fgsm, Pgd };

/// l-inf budgeted attack settings; epsilon is in log-power units. When alpha
/// is left at 0 the PGD step is derived so that epsilon = iterations * alpha
/// holds exactly.
struct AttackConfig {
  AttackMethod method = AttackMethod::Pgd;
  double epsilon = 1.0;
  int iterations = 10;
  double alpha = 0.0;
  int restarts = 5;
  uint64_t seed = 1;
  bool random_init = true;  // restarts start from a random point in the ball

  double step() const { return alpha > 0.0 ? alpha : epsilon / iterations; }
  void validate() const;
};

/// Slack allowed on the l-inf constraint check (float rounding headroom).
inline constexpr double kLinfSlack = 1e-6;

/// A differentiable scoreable target. Implementations must be pure per call
/// so one instance can serve concurrent workers.
class AttackTarget {
 public:
  virtual ~AttackTarget() = default;
  virtual int bins() const = 0;
  virtual int frames() const = 0;
  virtual double loss(const std::vector<float>& log_power, int label) = 0;
  virtual double loss_and_grad(const std::vector<float>& log_power, int label,
                               std::vector<float>& grad) = 0;
};

/// Attack surface of a trained model: its own training loss head evaluated
/// in eval mode, differentiated w.r.t. the input feature only.
class ModelTarget : public AttackTarget {
 public:
  ModelTarget(const ModelSpec& spec, ModelParams<float>& params)
      : spec_(spec), params_(params) {}
  int bins() const override { return spec_.input_h; }
  int frames() const override { return spec_.input_w; }
  double loss(const std::vector<float>& log_power, int label) override;
  double loss_and_grad(const std::vector<float>& log_power, int label,
                       std::vector<float>& grad) override;

 private:
  const ModelSpec& spec_;
  ModelParams<float>& params_;
};

struct AdversarialExample {
  std::string utterance_id;
  int label = 0;
  std::vector<float> perturbed;        // log-power matrix, original layout
  double achieved_loss = 0.0;          // loss at the returned example
  std::vector<double> restart_losses;  // final loss per restart
  double max_abs_delta = 0.0;
  AttackConfig config;
};

/// Single step along the gradient sign; exactly one gradient evaluation.
AdversarialExample fgsm(AttackTarget& target, const std::vector<float>& x, int label,
                        double epsilon, const std::string& id = "");

/// K iterations of clipped sign-gradient ascent from x itself.
AdversarialExample pgd(AttackTarget& target, const std::vector<float>& x, int label,
                       const AttackConfig& cfg, const std::string& id = "");

/// R independent PGD runs started uniformly inside the epsilon ball; the
/// returned example is the run with maximum final loss.
AdversarialExample pgd_restarts(AttackTarget& target, const std::vector<float>& x, int label,
                                const AttackConfig& cfg, const std::string& id = "");

/// Dispatch on cfg.method (FGSM ignores iterations/restarts).
AdversarialExample run_attack(AttackTarget& target, const std::vector<float>& x, int label,
                              const AttackConfig& cfg, const std::string& id = "");

/// Per-utterance attack seed; campaigns and corpus runs share this so the
/// same utterance gets the same perturbation everywhere.
uint64_t derive_attack_seed(const AttackConfig& cfg, const std::string& utterance_id);

struct AttackInput {
  std::string id;
  std::vector<float> log_power;
  int label = 0;
};

/// Order-preserving, deterministic: each utterance runs under a seed derived
/// from the base seed and its id, so results do not depend on parallelism.
std::vector<AdversarialExample> attack_corpus(AttackTarget& target,
                                              const std::vector<AttackInput>& items,
                                              const AttackConfig& cfg, int parallelism = 1);

}  // namespace advcm
