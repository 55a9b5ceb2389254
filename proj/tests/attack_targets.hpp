#pragma once

#include <cmath>
#include <vector>

#include "advcm/attack.hpp"

namespace advcm::test {

/// loss = w . x; constant gradient.
class LinearTarget : public AttackTarget {
 public:
  explicit LinearTarget(std::vector<float> w) : w_(std::move(w)) {}
  int bins() const override { return static_cast<int>(w_.size()); }
  int frames() const override { return 1; }
  double loss(const std::vector<float>& x, int) override {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(w_[i]) * x[i];
    return acc;
  }
  double loss_and_grad(const std::vector<float>& x, int label, std::vector<float>& g) override {
    g = w_;
    return loss(x, label);
  }

 private:
  std::vector<float> w_;
};

/// Small fixed two-layer network with a sigmoid hidden layer.
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
  double loss(const std::vector<float>& x, int label) override { return eval(x, label, nullptr); }
  double loss_and_grad(const std::vector<float>& x, int label, std::vector<float>& g) override {
    return eval(x, label, &g);
  }

 private:
  static constexpr int kHidden = 6;
  double eval(const std::vector<float>& x, int label, std::vector<float>* grad) {
    std::vector<double> s(kHidden);
    for (int j = 0; j < kHidden; ++j) {
      double acc = 0.0;
      for (int i = 0; i < dim_; ++i) acc += static_cast<double>(x[i]) * w1_[i * kHidden + j];
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

}  // namespace advcm::test
