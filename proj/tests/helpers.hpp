#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "advcm/ops.hpp"

namespace advcm::test {

inline TensorPtr<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                                       bool requires_grad = false) {
  std::vector<double> d(static_cast<size_t>(numel(shape)));
  for (auto& v : d) v = rng.uniform(lo, hi);
  return make_tensor<double>(std::move(shape), std::move(d), requires_grad);
}

struct GradCheck {
  double max_rel_err = 0.0;
  int checked = 0;
};

/// Central finite differences on `leaf` against the analytic gradient of the
/// scalar make_loss() output. make_loss must rebuild the graph from the
/// leaf's current data on every call.
inline GradCheck grad_check_leaf(const std::function<TensorPtr<double>()>& make_loss,
                                 const TensorPtr<double>& leaf, int n_coords, Rng& rng,
                                 double h = 1e-5) {
  leaf->requires_grad = true;
  leaf->reset_grad();
  TensorPtr<double> loss = make_loss();
  backward(loss);
  std::vector<double> analytic = leaf->grad;
  leaf->reset_grad();

  GradCheck res;
  int64_t n = leaf->size();
  for (int c = 0; c < n_coords; ++c) {
    int64_t i = rng.below(n);
    double saved = leaf->data[static_cast<size_t>(i)];
    leaf->data[static_cast<size_t>(i)] = saved + h;
    double lp = make_loss()->data[0];
    leaf->data[static_cast<size_t>(i)] = saved - h;
    double lm = make_loss()->data[0];
    leaf->data[static_cast<size_t>(i)] = saved;
    double fd = (lp - lm) / (2.0 * h);
    double a = analytic[static_cast<size_t>(i)];
    double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
    res.max_rel_err = std::max(res.max_rel_err, rel);
    ++res.checked;
  }
  leaf->requires_grad = false;
  return res;
}

/// Reduces a non-scalar op output to a scalar with fixed random weights so
/// gradient checks cover every output element's contribution.
inline TensorPtr<double> weighted_sum(const TensorPtr<double>& t, const TensorPtr<double>& w) {
  return sum_all(mul(t, w));
}

}  // namespace advcm::test
