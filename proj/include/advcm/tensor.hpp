#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace advcm {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense n-dimensional tensor with an optional reverse-mode record.
///
/// Ops never mutate their input tensors' data; every primitive allocates a
/// fresh output. When an input participates in gradient computation the
/// output keeps shared ownership of its parents plus a closure that pushes
/// the output's gradient into them.
template <class S>
struct TensorT {
  Shape shape;
  std::vector<S> data;
  bool requires_grad = false;
  std::vector<S> grad;  // empty until backward reaches this tensor

  // Reverse-mode record (empty for leaves and for untracked outputs).
  std::vector<std::shared_ptr<TensorT>> parents;
  std::function<void(const TensorT&)> backprop;
  bool backward_ran = false;
  const char* op_name = "leaf";

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool tracked() const { return static_cast<bool>(backprop) || requires_grad; }

  void ensure_grad();               // allocate zero grad buffer if absent
  void accumulate(const std::vector<S>& g);
  void reset_grad();                // drop grad, clear backward flag
};

template <class S>
using TensorPtr = std::shared_ptr<TensorT<S>>;

template <class S>
TensorPtr<S> make_tensor(Shape shape, std::vector<S> data, bool requires_grad = false);

template <class S>
TensorPtr<S> zeros(Shape shape, bool requires_grad = false);

template <class S>
TensorPtr<S> full(Shape shape, S value, bool requires_grad = false);

template <class S>
TensorPtr<S> scalar_tensor(S value, bool requires_grad = false);

/// Reverse-topological schedule over the op records reachable from a root.
/// Running it visits each recorded primitive exactly once, outputs before
/// inputs, accumulating gradients as it goes.
template <class S>
class Tape {
 public:
  explicit Tape(const TensorPtr<S>& root);
  void run();
  const std::vector<TensorT<S>*>& order() const { return order_; }

 private:
  TensorPtr<S> root_;
  std::vector<TensorT<S>*> order_;  // topological, root first
};

/// Populates grad on every reachable tensor with requires_grad, model inputs
/// included. `loss` must be a scalar produced through recorded primitives;
/// calling backward twice on the same record is an error.
template <class S>
void backward(const TensorPtr<S>& loss);

/// Deterministic RNG used across the project. Wraps a fixed 64-bit generator
/// and maps bits to doubles by hand so streams do not depend on the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal, Box-Muller
  int64_t below(int64_t n);              // [0, n)

  /// Stable seed derivation for per-item streams (base seed + string tag).
  static uint64_t derive(uint64_t base, const std::string& tag);

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

namespace detail {
/// Overflow is an error, not a silent NaN/Inf: every primitive runs its
/// output through this check.
template <class S>
void check_finite(const std::vector<S>& values, const char* op);
}  // namespace detail

extern template struct TensorT<float>;
extern template struct TensorT<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template void backward<float>(const TensorPtr<float>&);
extern template void backward<double>(const TensorPtr<double>&);
extern template TensorPtr<float> make_tensor<float>(Shape, std::vector<float>, bool);
extern template TensorPtr<double> make_tensor<double>(Shape, std::vector<double>, bool);
extern template TensorPtr<float> zeros<float>(Shape, bool);
extern template TensorPtr<double> zeros<double>(Shape, bool);
extern template TensorPtr<float> full<float>(Shape, float, bool);
extern template TensorPtr<double> full<double>(Shape, double, bool);
extern template TensorPtr<float> scalar_tensor<float>(float, bool);
extern template TensorPtr<double> scalar_tensor<double>(double, bool);
namespace detail {
extern template void check_finite<float>(const std::vector<float>&, const char*);
extern template void check_finite<double>(const std::vector<double>&, const char*);
}  // namespace detail

}  // namespace advcm
