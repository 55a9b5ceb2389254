#include "advcm/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace advcm {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class S>
void TensorT<S>::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), S(0));
}

template <class S>
void TensorT<S>::accumulate(const std::vector<S>& g) {
  if (g.size() != data.size())
    throw std::runtime_error("gradient size mismatch on " + std::string(op_name));
  ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

template <class S>
void TensorT<S>::reset_grad() {
  grad.clear();
  backward_ran = false;
}

template <class S>
TensorPtr<S> make_tensor(Shape shape, std::vector<S> data, bool requires_grad) {
  if (numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  for (int64_t d : shape)
    if (d <= 0) throw std::invalid_argument("non-positive dimension in shape " + shape_str(shape));
  auto t = std::make_shared<TensorT<S>>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  t->requires_grad = requires_grad;
  return t;
}

template <class S>
TensorPtr<S> zeros(Shape shape, bool requires_grad) {
  std::vector<S> d(static_cast<size_t>(numel(shape)), S(0));
  return make_tensor<S>(std::move(shape), std::move(d), requires_grad);
}

template <class S>
TensorPtr<S> full(Shape shape, S value, bool requires_grad) {
  std::vector<S> d(static_cast<size_t>(numel(shape)), value);
  return make_tensor<S>(std::move(shape), std::move(d), requires_grad);
}

template <class S>
TensorPtr<S> scalar_tensor(S value, bool requires_grad) {
  return make_tensor<S>({1}, {value}, requires_grad);
}

template <class S>
Tape<S>::Tape(const TensorPtr<S>& root) : root_(root) {
  if (!root) throw std::invalid_argument("backward on null tensor");
  // Iterative post-order DFS; post-order reversed gives topological order
  // with the root first.
  std::unordered_set<const TensorT<S>*> seen;
  std::vector<std::pair<TensorT<S>*, size_t>> stack;
  std::vector<TensorT<S>*> post;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorT<S>* p = node->parents[next++].get();
      if (!seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      post.push_back(node);
      stack.pop_back();
    }
  }
  order_.assign(post.rbegin(), post.rend());
}

template <class S>
void Tape<S>::run() {
  if (root_->backward_ran)
    throw std::runtime_error("backward already ran on this tape; reset gradients first");
  root_->backward_ran = true;
  root_->ensure_grad();
  for (auto& g : root_->grad) g = S(1);
  // Only recorded ops get flagged: leaves may be shared (read-only) across
  // concurrent evaluations and must not be written to here.
  for (TensorT<S>* node : order_) {
    if (node->backprop) {
      node->backward_ran = true;
      node->ensure_grad();  // nodes never reached keep zero grad
      node->backprop(*node);
    }
  }
}

template <class S>
void backward(const TensorPtr<S>& loss) {
  if (!loss) throw std::invalid_argument("backward on null tensor");
  if (loss->size() != 1)
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(loss->shape));
  if (!loss->backprop && loss->parents.empty() && !loss->requires_grad)
    throw std::invalid_argument("backward on a detached tensor: no recorded primitives reach it");
  Tape<S> tape(loss);
  tape.run();
}

uint64_t Rng::next_u64() {
  // splitmix64: tiny, portable, and identical everywhere.
  state_ += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

int64_t Rng::below(int64_t n) {
  if (n <= 0) throw std::invalid_argument("Rng::below needs a positive bound");
  return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
}

uint64_t Rng::derive(uint64_t base, const std::string& tag) {
  // FNV-1a over the tag folded into the base seed, then one splitmix round.
  uint64_t h = 1469598103934665603ULL ^ base;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  Rng r(h);
  return r.next_u64();
}

namespace detail {
template <class S>
void check_finite(const std::vector<S>& values, const char* op) {
  for (S v : values) {
    if (!std::isfinite(v))
      throw std::runtime_error(std::string(op) + " produced a non-finite value (overflow is an error)");
  }
}
template void check_finite<float>(const std::vector<float>&, const char*);
template void check_finite<double>(const std::vector<double>&, const char*);
}  // namespace detail

template struct TensorT<float>;
template struct TensorT<double>;
template class Tape<float>;
template class Tape<double>;
template void backward<float>(const TensorPtr<float>&);
template void backward<double>(const TensorPtr<double>&);
template TensorPtr<float> make_tensor<float>(Shape, std::vector<float>, bool);
template TensorPtr<double> make_tensor<double>(Shape, std::vector<double>, bool);
template TensorPtr<float> zeros<float>(Shape, bool);
template TensorPtr<double> zeros<double>(Shape, bool);
template TensorPtr<float> full<float>(Shape, float, bool);
template TensorPtr<double> full<double>(Shape, double, bool);
template TensorPtr<float> scalar_tensor<float>(float, bool);
template TensorPtr<double> scalar_tensor<double>(double, bool);

}  // namespace advcm
