#include "advcm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace advcm {

AxisGeom resolve_axis(int64_t in, int k, int s, PadMode mode, const char* op, const char* axis) {
  if (k <= 0 || s <= 0)
    throw std::invalid_argument(std::string(op) + ": window/stride must be positive on axis " + axis);
  AxisGeom g;
  if (mode == PadMode::Valid) {
    if (k > in)
      throw std::invalid_argument(std::string(op) + ": window " + std::to_string(k) +
                                  " exceeds input extent " + std::to_string(in) + " on axis " + axis);
    g.out = (in - k) / s + 1;
    g.pad_lo = 0;
  } else {
    g.out = in / s;
    if (g.out == 0)
      throw std::invalid_argument(std::string(op) + ": stride " + std::to_string(s) +
                                  " exceeds input extent " + std::to_string(in) + " on axis " + axis);
    int64_t pad_total = std::max<int64_t>((g.out - 1) * s + k - in, 0);
    g.pad_lo = pad_total / 2;
  }
  return g;
}

AxisGeom resolve_axis_explicit(int64_t in, int k, int s, int pad, const char* op, const char* axis) {
  if (k <= 0 || s <= 0 || pad < 0)
    throw std::invalid_argument(std::string(op) + ": bad window/stride/padding on axis " + axis);
  int64_t span = in + 2 * static_cast<int64_t>(pad) - k;
  if (span < 0)
    throw std::invalid_argument(std::string(op) + ": window " + std::to_string(k) +
                                " exceeds padded extent on axis " + axis);
  return AxisGeom{span / s + 1, pad};
}

namespace {

template <class S>
bool tracked(const TensorPtr<S>& t) {
  return t && (t->requires_grad || static_cast<bool>(t->backprop));
}

template <class S>
TensorPtr<S> finish(Shape shape, std::vector<S> data, const char* op,
                    std::vector<TensorPtr<S>> parents,
                    std::function<void(const TensorT<S>&)> bp) {
  detail::check_finite(data, op);
  auto t = make_tensor<S>(std::move(shape), std::move(data));
  t->op_name = op;
  bool any = false;
  for (auto& p : parents)
    if (tracked(p)) any = true;
  if (any) {
    t->parents = std::move(parents);
    t->backprop = std::move(bp);
  }
  return t;
}

template <class S>
void require_same_shape(const TensorPtr<S>& a, const TensorPtr<S>& b, const char* op) {
  if (a->shape != b->shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->shape) +
                                " vs " + shape_str(b->shape));
}

// Resolves [H,W,C] / [N,H,W,C] into batched dims.
struct SpatialDims {
  int64_t n, h, w, c;
  bool batched;
};

template <class S>
SpatialDims spatial_dims(const TensorPtr<S>& t, const char* op) {
  const auto& s = t->shape;
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  throw std::invalid_argument(std::string(op) + ": expected rank 3 [H,W,C] or rank 4 [N,H,W,C], got " +
                              shape_str(t->shape));
}

Shape spatial_shape(const SpatialDims& d, int64_t h, int64_t w, int64_t c) {
  if (d.batched) return {d.n, h, w, c};
  return {h, w, c};
}

}  // namespace

// ---------------------------------------------------------------- elementwise

template <class S>
TensorPtr<S> add(const TensorPtr<S>& a, const TensorPtr<S>& b) {
  require_same_shape(a, b, "add");
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
  bool na = tracked(a), nb = tracked(b);
  return finish<S>(a->shape, std::move(out), "add", {a, b}, [na, nb](const TensorT<S>& self) {
    if (na) {
      auto& p = *self.parents[0];
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
    if (nb) {
      auto& p = *self.parents[1];
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

template <class S>
TensorPtr<S> sub(const TensorPtr<S>& a, const TensorPtr<S>& b) {
  require_same_shape(a, b, "sub");
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] - b->data[i];
  bool na = tracked(a), nb = tracked(b);
  return finish<S>(a->shape, std::move(out), "sub", {a, b}, [na, nb](const TensorT<S>& self) {
    if (na) {
      auto& p = *self.parents[0];
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
    if (nb) {
      auto& p = *self.parents[1];
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] -= self.grad[i];
    }
  });
}

template <class S>
TensorPtr<S> mul(const TensorPtr<S>& a, const TensorPtr<S>& b) {
  require_same_shape(a, b, "mul");
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
  bool na = tracked(a), nb = tracked(b);
  return finish<S>(a->shape, std::move(out), "mul", {a, b}, [na, nb](const TensorT<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (na) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
    }
    if (nb) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
}

template <class S>
TensorPtr<S> div(const TensorPtr<S>& a, const TensorPtr<S>& b) {
  require_same_shape(a, b, "div");
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] / b->data[i];
  bool na = tracked(a), nb = tracked(b);
  return finish<S>(a->shape, std::move(out), "div", {a, b}, [na, nb](const TensorT<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (na) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] / pb.data[i];
    }
    if (nb) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        pb.grad[i] -= self.grad[i] * self.data[i] / pb.data[i];
    }
  });
}

template <class S>
TensorPtr<S> scale(const TensorPtr<S>& a, S c) {
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * c;
  bool na = tracked(a);
  return finish<S>(a->shape, std::move(out), "scale", {a}, [na, c](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * c;
  });
}

template <class S>
TensorPtr<S> add_const(const TensorPtr<S>& a, S c) {
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + c;
  bool na = tracked(a);
  return finish<S>(a->shape, std::move(out), "add_const", {a}, [na](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <class S>
TensorPtr<S> relu(const TensorPtr<S>& a) {
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] > S(0) ? a->data[i] : S(0);
  bool na = tracked(a);
  return finish<S>(a->shape, std::move(out), "relu", {a}, [na](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (p.data[i] > S(0)) p.grad[i] += self.grad[i];
  });
}

template <class S>
TensorPtr<S> sigmoid(const TensorPtr<S>& a) {
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) {
    S x = a->data[i];
    if (x >= S(0)) {
      out[i] = S(1) / (S(1) + std::exp(-x));
    } else {
      S e = std::exp(x);
      out[i] = e / (S(1) + e);
    }
  }
  bool na = tracked(a);
  return finish<S>(a->shape, std::move(out), "sigmoid", {a}, [na](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      S y = self.data[i];
      p.grad[i] += self.grad[i] * y * (S(1) - y);
    }
  });
}

template <class S>
TensorPtr<S> exp_t(const TensorPtr<S>& a) {
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a->data[i]);
  bool na = tracked(a);
  return finish<S>(a->shape, std::move(out), "exp", {a}, [na](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * self.data[i];
  });
}

template <class S>
TensorPtr<S> log_t(const TensorPtr<S>& a) {
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(a->data[i]);
  bool na = tracked(a);
  return finish<S>(a->shape, std::move(out), "log", {a}, [na](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] / p.data[i];
  });
}

template <class S>
TensorPtr<S> sqrt_t(const TensorPtr<S>& a) {
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a->data[i]);
  bool na = tracked(a);
  return finish<S>(a->shape, std::move(out), "sqrt", {a}, [na](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] / (S(2) * self.data[i]);
  });
}

template <class S>
TensorPtr<S> mul_scalar(const TensorPtr<S>& a, const TensorPtr<S>& s) {
  if (s->size() != 1)
    throw std::invalid_argument("mul_scalar: scalar operand has shape " + shape_str(s->shape));
  S c = s->data[0];
  std::vector<S> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * c;
  bool na = tracked(a), ns = tracked(s);
  return finish<S>(a->shape, std::move(out), "mul_scalar", {a, s}, [na, ns](const TensorT<S>& self) {
    auto& pa = *self.parents[0];
    auto& ps = *self.parents[1];
    if (na) {
      pa.ensure_grad();
      S c = ps.data[0];
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * c;
    }
    if (ns) {
      ps.ensure_grad();
      double acc = 0.0;
      for (size_t i = 0; i < self.grad.size(); ++i)
        acc += static_cast<double>(self.grad[i]) * static_cast<double>(pa.data[i]);
      ps.grad[0] += static_cast<S>(acc);
    }
  });
}

// ------------------------------------------------------- structure/reductions

template <class S>
TensorPtr<S> reshape(const TensorPtr<S>& a, Shape shape) {
  if (numel(shape) != a->size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a->shape) + " as " +
                                shape_str(shape));
  std::vector<S> out = a->data;
  bool na = tracked(a);
  return finish<S>(std::move(shape), std::move(out), "reshape", {a}, [na](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <class S>
TensorPtr<S> sum_all(const TensorPtr<S>& a) {
  double acc = 0.0;
  for (S v : a->data) acc += static_cast<double>(v);
  bool na = tracked(a);
  return finish<S>({1}, {static_cast<S>(acc)}, "sum_all", {a}, [na](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    S g = self.grad[0];
    for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
  });
}

template <class S>
TensorPtr<S> mean_all(const TensorPtr<S>& a) {
  return scale(sum_all(a), static_cast<S>(1.0 / static_cast<double>(a->size())));
}

template <class S>
TensorPtr<S> sum_axis0(const TensorPtr<S>& a) {
  if (a->shape.size() != 2)
    throw std::invalid_argument("sum_axis0: expected rank 2, got " + shape_str(a->shape));
  int64_t rows = a->shape[0], cols = a->shape[1];
  std::vector<S> out(static_cast<size_t>(cols), S(0));
  {
    std::vector<double> acc(static_cast<size_t>(cols), 0.0);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) acc[c] += static_cast<double>(a->data[r * cols + c]);
    for (int64_t c = 0; c < cols; ++c) out[c] = static_cast<S>(acc[c]);
  }
  bool na = tracked(a);
  return finish<S>({cols}, std::move(out), "sum_axis0", {a}, [na, rows, cols](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) p.grad[r * cols + c] += self.grad[c];
  });
}

template <class S>
TensorPtr<S> row(const TensorPtr<S>& a, int64_t r) {
  if (a->shape.size() != 2)
    throw std::invalid_argument("row: expected rank 2, got " + shape_str(a->shape));
  int64_t rows = a->shape[0], cols = a->shape[1];
  if (r < 0 || r >= rows) throw std::out_of_range("row: index " + std::to_string(r));
  std::vector<S> out(a->data.begin() + r * cols, a->data.begin() + (r + 1) * cols);
  bool na = tracked(a);
  return finish<S>({cols}, std::move(out), "row", {a}, [na, r, cols](const TensorT<S>& self) {
    if (!na) return;
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t c = 0; c < cols; ++c) p.grad[r * cols + c] += self.grad[c];
  });
}

template <class S>
TensorPtr<S> select(const TensorPtr<S>& a, int64_t i) {
  if (i < 0 || i >= a->size()) throw std::out_of_range("select: index " + std::to_string(i));
  bool na = tracked(a);
  return finish<S>({1}, {a->data[static_cast<size_t>(i)]}, "select", {a},
                   [na, i](const TensorT<S>& self) {
                     if (!na) return;
                     auto& p = *self.parents[0];
                     p.ensure_grad();
                     p.grad[static_cast<size_t>(i)] += self.grad[0];
                   });
}

template <class S>
TensorPtr<S> set_at(const TensorPtr<S>& a, int64_t i, const TensorPtr<S>& s) {
  if (i < 0 || i >= a->size()) throw std::out_of_range("set_at: index " + std::to_string(i));
  if (s->size() != 1) throw std::invalid_argument("set_at: replacement must be scalar");
  std::vector<S> out = a->data;
  out[static_cast<size_t>(i)] = s->data[0];
  bool na = tracked(a), ns = tracked(s);
  return finish<S>(a->shape, std::move(out), "set_at", {a, s}, [na, ns, i](const TensorT<S>& self) {
    if (na) {
      auto& p = *self.parents[0];
      p.ensure_grad();
      for (size_t j = 0; j < self.grad.size(); ++j)
        if (static_cast<int64_t>(j) != i) p.grad[j] += self.grad[j];
    }
    if (ns) {
      auto& p = *self.parents[1];
      p.ensure_grad();
      p.grad[0] += self.grad[static_cast<size_t>(i)];
    }
  });
}

// ------------------------------------------------------------------- linear

template <class S>
TensorPtr<S> linear(const TensorPtr<S>& input, const TensorPtr<S>& weight,
                    const TensorPtr<S>& bias) {
  if (weight->shape.size() != 2)
    throw std::invalid_argument("linear: weight must be [D,C], got " + shape_str(weight->shape));
  int64_t d = weight->shape[0], c = weight->shape[1];
  bool vec = input->shape.size() == 1;
  if (!vec && input->shape.size() != 2)
    throw std::invalid_argument("linear: input must be [D] or [N,D], got " + shape_str(input->shape));
  int64_t n = vec ? 1 : input->shape[0];
  int64_t din = vec ? input->shape[0] : input->shape[1];
  if (din != d)
    throw std::invalid_argument("linear: input features " + std::to_string(din) +
                                " do not match weight rows " + std::to_string(d));
  if (bias && bias->size() != c)
    throw std::invalid_argument("linear: bias length " + std::to_string(bias->size()) +
                                " does not match output features " + std::to_string(c));

  std::vector<S> out(static_cast<size_t>(n * c), S(0));
  const S* x = input->data.data();
  const S* w = weight->data.data();
  for (int64_t i = 0; i < n; ++i) {
    S* o = out.data() + i * c;
    if (bias) std::memcpy(o, bias->data.data(), sizeof(S) * static_cast<size_t>(c));
    const S* xi = x + i * d;
    for (int64_t k = 0; k < d; ++k) {
      S v = xi[k];
      const S* wk = w + k * c;
      for (int64_t j = 0; j < c; ++j) o[j] += v * wk[j];
    }
  }
  Shape oshape = vec ? Shape{c} : Shape{n, c};
  bool nx = tracked(input), nw = tracked(weight), nb = tracked(bias);
  std::vector<TensorPtr<S>> parents = {input, weight};
  if (bias) parents.push_back(bias);
  return finish<S>(std::move(oshape), std::move(out), "linear", std::move(parents),
                   [nx, nw, nb, n, d, c](const TensorT<S>& self) {
                     auto& pin = *self.parents[0];
                     auto& pw = *self.parents[1];
                     const S* x = pin.data.data();
                     const S* w = pw.data.data();
                     const S* g = self.grad.data();
                     if (nx) {
                       pin.ensure_grad();
                       for (int64_t i = 0; i < n; ++i)
                         for (int64_t k = 0; k < d; ++k) {
                           double acc = 0.0;
                           const S* gi = g + i * c;
                           const S* wk = w + k * c;
                           for (int64_t j = 0; j < c; ++j)
                             acc += static_cast<double>(gi[j]) * static_cast<double>(wk[j]);
                           pin.grad[i * d + k] += static_cast<S>(acc);
                         }
                     }
                     if (nw) {
                       pw.ensure_grad();
                       for (int64_t i = 0; i < n; ++i) {
                         const S* xi = x + i * d;
                         const S* gi = g + i * c;
                         for (int64_t k = 0; k < d; ++k) {
                           S v = xi[k];
                           S* gw = pw.grad.data() + k * c;
                           for (int64_t j = 0; j < c; ++j) gw[j] += v * gi[j];
                         }
                       }
                     }
                     if (nb && self.parents.size() > 2) {
                       auto& pb = *self.parents[2];
                       pb.ensure_grad();
                       for (int64_t i = 0; i < n; ++i)
                         for (int64_t j = 0; j < c; ++j) pb.grad[j] += g[i * c + j];
                     }
                   });
}

// ------------------------------------------------------------------- conv2d

namespace {

template <class S>
TensorPtr<S> conv2d_impl(const TensorPtr<S>& input, const TensorPtr<S>& kernel,
                         const TensorPtr<S>& bias, Stride2 stride, AxisGeom gh, AxisGeom gw) {
  SpatialDims d = spatial_dims(input, "conv2d");
  if (kernel->shape.size() != 4)
    throw std::invalid_argument("conv2d: kernel must be [kh,kw,Cin,Cout], got " +
                                shape_str(kernel->shape));
  int64_t kh = kernel->shape[0], kw = kernel->shape[1];
  int64_t cin = kernel->shape[2], cout = kernel->shape[3];
  if (cin != d.c)
    throw std::invalid_argument("conv2d: kernel input channels " + std::to_string(cin) +
                                " do not match input channels " + std::to_string(d.c) +
                                " (axis C)");
  if (bias && bias->size() != cout)
    throw std::invalid_argument("conv2d: bias length " + std::to_string(bias->size()) +
                                " does not match output channels " + std::to_string(cout));
  int64_t oh = gh.out, ow = gw.out;
  std::vector<S> out(static_cast<size_t>(d.n * oh * ow * cout), S(0));
  if (bias) {
    for (int64_t p = 0; p < d.n * oh * ow; ++p)
      std::memcpy(out.data() + p * cout, bias->data.data(), sizeof(S) * static_cast<size_t>(cout));
  }
  const S* in = input->data.data();
  const S* ker = kernel->data.data();
  const int64_t H = d.h, W = d.w, C = d.c;
  for (int64_t nidx = 0; nidx < d.n; ++nidx) {
    const S* inb = in + nidx * H * W * C;
    S* outb = out.data() + nidx * oh * ow * cout;
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ky = 0; ky < kh; ++ky) {
        int64_t iy = oy * stride.h - gh.pad_lo + ky;
        if (iy < 0 || iy >= H) continue;
        for (int64_t ox = 0; ox < ow; ++ox) {
          S* o = outb + (oy * ow + ox) * cout;
          for (int64_t kx = 0; kx < kw; ++kx) {
            int64_t ix = ox * stride.w - gw.pad_lo + kx;
            if (ix < 0 || ix >= W) continue;
            const S* ip = inb + (iy * W + ix) * C;
            const S* kp = ker + ((ky * kw + kx) * C) * cout;
            for (int64_t ci = 0; ci < C; ++ci) {
              S v = ip[ci];
              const S* kc = kp + ci * cout;
              for (int64_t co = 0; co < cout; ++co) o[co] += v * kc[co];
            }
          }
        }
      }
    }
  }
  Shape oshape = spatial_shape(d, oh, ow, cout);
  bool nx = tracked(input), nk = tracked(kernel), nb = tracked(bias);
  std::vector<TensorPtr<S>> parents = {input, kernel};
  if (bias) parents.push_back(bias);
  auto bp = [nx, nk, nb, d, kh, kw, cout, stride, gh, gw](const TensorT<S>& self) {
    auto& pin = *self.parents[0];
    auto& pker = *self.parents[1];
    const int64_t H = d.h, W = d.w, C = d.c;
    const int64_t oh = gh.out, ow = gw.out;
    const S* in = pin.data.data();
    const S* ker = pker.data.data();
    const S* g = self.grad.data();
    if (nx) pin.ensure_grad();
    if (nk) pker.ensure_grad();
    for (int64_t nidx = 0; nidx < d.n; ++nidx) {
      const S* inb = in + nidx * H * W * C;
      S* ginb = nx ? pin.grad.data() + nidx * H * W * C : nullptr;
      const S* gb = g + nidx * oh * ow * cout;
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ky = 0; ky < kh; ++ky) {
          int64_t iy = oy * stride.h - gh.pad_lo + ky;
          if (iy < 0 || iy >= H) continue;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const S* go = gb + (oy * ow + ox) * cout;
            for (int64_t kx = 0; kx < kw; ++kx) {
              int64_t ix = ox * stride.w - gw.pad_lo + kx;
              if (ix < 0 || ix >= W) continue;
              int64_t in_off = (iy * W + ix) * C;
              const S* kp = ker + ((ky * kw + kx) * C) * cout;
              if (nx) {
                S* gi = ginb + in_off;
                for (int64_t ci = 0; ci < C; ++ci) {
                  const S* kc = kp + ci * cout;
                  S acc = S(0);
                  for (int64_t co = 0; co < cout; ++co) acc += go[co] * kc[co];
                  gi[ci] += acc;
                }
              }
              if (nk) {
                const S* ip = inb + in_off;
                S* gk = pker.grad.data() + ((ky * kw + kx) * C) * cout;
                for (int64_t ci = 0; ci < C; ++ci) {
                  S v = ip[ci];
                  S* gkc = gk + ci * cout;
                  for (int64_t co = 0; co < cout; ++co) gkc[co] += v * go[co];
                }
              }
            }
          }
        }
      }
    }
    if (nb && self.parents.size() > 2) {
      auto& pb = *self.parents[2];
      pb.ensure_grad();
      for (int64_t p = 0; p < d.n * oh * ow; ++p)
        for (int64_t co = 0; co < cout; ++co) pb.grad[co] += g[p * cout + co];
    }
  };
  return finish<S>(std::move(oshape), std::move(out), "conv2d", std::move(parents), std::move(bp));
}

}  // namespace

template <class S>
TensorPtr<S> conv2d(const TensorPtr<S>& input, const TensorPtr<S>& kernel, const TensorPtr<S>& bias,
                    Stride2 stride, PadMode pad) {
  SpatialDims d = spatial_dims(input, "conv2d");
  if (kernel->shape.size() != 4)
    throw std::invalid_argument("conv2d: kernel must be [kh,kw,Cin,Cout], got " +
                                shape_str(kernel->shape));
  AxisGeom gh = resolve_axis(d.h, static_cast<int>(kernel->shape[0]), stride.h, pad, "conv2d", "H");
  AxisGeom gw = resolve_axis(d.w, static_cast<int>(kernel->shape[1]), stride.w, pad, "conv2d", "W");
  return conv2d_impl(input, kernel, bias, stride, gh, gw);
}

template <class S>
TensorPtr<S> conv2d(const TensorPtr<S>& input, const TensorPtr<S>& kernel, const TensorPtr<S>& bias,
                    Stride2 stride, Window2 padding) {
  SpatialDims d = spatial_dims(input, "conv2d");
  if (kernel->shape.size() != 4)
    throw std::invalid_argument("conv2d: kernel must be [kh,kw,Cin,Cout], got " +
                                shape_str(kernel->shape));
  AxisGeom gh = resolve_axis_explicit(d.h, static_cast<int>(kernel->shape[0]), stride.h, padding.h,
                                      "conv2d", "H");
  AxisGeom gw = resolve_axis_explicit(d.w, static_cast<int>(kernel->shape[1]), stride.w, padding.w,
                                      "conv2d", "W");
  return conv2d_impl(input, kernel, bias, stride, gh, gw);
}

// ----------------------------------------------------------------- maxpool2d

template <class S>
TensorPtr<S> maxpool2d(const TensorPtr<S>& input, Window2 window, Stride2 stride, PadMode pad) {
  SpatialDims d = spatial_dims(input, "maxpool2d");
  AxisGeom gh = resolve_axis(d.h, window.h, stride.h, pad, "maxpool2d", "H");
  AxisGeom gw = resolve_axis(d.w, window.w, stride.w, pad, "maxpool2d", "W");
  int64_t oh = gh.out, ow = gw.out;
  const int64_t H = d.h, W = d.w, C = d.c;
  std::vector<S> out(static_cast<size_t>(d.n * oh * ow * C));
  std::vector<int64_t> arg(out.size());
  const S* in = input->data.data();
  for (int64_t nidx = 0; nidx < d.n; ++nidx) {
    const S* inb = in + nidx * H * W * C;
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        S* o = out.data() + ((nidx * oh + oy) * ow + ox) * C;
        int64_t* am = arg.data() + ((nidx * oh + oy) * ow + ox) * C;
        bool first = true;
        for (int64_t ky = 0; ky < window.h; ++ky) {
          int64_t iy = oy * stride.h - gh.pad_lo + ky;
          if (iy < 0 || iy >= H) continue;
          for (int64_t kx = 0; kx < window.w; ++kx) {
            int64_t ix = ox * stride.w - gw.pad_lo + kx;
            if (ix < 0 || ix >= W) continue;
            const S* ip = inb + (iy * W + ix) * C;
            int64_t base = nidx * H * W * C + (iy * W + ix) * C;
            if (first) {
              for (int64_t c = 0; c < C; ++c) {
                o[c] = ip[c];
                am[c] = base + c;
              }
              first = false;
            } else {
              for (int64_t c = 0; c < C; ++c) {
                if (ip[c] > o[c]) {  // strict: first occurrence wins ties
                  o[c] = ip[c];
                  am[c] = base + c;
                }
              }
            }
          }
        }
        if (first)
          throw std::invalid_argument("maxpool2d: window fully outside input");
      }
    }
  }
  Shape oshape = spatial_shape(d, oh, ow, C);
  bool nx = tracked(input);
  return finish<S>(std::move(oshape), std::move(out), "maxpool2d", {input},
                   [nx, arg = std::move(arg)](const TensorT<S>& self) {
                     if (!nx) return;
                     auto& p = *self.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < self.grad.size(); ++i)
                       p.grad[static_cast<size_t>(arg[i])] += self.grad[i];
                   });
}

// --------------------------------------------------------------- batchnorm2d

template <class S>
TensorPtr<S> batchnorm2d(const TensorPtr<S>& input, const TensorPtr<S>& gamma,
                         const TensorPtr<S>& beta, BnStats<S>* stats, bool train, double momentum,
                         double eps) {
  // Accepts [N,H,W,C], [H,W,C] or [N,D] (per-feature normalization).
  int64_t c, m;
  const auto& sh = input->shape;
  if (sh.size() == 4) {
    c = sh[3];
    m = sh[0] * sh[1] * sh[2];
  } else if (sh.size() == 3) {
    c = sh[2];
    m = sh[0] * sh[1];
  } else if (sh.size() == 2) {
    c = sh[1];
    m = sh[0];
  } else {
    throw std::invalid_argument("batchnorm2d: expected rank 2-4 input, got " + shape_str(sh));
  }
  if (gamma->size() != c || beta->size() != c)
    throw std::invalid_argument("batchnorm2d: scale/shift length does not match channel count " +
                                std::to_string(c));
  if (!stats || static_cast<int64_t>(stats->mean.size()) != c ||
      static_cast<int64_t>(stats->var.size()) != c)
    throw std::invalid_argument("batchnorm2d: running stats missing or wrong length");

  std::vector<double> mu(static_cast<size_t>(c)), var(static_cast<size_t>(c));
  if (train) {
    std::vector<double> s1(static_cast<size_t>(c), 0.0), s2(static_cast<size_t>(c), 0.0);
    for (int64_t i = 0; i < m; ++i) {
      const S* xp = input->data.data() + i * c;
      for (int64_t j = 0; j < c; ++j) {
        double v = static_cast<double>(xp[j]);
        s1[j] += v;
        s2[j] += v * v;
      }
    }
    for (int64_t j = 0; j < c; ++j) {
      mu[j] = s1[j] / static_cast<double>(m);
      var[j] = std::max(s2[j] / static_cast<double>(m) - mu[j] * mu[j], 0.0);
    }
    // Update running stats (detached from the graph); unbiased variance like
    // the usual library convention, guarded for m == 1.
    double corr = m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
    for (int64_t j = 0; j < c; ++j) {
      stats->mean[j] = static_cast<S>((1.0 - momentum) * stats->mean[j] + momentum * mu[j]);
      stats->var[j] = static_cast<S>((1.0 - momentum) * stats->var[j] + momentum * var[j] * corr);
    }
  } else {
    for (int64_t j = 0; j < c; ++j) {
      mu[j] = static_cast<double>(stats->mean[j]);
      var[j] = static_cast<double>(stats->var[j]);
    }
  }
  std::vector<S> inv_std(static_cast<size_t>(c));
  for (int64_t j = 0; j < c; ++j) inv_std[j] = static_cast<S>(1.0 / std::sqrt(var[j] + eps));
  std::vector<S> mu_s(static_cast<size_t>(c));
  for (int64_t j = 0; j < c; ++j) mu_s[j] = static_cast<S>(mu[j]);

  std::vector<S> xhat(input->data.size());
  std::vector<S> out(input->data.size());
  for (int64_t i = 0; i < m; ++i) {
    const S* xp = input->data.data() + i * c;
    S* hp = xhat.data() + i * c;
    S* op = out.data() + i * c;
    for (int64_t j = 0; j < c; ++j) {
      S h = (xp[j] - mu_s[j]) * inv_std[j];
      hp[j] = h;
      op[j] = gamma->data[j] * h + beta->data[j];
    }
  }
  bool nx = tracked(input), ng = tracked(gamma), nb = tracked(beta);
  return finish<S>(input->shape, std::move(out), "batchnorm2d", {input, gamma, beta},
                   [nx, ng, nb, train, m, c, inv_std = std::move(inv_std),
                    xhat = std::move(xhat)](const TensorT<S>& self) {
                     auto& pin = *self.parents[0];
                     auto& pg = *self.parents[1];
                     auto& pb = *self.parents[2];
                     const S* g = self.grad.data();
                     std::vector<double> sum_g(static_cast<size_t>(c), 0.0);
                     std::vector<double> sum_gh(static_cast<size_t>(c), 0.0);
                     for (int64_t i = 0; i < m; ++i) {
                       const S* gp = g + i * c;
                       const S* hp = xhat.data() + i * c;
                       for (int64_t j = 0; j < c; ++j) {
                         sum_g[j] += static_cast<double>(gp[j]);
                         sum_gh[j] += static_cast<double>(gp[j]) * static_cast<double>(hp[j]);
                       }
                     }
                     if (ng) {
                       pg.ensure_grad();
                       for (int64_t j = 0; j < c; ++j) pg.grad[j] += static_cast<S>(sum_gh[j]);
                     }
                     if (nb) {
                       pb.ensure_grad();
                       for (int64_t j = 0; j < c; ++j) pb.grad[j] += static_cast<S>(sum_g[j]);
                     }
                     if (nx) {
                       pin.ensure_grad();
                       if (train) {
                         for (int64_t i = 0; i < m; ++i) {
                           const S* gp = g + i * c;
                           const S* hp = xhat.data() + i * c;
                           S* gi = pin.grad.data() + i * c;
                           for (int64_t j = 0; j < c; ++j) {
                             double t = static_cast<double>(gp[j]) -
                                        sum_g[j] / static_cast<double>(m) -
                                        static_cast<double>(hp[j]) * sum_gh[j] /
                                            static_cast<double>(m);
                             gi[j] += static_cast<S>(static_cast<double>(pg.data[j]) *
                                                     static_cast<double>(inv_std[j]) * t);
                           }
                         }
                       } else {
                         for (int64_t i = 0; i < m; ++i) {
                           const S* gp = g + i * c;
                           S* gi = pin.grad.data() + i * c;
                           for (int64_t j = 0; j < c; ++j)
                             gi[j] += gp[j] * pg.data[j] * inv_std[j];
                         }
                       }
                     }
                   });
}

// ------------------------------------------------------------ global_avgpool

template <class S>
TensorPtr<S> global_avgpool(const TensorPtr<S>& input) {
  SpatialDims d = spatial_dims(input, "global_avgpool");
  const int64_t hw = d.h * d.w;
  std::vector<S> out(static_cast<size_t>(d.n * d.c));
  for (int64_t nidx = 0; nidx < d.n; ++nidx) {
    std::vector<double> acc(static_cast<size_t>(d.c), 0.0);
    const S* inb = input->data.data() + nidx * hw * d.c;
    for (int64_t p = 0; p < hw; ++p)
      for (int64_t j = 0; j < d.c; ++j) acc[j] += static_cast<double>(inb[p * d.c + j]);
    for (int64_t j = 0; j < d.c; ++j)
      out[nidx * d.c + j] = static_cast<S>(acc[j] / static_cast<double>(hw));
  }
  Shape oshape = d.batched ? Shape{d.n, d.c} : Shape{d.c};
  bool nx = tracked(input);
  return finish<S>(std::move(oshape), std::move(out), "global_avgpool", {input},
                   [nx, d, hw](const TensorT<S>& self) {
                     if (!nx) return;
                     auto& p = *self.parents[0];
                     p.ensure_grad();
                     S inv = static_cast<S>(1.0 / static_cast<double>(hw));
                     for (int64_t nidx = 0; nidx < d.n; ++nidx) {
                       const S* g = self.grad.data() + nidx * d.c;
                       S* gi = p.grad.data() + nidx * hw * d.c;
                       for (int64_t q = 0; q < hw; ++q)
                         for (int64_t j = 0; j < d.c; ++j) gi[q * d.c + j] += g[j] * inv;
                     }
                   });
}

// -------------------------------------------------------------------- mfm

namespace {

template <class S>
TensorPtr<S> mfm_lastdim(const TensorPtr<S>& input, const char* op) {
  if (input->shape.empty())
    throw std::invalid_argument(std::string(op) + ": scalar input");
  int64_t c = input->shape.back();
  if (c % 2 != 0)
    throw std::invalid_argument(std::string(op) + ": last-axis extent " + std::to_string(c) +
                                " is odd; paired halves require an even count");
  int64_t half = c / 2;
  int64_t rows = input->size() / c;
  std::vector<S> out(static_cast<size_t>(rows * half));
  std::vector<uint8_t> first_wins(out.size());
  for (int64_t r = 0; r < rows; ++r) {
    const S* ip = input->data.data() + r * c;
    S* op_ = out.data() + r * half;
    uint8_t* fw = first_wins.data() + r * half;
    for (int64_t k = 0; k < half; ++k) {
      S a = ip[k], b = ip[k + half];
      bool first = a >= b;  // ties go to the first half
      op_[k] = first ? a : b;
      fw[k] = first ? 1 : 0;
    }
  }
  Shape oshape = input->shape;
  oshape.back() = half;
  bool nx = tracked(input);
  return finish<S>(std::move(oshape), std::move(out), op, {input},
                   [nx, rows, half, c, fw = std::move(first_wins)](const TensorT<S>& self) {
                     if (!nx) return;
                     auto& p = *self.parents[0];
                     p.ensure_grad();
                     for (int64_t r = 0; r < rows; ++r) {
                       const S* g = self.grad.data() + r * half;
                       S* gi = p.grad.data() + r * c;
                       const uint8_t* f = fw.data() + r * half;
                       for (int64_t k = 0; k < half; ++k) {
                         if (f[k])
                           gi[k] += g[k];
                         else
                           gi[k + half] += g[k];
                       }
                     }
                   });
}

}  // namespace

template <class S>
TensorPtr<S> mfm(const TensorPtr<S>& input) {
  if (input->shape.size() < 3)
    throw std::invalid_argument("mfm: expected a spatial tensor, got " + shape_str(input->shape));
  return mfm_lastdim(input, "mfm");
}

template <class S>
TensorPtr<S> mfm_dense(const TensorPtr<S>& input) {
  if (input->shape.size() > 2)
    throw std::invalid_argument("mfm_dense: expected [D] or [N,D], got " + shape_str(input->shape));
  return mfm_lastdim(input, "mfm_dense");
}

// ------------------------------------------------------------ scale_channels

template <class S>
TensorPtr<S> scale_channels(const TensorPtr<S>& x, const TensorPtr<S>& gate) {
  SpatialDims d = spatial_dims(x, "scale_channels");
  bool gate_batched = gate->shape.size() == 2;
  if (gate_batched) {
    if (gate->shape[0] != d.n || gate->shape[1] != d.c)
      throw std::invalid_argument("scale_channels: gate " + shape_str(gate->shape) +
                                  " does not match input " + shape_str(x->shape));
  } else if (gate->shape.size() == 1) {
    if (gate->shape[0] != d.c || d.batched)
      throw std::invalid_argument("scale_channels: gate " + shape_str(gate->shape) +
                                  " does not match input " + shape_str(x->shape));
  } else {
    throw std::invalid_argument("scale_channels: gate must be [C] or [N,C]");
  }
  const int64_t hw = d.h * d.w;
  std::vector<S> out(x->data.size());
  for (int64_t nidx = 0; nidx < d.n; ++nidx) {
    const S* xb = x->data.data() + nidx * hw * d.c;
    const S* gb = gate->data.data() + nidx * d.c;
    S* ob = out.data() + nidx * hw * d.c;
    for (int64_t p = 0; p < hw; ++p)
      for (int64_t j = 0; j < d.c; ++j) ob[p * d.c + j] = xb[p * d.c + j] * gb[j];
  }
  bool nx = tracked(x), ng = tracked(gate);
  return finish<S>(x->shape, std::move(out), "scale_channels", {x, gate},
                   [nx, ng, d, hw](const TensorT<S>& self) {
                     auto& px = *self.parents[0];
                     auto& pg = *self.parents[1];
                     if (nx) px.ensure_grad();
                     if (ng) pg.ensure_grad();
                     for (int64_t nidx = 0; nidx < d.n; ++nidx) {
                       const S* g = self.grad.data() + nidx * hw * d.c;
                       const S* xb = px.data.data() + nidx * hw * d.c;
                       const S* gb = pg.data.data() + nidx * d.c;
                       if (nx) {
                         S* gx = px.grad.data() + nidx * hw * d.c;
                         for (int64_t p = 0; p < hw; ++p)
                           for (int64_t j = 0; j < d.c; ++j)
                             gx[p * d.c + j] += g[p * d.c + j] * gb[j];
                       }
                       if (ng) {
                         S* gg = pg.grad.data() + nidx * d.c;
                         for (int64_t j = 0; j < d.c; ++j) {
                           double acc = 0.0;
                           for (int64_t p = 0; p < hw; ++p)
                             acc += static_cast<double>(g[p * d.c + j]) *
                                    static_cast<double>(xb[p * d.c + j]);
                           gg[j] += static_cast<S>(acc);
                         }
                       }
                     }
                   });
}

// ------------------------------------------------------------------ dropout

template <class S>
TensorPtr<S> dropout(const TensorPtr<S>& input, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must lie in [0,1), got " + std::to_string(rate));
  if (!train || rate == 0.0) {
    // Identity pass-through; still recorded so gradients flow.
    return scale(input, S(1));
  }
  S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  std::vector<S> mask(input->data.size());
  for (auto& v : mask) v = rng.uniform() >= rate ? keep_scale : S(0);
  std::vector<S> out(input->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = input->data[i] * mask[i];
  bool nx = tracked(input);
  return finish<S>(input->shape, std::move(out), "dropout", {input},
                   [nx, mask = std::move(mask)](const TensorT<S>& self) {
                     if (!nx) return;
                     auto& p = *self.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < self.grad.size(); ++i)
                       p.grad[i] += self.grad[i] * mask[i];
                   });
}

// ------------------------------------------------------------------- losses

template <class S>
TensorPtr<S> softmax_ce_loss(const TensorPtr<S>& logits, const std::vector<int>& labels) {
  bool vec = logits->shape.size() == 1;
  if (!vec && logits->shape.size() != 2)
    throw std::invalid_argument("softmax_ce_loss: logits must be [C] or [N,C]");
  int64_t n = vec ? 1 : logits->shape[0];
  int64_t c = vec ? logits->shape[0] : logits->shape[1];
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("softmax_ce_loss: label count " + std::to_string(labels.size()) +
                                " does not match batch size " + std::to_string(n));
  for (int y : labels)
    if (y < 0 || y >= c) throw std::invalid_argument("softmax_ce_loss: label out of range");

  std::vector<S> probs(logits->data.size());
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const S* l = logits->data.data() + i * c;
    S mx = l[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, l[j]);
    double se = 0.0;
    for (int64_t j = 0; j < c; ++j) se += std::exp(static_cast<double>(l[j] - mx));
    double lse = static_cast<double>(mx) + std::log(se);
    total += lse - static_cast<double>(l[labels[i]]);
    for (int64_t j = 0; j < c; ++j)
      probs[i * c + j] = static_cast<S>(std::exp(static_cast<double>(l[j]) - lse));
  }
  S loss = static_cast<S>(total / static_cast<double>(n));
  bool nx = tracked(logits);
  return finish<S>({1}, {loss}, "softmax_ce_loss", {logits},
                   [nx, n, c, labels, probs = std::move(probs)](const TensorT<S>& self) {
                     if (!nx) return;
                     auto& p = *self.parents[0];
                     p.ensure_grad();
                     S g = self.grad[0] / static_cast<S>(n);
                     for (int64_t i = 0; i < n; ++i)
                       for (int64_t j = 0; j < c; ++j) {
                         S d = probs[i * c + j] - (j == labels[i] ? S(1) : S(0));
                         p.grad[i * c + j] += g * d;
                       }
                   });
}

namespace {

/// Chebyshev evaluation of cos(m*theta) from c = cos(theta); differentiable
/// polynomial in c, no acos involved.
template <class S>
TensorPtr<S> cos_m_theta(const TensorPtr<S>& c, int m) {
  if (m == 1) return scale(c, S(1));
  TensorPtr<S> t_prev = scalar_tensor<S>(S(1));  // T_0
  TensorPtr<S> t_cur = c;                        // T_1
  for (int k = 2; k <= m; ++k) {
    TensorPtr<S> t_next = sub(scale(mul(c, t_cur), S(2)), t_prev);
    t_prev = t_cur;
    t_cur = t_next;
  }
  return t_cur;
}

}  // namespace

template <class S>
TensorPtr<S> asoftmax_loss(const TensorPtr<S>& embedding, const TensorPtr<S>& head_w,
                           const std::vector<int>& labels, int margin, bool psi_variant) {
  if (margin < 1) throw std::invalid_argument("asoftmax_loss: margin must be >= 1");
  if (head_w->shape.size() != 2)
    throw std::invalid_argument("asoftmax_loss: head weight must be [D,C]");
  bool vec = embedding->shape.size() == 1;
  if (!vec && embedding->shape.size() != 2)
    throw std::invalid_argument("asoftmax_loss: embedding must be [D] or [N,D]");
  int64_t n = vec ? 1 : embedding->shape[0];
  int64_t d = vec ? embedding->shape[0] : embedding->shape[1];
  int64_t c = head_w->shape[1];
  if (head_w->shape[0] != d)
    throw std::invalid_argument("asoftmax_loss: embedding dim " + std::to_string(d) +
                                " does not match head rows " + std::to_string(head_w->shape[0]));
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("asoftmax_loss: label count does not match batch size");
  for (int y : labels)
    if (y < 0 || y >= c) throw std::invalid_argument("asoftmax_loss: label out of range");

  // Column norms of W, shared across samples.
  TensorPtr<S> wnorm = sqrt_t(sum_axis0(mul(head_w, head_w)));
  TensorPtr<S> total;
  for (int64_t i = 0; i < n; ++i) {
    TensorPtr<S> e = vec ? embedding : row(embedding, i);
    TensorPtr<S> nrm = sqrt_t(sum_all(mul(e, e)));
    if (!(nrm->data[0] > S(0)))
      throw std::invalid_argument("asoftmax_loss: zero-norm embedding (sample " +
                                  std::to_string(i) + ")");
    TensorPtr<S> raw = linear(e, head_w, TensorPtr<S>{});
    TensorPtr<S> cosv = div(raw, mul_scalar(wnorm, nrm));
    int y = labels[i];
    TensorPtr<S> cy = select(cosv, y);
    TensorPtr<S> margin_cos = cos_m_theta(cy, margin);
    if (psi_variant) {
      // psi(theta) = (-1)^k cos(m theta) - 2k on [k pi/m, (k+1) pi/m];
      // k is chosen from the forward value and treated as constant.
      double cv = std::min(1.0, std::max(-1.0, static_cast<double>(cy->data[0])));
      double theta = std::acos(cv);
      int k = std::min(margin - 1, static_cast<int>(std::floor(
                                       theta * margin / 3.14159265358979323846)));
      S sign = (k % 2 == 0) ? S(1) : S(-1);
      margin_cos = add_const(scale(margin_cos, sign), static_cast<S>(-2 * k));
    }
    TensorPtr<S> logits = mul_scalar(cosv, nrm);
    TensorPtr<S> target_logit = mul(nrm, margin_cos);
    logits = set_at(logits, y, target_logit);
    // log-sum-exp with a constant shift
    S mx = logits->data[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, logits->data[j]);
    TensorPtr<S> lse = add_const(log_t(sum_all(exp_t(add_const(logits, static_cast<S>(-mx))))), mx);
    TensorPtr<S> li = sub(lse, select(logits, y));
    total = total ? add(total, li) : li;
  }
  return scale(total, static_cast<S>(1.0 / static_cast<double>(n)));
}

#define ADVCM_OPS_INST(S)                                                                \
  template TensorPtr<S> add<S>(const TensorPtr<S>&, const TensorPtr<S>&);                \
  template TensorPtr<S> sub<S>(const TensorPtr<S>&, const TensorPtr<S>&);                \
  template TensorPtr<S> mul<S>(const TensorPtr<S>&, const TensorPtr<S>&);                \
  template TensorPtr<S> div<S>(const TensorPtr<S>&, const TensorPtr<S>&);                \
  template TensorPtr<S> scale<S>(const TensorPtr<S>&, S);                                \
  template TensorPtr<S> add_const<S>(const TensorPtr<S>&, S);                            \
  template TensorPtr<S> relu<S>(const TensorPtr<S>&);                                    \
  template TensorPtr<S> sigmoid<S>(const TensorPtr<S>&);                                 \
  template TensorPtr<S> exp_t<S>(const TensorPtr<S>&);                                   \
  template TensorPtr<S> log_t<S>(const TensorPtr<S>&);                                   \
  template TensorPtr<S> sqrt_t<S>(const TensorPtr<S>&);                                  \
  template TensorPtr<S> mul_scalar<S>(const TensorPtr<S>&, const TensorPtr<S>&);         \
  template TensorPtr<S> reshape<S>(const TensorPtr<S>&, Shape);                          \
  template TensorPtr<S> sum_all<S>(const TensorPtr<S>&);                                 \
  template TensorPtr<S> mean_all<S>(const TensorPtr<S>&);                                \
  template TensorPtr<S> sum_axis0<S>(const TensorPtr<S>&);                               \
  template TensorPtr<S> row<S>(const TensorPtr<S>&, int64_t);                            \
  template TensorPtr<S> select<S>(const TensorPtr<S>&, int64_t);                         \
  template TensorPtr<S> set_at<S>(const TensorPtr<S>&, int64_t, const TensorPtr<S>&);    \
  template TensorPtr<S> conv2d<S>(const TensorPtr<S>&, const TensorPtr<S>&,              \
                                  const TensorPtr<S>&, Stride2, PadMode);                \
  template TensorPtr<S> conv2d<S>(const TensorPtr<S>&, const TensorPtr<S>&,              \
                                  const TensorPtr<S>&, Stride2, Window2);                \
  template TensorPtr<S> maxpool2d<S>(const TensorPtr<S>&, Window2, Stride2, PadMode);    \
  template TensorPtr<S> batchnorm2d<S>(const TensorPtr<S>&, const TensorPtr<S>&,         \
                                       const TensorPtr<S>&, BnStats<S>*, bool, double,   \
                                       double);                                          \
  template TensorPtr<S> global_avgpool<S>(const TensorPtr<S>&);                          \
  template TensorPtr<S> mfm<S>(const TensorPtr<S>&);                                     \
  template TensorPtr<S> mfm_dense<S>(const TensorPtr<S>&);                               \
  template TensorPtr<S> scale_channels<S>(const TensorPtr<S>&, const TensorPtr<S>&);     \
  template TensorPtr<S> linear<S>(const TensorPtr<S>&, const TensorPtr<S>&,              \
                                  const TensorPtr<S>&);                                  \
  template TensorPtr<S> dropout<S>(const TensorPtr<S>&, double, Rng&, bool);             \
  template TensorPtr<S> softmax_ce_loss<S>(const TensorPtr<S>&, const std::vector<int>&);\
  template TensorPtr<S> asoftmax_loss<S>(const TensorPtr<S>&, const TensorPtr<S>&,       \
                                         const std::vector<int>&, int, bool);

ADVCM_OPS_INST(float)
ADVCM_OPS_INST(double)
#undef ADVCM_OPS_INST

}  // namespace advcm
