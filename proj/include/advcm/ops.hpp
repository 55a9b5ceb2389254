#pragma once

#include <optional>
#include <utility>

#include "advcm/tensor.hpp"

namespace advcm {

/// Spatial tensors are channels-last: [H,W,C] for a single instance or
/// [N,H,W,C] for a batch; every spatial op accepts both ranks and keeps the
/// rank of its input. Conv kernels are [kh,kw,Cin,Cout].

enum class PadMode {
  Valid,      // no padding, output = floor((in - k)/s) + 1
  SameFloor,  // output = floor(in/s); zero padding split low/high as needed
};

struct Stride2 {
  int h = 1;
  int w = 1;
};

struct Window2 {
  int h = 1;
  int w = 1;
};

/// Geometry of one spatial axis of a conv/pool, resolved before running it.
struct AxisGeom {
  int64_t out = 0;
  int64_t pad_lo = 0;
};
AxisGeom resolve_axis(int64_t in, int k, int s, PadMode mode, const char* op, const char* axis);
AxisGeom resolve_axis_explicit(int64_t in, int k, int s, int pad, const char* op, const char* axis);

// ---- elementwise ----
template <class S> TensorPtr<S> add(const TensorPtr<S>& a, const TensorPtr<S>& b);
template <class S> TensorPtr<S> sub(const TensorPtr<S>& a, const TensorPtr<S>& b);
template <class S> TensorPtr<S> mul(const TensorPtr<S>& a, const TensorPtr<S>& b);
template <class S> TensorPtr<S> div(const TensorPtr<S>& a, const TensorPtr<S>& b);
template <class S> TensorPtr<S> scale(const TensorPtr<S>& a, S c);
template <class S> TensorPtr<S> add_const(const TensorPtr<S>& a, S c);
template <class S> TensorPtr<S> relu(const TensorPtr<S>& a);
template <class S> TensorPtr<S> sigmoid(const TensorPtr<S>& a);
template <class S> TensorPtr<S> exp_t(const TensorPtr<S>& a);
template <class S> TensorPtr<S> log_t(const TensorPtr<S>& a);
template <class S> TensorPtr<S> sqrt_t(const TensorPtr<S>& a);
/// a * s with s a 1-element tensor (broadcast scalar).
template <class S> TensorPtr<S> mul_scalar(const TensorPtr<S>& a, const TensorPtr<S>& s);

// ---- structure / reductions ----
template <class S> TensorPtr<S> reshape(const TensorPtr<S>& a, Shape shape);
template <class S> TensorPtr<S> sum_all(const TensorPtr<S>& a);
template <class S> TensorPtr<S> mean_all(const TensorPtr<S>& a);
template <class S> TensorPtr<S> sum_axis0(const TensorPtr<S>& a);           // [R,C] -> [C]
template <class S> TensorPtr<S> row(const TensorPtr<S>& a, int64_t r);      // [R,C] -> [C]
template <class S> TensorPtr<S> select(const TensorPtr<S>& a, int64_t i);   // flat index -> [1]
/// Copy of `a` with element i replaced by the scalar tensor s.
template <class S> TensorPtr<S> set_at(const TensorPtr<S>& a, int64_t i, const TensorPtr<S>& s);

// ---- network primitives ----
template <class S>
TensorPtr<S> conv2d(const TensorPtr<S>& input, const TensorPtr<S>& kernel,
                    const TensorPtr<S>& bias,  // may be null
                    Stride2 stride, PadMode pad);
/// Symmetric explicit padding (pad.h zeros above and below, pad.w left/right).
template <class S>
TensorPtr<S> conv2d(const TensorPtr<S>& input, const TensorPtr<S>& kernel,
                    const TensorPtr<S>& bias, Stride2 stride, Window2 padding);

template <class S>
TensorPtr<S> maxpool2d(const TensorPtr<S>& input, Window2 window, Stride2 stride,
                       PadMode pad = PadMode::Valid);

/// Running statistics live outside the graph; train mode reads batch
/// statistics and updates them, eval mode uses them frozen.
template <class S>
struct BnStats {
  std::vector<S> mean;
  std::vector<S> var;
};

template <class S>
TensorPtr<S> batchnorm2d(const TensorPtr<S>& input, const TensorPtr<S>& gamma,
                         const TensorPtr<S>& beta, BnStats<S>* stats, bool train,
                         double momentum = 0.1, double eps = 1e-5);

template <class S> TensorPtr<S> global_avgpool(const TensorPtr<S>& input);

/// Max-feature-map over paired halves of the last axis: out[...,k] =
/// max(in[...,k], in[...,k + C/2]); gradient goes to the winner, first half
/// on ties.
template <class S> TensorPtr<S> mfm(const TensorPtr<S>& input);
template <class S> TensorPtr<S> mfm_dense(const TensorPtr<S>& input);

/// Per-channel rescale: x[...,c] * gate[c] (or gate[n,c] for batched input).
template <class S> TensorPtr<S> scale_channels(const TensorPtr<S>& x, const TensorPtr<S>& gate);

template <class S>
TensorPtr<S> linear(const TensorPtr<S>& input, const TensorPtr<S>& weight,
                    const TensorPtr<S>& bias);  // bias may be null

/// Inverted dropout: scales kept activations by 1/(1-rate) at train time,
/// identity when train is false.
template <class S>
TensorPtr<S> dropout(const TensorPtr<S>& input, double rate, Rng& rng, bool train);

// ---- losses ----
template <class S>
TensorPtr<S> softmax_ce_loss(const TensorPtr<S>& logits, const std::vector<int>& labels);

/// Angular-margin softmax on raw cos(m*theta) (Chebyshev form); `psi_variant`
/// switches to the piecewise monotonic extension (-1)^k cos(m*theta) - 2k.
template <class S>
TensorPtr<S> asoftmax_loss(const TensorPtr<S>& embedding, const TensorPtr<S>& head_w,
                           const std::vector<int>& labels, int margin,
                           bool psi_variant = false);

#define ADVCM_OPS_EXTERN(S)                                                                     \
  extern template TensorPtr<S> add<S>(const TensorPtr<S>&, const TensorPtr<S>&);                \
  extern template TensorPtr<S> sub<S>(const TensorPtr<S>&, const TensorPtr<S>&);                \
  extern template TensorPtr<S> mul<S>(const TensorPtr<S>&, const TensorPtr<S>&);                \
  extern template TensorPtr<S> div<S>(const TensorPtr<S>&, const TensorPtr<S>&);                \
  extern template TensorPtr<S> scale<S>(const TensorPtr<S>&, S);                                \
  extern template TensorPtr<S> add_const<S>(const TensorPtr<S>&, S);                            \
  extern template TensorPtr<S> relu<S>(const TensorPtr<S>&);                                    \
  extern template TensorPtr<S> sigmoid<S>(const TensorPtr<S>&);                                 \
  extern template TensorPtr<S> exp_t<S>(const TensorPtr<S>&);                                   \
  extern template TensorPtr<S> log_t<S>(const TensorPtr<S>&);                                   \
  extern template TensorPtr<S> sqrt_t<S>(const TensorPtr<S>&);                                  \
  extern template TensorPtr<S> mul_scalar<S>(const TensorPtr<S>&, const TensorPtr<S>&);         \
  extern template TensorPtr<S> reshape<S>(const TensorPtr<S>&, Shape);                          \
  extern template TensorPtr<S> sum_all<S>(const TensorPtr<S>&);                                 \
  extern template TensorPtr<S> mean_all<S>(const TensorPtr<S>&);                                \
  extern template TensorPtr<S> sum_axis0<S>(const TensorPtr<S>&);                               \
  extern template TensorPtr<S> row<S>(const TensorPtr<S>&, int64_t);                            \
  extern template TensorPtr<S> select<S>(const TensorPtr<S>&, int64_t);                         \
  extern template TensorPtr<S> set_at<S>(const TensorPtr<S>&, int64_t, const TensorPtr<S>&);    \
  extern template TensorPtr<S> conv2d<S>(const TensorPtr<S>&, const TensorPtr<S>&,              \
                                         const TensorPtr<S>&, Stride2, PadMode);                \
  extern template TensorPtr<S> conv2d<S>(const TensorPtr<S>&, const TensorPtr<S>&,              \
                                         const TensorPtr<S>&, Stride2, Window2);                \
  extern template TensorPtr<S> maxpool2d<S>(const TensorPtr<S>&, Window2, Stride2, PadMode);    \
  extern template TensorPtr<S> batchnorm2d<S>(const TensorPtr<S>&, const TensorPtr<S>&,         \
                                              const TensorPtr<S>&, BnStats<S>*, bool, double,   \
                                              double);                                          \
  extern template TensorPtr<S> global_avgpool<S>(const TensorPtr<S>&);                          \
  extern template TensorPtr<S> mfm<S>(const TensorPtr<S>&);                                     \
  extern template TensorPtr<S> mfm_dense<S>(const TensorPtr<S>&);                               \
  extern template TensorPtr<S> scale_channels<S>(const TensorPtr<S>&, const TensorPtr<S>&);     \
  extern template TensorPtr<S> linear<S>(const TensorPtr<S>&, const TensorPtr<S>&,              \
                                         const TensorPtr<S>&);                                  \
  extern template TensorPtr<S> dropout<S>(const TensorPtr<S>&, double, Rng&, bool);             \
  extern template TensorPtr<S> softmax_ce_loss<S>(const TensorPtr<S>&, const std::vector<int>&);\
  extern template TensorPtr<S> asoftmax_loss<S>(const TensorPtr<S>&, const TensorPtr<S>&,       \
                                                const std::vector<int>&, int, bool);

ADVCM_OPS_EXTERN(float)
ADVCM_OPS_EXTERN(double)
#undef ADVCM_OPS_EXTERN

}  // namespace advcm
