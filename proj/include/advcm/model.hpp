#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "advcm/features.hpp"
#include "advcm/ops.hpp"

namespace advcm {

enum class LayerKind {
  Conv,
  Mfm,
  MfmDense,
  MaxPool,
  BatchNorm,
  Relu,
  SeBlock,
  Flatten,
  Dropout,
  Fc,
  GlobalAvgPool,
};

enum class LossHead { ASoftmax, SoftmaxCE };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::string name;  // table row label; empty for auxiliary layers
  int kh = 0, kw = 0;
  int sh = 1, sw = 1;
  PadMode pad = PadMode::SameFloor;
  int channels = 0;  // conv out channels / fc out features / se block width
  bool bias = true;
  int se_reduction = 8;
  int se_stride = 1;
  double rate = 0.0;  // dropout
};

/// Declarative layer list. The final layer must be an Fc: its weight matrix
/// is the classification head (columns are class directions; class 0 =
/// spoof, class 1 = bonafide).
struct ModelSpec {
  std::string name = "model";
  int input_h = 863, input_w = 600, input_c = 1;
  LossHead head = LossHead::ASoftmax;
  int margin = 4;
  bool psi_variant = false;
  std::vector<LayerSpec> layers;
};

/// Per-layer output shapes for a single (unbatched) input; throws on the
/// first non-composing layer, naming it.
std::vector<Shape> infer_shapes(const ModelSpec& spec);
int64_t param_count(const ModelSpec& spec);
void validate_spec(const ModelSpec& spec);

ModelSpec parse_model_config(const std::string& text);
ModelSpec load_model_config(const std::string& path);
std::string serialize_model_config(const ModelSpec& spec);

ModelSpec build_lcnn_small();
ModelSpec build_senet12();
ModelSpec build_lcnn_big();
ModelSpec build_lcnn_toy();
ModelSpec build_senet_toy();
/// Registry name ("lcnn-small", "senet12", ...) or a config file path.
ModelSpec build_named_model(const std::string& name_or_path);
std::vector<std::string> registered_model_names();

// ---------------------------------------------------------------- parameters

template <class S>
struct SeBlockParams {
  TensorPtr<S> conv1_k, bn1_g, bn1_b;
  BnStats<S> bn1_stats;
  TensorPtr<S> conv2_k, bn2_g, bn2_b;
  BnStats<S> bn2_stats;
  bool has_proj = false;
  TensorPtr<S> proj_k, proj_bn_g, proj_bn_b;
  BnStats<S> proj_bn_stats;
  TensorPtr<S> fc1_w, fc1_b, fc2_w, fc2_b;
};

template <class S>
struct LayerParams {
  TensorPtr<S> w, b;
  TensorPtr<S> gamma, beta;
  BnStats<S> stats;
  std::shared_ptr<SeBlockParams<S>> se;
};

template <class S>
struct ModelParams {
  std::vector<LayerParams<S>> layers;
};

template <class S>
ModelParams<S> init_params(const ModelSpec& spec, uint64_t seed);

/// Deep copy (training keeps the best-dev snapshot this way).
template <class S>
ModelParams<S> clone_params(const ModelParams<S>& params);

template <class S>
ModelParams<S> cast_params(const ModelParams<float>& params);

/// Flat, deterministic directory of every tensor in the model. `trainable`
/// distinguishes weights from batchnorm running statistics, which are
/// exposed through `raw`.
template <class S>
struct ParamEntry {
  std::string name;
  TensorPtr<S> tensor;            // null when this entry is running stats
  std::vector<S>* raw = nullptr;  // batchnorm running mean/var
  bool trainable = true;
};

template <class S>
std::vector<ParamEntry<S>> named_entries(const ModelSpec& spec, ModelParams<S>& params);

template <class S>
void set_requires_grad(const ModelSpec& spec, ModelParams<S>& params, bool value);

// ------------------------------------------------------------------ forward

struct ForwardOptions {
  bool train = false;
  Rng* dropout_rng = nullptr;  // required when train and the spec has dropout
};

/// Runs every layer except the final Fc; the result is the embedding the
/// classification head sees. Input is [H,W,C] or [N,H,W,C].
template <class S>
TensorPtr<S> forward_embedding(const ModelSpec& spec, ModelParams<S>& params,
                               const TensorPtr<S>& input, const ForwardOptions& opt);

template <class S>
TensorPtr<S> head_weight(const ModelSpec& spec, const ModelParams<S>& params);

/// Training loss of the model's own head: A-Softmax for LCNN variants,
/// softmax cross-entropy for SENet.
template <class S>
TensorPtr<S> model_loss(const ModelSpec& spec, ModelParams<S>& params, const TensorPtr<S>& input,
                        const std::vector<int>& labels, const ForwardOptions& opt);

/// Cosine similarity between the embedding and the bonafide column of the
/// head weight; higher means more bonafide.
template <class S>
double cosine_score(const ModelSpec& spec, ModelParams<S>& params, const TensorPtr<S>& input);

/// Predicted class for one instance: argmax over head logits (softmax head)
/// or over column cosines (a-softmax head); ties go to the lower index.
template <class S>
int predict_class(const ModelSpec& spec, ModelParams<S>& params, const TensorPtr<S>& input);

TensorPtr<float> feature_to_tensor(const SpectralFeature& f, bool requires_grad = false);
TensorPtr<float> log_power_to_tensor(const std::vector<float>& log_power, int bins, int frames,
                                     bool requires_grad = false);

// --------------------------------------------------------------- checkpoints

struct TrainMeta {
  int epoch = 0;
  double dev_accuracy = 0.0;
  uint64_t seed = 0;
};

struct Checkpoint {
  ModelSpec spec;
  ModelParams<float> params;
  TrainMeta meta;
};

void save_checkpoint(const std::string& path, Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

#define ADVCM_MODEL_EXTERN(S)                                                                  \
  extern template ModelParams<S> init_params<S>(const ModelSpec&, uint64_t);                  \
  extern template ModelParams<S> clone_params<S>(const ModelParams<S>&);                      \
  extern template std::vector<ParamEntry<S>> named_entries<S>(const ModelSpec&,               \
                                                              ModelParams<S>&);               \
  extern template void set_requires_grad<S>(const ModelSpec&, ModelParams<S>&, bool);         \
  extern template TensorPtr<S> forward_embedding<S>(const ModelSpec&, ModelParams<S>&,        \
                                                    const TensorPtr<S>&, const ForwardOptions&);\
  extern template TensorPtr<S> head_weight<S>(const ModelSpec&, const ModelParams<S>&);       \
  extern template TensorPtr<S> model_loss<S>(const ModelSpec&, ModelParams<S>&,               \
                                             const TensorPtr<S>&, const std::vector<int>&,    \
                                             const ForwardOptions&);                          \
  extern template double cosine_score<S>(const ModelSpec&, ModelParams<S>&,                   \
                                         const TensorPtr<S>&);                                \
  extern template int predict_class<S>(const ModelSpec&, ModelParams<S>&, const TensorPtr<S>&);

ADVCM_MODEL_EXTERN(float)
ADVCM_MODEL_EXTERN(double)
#undef ADVCM_MODEL_EXTERN
extern template ModelParams<double> cast_params<double>(const ModelParams<float>&);
extern template ModelParams<float> cast_params<float>(const ModelParams<float>&);

}  // namespace advcm
