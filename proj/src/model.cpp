#include "advcm/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace advcm {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Mfm: return "mfm";
    case LayerKind::MfmDense: return "mfm_dense";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Relu: return "relu";
    case LayerKind::SeBlock: return "se";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Fc: return "fc";
    case LayerKind::GlobalAvgPool: return "gap";
  }
  return "?";
}

std::string layer_label(const LayerSpec& l, size_t idx) {
  if (!l.name.empty()) return l.name;
  return std::string(kind_name(l.kind)) + "#" + std::to_string(idx);
}

[[noreturn]] void layer_error(const LayerSpec& l, size_t idx, const std::string& msg) {
  throw std::invalid_argument("layer " + layer_label(l, idx) + ": " + msg);
}

}  // namespace

std::vector<Shape> infer_shapes(const ModelSpec& spec) {
  if (spec.layers.empty()) throw std::invalid_argument("model has no layers");
  if (spec.input_h <= 0 || spec.input_w <= 0 || spec.input_c <= 0)
    throw std::invalid_argument("model input shape must be positive");
  Shape cur = {spec.input_h, spec.input_w, spec.input_c};
  std::vector<Shape> out;
  out.reserve(spec.layers.size());
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    bool spatial = cur.size() == 3;
    switch (l.kind) {
      case LayerKind::Conv: {
        if (!spatial) layer_error(l, i, "conv on non-spatial input " + shape_str(cur));
        if (l.channels <= 0) layer_error(l, i, "conv needs a positive channel count");
        AxisGeom gh = resolve_axis(cur[0], l.kh, l.sh, l.pad, "conv2d", "H");
        AxisGeom gw = resolve_axis(cur[1], l.kw, l.sw, l.pad, "conv2d", "W");
        cur = {gh.out, gw.out, l.channels};
        break;
      }
      case LayerKind::MaxPool: {
        if (!spatial) layer_error(l, i, "maxpool on non-spatial input " + shape_str(cur));
        AxisGeom gh = resolve_axis(cur[0], l.kh, l.sh, l.pad, "maxpool2d", "H");
        AxisGeom gw = resolve_axis(cur[1], l.kw, l.sw, l.pad, "maxpool2d", "W");
        cur = {gh.out, gw.out, cur[2]};
        break;
      }
      case LayerKind::Mfm: {
        if (!spatial) layer_error(l, i, "mfm on non-spatial input " + shape_str(cur));
        if (cur[2] % 2 != 0)
          layer_error(l, i, "mfm needs an even channel count, got " + std::to_string(cur[2]));
        cur = {cur[0], cur[1], cur[2] / 2};
        break;
      }
      case LayerKind::MfmDense: {
        if (spatial) layer_error(l, i, "mfm_dense on spatial input " + shape_str(cur));
        if (cur[0] % 2 != 0)
          layer_error(l, i, "mfm_dense needs an even feature count, got " + std::to_string(cur[0]));
        cur = {cur[0] / 2};
        break;
      }
      case LayerKind::BatchNorm:
      case LayerKind::Relu:
      case LayerKind::Dropout:
        break;  // shape preserved
      case LayerKind::SeBlock: {
        if (!spatial) layer_error(l, i, "se block on non-spatial input " + shape_str(cur));
        if (l.channels <= 0) layer_error(l, i, "se block needs a positive channel count");
        if (l.se_reduction <= 0 || l.channels % l.se_reduction != 0)
          layer_error(l, i, "se channels " + std::to_string(l.channels) +
                                " not divisible by reduction " + std::to_string(l.se_reduction));
        AxisGeom gh = resolve_axis(cur[0], 3, l.se_stride, PadMode::SameFloor, "se", "H");
        AxisGeom gw = resolve_axis(cur[1], 3, l.se_stride, PadMode::SameFloor, "se", "W");
        cur = {gh.out, gw.out, l.channels};
        break;
      }
      case LayerKind::Flatten: {
        cur = {numel(cur)};
        break;
      }
      case LayerKind::Fc: {
        if (spatial)
          layer_error(l, i, "fc on spatial input " + shape_str(cur) + "; insert a flatten layer");
        if (l.channels <= 0) layer_error(l, i, "fc needs a positive output size");
        cur = {l.channels};
        break;
      }
      case LayerKind::GlobalAvgPool: {
        if (!spatial) layer_error(l, i, "gap on non-spatial input " + shape_str(cur));
        cur = {cur[2]};
        break;
      }
    }
    out.push_back(cur);
  }
  return out;
}

void validate_spec(const ModelSpec& spec) {
  infer_shapes(spec);
  if (spec.layers.back().kind != LayerKind::Fc)
    throw std::invalid_argument("model must end with an fc head layer");
  if (spec.head == LossHead::ASoftmax) {
    if (spec.layers.back().bias)
      throw std::invalid_argument("a-softmax head fc must not carry a bias");
    if (spec.margin < 1) throw std::invalid_argument("a-softmax margin must be >= 1");
  }
}

int64_t param_count(const ModelSpec& spec) {
  std::vector<Shape> shapes = infer_shapes(spec);
  Shape cur = {spec.input_h, spec.input_w, spec.input_c};
  int64_t total = 0;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        total += static_cast<int64_t>(l.kh) * l.kw * cur[2] * l.channels;
        if (l.bias) total += l.channels;
        break;
      case LayerKind::BatchNorm:
        total += 2 * cur.back();
        break;
      case LayerKind::Fc:
        total += cur[0] * l.channels;
        if (l.bias) total += l.channels;
        break;
      case LayerKind::SeBlock: {
        int64_t ci = cur[2], co = l.channels;
        int64_t r = l.se_reduction;
        total += 9 * ci * co + 2 * co;   // conv1 + bn1
        total += 9 * co * co + 2 * co;   // conv2 + bn2
        if (l.se_stride != 1 || ci != co) total += ci * co + 2 * co;  // projection + bn
        total += co * (co / r) + (co / r);  // squeeze fc
        total += (co / r) * co + co;        // excite fc
        break;
      }
      default:
        break;
    }
    cur = shapes[i];
  }
  return total;
}

// ------------------------------------------------------------ config format

namespace {

std::pair<std::string, std::string> split_kv(const std::string& tok) {
  auto p = tok.find('=');
  if (p == std::string::npos) return {tok, ""};
  return {tok.substr(0, p), tok.substr(p + 1)};
}

bool parse_filter_stride(const std::string& tok, LayerSpec& l) {
  // "5x5/1x1"
  int kh, kw, sh, sw;
  if (std::sscanf(tok.c_str(), "%dx%d/%dx%d", &kh, &kw, &sh, &sw) != 4) return false;
  l.kh = kh;
  l.kw = kw;
  l.sh = sh;
  l.sw = sw;
  return true;
}

[[noreturn]] void cfg_error(int line_no, const std::string& msg) {
  throw std::invalid_argument("model config line " + std::to_string(line_no) + ": " + msg);
}

}  // namespace

ModelSpec parse_model_config(const std::string& text) {
  ModelSpec spec;
  spec.layers.clear();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_model = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    if (word == "model") {
      if (!(ls >> spec.name)) cfg_error(line_no, "model directive needs a name");
      saw_model = true;
    } else if (word == "input") {
      if (!(ls >> spec.input_h >> spec.input_w >> spec.input_c))
        cfg_error(line_no, "input directive needs H W C");
    } else if (word == "head") {
      std::string h;
      if (!(ls >> h)) cfg_error(line_no, "head directive needs a type");
      if (h == "asoftmax")
        spec.head = LossHead::ASoftmax;
      else if (h == "softmax_ce")
        spec.head = LossHead::SoftmaxCE;
      else
        cfg_error(line_no, "unknown head '" + h + "'");
      std::string tok;
      while (ls >> tok) {
        auto [k, v] = split_kv(tok);
        if (k == "m")
          spec.margin = std::stoi(v);
        else if (k == "psi")
          spec.psi_variant = v == "1";
        else
          cfg_error(line_no, "unknown head option '" + k + "'");
      }
    } else if (word == "layer") {
      LayerSpec l;
      std::string name, kind;
      if (!(ls >> name >> kind)) cfg_error(line_no, "layer needs a name and a kind");
      l.name = name == "-" ? "" : name;
      std::vector<std::string> toks;
      std::string tok;
      while (ls >> tok) toks.push_back(tok);
      auto want_filter = [&](size_t at) {
        if (toks.size() <= at || !parse_filter_stride(toks[at], l))
          cfg_error(line_no, kind + " needs a KxK/SxS filter/stride token");
      };
      auto parse_opts = [&](size_t from) {
        for (size_t t = from; t < toks.size(); ++t) {
          auto [k, v] = split_kv(toks[t]);
          if (k == "ch")
            l.channels = std::stoi(v);
          else if (k == "pad")
            l.pad = v == "valid" ? PadMode::Valid : PadMode::SameFloor;
          else if (k == "bias")
            l.bias = v != "0";
          else if (k == "r")
            l.se_reduction = std::stoi(v);
          else if (k == "s")
            l.se_stride = std::stoi(v);
          else
            cfg_error(line_no, "unknown option '" + k + "' for " + kind);
        }
      };
      if (kind == "conv") {
        l.kind = LayerKind::Conv;
        want_filter(0);
        parse_opts(1);
        if (l.channels <= 0) cfg_error(line_no, "conv needs ch=<n>");
      } else if (kind == "maxpool") {
        l.kind = LayerKind::MaxPool;
        l.pad = PadMode::Valid;
        want_filter(0);
        parse_opts(1);
      } else if (kind == "mfm") {
        l.kind = LayerKind::Mfm;
      } else if (kind == "mfm_dense") {
        l.kind = LayerKind::MfmDense;
      } else if (kind == "batchnorm") {
        l.kind = LayerKind::BatchNorm;
      } else if (kind == "relu") {
        l.kind = LayerKind::Relu;
      } else if (kind == "se") {
        l.kind = LayerKind::SeBlock;
        parse_opts(0);
        if (l.channels <= 0) cfg_error(line_no, "se needs ch=<n>");
      } else if (kind == "flatten") {
        l.kind = LayerKind::Flatten;
      } else if (kind == "dropout") {
        l.kind = LayerKind::Dropout;
        if (toks.empty()) cfg_error(line_no, "dropout needs a rate");
        l.rate = std::stod(toks[0]);
      } else if (kind == "fc") {
        l.kind = LayerKind::Fc;
        if (toks.empty()) cfg_error(line_no, "fc needs an output size");
        l.channels = std::stoi(toks[0]);
        parse_opts(1);
      } else if (kind == "gap") {
        l.kind = LayerKind::GlobalAvgPool;
      } else {
        cfg_error(line_no, "unknown layer kind '" + kind + "'");
      }
      spec.layers.push_back(l);
    } else {
      cfg_error(line_no, "unknown directive '" + word + "'");
    }
  }
  if (!saw_model || spec.layers.empty())
    throw std::invalid_argument("model config is missing a model name or layers");
  validate_spec(spec);
  return spec;
}

ModelSpec load_model_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open model config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_model_config(ss.str());
}

std::string serialize_model_config(const ModelSpec& spec) {
  std::ostringstream os;
  os << "model " << spec.name << "\n";
  os << "input " << spec.input_h << " " << spec.input_w << " " << spec.input_c << "\n";
  os << "head " << (spec.head == LossHead::ASoftmax ? "asoftmax" : "softmax_ce");
  if (spec.head == LossHead::ASoftmax)
    os << " m=" << spec.margin << " psi=" << (spec.psi_variant ? 1 : 0);
  os << "\n";
  for (const LayerSpec& l : spec.layers) {
    os << "layer " << (l.name.empty() ? "-" : l.name) << " " << kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::Conv:
        os << " " << l.kh << "x" << l.kw << "/" << l.sh << "x" << l.sw << " ch=" << l.channels
           << " pad=" << (l.pad == PadMode::Valid ? "valid" : "same") << " bias=" << (l.bias ? 1 : 0);
        break;
      case LayerKind::MaxPool:
        os << " " << l.kh << "x" << l.kw << "/" << l.sh << "x" << l.sw
           << " pad=" << (l.pad == PadMode::Valid ? "valid" : "same");
        break;
      case LayerKind::SeBlock:
        os << " ch=" << l.channels << " r=" << l.se_reduction << " s=" << l.se_stride;
        break;
      case LayerKind::Dropout:
        os << " " << l.rate;
        break;
      case LayerKind::Fc:
        os << " " << l.channels << " bias=" << (l.bias ? 1 : 0);
        break;
      default:
        break;
    }
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------- builders

namespace {

LayerSpec conv_layer(std::string name, int k, int s, int ch, bool bias = true) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.kh = l.kw = k;
  l.sh = l.sw = s;
  l.channels = ch;
  l.bias = bias;
  l.pad = PadMode::SameFloor;
  return l;
}

LayerSpec pool_layer(std::string name, int k, int s, PadMode pad = PadMode::Valid) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool;
  l.name = std::move(name);
  l.kh = l.kw = k;
  l.sh = l.sw = s;
  l.pad = pad;
  return l;
}

LayerSpec plain_layer(LayerKind kind, std::string name = "") {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  return l;
}

LayerSpec fc_layer(std::string name, int out, bool bias) {
  LayerSpec l;
  l.kind = LayerKind::Fc;
  l.name = std::move(name);
  l.channels = out;
  l.bias = bias;
  return l;
}

LayerSpec se_layer(std::string name, int ch, int r, int s) {
  LayerSpec l;
  l.kind = LayerKind::SeBlock;
  l.name = std::move(name);
  l.channels = ch;
  l.se_reduction = r;
  l.se_stride = s;
  return l;
}

LayerSpec dropout_layer(double rate) {
  LayerSpec l;
  l.kind = LayerKind::Dropout;
  l.rate = rate;
  return l;
}

}  // namespace

ModelSpec build_lcnn_small() {
  ModelSpec m;
  m.name = "lcnn-small";
  m.head = LossHead::ASoftmax;
  m.margin = 4;
  m.layers = {
      conv_layer("Conv_1", 5, 1, 16),
      plain_layer(LayerKind::Mfm, "MFM_2"),
      pool_layer("MaxPool_3", 2, 2),
      conv_layer("Conv_4", 1, 1, 16),
      plain_layer(LayerKind::Mfm, "MFM_5"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_6"),
      conv_layer("Conv_7", 3, 1, 24),
      plain_layer(LayerKind::Mfm, "MFM_8"),
      pool_layer("MaxPool_9", 2, 2),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_10"),
      conv_layer("Conv_11", 1, 1, 24),
      plain_layer(LayerKind::Mfm, "MFM_12"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_13"),
      conv_layer("Conv_14", 3, 1, 24),
      plain_layer(LayerKind::Mfm, "MFM_15"),
      pool_layer("MaxPool_16", 2, 2),
      conv_layer("Conv_17", 1, 1, 24),
      plain_layer(LayerKind::Mfm, "MFM_18"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_19"),
      conv_layer("Conv_20", 3, 1, 8),
      plain_layer(LayerKind::Mfm, "MFM_21"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_22"),
      conv_layer("Conv_23", 1, 1, 8),
      plain_layer(LayerKind::Mfm, "MFM_24"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_25"),
      conv_layer("Conv_26", 3, 1, 8),
      plain_layer(LayerKind::Mfm, "MFM_27"),
      pool_layer("MaxPool_28", 2, 2),
      plain_layer(LayerKind::Flatten),
      dropout_layer(0.75),
      fc_layer("FC_29", 64, true),
      plain_layer(LayerKind::MfmDense, "MFM_30"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_31"),
      fc_layer("FC_32", 2, false),
  };
  return m;
}

ModelSpec build_senet12() {
  ModelSpec m;
  m.name = "senet12";
  m.head = LossHead::SoftmaxCE;
  m.layers = {
      conv_layer("Conv_1", 7, 2, 16, false),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_2"),
      plain_layer(LayerKind::Relu, "ReLU_3"),
      pool_layer("MaxPool_4", 3, 2, PadMode::SameFloor),
      se_layer("SE_5", 16, 8, 1),
      se_layer("SE_6a", 32, 8, 2),
      se_layer("SE_6b", 32, 8, 1),
      se_layer("SE_7a", 64, 8, 2),
      se_layer("SE_7b", 64, 8, 1),
      se_layer("SE_7c", 64, 8, 1),
      se_layer("SE_8", 128, 8, 2),
      plain_layer(LayerKind::GlobalAvgPool, "GlobalAvgPool_9"),
      fc_layer("FC_10", 2, true),
  };
  return m;
}

ModelSpec build_lcnn_big() {
  // Scaled-up LCNN in the spirit of the small one: wider channels and a
  // larger embedding, landing near ten million parameters.
  ModelSpec m;
  m.name = "lcnn-big";
  m.head = LossHead::ASoftmax;
  m.margin = 4;
  m.layers = {
      conv_layer("Conv_1", 5, 1, 64),
      plain_layer(LayerKind::Mfm, "MFM_2"),
      pool_layer("MaxPool_3", 2, 2),
      conv_layer("Conv_4", 1, 1, 64),
      plain_layer(LayerKind::Mfm, "MFM_5"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_6"),
      conv_layer("Conv_7", 3, 1, 96),
      plain_layer(LayerKind::Mfm, "MFM_8"),
      pool_layer("MaxPool_9", 2, 2),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_10"),
      conv_layer("Conv_11", 1, 1, 96),
      plain_layer(LayerKind::Mfm, "MFM_12"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_13"),
      conv_layer("Conv_14", 3, 1, 128),
      plain_layer(LayerKind::Mfm, "MFM_15"),
      pool_layer("MaxPool_16", 2, 2),
      conv_layer("Conv_17", 1, 1, 128),
      plain_layer(LayerKind::Mfm, "MFM_18"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_19"),
      conv_layer("Conv_20", 3, 1, 64),
      plain_layer(LayerKind::Mfm, "MFM_21"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_22"),
      conv_layer("Conv_23", 1, 1, 64),
      plain_layer(LayerKind::Mfm, "MFM_24"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_25"),
      conv_layer("Conv_26", 3, 1, 32),
      plain_layer(LayerKind::Mfm, "MFM_27"),
      pool_layer("MaxPool_28", 2, 2),
      plain_layer(LayerKind::Flatten),
      dropout_layer(0.75),
      fc_layer("FC_29", 320, true),
      plain_layer(LayerKind::MfmDense, "MFM_30"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_31"),
      fc_layer("FC_32", 2, false),
  };
  return m;
}

ModelSpec build_lcnn_toy() {
  // Entry stride keeps the toy pipeline cheap on the full 863x600 feature.
  // The psi head is the trainable margin form at this scale; the raw
  // cos(m theta) objective stalls against the plain-cosine decision rule.
  ModelSpec m;
  m.name = "lcnn-toy";
  m.head = LossHead::ASoftmax;
  m.margin = 4;
  m.psi_variant = true;
  m.layers = {
      conv_layer("Conv_1", 5, 4, 8),
      plain_layer(LayerKind::Mfm, "MFM_2"),
      pool_layer("MaxPool_3", 2, 2),
      conv_layer("Conv_4", 3, 2, 16),
      plain_layer(LayerKind::Mfm, "MFM_5"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_6"),
      pool_layer("MaxPool_7", 2, 2),
      conv_layer("Conv_8", 3, 1, 16),
      plain_layer(LayerKind::Mfm, "MFM_9"),
      pool_layer("MaxPool_10", 2, 2),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_11"),
      plain_layer(LayerKind::Flatten),
      dropout_layer(0.75),
      fc_layer("FC_12", 64, true),
      plain_layer(LayerKind::MfmDense, "MFM_13"),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_14"),
      fc_layer("FC_15", 2, false),
  };
  return m;
}

ModelSpec build_senet_toy() {
  ModelSpec m;
  m.name = "senet-toy";
  m.head = LossHead::SoftmaxCE;
  m.layers = {
      conv_layer("Conv_1", 7, 4, 4, false),
      plain_layer(LayerKind::BatchNorm, "BatchNorm_2"),
      plain_layer(LayerKind::Relu, "ReLU_3"),
      pool_layer("MaxPool_4", 3, 3, PadMode::SameFloor),
      se_layer("SE_5", 8, 4, 2),
      se_layer("SE_6", 16, 4, 2),
      se_layer("SE_7", 32, 8, 2),
      plain_layer(LayerKind::GlobalAvgPool, "GlobalAvgPool_8"),
      fc_layer("FC_9", 2, true),
  };
  return m;
}

ModelSpec build_named_model(const std::string& name_or_path) {
  if (name_or_path == "lcnn-small") return build_lcnn_small();
  if (name_or_path == "senet12") return build_senet12();
  if (name_or_path == "lcnn-big") return build_lcnn_big();
  if (name_or_path == "lcnn-toy") return build_lcnn_toy();
  if (name_or_path == "senet-toy") return build_senet_toy();
  return load_model_config(name_or_path);
}

std::vector<std::string> registered_model_names() {
  return {"lcnn-small", "senet12", "lcnn-big", "lcnn-toy", "senet-toy"};
}

// --------------------------------------------------------------- parameters

namespace {

template <class S>
TensorPtr<S> init_weight(Shape shape, double std_dev, Rng& rng) {
  std::vector<S> d(static_cast<size_t>(numel(shape)));
  for (auto& v : d) v = static_cast<S>(rng.normal() * std_dev);
  return make_tensor<S>(std::move(shape), std::move(d));
}

template <class S>
void init_bn(LayerParams<S>& p, int64_t c, const char*) {
  p.gamma = full<S>({c}, S(1));
  p.beta = zeros<S>({c});
  p.stats.mean.assign(static_cast<size_t>(c), S(0));
  p.stats.var.assign(static_cast<size_t>(c), S(1));
}

template <class S>
void init_se_bn(BnStats<S>& st, TensorPtr<S>& g, TensorPtr<S>& b, int64_t c) {
  g = full<S>({c}, S(1));
  b = zeros<S>({c});
  st.mean.assign(static_cast<size_t>(c), S(0));
  st.var.assign(static_cast<size_t>(c), S(1));
}

}  // namespace

template <class S>
ModelParams<S> init_params(const ModelSpec& spec, uint64_t seed) {
  validate_spec(spec);
  std::vector<Shape> shapes = infer_shapes(spec);
  Rng rng(seed);
  ModelParams<S> params;
  params.layers.resize(spec.layers.size());
  Shape cur = {spec.input_h, spec.input_w, spec.input_c};
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams<S>& p = params.layers[i];
    switch (l.kind) {
      case LayerKind::Conv: {
        int64_t fan_in = static_cast<int64_t>(l.kh) * l.kw * cur[2];
        p.w = init_weight<S>({l.kh, l.kw, cur[2], l.channels}, std::sqrt(2.0 / fan_in), rng);
        if (l.bias) p.b = zeros<S>({l.channels});
        break;
      }
      case LayerKind::BatchNorm:
        init_bn(p, cur.back(), "bn");
        break;
      case LayerKind::Fc: {
        int64_t d = cur[0];
        p.w = init_weight<S>({d, l.channels}, std::sqrt(2.0 / static_cast<double>(d)), rng);
        if (l.bias) p.b = zeros<S>({l.channels});
        break;
      }
      case LayerKind::SeBlock: {
        auto se = std::make_shared<SeBlockParams<S>>();
        int64_t ci = cur[2], co = l.channels, r = l.se_reduction;
        se->conv1_k = init_weight<S>({3, 3, ci, co}, std::sqrt(2.0 / (9.0 * ci)), rng);
        init_se_bn(se->bn1_stats, se->bn1_g, se->bn1_b, co);
        se->conv2_k = init_weight<S>({3, 3, co, co}, std::sqrt(2.0 / (9.0 * co)), rng);
        init_se_bn(se->bn2_stats, se->bn2_g, se->bn2_b, co);
        se->has_proj = l.se_stride != 1 || ci != co;
        if (se->has_proj) {
          se->proj_k = init_weight<S>({1, 1, ci, co}, std::sqrt(2.0 / static_cast<double>(ci)), rng);
          init_se_bn(se->proj_bn_stats, se->proj_bn_g, se->proj_bn_b, co);
        }
        se->fc1_w = init_weight<S>({co, co / r}, std::sqrt(2.0 / static_cast<double>(co)), rng);
        se->fc1_b = zeros<S>({co / r});
        se->fc2_w = init_weight<S>({co / r, co}, std::sqrt(2.0 / static_cast<double>(co / r)), rng);
        se->fc2_b = zeros<S>({co});
        p.se = std::move(se);
        break;
      }
      default:
        break;
    }
    cur = shapes[i];
  }
  return params;
}

namespace {

template <class S>
TensorPtr<S> copy_tensor(const TensorPtr<S>& t) {
  if (!t) return nullptr;
  auto c = make_tensor<S>(t->shape, t->data);
  c->requires_grad = t->requires_grad;
  return c;
}

template <class S, class T>
TensorPtr<S> convert_tensor(const TensorPtr<T>& t) {
  if (!t) return nullptr;
  std::vector<S> d(t->data.begin(), t->data.end());
  return make_tensor<S>(t->shape, std::move(d));
}

}  // namespace

template <class S>
ModelParams<S> clone_params(const ModelParams<S>& params) {
  ModelParams<S> out;
  out.layers.resize(params.layers.size());
  for (size_t i = 0; i < params.layers.size(); ++i) {
    const auto& p = params.layers[i];
    auto& q = out.layers[i];
    q.w = copy_tensor(p.w);
    q.b = copy_tensor(p.b);
    q.gamma = copy_tensor(p.gamma);
    q.beta = copy_tensor(p.beta);
    q.stats = p.stats;
    if (p.se) {
      auto se = std::make_shared<SeBlockParams<S>>();
      se->conv1_k = copy_tensor(p.se->conv1_k);
      se->bn1_g = copy_tensor(p.se->bn1_g);
      se->bn1_b = copy_tensor(p.se->bn1_b);
      se->bn1_stats = p.se->bn1_stats;
      se->conv2_k = copy_tensor(p.se->conv2_k);
      se->bn2_g = copy_tensor(p.se->bn2_g);
      se->bn2_b = copy_tensor(p.se->bn2_b);
      se->bn2_stats = p.se->bn2_stats;
      se->has_proj = p.se->has_proj;
      se->proj_k = copy_tensor(p.se->proj_k);
      se->proj_bn_g = copy_tensor(p.se->proj_bn_g);
      se->proj_bn_b = copy_tensor(p.se->proj_bn_b);
      se->proj_bn_stats = p.se->proj_bn_stats;
      se->fc1_w = copy_tensor(p.se->fc1_w);
      se->fc1_b = copy_tensor(p.se->fc1_b);
      se->fc2_w = copy_tensor(p.se->fc2_w);
      se->fc2_b = copy_tensor(p.se->fc2_b);
      q.se = std::move(se);
    }
  }
  return out;
}

template <class S>
ModelParams<S> cast_params(const ModelParams<float>& params) {
  ModelParams<S> out;
  out.layers.resize(params.layers.size());
  for (size_t i = 0; i < params.layers.size(); ++i) {
    const auto& p = params.layers[i];
    auto& q = out.layers[i];
    q.w = convert_tensor<S>(p.w);
    q.b = convert_tensor<S>(p.b);
    q.gamma = convert_tensor<S>(p.gamma);
    q.beta = convert_tensor<S>(p.beta);
    q.stats.mean.assign(p.stats.mean.begin(), p.stats.mean.end());
    q.stats.var.assign(p.stats.var.begin(), p.stats.var.end());
    if (p.se) {
      auto se = std::make_shared<SeBlockParams<S>>();
      se->conv1_k = convert_tensor<S>(p.se->conv1_k);
      se->bn1_g = convert_tensor<S>(p.se->bn1_g);
      se->bn1_b = convert_tensor<S>(p.se->bn1_b);
      se->bn1_stats.mean.assign(p.se->bn1_stats.mean.begin(), p.se->bn1_stats.mean.end());
      se->bn1_stats.var.assign(p.se->bn1_stats.var.begin(), p.se->bn1_stats.var.end());
      se->conv2_k = convert_tensor<S>(p.se->conv2_k);
      se->bn2_g = convert_tensor<S>(p.se->bn2_g);
      se->bn2_b = convert_tensor<S>(p.se->bn2_b);
      se->bn2_stats.mean.assign(p.se->bn2_stats.mean.begin(), p.se->bn2_stats.mean.end());
      se->bn2_stats.var.assign(p.se->bn2_stats.var.begin(), p.se->bn2_stats.var.end());
      se->has_proj = p.se->has_proj;
      se->proj_k = convert_tensor<S>(p.se->proj_k);
      se->proj_bn_g = convert_tensor<S>(p.se->proj_bn_g);
      se->proj_bn_b = convert_tensor<S>(p.se->proj_bn_b);
      se->proj_bn_stats.mean.assign(p.se->proj_bn_stats.mean.begin(), p.se->proj_bn_stats.mean.end());
      se->proj_bn_stats.var.assign(p.se->proj_bn_stats.var.begin(), p.se->proj_bn_stats.var.end());
      se->fc1_w = convert_tensor<S>(p.se->fc1_w);
      se->fc1_b = convert_tensor<S>(p.se->fc1_b);
      se->fc2_w = convert_tensor<S>(p.se->fc2_w);
      se->fc2_b = convert_tensor<S>(p.se->fc2_b);
      q.se = std::move(se);
    }
  }
  return out;
}

template <class S>
std::vector<ParamEntry<S>> named_entries(const ModelSpec& spec, ModelParams<S>& params) {
  if (params.layers.size() != spec.layers.size())
    throw std::invalid_argument("named_entries: params do not match spec layer count");
  std::vector<ParamEntry<S>> out;
  auto tensor_entry = [&](const std::string& name, const TensorPtr<S>& t, bool trainable = true) {
    if (t) out.push_back({name, t, nullptr, trainable});
  };
  auto stats_entry = [&](const std::string& name, BnStats<S>& st) {
    out.push_back({name + ".running_mean", nullptr, &st.mean, false});
    out.push_back({name + ".running_var", nullptr, &st.var, false});
  };
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams<S>& p = params.layers[i];
    std::string base = "layer" + std::to_string(i) + "." + layer_label(l, i);
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::Fc:
        tensor_entry(base + ".w", p.w);
        tensor_entry(base + ".b", p.b);
        break;
      case LayerKind::BatchNorm:
        tensor_entry(base + ".gamma", p.gamma);
        tensor_entry(base + ".beta", p.beta);
        stats_entry(base, p.stats);
        break;
      case LayerKind::SeBlock: {
        auto& se = *p.se;
        tensor_entry(base + ".conv1.k", se.conv1_k);
        tensor_entry(base + ".bn1.gamma", se.bn1_g);
        tensor_entry(base + ".bn1.beta", se.bn1_b);
        stats_entry(base + ".bn1", se.bn1_stats);
        tensor_entry(base + ".conv2.k", se.conv2_k);
        tensor_entry(base + ".bn2.gamma", se.bn2_g);
        tensor_entry(base + ".bn2.beta", se.bn2_b);
        stats_entry(base + ".bn2", se.bn2_stats);
        if (se.has_proj) {
          tensor_entry(base + ".proj.k", se.proj_k);
          tensor_entry(base + ".projbn.gamma", se.proj_bn_g);
          tensor_entry(base + ".projbn.beta", se.proj_bn_b);
          stats_entry(base + ".projbn", se.proj_bn_stats);
        }
        tensor_entry(base + ".fc1.w", se.fc1_w);
        tensor_entry(base + ".fc1.b", se.fc1_b);
        tensor_entry(base + ".fc2.w", se.fc2_w);
        tensor_entry(base + ".fc2.b", se.fc2_b);
        break;
      }
      default:
        break;
    }
  }
  return out;
}

template <class S>
void set_requires_grad(const ModelSpec& spec, ModelParams<S>& params, bool value) {
  for (auto& e : named_entries(spec, params))
    if (e.tensor && e.trainable) e.tensor->requires_grad = value;
}

// ------------------------------------------------------------------ forward

namespace {

template <class S>
TensorPtr<S> apply_bn(const TensorPtr<S>& x, const TensorPtr<S>& g, const TensorPtr<S>& b,
                      BnStats<S>* st, bool train) {
  if (x->shape.size() == 1) {
    auto y = batchnorm2d(reshape(x, {1, x->shape[0]}), g, b, st, train);
    return reshape(y, {x->shape[0]});
  }
  return batchnorm2d(x, g, b, st, train);
}

template <class S>
TensorPtr<S> se_forward(const LayerSpec& l, SeBlockParams<S>& se, const TensorPtr<S>& x,
                        bool train) {
  Stride2 s1{l.se_stride, l.se_stride};
  TensorPtr<S> br = conv2d(x, se.conv1_k, TensorPtr<S>{}, s1, PadMode::SameFloor);
  br = apply_bn(br, se.bn1_g, se.bn1_b, &se.bn1_stats, train);
  br = relu(br);
  br = conv2d(br, se.conv2_k, TensorPtr<S>{}, Stride2{1, 1}, PadMode::SameFloor);
  br = apply_bn(br, se.bn2_g, se.bn2_b, &se.bn2_stats, train);
  TensorPtr<S> gate = global_avgpool(br);
  gate = relu(linear(gate, se.fc1_w, se.fc1_b));
  gate = sigmoid(linear(gate, se.fc2_w, se.fc2_b));
  br = scale_channels(br, gate);
  TensorPtr<S> shortcut = x;
  if (se.has_proj) {
    shortcut = conv2d(x, se.proj_k, TensorPtr<S>{}, s1, PadMode::SameFloor);
    shortcut = apply_bn(shortcut, se.proj_bn_g, se.proj_bn_b, &se.proj_bn_stats, train);
  }
  return relu(add(br, shortcut));
}

}  // namespace

template <class S>
TensorPtr<S> forward_embedding(const ModelSpec& spec, ModelParams<S>& params,
                               const TensorPtr<S>& input, const ForwardOptions& opt) {
  if (params.layers.size() != spec.layers.size())
    throw std::invalid_argument("forward: params do not match spec");
  if (spec.layers.back().kind != LayerKind::Fc)
    throw std::invalid_argument("forward: model must end with an fc head");
  TensorPtr<S> cur = input;
  for (size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams<S>& p = params.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        cur = conv2d(cur, p.w, p.b, Stride2{l.sh, l.sw}, l.pad);
        break;
      case LayerKind::MaxPool:
        cur = maxpool2d(cur, Window2{l.kh, l.kw}, Stride2{l.sh, l.sw}, l.pad);
        break;
      case LayerKind::Mfm:
        cur = mfm(cur);
        break;
      case LayerKind::MfmDense:
        cur = mfm_dense(cur);
        break;
      case LayerKind::BatchNorm:
        cur = apply_bn(cur, p.gamma, p.beta, &p.stats, opt.train);
        break;
      case LayerKind::Relu:
        cur = relu(cur);
        break;
      case LayerKind::SeBlock:
        cur = se_forward(l, *p.se, cur, opt.train);
        break;
      case LayerKind::Flatten: {
        if (cur->shape.size() == 4)
          cur = reshape(cur, {cur->shape[0], cur->shape[1] * cur->shape[2] * cur->shape[3]});
        else
          cur = reshape(cur, {numel(cur->shape)});
        break;
      }
      case LayerKind::Dropout: {
        if (opt.train && !opt.dropout_rng)
          throw std::invalid_argument("forward: training with dropout requires an RNG");
        static Rng dummy(0);
        cur = dropout(cur, l.rate, opt.train ? *opt.dropout_rng : dummy, opt.train);
        break;
      }
      case LayerKind::Fc:
        cur = linear(cur, p.w, p.b);
        break;
      case LayerKind::GlobalAvgPool:
        cur = global_avgpool(cur);
        break;
    }
  }
  return cur;
}

template <class S>
TensorPtr<S> head_weight(const ModelSpec& spec, const ModelParams<S>& params) {
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::Fc)
    throw std::invalid_argument("head_weight: model must end with an fc head");
  return params.layers.back().w;
}

template <class S>
TensorPtr<S> model_loss(const ModelSpec& spec, ModelParams<S>& params, const TensorPtr<S>& input,
                        const std::vector<int>& labels, const ForwardOptions& opt) {
  TensorPtr<S> emb = forward_embedding(spec, params, input, opt);
  const LayerSpec& head = spec.layers.back();
  LayerParams<S>& hp = params.layers.back();
  if (spec.head == LossHead::ASoftmax) {
    return asoftmax_loss(emb, hp.w, labels, spec.margin, spec.psi_variant);
  }
  TensorPtr<S> logits = linear(emb, hp.w, head.bias ? hp.b : TensorPtr<S>{});
  return softmax_ce_loss(logits, labels);
}

template <class S>
double cosine_score(const ModelSpec& spec, ModelParams<S>& params, const TensorPtr<S>& input) {
  ForwardOptions opt;  // eval mode
  TensorPtr<S> emb = forward_embedding(spec, params, input, opt);
  if (emb->shape.size() != 1)
    throw std::invalid_argument("cosine_score: expected a single instance");
  const TensorPtr<S>& w = params.layers.back().w;
  int64_t d = w->shape[0], c = w->shape[1];
  constexpr int kBonafide = 1;
  if (c < 2) throw std::invalid_argument("cosine_score: head has fewer than two classes");
  if (emb->size() != d) throw std::invalid_argument("cosine_score: embedding/head size mismatch");
  double dot = 0.0, ne = 0.0, nw = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    double e = emb->data[static_cast<size_t>(i)];
    double wv = w->data[static_cast<size_t>(i * c + kBonafide)];
    dot += e * wv;
    ne += e * e;
    nw += wv * wv;
  }
  if (ne <= 0.0 || nw <= 0.0)
    throw std::runtime_error("cosine_score: zero-norm embedding or head column");
  return dot / (std::sqrt(ne) * std::sqrt(nw));
}

template <class S>
int predict_class(const ModelSpec& spec, ModelParams<S>& params, const TensorPtr<S>& input) {
  ForwardOptions opt;
  TensorPtr<S> emb = forward_embedding(spec, params, input, opt);
  if (emb->shape.size() != 1)
    throw std::invalid_argument("predict_class: expected a single instance");
  const LayerSpec& head = spec.layers.back();
  LayerParams<S>& hp = params.layers.back();
  int64_t d = hp.w->shape[0], c = hp.w->shape[1];
  int best = 0;
  double best_v = 0.0;
  for (int64_t j = 0; j < c; ++j) {
    double dot = 0.0, nw = 0.0;
    for (int64_t i = 0; i < d; ++i) {
      double wv = hp.w->data[static_cast<size_t>(i * c + j)];
      dot += static_cast<double>(emb->data[static_cast<size_t>(i)]) * wv;
      nw += wv * wv;
    }
    double v;
    if (spec.head == LossHead::ASoftmax) {
      v = nw > 0.0 ? dot / std::sqrt(nw) : 0.0;  // embedding norm common to all columns
    } else {
      v = dot + (head.bias && hp.b ? static_cast<double>(hp.b->data[static_cast<size_t>(j)]) : 0.0);
    }
    if (j == 0 || v > best_v) {
      best_v = v;
      best = static_cast<int>(j);
    }
  }
  return best;
}

TensorPtr<float> feature_to_tensor(const SpectralFeature& f, bool requires_grad) {
  return log_power_to_tensor(f.log_power, f.n_bins(), f.n_frames(), requires_grad);
}

TensorPtr<float> log_power_to_tensor(const std::vector<float>& log_power, int bins, int frames,
                                     bool requires_grad) {
  if (log_power.size() != static_cast<size_t>(bins) * frames)
    throw std::invalid_argument("log_power_to_tensor: size mismatch");
  return make_tensor<float>({bins, frames, 1}, log_power, requires_grad);
}

// --------------------------------------------------------------- checkpoints

namespace {

constexpr char kCkptMagic[8] = {'A', 'D', 'V', 'C', 'M', 'C', 'P', '1'};

template <class T>
void wr(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T rd(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error(std::string("load_checkpoint: truncated reading ") + what);
  return v;
}

void wr_string(std::ostream& os, const std::string& s) {
  wr<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string rd_string(std::istream& is, const char* what) {
  uint32_t n = rd<uint32_t>(is, what);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n))
    throw std::runtime_error(std::string("load_checkpoint: truncated reading ") + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kCkptMagic, 8);
  wr<uint32_t>(os, 1);
  wr_string(os, serialize_model_config(ckpt.spec));
  wr<uint32_t>(os, static_cast<uint32_t>(ckpt.meta.epoch));
  wr<double>(os, ckpt.meta.dev_accuracy);
  wr<uint64_t>(os, ckpt.meta.seed);
  auto entries = named_entries(ckpt.spec, ckpt.params);
  wr<uint32_t>(os, static_cast<uint32_t>(entries.size()));
  for (auto& e : entries) {
    wr_string(os, e.name);
    if (e.tensor) {
      wr<uint32_t>(os, static_cast<uint32_t>(e.tensor->shape.size()));
      for (int64_t d : e.tensor->shape) wr<uint64_t>(os, static_cast<uint64_t>(d));
      os.write(reinterpret_cast<const char*>(e.tensor->data.data()),
               static_cast<std::streamsize>(sizeof(float) * e.tensor->data.size()));
    } else {
      wr<uint32_t>(os, 1);
      wr<uint64_t>(os, static_cast<uint64_t>(e.raw->size()));
      os.write(reinterpret_cast<const char*>(e.raw->data()),
               static_cast<std::streamsize>(sizeof(float) * e.raw->size()));
    }
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint");
  uint32_t version = rd<uint32_t>(is, "version");
  if (version != 1)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.spec = parse_model_config(rd_string(is, "model spec"));
  ckpt.meta.epoch = static_cast<int>(rd<uint32_t>(is, "epoch"));
  ckpt.meta.dev_accuracy = rd<double>(is, "dev accuracy");
  ckpt.meta.seed = rd<uint64_t>(is, "seed");
  ckpt.params = init_params<float>(ckpt.spec, 0);
  auto entries = named_entries(ckpt.spec, ckpt.params);
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < entries.size(); ++i) index[entries[i].name] = i;
  uint32_t count = rd<uint32_t>(is, "tensor count");
  std::vector<bool> filled(entries.size(), false);
  for (uint32_t t = 0; t < count; ++t) {
    std::string name = rd_string(is, "tensor name");
    uint32_t ndim = rd<uint32_t>(is, "rank");
    Shape shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int64_t>(rd<uint64_t>(is, "dim"));
    int64_t n = numel(shape);
    auto it = index.find(name);
    if (it == index.end())
      throw std::runtime_error("load_checkpoint: unexpected tensor '" + name + "' in " + path);
    auto& e = entries[it->second];
    std::vector<float>* dst = e.tensor ? &e.tensor->data : e.raw;
    if (static_cast<int64_t>(dst->size()) != n)
      throw std::runtime_error("load_checkpoint: size mismatch for tensor '" + name + "'");
    if (e.tensor && e.tensor->shape != shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for tensor '" + name + "'");
    if (!is.read(reinterpret_cast<char*>(dst->data()),
                 static_cast<std::streamsize>(sizeof(float) * dst->size())))
      throw std::runtime_error("load_checkpoint: truncated data for tensor '" + name + "'");
    filled[it->second] = true;
  }
  for (size_t i = 0; i < entries.size(); ++i)
    if (!filled[i])
      throw std::runtime_error("load_checkpoint: missing tensor '" + entries[i].name + "' in " +
                               path);
  return ckpt;
}

#define ADVCM_MODEL_INST(S)                                                                      \
  template ModelParams<S> init_params<S>(const ModelSpec&, uint64_t);                            \
  template ModelParams<S> clone_params<S>(const ModelParams<S>&);                                \
  template std::vector<ParamEntry<S>> named_entries<S>(const ModelSpec&, ModelParams<S>&);       \
  template void set_requires_grad<S>(const ModelSpec&, ModelParams<S>&, bool);                   \
  template TensorPtr<S> forward_embedding<S>(const ModelSpec&, ModelParams<S>&,                  \
                                             const TensorPtr<S>&, const ForwardOptions&);        \
  template TensorPtr<S> head_weight<S>(const ModelSpec&, const ModelParams<S>&);                 \
  template TensorPtr<S> model_loss<S>(const ModelSpec&, ModelParams<S>&, const TensorPtr<S>&,    \
                                      const std::vector<int>&, const ForwardOptions&);           \
  template double cosine_score<S>(const ModelSpec&, ModelParams<S>&, const TensorPtr<S>&);      \
  template int predict_class<S>(const ModelSpec&, ModelParams<S>&, const TensorPtr<S>&);

ADVCM_MODEL_INST(float)
ADVCM_MODEL_INST(double)
#undef ADVCM_MODEL_INST
template ModelParams<double> cast_params<double>(const ModelParams<float>&);
template ModelParams<float> cast_params<float>(const ModelParams<float>&);

}  // namespace advcm
