#include "advcm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "advcm/fft.hpp"
#include "advcm/threading.hpp"

namespace fs = std::filesystem;

namespace advcm {

// --------------------------------------------------------------- protocols

std::vector<ProtocolEntry> parse_protocol_text(const std::string& text) {
  std::vector<ProtocolEntry> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    std::string w;
    while (ls >> w) tok.push_back(w);
    if (tok.empty()) continue;
    ProtocolEntry e;
    std::string key;
    if (tok.size() == 5) {  // SPEAKER UTT - SYSTEM KEY
      e.speaker = tok[0];
      e.utterance = tok[1];
      e.system = tok[3];
      key = tok[4];
    } else if (tok.size() == 4) {  // SPEAKER UTT SYSTEM KEY
      e.speaker = tok[0];
      e.utterance = tok[1];
      e.system = tok[2];
      key = tok[3];
    } else {
      throw std::invalid_argument("protocol line " + std::to_string(line_no) + ": expected 4 or 5 fields, got " +
                                  std::to_string(tok.size()));
    }
    if (key == "bonafide")
      e.key = TrialLabel::Bonafide;
    else if (key == "spoof")
      e.key = TrialLabel::Spoof;
    else
      throw std::invalid_argument("protocol line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ProtocolEntry> parse_protocol(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("parse_protocol: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_protocol_text(ss.str());
}

std::string serialize_protocol(const std::vector<ProtocolEntry>& entries) {
  std::ostringstream os;
  for (const auto& e : entries)
    os << e.speaker << " " << e.utterance << " - " << e.system << " "
       << (e.key == TrialLabel::Bonafide ? "bonafide" : "spoof") << "\n";
  return os.str();
}

// ----------------------------------------------------------------- datasets

std::vector<float> Dataset::load_log_power(const std::string& id) const {
  SpectralFeature f = load_feature((fs::path(feature_dir) / (id + ".feat")).string());
  return std::move(f.log_power);
}

int Dataset::count_label(int label) const {
  int n = 0;
  for (const auto& it : items)
    if (it.label == label) ++n;
  return n;
}

Dataset dataset_from_protocol(const std::vector<ProtocolEntry>& entries,
                              const std::string& feature_dir) {
  Dataset d;
  d.feature_dir = feature_dir;
  d.items.reserve(entries.size());
  for (const auto& e : entries)
    d.items.push_back({e.utterance, e.key == TrialLabel::Bonafide ? 1 : 0});
  return d;
}

int build_feature_cache(const std::vector<ProtocolEntry>& entries, const std::string& wav_dir,
                        const std::string& cache_dir, const FeatureConfig& cfg, int parallelism,
                        bool with_phase) {
  fs::create_directories(cache_dir);
  std::vector<const ProtocolEntry*> todo;
  for (const auto& e : entries) {
    fs::path out = fs::path(cache_dir) / (e.utterance + ".feat");
    if (!fs::exists(out)) todo.push_back(&e);
  }
  parallel_for(static_cast<int64_t>(todo.size()), parallelism, [&](int64_t i) {
    const ProtocolEntry& e = *todo[static_cast<size_t>(i)];
    Waveform w = read_audio((fs::path(wav_dir) / (e.utterance + ".wav")).string());
    SpectralFeature f = extract(w, cfg);
    save_feature((fs::path(cache_dir) / (e.utterance + ".feat")).string(), f,
                 /*compact=*/true, with_phase);
  });
  return static_cast<int>(todo.size());
}

// ----------------------------------------------------------------- training

namespace {

TensorPtr<float> batch_tensor(const Dataset& data, const std::vector<size_t>& idx, size_t from,
                              size_t to, int h, int w, std::vector<int>& labels) {
  size_t n = to - from;
  std::vector<float> buf(n * static_cast<size_t>(h) * w);
  labels.resize(n);
  for (size_t b = 0; b < n; ++b) {
    const DataItem& item = data.items[idx[from + b]];
    std::vector<float> lp = data.load_log_power(item.id);
    if (lp.size() != static_cast<size_t>(h) * w)
      throw std::runtime_error("feature for " + item.id + " has unexpected size");
    std::copy(lp.begin(), lp.end(), buf.begin() + b * lp.size());
    labels[b] = item.label;
  }
  return make_tensor<float>({static_cast<int64_t>(n), h, w, 1}, std::move(buf));
}

double dataset_accuracy(const ModelSpec& spec, ModelParams<float>& params, const Dataset& data,
                        int parallelism) {
  std::vector<uint8_t> correct(data.items.size(), 0);
  parallel_for(static_cast<int64_t>(data.items.size()), parallelism, [&](int64_t i) {
    const DataItem& item = data.items[static_cast<size_t>(i)];
    auto x = log_power_to_tensor(data.load_log_power(item.id), spec.input_h, spec.input_w);
    correct[static_cast<size_t>(i)] = predict_class(spec, params, x) == item.label ? 1 : 0;
  });
  int64_t ok = 0;
  for (uint8_t c : correct) ok += c;
  return static_cast<double>(ok) / static_cast<double>(data.items.size());
}

}  // namespace

TrainResult train(const ModelSpec& spec, const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& cfg, std::ostream* log) {
  validate_spec(spec);
  if (train_set.items.empty() || dev_set.items.empty())
    throw std::invalid_argument("train: datasets must be non-empty");
  if (train_set.count_label(0) == 0 || train_set.count_label(1) == 0)
    throw std::invalid_argument("train: training set needs both classes");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");

  ModelParams<float> params = init_params<float>(spec, Rng::derive(cfg.seed, "init"));
  set_requires_grad(spec, params, true);
  auto entries = named_entries(spec, params);
  std::vector<TensorPtr<float>> trainable;
  for (auto& e : entries)
    if (e.tensor && e.trainable) trainable.push_back(e.tensor);

  // Adam moments, kept in double for stable and portable accumulation.
  std::vector<std::vector<double>> mom1(trainable.size()), mom2(trainable.size());
  for (size_t i = 0; i < trainable.size(); ++i) {
    mom1[i].assign(trainable[i]->data.size(), 0.0);
    mom2[i].assign(trainable[i]->data.size(), 0.0);
  }
  int64_t step_count = 0;

  Rng dropout_rng(Rng::derive(cfg.seed, "dropout"));
  ForwardOptions train_opt;
  train_opt.train = true;
  train_opt.dropout_rng = &dropout_rng;

  TrainResult result;
  double best_acc = -1.0;
  int best_epoch = 0;   // last strict improvement; drives patience
  int snap_epoch = 0;   // epoch of the returned snapshot
  ModelParams<float> best_params;

  std::vector<size_t> order(train_set.items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(cfg.seed, "epoch" + std::to_string(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.below(static_cast<int64_t>(i)))]);

    double epoch_loss = 0.0;
    int64_t batches = 0;
    for (size_t from = 0; from < order.size(); from += static_cast<size_t>(cfg.batch_size)) {
      size_t to = std::min(order.size(), from + static_cast<size_t>(cfg.batch_size));
      std::vector<int> labels;
      TensorPtr<float> loss;
      try {
        TensorPtr<float> input =
            batch_tensor(train_set, order, from, to, spec.input_h, spec.input_w, labels);
        loss = model_loss(spec, params, input, labels, train_opt);
        backward(loss);
      } catch (const std::exception& ex) {
        throw std::runtime_error("train: diverged or failed at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batches) + ": " + ex.what());
      }
      epoch_loss += static_cast<double>(loss->data[0]);
      ++batches;

      ++step_count;
      double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
      double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
      for (size_t p = 0; p < trainable.size(); ++p) {
        auto& t = *trainable[p];
        t.ensure_grad();
        auto& m = mom1[p];
        auto& v = mom2[p];
        for (size_t i = 0; i < t.data.size(); ++i) {
          double g = static_cast<double>(t.grad[i]);
          if (cfg.decay_in_loss) g += cfg.weight_decay * static_cast<double>(t.data[i]);
          m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
          v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
          double upd = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
          double next = static_cast<double>(t.data[i]) - cfg.lr * upd;
          if (!cfg.decay_in_loss)
            next -= cfg.lr * cfg.weight_decay * static_cast<double>(t.data[i]);
          t.data[i] = static_cast<float>(next);
        }
        t.reset_grad();
      }
    }

    double acc = dataset_accuracy(spec, params, dev_set, 1);
    result.dev_accuracy_history.push_back(acc);
    result.epochs_run = epoch;
    if (log)
      *log << "epoch " << epoch << ": mean loss " << (epoch_loss / static_cast<double>(batches))
           << ", dev accuracy " << acc << "\n";
    // Snapshot the latest among equally good epochs; the patience counter
    // only resets on a strict improvement.
    if (acc >= best_acc) {
      bool improved = acc > best_acc;
      best_acc = acc;
      if (improved) best_epoch = epoch;
      snap_epoch = epoch;
      best_params = clone_params(params);
    }
    if (epoch - best_epoch >= cfg.patience) break;  // patience 0 stops after epoch 1
  }

  set_requires_grad(spec, best_params, false);
  result.checkpoint.spec = spec;
  result.checkpoint.params = std::move(best_params);
  result.checkpoint.meta = {snap_epoch, best_acc, cfg.seed};
  return result;
}

// --------------------------------------------------------------- evaluation

EvalResult evaluate(Checkpoint& ckpt, const Dataset& eval_set, int parallelism,
                    const std::vector<AsvTrial>* asv_scores, const TdcfParams* tdcf_params) {
  if (eval_set.items.empty()) throw std::invalid_argument("evaluate: empty eval set");
  EvalResult r;
  r.scores.trials.resize(eval_set.items.size());
  parallel_for(static_cast<int64_t>(eval_set.items.size()), parallelism, [&](int64_t i) {
    const DataItem& item = eval_set.items[static_cast<size_t>(i)];
    auto x = log_power_to_tensor(eval_set.load_log_power(item.id), ckpt.spec.input_h,
                                 ckpt.spec.input_w);
    double s = cosine_score(ckpt.spec, ckpt.params, x);
    r.scores.trials[static_cast<size_t>(i)] = {
        item.id, s, item.label == 1 ? TrialLabel::Bonafide : TrialLabel::Spoof};
  });
  r.eer_result = eer(r.scores);
  if (asv_scores) {
    TdcfParams p = tdcf_params ? *tdcf_params : TdcfParams{};
    r.min_tdcf_value = min_tdcf(r.scores, *asv_scores, p);
  } else if (tdcf_params && tdcf_params->asv_rates) {
    r.min_tdcf_value = min_tdcf(r.scores, *tdcf_params->asv_rates, *tdcf_params);
  }
  return r;
}

// ---------------------------------------------------------------- campaigns

const char* method_name(AttackMethod m) { return m == AttackMethod::Fgsm ? "fgsm" : "pgd"; }

AttackMethod method_from_name(const std::string& name) {
  if (name == "fgsm") return AttackMethod::Fgsm;
  if (name == "pgd") return AttackMethod::Pgd;
  throw std::invalid_argument("unknown attack method '" + name + "'");
}

namespace {

AttackConfig cell_config(const AttackGrid& grid, AttackMethod m, double eps) {
  AttackConfig cfg;
  cfg.method = m;
  cfg.epsilon = eps;
  cfg.iterations = grid.iterations;
  cfg.restarts = grid.restarts;
  cfg.seed = grid.seed;
  cfg.random_init = true;
  return cfg;
}

/// Generates the adversarial corpus for one (source, method, epsilon) cell
/// and scores it with every target; per-utterance seeds depend only on the
/// grid seed and the utterance id, so the same cell is bit-reproducible no
/// matter which campaign runs it.
std::vector<TransferCell> run_cell(Checkpoint& source, std::vector<Checkpoint*>& targets,
                                   const Dataset& eval_set, const AttackGrid& grid,
                                   AttackMethod method, double eps, int parallelism) {
  AttackConfig cfg = cell_config(grid, method, eps);
  cfg.validate();
  ModelTarget src_target(source.spec, source.params);
  const size_t n = eval_set.items.size();
  std::vector<std::vector<double>> scores(targets.size(), std::vector<double>(n, 0.0));
  std::vector<double> deltas(n, 0.0);

  parallel_for(static_cast<int64_t>(n), parallelism, [&](int64_t i) {
    const DataItem& item = eval_set.items[static_cast<size_t>(i)];
    std::vector<float> x = eval_set.load_log_power(item.id);
    AttackConfig local = cfg;
    local.seed = derive_attack_seed(cfg, item.id);
    AdversarialExample adv = run_attack(src_target, x, item.label, local, item.id);
    deltas[static_cast<size_t>(i)] = adv.max_abs_delta;
    for (size_t t = 0; t < targets.size(); ++t) {
      auto xt = log_power_to_tensor(adv.perturbed, targets[t]->spec.input_h,
                                    targets[t]->spec.input_w);
      scores[t][static_cast<size_t>(i)] = cosine_score(targets[t]->spec, targets[t]->params, xt);
    }
  });

  double max_linf = 0.0;
  bool linf_ok = true;
  for (double d : deltas) {
    max_linf = std::max(max_linf, d);
    if (d > eps + kLinfSlack) linf_ok = false;
  }

  std::vector<TransferCell> out;
  for (size_t t = 0; t < targets.size(); ++t) {
    TransferCell cell;
    cell.source = source.spec.name;
    cell.target = targets[t]->spec.name;
    cell.method = method;
    cell.epsilon = eps;
    cell.max_linf = max_linf;
    cell.linf_ok = linf_ok;
    ScoreSet set;
    set.trials.resize(n);
    for (size_t i = 0; i < n; ++i)
      set.trials[i] = {eval_set.items[i].id, scores[t][i],
                       eval_set.items[i].label == 1 ? TrialLabel::Bonafide : TrialLabel::Spoof};
    cell.eer = eer(set).eer;
    cell.ok = linf_ok;
    if (!linf_ok) cell.error = "l-inf constraint violated";
    out.push_back(std::move(cell));
  }
  return out;
}

}  // namespace

std::vector<TransferCell> blackbox_campaign(std::vector<Checkpoint*> sources,
                                            std::vector<Checkpoint*> targets,
                                            const Dataset& eval_set, const AttackGrid& grid,
                                            int parallelism, std::ostream* log) {
  if (eval_set.items.empty()) throw std::invalid_argument("campaign: empty eval set");
  std::vector<TransferCell> cells;
  for (Checkpoint* src : sources) {
    for (AttackMethod m : grid.methods) {
      for (double eps : grid.epsilons) {
        std::vector<TransferCell> got;
        try {
          got = run_cell(*src, targets, eval_set, grid, m, eps, parallelism);
        } catch (const std::exception& ex) {
          for (Checkpoint* tgt : targets) {
            TransferCell cell;
            cell.source = src->spec.name;
            cell.target = tgt->spec.name;
            cell.method = m;
            cell.epsilon = eps;
            cell.ok = false;
            cell.error = ex.what();
            got.push_back(cell);
          }
        }
        for (auto& c : got) {
          if (log)
            *log << c.source << " -> " << c.target << " " << method_name(c.method)
                 << " eps=" << c.epsilon << ": EER " << c.eer << (c.ok ? "" : " [FAILED]") << "\n";
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

std::vector<TransferCell> whitebox_campaign(Checkpoint& ckpt, const Dataset& eval_set,
                                            const AttackGrid& grid, int parallelism,
                                            std::ostream* log) {
  return blackbox_campaign({&ckpt}, {&ckpt}, eval_set, grid, parallelism, log);
}

// ------------------------------------------------------------------ reports

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void emit_report(const RunReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);

  {
    std::ofstream txt(fs::path(out_dir) / "report.txt", std::ios::trunc);
    txt << "run seed: " << report.seed << "\n";
    if (!report.grid_digest.empty()) txt << "grid: " << report.grid_digest << "\n";
    txt << "\nclean performance\n";
    for (const auto& name : report.model_names) {
      txt << "  " << name << ": EER " << fmt_double(report.clean_eer.count(name) ? report.clean_eer.at(name) : -1.0);
      if (report.clean_tdcf.count(name))
        txt << ", min t-DCF " << fmt_double(report.clean_tdcf.at(name));
      txt << "\n";
    }
    txt << "\nattack grid (source -> target)\n";
    for (const auto& c : report.cells) {
      txt << "  " << c.source << " -> " << c.target << "  " << method_name(c.method)
          << " eps=" << fmt_double(c.epsilon);
      if (c.ok)
        txt << "  EER " << fmt_double(c.eer) << "  max|delta| " << fmt_double(c.max_linf);
      else
        txt << "  FAILED: " << c.error;
      txt << "\n";
    }
    if (!txt) throw std::runtime_error("emit_report: failed writing report.txt");
  }

  {
    std::ofstream csv(fs::path(out_dir) / "report.csv", std::ios::trunc);
    csv << "source,target,method,epsilon,status,eer,max_linf,linf_ok\n";
    for (const auto& name : report.model_names) {
      if (!report.clean_eer.count(name)) continue;
      csv << name << "," << name << ",clean,0,ok," << fmt_double(report.clean_eer.at(name))
          << ",0,1\n";
    }
    for (const auto& c : report.cells)
      csv << c.source << "," << c.target << "," << method_name(c.method) << ","
          << fmt_double(c.epsilon) << "," << (c.ok ? "ok" : "failed") << "," << fmt_double(c.eer)
          << "," << fmt_double(c.max_linf) << "," << (c.linf_ok ? 1 : 0) << "\n";
    if (!csv) throw std::runtime_error("emit_report: failed writing report.csv");
  }

  {
    std::ofstream plot(fs::path(out_dir) / "plot_data.csv", std::ios::trunc);
    plot << "series,epsilon,eer\n";
    for (const auto& c : report.cells) {
      if (!c.ok) continue;
      plot << c.source << "->" << c.target << ":" << method_name(c.method) << ","
           << fmt_double(c.epsilon) << "," << fmt_double(c.eer) << "\n";
    }
    if (!plot) throw std::runtime_error("emit_report: failed writing plot_data.csv");
  }
}

std::vector<TransferCell> parse_report_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("parse_report_csv: cannot open " + path);
  std::vector<TransferCell> out;
  std::string line;
  bool header = true;
  while (std::getline(f, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> tok;
    std::stringstream ls(line);
    std::string t;
    while (std::getline(ls, t, ',')) tok.push_back(t);
    if (tok.size() != 8)
      throw std::runtime_error("parse_report_csv: malformed row '" + line + "'");
    if (tok[2] == "clean") continue;
    TransferCell c;
    c.source = tok[0];
    c.target = tok[1];
    c.method = method_from_name(tok[2]);
    c.epsilon = std::stod(tok[3]);
    c.ok = tok[4] == "ok";
    c.eer = std::stod(tok[5]);
    c.max_linf = std::stod(tok[6]);
    c.linf_ok = tok[7] == "1";
    out.push_back(std::move(c));
  }
  return out;
}

// --------------------------------------------------------------- toy corpus

namespace {

/// Both classes share the harmonic-tone base; spoof utterances carry an
/// extra band-limited noise artifact in a fixed high band. Keeping the
/// discriminative cue localized and common across utterances means every
/// model has to key on the same spectral region.
std::vector<float> toy_tone_base(Rng& rng, int len, int sr) {
  double f0 = rng.uniform(90.0, 280.0);
  int harmonics = std::max(1, std::min(12, static_cast<int>(3400.0 / f0)));
  double decay = rng.uniform(0.6, 1.4);
  std::vector<double> amp(static_cast<size_t>(harmonics));
  std::vector<double> phase(static_cast<size_t>(harmonics));
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = 1.0 / std::pow(h + 1.0, decay);
    phase[h] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  }
  std::vector<float> x(static_cast<size_t>(len));
  for (int i = 0; i < len; ++i) {
    double t = static_cast<double>(i) / sr;
    double v = 0.0;
    for (int h = 0; h < harmonics; ++h)
      v += amp[h] * std::sin(2.0 * 3.14159265358979323846 * f0 * (h + 1) * t + phase[h]);
    x[i] = static_cast<float>(v);
  }
  // normalize the tone stack to unit RMS before mixing
  double rms = 0.0;
  for (float v : x) rms += static_cast<double>(v) * v;
  rms = std::sqrt(rms / x.size());
  if (rms > 0.0)
    for (auto& v : x) v = static_cast<float>(v / rms);
  return x;
}

/// Band-limited noise with unit RMS, synthesised in the frequency domain.
std::vector<float> toy_band_noise(Rng& rng, int len, int sr, double lo, double hi) {
  size_t m = 1;
  while (m < static_cast<size_t>(len)) m <<= 1;
  size_t b_lo = static_cast<size_t>(lo * static_cast<double>(m) / sr);
  size_t b_hi = static_cast<size_t>(hi * static_cast<double>(m) / sr);
  std::vector<std::complex<double>> spec(m, {0.0, 0.0});
  for (size_t b = std::max<size_t>(b_lo, 1); b <= b_hi && b < m / 2; ++b) {
    std::complex<double> v{rng.normal(), rng.normal()};
    spec[b] = v;
    spec[m - b] = std::conj(v);
  }
  Dft dft(m);
  dft.inverse(spec);
  std::vector<float> x(static_cast<size_t>(len));
  double rms = 0.0;
  for (int i = 0; i < len; ++i) {
    x[i] = static_cast<float>(spec[static_cast<size_t>(i)].real());
    rms += static_cast<double>(x[i]) * x[i];
  }
  rms = std::sqrt(rms / x.size());
  if (rms > 0.0)
    for (auto& v : x) v = static_cast<float>(v / rms);
  return x;
}

/// The spoof artifact band, jittered around 4.2-6.4 kHz.
std::vector<float> toy_artifact(Rng& rng, int len, int sr) {
  double lo = 4200.0 + rng.uniform(-500.0, 500.0);
  double hi = lo + rng.uniform(1600.0, 2400.0);
  return toy_band_noise(rng, len, sr, lo, hi);
}

/// Label-preserving distractor band in the tone region; present in both
/// classes so only the high artifact band separates them.
void maybe_add_distractor(std::vector<float>& x, Rng& rng, int sr) {
  if (rng.uniform() >= 0.7) return;
  double lo = rng.uniform(800.0, 3000.0);
  double hi = lo + rng.uniform(400.0, 1200.0);
  std::vector<float> band = toy_band_noise(rng, static_cast<int>(x.size()), sr, lo, hi);
  double mix = rng.uniform(0.02, 0.1);
  for (size_t i = 0; i < x.size(); ++i) x[i] += static_cast<float>(mix * band[i]);
}

void finish_utterance(std::vector<float>& x, Rng& rng, int sr) {
  // Fade edges, add a variable noise floor, then set a wide random overall
  // level; the level spread keeps +-5 log-power moves inside the range the
  // models saw in training.
  int ramp = sr / 20;
  int len = static_cast<int>(x.size());
  for (int i = 0; i < ramp && i < len; ++i) {
    float g = static_cast<float>(i) / ramp;
    x[i] *= g;
    x[len - 1 - i] *= g;
  }
  double rms = 0.0;
  for (float v : x) rms += static_cast<double>(v) * v;
  rms = std::sqrt(rms / x.size());
  double target = 0.08 * std::pow(10.0, rng.uniform(-0.45, 0.45));
  double gain = rms > 0.0 ? target / rms : 0.0;
  double floor_level = (target / 0.08) * 0.0005 * std::pow(10.0, rng.uniform(0.0, 0.6));
  for (auto& v : x) {
    double noisy = static_cast<double>(v) * gain + floor_level * rng.normal();
    v = static_cast<float>(std::clamp(noisy, -1.0, 1.0));
  }
}

}  // namespace

void make_toy_corpus(const std::string& out_dir, const ToyCorpusConfig& cfg, std::ostream* log) {
  if (cfg.min_duration_s <= 0 || cfg.max_duration_s < cfg.min_duration_s)
    throw std::invalid_argument("make_toy_corpus: bad duration range");
  fs::path wav_dir = fs::path(out_dir) / "wav";
  fs::path proto_dir = fs::path(out_dir) / "protocols";
  fs::create_directories(wav_dir);
  fs::create_directories(proto_dir);

  struct Split {
    const char* tag;
    const char* file;
    int per_class;
  };
  const Split splits[] = {
      {"T", "train.txt", cfg.train_per_class},
      {"D", "dev.txt", cfg.dev_per_class},
      {"E", "eval.txt", cfg.eval_per_class},
  };
  int written = 0;
  for (const Split& sp : splits) {
    std::vector<ProtocolEntry> entries;
    for (int cls = 0; cls < 2; ++cls) {  // 0 spoof, 1 bonafide
      for (int i = 0; i < sp.per_class; ++i) {
        char id[64];
        std::snprintf(id, sizeof(id), "TOY_%s_%c_%05d", sp.tag, cls == 1 ? 'B' : 'S', i);
        Rng rng(Rng::derive(cfg.seed, id));
        int len = static_cast<int>(rng.uniform(cfg.min_duration_s, cfg.max_duration_s) *
                                   cfg.sample_rate);
        std::vector<float> x = toy_tone_base(rng, len, cfg.sample_rate);
        maybe_add_distractor(x, rng, cfg.sample_rate);
        if (cls == 0) {
          // spoof = tone base + the high-band artifact; the artifact sits a
          // few log-power units above the noise floor so an l-inf budget of
          // 5 can both erase and fabricate it
          std::vector<float> art = toy_artifact(rng, len, cfg.sample_rate);
          double mix = rng.uniform(0.045, 0.075);
          for (int i = 0; i < len; ++i)
            x[static_cast<size_t>(i)] += static_cast<float>(mix * art[static_cast<size_t>(i)]);
        }
        finish_utterance(x, rng, cfg.sample_rate);
        Waveform w;
        w.sample_rate = cfg.sample_rate;
        w.samples = std::move(x);
        write_audio((wav_dir / (std::string(id) + ".wav")).string(), w);
        ProtocolEntry e;
        e.speaker = "TOYSPK_" + std::to_string(i % 8);
        e.utterance = id;
        e.system = cls == 1 ? "-" : "A01";
        e.key = cls == 1 ? TrialLabel::Bonafide : TrialLabel::Spoof;
        entries.push_back(std::move(e));
        ++written;
      }
    }
    std::ofstream pf(proto_dir / sp.file, std::ios::trunc);
    pf << serialize_protocol(entries);
    if (!pf) throw std::runtime_error("make_toy_corpus: failed writing protocol " +
                                      std::string(sp.file));
  }
  if (log) *log << "toy corpus: wrote " << written << " utterances under " << out_dir << "\n";
}

}  // namespace advcm
