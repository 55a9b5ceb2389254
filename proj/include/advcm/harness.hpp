#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "advcm/attack.hpp"
#include "advcm/metrics.hpp"
#include "advcm/model.hpp"

namespace advcm {

// ------------------------------------------------------------- protocol files

struct ProtocolEntry {
  std::string speaker;
  std::string utterance;
  std::string system;  // "-" for bonafide trials
  TrialLabel key = TrialLabel::Bonafide;
};

std::vector<ProtocolEntry> parse_protocol_text(const std::string& text);
std::vector<ProtocolEntry> parse_protocol(const std::string& path);
std::string serialize_protocol(const std::vector<ProtocolEntry>& entries);

// ------------------------------------------------------------------ datasets

struct DataItem {
  std::string id;
  int label = 0;  // 0 spoof, 1 bonafide
};

/// Items plus the directory of cached feature blocks (<id>.feat).
struct Dataset {
  std::vector<DataItem> items;
  std::string feature_dir;

  std::vector<float> load_log_power(const std::string& id) const;
  int count_label(int label) const;
};

Dataset dataset_from_protocol(const std::vector<ProtocolEntry>& entries,
                              const std::string& feature_dir);

/// Extracts features for every protocol utterance with a missing cache file.
/// Returns the number of utterances actually extracted.
int build_feature_cache(const std::vector<ProtocolEntry>& entries, const std::string& wav_dir,
                        const std::string& cache_dir, const FeatureConfig& cfg, int parallelism,
                        bool with_phase = false);

// ------------------------------------------------------------------ training

struct TrainConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.001;
  bool decay_in_loss = false;  // true switches decoupled decay to loss-term L2
  int batch_size = 8;
  int patience = 5;
  int max_epochs = 60;
  uint64_t seed = 1;
};

struct TrainResult {
  Checkpoint checkpoint;  // best dev-accuracy snapshot
  std::vector<double> dev_accuracy_history;
  int epochs_run = 0;
};

TrainResult train(const ModelSpec& spec, const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

// ---------------------------------------------------------------- evaluation

struct EvalResult {
  ScoreSet scores;
  EerResult eer_result;
  std::optional<double> min_tdcf_value;
};

EvalResult evaluate(Checkpoint& ckpt, const Dataset& eval_set, int parallelism,
                    const std::vector<AsvTrial>* asv_scores = nullptr,
                    const TdcfParams* tdcf_params = nullptr);

// ----------------------------------------------------------------- campaigns

struct AttackGrid {
  std::vector<AttackMethod> methods = {AttackMethod::Fgsm, AttackMethod::Pgd};
  std::vector<double> epsilons = {0.1, 1.0, 5.0};
  int iterations = 10;
  int restarts = 5;
  uint64_t seed = 1;
};

/// One (source model, target model, method, epsilon) result. Source ==
/// target is the white-box case.
struct TransferCell {
  std::string source;
  std::string target;
  AttackMethod method = AttackMethod::Fgsm;
  double epsilon = 0.0;
  bool ok = false;
  std::string error;
  double eer = 0.0;
  double max_linf = 0.0;  // largest per-utterance max |delta| seen
  bool linf_ok = false;   // every example re-verified against epsilon + slack
};

struct RunReport {
  std::vector<std::string> model_names;
  std::map<std::string, double> clean_eer;
  std::map<std::string, double> clean_tdcf;  // present only when ASV scores given
  std::vector<TransferCell> cells;
  uint64_t seed = 0;
  std::string grid_digest;  // human-readable grid echo (deterministic)
};

/// Attacks every eval utterance with gradients from the model being
/// evaluated and recomputes the EER per grid cell.
std::vector<TransferCell> whitebox_campaign(Checkpoint& ckpt, const Dataset& eval_set,
                                            const AttackGrid& grid, int parallelism,
                                            std::ostream* log = nullptr);

/// Full ordered source x target matrix; diagonal cells match
/// whitebox_campaign bit-exactly (same generator, same seeds).
std::vector<TransferCell> blackbox_campaign(std::vector<Checkpoint*> sources,
                                            std::vector<Checkpoint*> targets,
                                            const Dataset& eval_set, const AttackGrid& grid,
                                            int parallelism, std::ostream* log = nullptr);

// ------------------------------------------------------------------- reports

/// Writes report.txt, report.csv and plot_data.csv into out_dir. Output is a
/// pure function of the report contents.
void emit_report(const RunReport& report, const std::string& out_dir);
std::vector<TransferCell> parse_report_csv(const std::string& path);

const char* method_name(AttackMethod m);
AttackMethod method_from_name(const std::string& name);

// ---------------------------------------------------------------- toy corpus

/// Synthetic two-class corpus: harmonic tone stacks (bonafide) against
/// band-limited noise (spoof), equal RMS, so the pipeline runs with no
/// external data.
struct ToyCorpusConfig {
  int train_per_class = 1000;
  int dev_per_class = 150;
  int eval_per_class = 250;
  double min_duration_s = 0.8;
  double max_duration_s = 1.1;
  int sample_rate = 16000;
  uint64_t seed = 7;
};

/// Writes wav/ and protocols/{train,dev,eval}.txt under out_dir.
void make_toy_corpus(const std::string& out_dir, const ToyCorpusConfig& cfg,
                     std::ostream* log = nullptr);

}  // namespace advcm
