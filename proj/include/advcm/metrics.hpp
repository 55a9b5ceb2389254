#pragma once

#include <optional>
#include <string>
#include <vector>

namespace advcm {

enum class TrialLabel { Spoof = 0, Bonafide = 1 };

struct Trial {
  std::string id;
  double score = 0.0;
  TrialLabel label = TrialLabel::Spoof;
};

/// Per-trial scores; higher score means more bonafide.
struct ScoreSet {
  std::vector<Trial> trials;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Equal error rate. Acceptance convention: a trial counts as accepted when
/// its score is >= the threshold; the FAR/FRR crossing is located by linear
/// interpolation between adjacent sweep points over the finite score set.
EerResult eer(const ScoreSet& scores);

struct DetPoint {
  double far = 0.0;
  double frr = 0.0;
  double threshold = 0.0;
};

/// DET polyline over all distinct thresholds, endpoints (1,0) and (0,1)
/// included; FAR non-increasing, FRR non-decreasing along the sweep.
std::vector<DetPoint> det_points(const ScoreSet& scores);

// ----------------------------------------------------------------- t-DCF

enum class AsvKey { Target, Nontarget, Spoof };

struct AsvTrial {
  std::string id;
  double score = 0.0;
  AsvKey key = AsvKey::Target;
};

/// ASV error rates at its fixed operating point (the target/nontarget EER
/// threshold).
struct AsvRates {
  double p_miss = 0.0;        // target rejected
  double p_fa = 0.0;          // nontarget accepted
  double p_miss_spoof = 0.0;  // spoof rejected
};

/// Tandem cost model constants (ASVspoof LA evaluation defaults).
struct TdcfParams {
  double p_target = 0.9405;
  double p_nontarget = 0.0095;
  double p_spoof = 0.05;
  double c_miss = 1.0;
  double c_fa = 10.0;
  double c_fa_spoof = 10.0;
  std::optional<AsvRates> asv_rates;  // used when no ASV score set is supplied
};

TdcfParams load_tdcf_params(const std::string& path);

AsvRates asv_operating_point(const std::vector<AsvTrial>& asv);

/// Minimum normalized tandem detection cost over the CM threshold sweep.
double min_tdcf(const ScoreSet& cm, const AsvRates& rates, const TdcfParams& params);
/// Same, computing the ASV operating point from per-trial ASV scores; every
/// CM trial id must appear in the ASV set.
double min_tdcf(const ScoreSet& cm, const std::vector<AsvTrial>& asv, const TdcfParams& params);

// ------------------------------------------------------------- score files

/// "utterance_id score" per line.
std::vector<std::pair<std::string, double>> read_score_file(const std::string& path);
void write_score_file(const std::string& path, const ScoreSet& scores);

/// "utterance_id asv_score key" per line, key in {target, nontarget, spoof}.
std::vector<AsvTrial> read_asv_score_file(const std::string& path);

}  // namespace advcm
