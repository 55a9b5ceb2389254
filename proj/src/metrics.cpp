#include "advcm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace advcm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SweepCurve {
  std::vector<double> thresholds;  // -inf, distinct scores ascending, +inf
  std::vector<double> far;         // spoof accepted (score >= t)
  std::vector<double> frr;         // bonafide rejected (score < t)
};

SweepCurve sweep(const ScoreSet& scores, const char* op) {
  int64_t n_spoof = 0, n_bona = 0;
  for (const Trial& t : scores.trials) {
    if (!std::isfinite(t.score))
      throw std::invalid_argument(std::string(op) + ": non-finite score for trial " + t.id);
    (t.label == TrialLabel::Spoof ? n_spoof : n_bona)++;
  }
  if (n_spoof == 0 || n_bona == 0)
    throw std::invalid_argument(std::string(op) +
                                ": need at least one trial of each class (bonafide " +
                                std::to_string(n_bona) + ", spoof " + std::to_string(n_spoof) + ")");
  std::vector<Trial> sorted = scores.trials;
  std::sort(sorted.begin(), sorted.end(),
            [](const Trial& a, const Trial& b) { return a.score < b.score; });

  SweepCurve c;
  c.thresholds.push_back(-kInf);
  c.far.push_back(1.0);
  c.frr.push_back(0.0);
  size_t i = 0;
  int64_t spoof_below = 0, bona_below = 0;  // counts with score < current threshold
  while (i < sorted.size()) {
    double s = sorted[i].score;
    // at threshold s: accepted = score >= s
    c.thresholds.push_back(s);
    c.far.push_back(static_cast<double>(n_spoof - spoof_below) / static_cast<double>(n_spoof));
    c.frr.push_back(static_cast<double>(bona_below) / static_cast<double>(n_bona));
    while (i < sorted.size() && sorted[i].score == s) {
      (sorted[i].label == TrialLabel::Spoof ? spoof_below : bona_below)++;
      ++i;
    }
  }
  c.thresholds.push_back(kInf);
  c.far.push_back(0.0);
  c.frr.push_back(1.0);
  return c;
}

}  // namespace

EerResult eer(const ScoreSet& scores) {
  SweepCurve c = sweep(scores, "eer");
  for (size_t i = 0; i + 1 < c.thresholds.size(); ++i) {
    double d0 = c.far[i] - c.frr[i];
    double d1 = c.far[i + 1] - c.frr[i + 1];
    if (d0 == 0.0) return {c.far[i], c.thresholds[i]};
    if (d0 > 0.0 && d1 < 0.0) {
      double t = d0 / (d0 - d1);
      double e = c.far[i] + t * (c.far[i + 1] - c.far[i]);
      double thr;
      if (std::isinf(c.thresholds[i]))
        thr = c.thresholds[i + 1];
      else if (std::isinf(c.thresholds[i + 1]))
        thr = c.thresholds[i];
      else
        thr = c.thresholds[i] + t * (c.thresholds[i + 1] - c.thresholds[i]);
      return {e, thr};
    }
  }
  // d is 1 at -inf and -1 at +inf, so a crossing always exists; the last
  // point can still be an exact zero.
  size_t last = c.thresholds.size() - 1;
  if (c.far[last] - c.frr[last] == 0.0) return {c.far[last], c.thresholds[last]};
  throw std::logic_error("eer: no crossing found");
}

std::vector<DetPoint> det_points(const ScoreSet& scores) {
  SweepCurve c = sweep(scores, "det_points");
  std::vector<DetPoint> out(c.thresholds.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = {c.far[i], c.frr[i], c.thresholds[i]};
  return out;
}

// --------------------------------------------------------------------- t-DCF

AsvRates asv_operating_point(const std::vector<AsvTrial>& asv) {
  ScoreSet tn;
  int64_t n_spoof = 0;
  for (const AsvTrial& t : asv) {
    if (t.key == AsvKey::Spoof) {
      ++n_spoof;
      continue;
    }
    tn.trials.push_back({t.id, t.score,
                         t.key == AsvKey::Target ? TrialLabel::Bonafide : TrialLabel::Spoof});
  }
  if (n_spoof == 0)
    throw std::invalid_argument("asv_operating_point: ASV scores contain no spoof trials");
  EerResult e = eer(tn);  // errors if either target or nontarget class is absent
  double thr = e.threshold;
  int64_t n_tar = 0, n_non = 0, miss_tar = 0, fa_non = 0, miss_spoof = 0;
  for (const AsvTrial& t : asv) {
    switch (t.key) {
      case AsvKey::Target:
        ++n_tar;
        if (t.score < thr) ++miss_tar;
        break;
      case AsvKey::Nontarget:
        ++n_non;
        if (t.score >= thr) ++fa_non;
        break;
      case AsvKey::Spoof:
        if (t.score < thr) ++miss_spoof;
        break;
    }
  }
  AsvRates r;
  r.p_miss = static_cast<double>(miss_tar) / static_cast<double>(n_tar);
  r.p_fa = static_cast<double>(fa_non) / static_cast<double>(n_non);
  r.p_miss_spoof = static_cast<double>(miss_spoof) / static_cast<double>(n_spoof);
  return r;
}

double min_tdcf(const ScoreSet& cm, const AsvRates& rates, const TdcfParams& params) {
  if (params.p_target < 0 || params.p_nontarget < 0 || params.p_spoof < 0 ||
      std::abs(params.p_target + params.p_nontarget + params.p_spoof - 1.0) > 1e-9)
    throw std::invalid_argument("min_tdcf: priors must be non-negative and sum to 1");
  if (params.c_miss <= 0 || params.c_fa <= 0 || params.c_fa_spoof <= 0)
    throw std::invalid_argument("min_tdcf: costs must be positive");

  const double c0 = params.p_target * params.c_miss * rates.p_miss +
                    params.p_nontarget * params.c_fa * rates.p_fa;
  const double c1 = params.p_target * params.c_miss * (1.0 - rates.p_miss) -
                    params.p_nontarget * params.c_fa * rates.p_fa;
  const double c2 = params.p_spoof * params.c_fa_spoof * (1.0 - rates.p_miss_spoof);
  const double denom = c0 + std::min(c1, c2);
  if (!(denom > 0.0))
    throw std::invalid_argument("min_tdcf: degenerate cost model (default cost is not positive)");

  SweepCurve c = sweep(cm, "min_tdcf");
  double best = kInf;
  for (size_t i = 0; i < c.thresholds.size(); ++i) {
    double v = c0 + c1 * c.frr[i] + c2 * c.far[i];  // Pmiss_cm = frr, Pfa_cm = far
    best = std::min(best, v);
  }
  return best / denom;
}

double min_tdcf(const ScoreSet& cm, const std::vector<AsvTrial>& asv, const TdcfParams& params) {
  std::set<std::string> asv_ids;
  for (const AsvTrial& t : asv) asv_ids.insert(t.id);
  std::vector<std::string> missing;
  for (const Trial& t : cm.trials)
    if (!asv_ids.count(t.id)) missing.push_back(t.id);
  if (!missing.empty()) {
    std::string msg = "min_tdcf: " + std::to_string(missing.size()) +
                      " CM trials missing from the ASV score set:";
    for (size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ...";
    throw std::invalid_argument(msg);
  }
  return min_tdcf(cm, asv_operating_point(asv), params);
}

// --------------------------------------------------------------- file I/O

TdcfParams load_tdcf_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_tdcf_params: cannot open " + path);
  TdcfParams p;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto eq = key.find('=');
    std::string val;
    if (eq != std::string::npos) {
      val = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else if (!(ls >> val)) {
      throw std::invalid_argument("tdcf params line " + std::to_string(line_no) + ": missing value");
    }
    double v = std::stod(val);
    if (key == "p_target")
      p.p_target = v;
    else if (key == "p_nontarget")
      p.p_nontarget = v;
    else if (key == "p_spoof")
      p.p_spoof = v;
    else if (key == "c_miss")
      p.c_miss = v;
    else if (key == "c_fa")
      p.c_fa = v;
    else if (key == "c_fa_spoof")
      p.c_fa_spoof = v;
    else
      throw std::invalid_argument("tdcf params line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
  }
  return p;
}

std::vector<std::pair<std::string, double>> read_score_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_score_file: cannot open " + path);
  std::vector<std::pair<std::string, double>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string id;
    double score;
    if (!(ls >> id)) continue;
    if (!(ls >> score))
      throw std::runtime_error("score file " + path + " line " + std::to_string(line_no) +
                               ": expected 'utterance_id score'");
    out.emplace_back(id, score);
  }
  return out;
}

void write_score_file(const std::string& path, const ScoreSet& scores) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_score_file: cannot open " + path);
  f.precision(17);
  for (const Trial& t : scores.trials) f << t.id << " " << t.score << "\n";
  if (!f) throw std::runtime_error("write_score_file: write failed for " + path);
}

std::vector<AsvTrial> read_asv_score_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_asv_score_file: cannot open " + path);
  std::vector<AsvTrial> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::istringstream ls(line);
    AsvTrial t;
    std::string key;
    if (!(ls >> t.id)) continue;
    if (!(ls >> t.score >> key))
      throw std::runtime_error("asv score file " + path + " line " + std::to_string(line_no) +
                               ": expected 'utterance_id score key'");
    if (key == "target")
      t.key = AsvKey::Target;
    else if (key == "nontarget")
      t.key = AsvKey::Nontarget;
    else if (key == "spoof")
      t.key = AsvKey::Spoof;
    else
      throw std::runtime_error("asv score file " + path + " line " + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
    out.push_back(t);
  }
  return out;
}

}  // namespace advcm
