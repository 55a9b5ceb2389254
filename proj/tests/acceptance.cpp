// Acceptance suite: runs every gate criterion end to end and prints one
// pass/fail line each. Returns non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "advcm/harness.hpp"
#include "advcm/threading.hpp"
#include "attack_targets.hpp"
#include "helpers.hpp"

using namespace advcm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void criterion(int number, const std::string& title, const std::function<std::string()>& body) {
  auto t0 = Clock::now();
  try {
    std::string detail = body();
    std::printf("[PASS] criterion %d: %s (%.1fs%s%s)\n", number, title.c_str(),
                seconds_since(t0), detail.empty() ? "" : "; ", detail.c_str());
  } catch (const std::exception& ex) {
    ++g_failures;
    std::printf("[FAIL] criterion %d: %s (%.1fs) - %s\n", number, title.c_str(),
                seconds_since(t0), ex.what());
  }
  std::fflush(stdout);
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// --------------------------------------------------------------- criteria 1-2

std::map<std::string, Shape> named_shapes(const ModelSpec& spec) {
  auto shapes = infer_shapes(spec);
  std::map<std::string, Shape> out;
  for (size_t i = 0; i < spec.layers.size(); ++i)
    if (!spec.layers[i].name.empty()) out[spec.layers[i].name] = shapes[i];
  return out;
}

void check_shapes(const ModelSpec& spec, const std::map<std::string, Shape>& expect) {
  auto got = named_shapes(spec);
  require(got.size() == expect.size(),
          spec.name + ": expected " + std::to_string(expect.size()) + " named rows, got " +
              std::to_string(got.size()));
  for (const auto& [name, shape] : expect) {
    require(got.count(name) == 1, spec.name + ": missing row " + name);
    require(got.at(name) == shape,
            spec.name + ": row " + name + " is " + shape_str(got.at(name)) + ", expected " +
                shape_str(shape));
  }
}

// ----------------------------------------------------------------- criterion 3

double fd_input_grad_check(const ModelSpec& spec, ModelParams<double>& params, int label,
                           int n_coords, Rng& rng) {
  auto x = advcm::test::random_tensor({spec.input_h, spec.input_w, 1}, rng, -4.0, 4.0);
  ForwardOptions opt;  // eval mode: the attack path of Eqs. 5-6
  auto make_loss = [&] { return model_loss(spec, params, x, {label}, opt); };
  return advcm::test::grad_check_leaf(make_loss, x, n_coords, rng).max_rel_err;
}

// ----------------------------------------------------------------- criterion 6

double eer_bruteforce(const ScoreSet& set) {
  std::vector<double> sweep;
  for (const auto& t : set.trials) sweep.push_back(t.score);
  std::sort(sweep.begin(), sweep.end());
  sweep.erase(std::unique(sweep.begin(), sweep.end()), sweep.end());
  std::vector<double> mids;
  mids.push_back(sweep.front() - 1.0);
  for (size_t i = 0; i + 1 < sweep.size(); ++i) mids.push_back((sweep[i] + sweep[i + 1]) / 2);
  for (double s : sweep) mids.push_back(s);
  mids.push_back(sweep.back() + 1.0);
  std::sort(mids.begin(), mids.end());
  mids.erase(std::unique(mids.begin(), mids.end()), mids.end());
  int nb = 0, ns = 0;
  for (const auto& t : set.trials) (t.label == TrialLabel::Bonafide ? nb : ns)++;
  double pf = 1.0, pr = 0.0;
  for (double thr : mids) {
    int fa = 0, fr = 0;
    for (const auto& t : set.trials) {
      if (t.label == TrialLabel::Spoof && t.score >= thr) ++fa;
      if (t.label == TrialLabel::Bonafide && t.score < thr) ++fr;
    }
    double far = static_cast<double>(fa) / ns, frr = static_cast<double>(fr) / nb;
    double d0 = pf - pr, d1 = far - frr;
    if (d0 == 0.0) return pf;
    if (d0 > 0.0 && d1 < 0.0) return pf + d0 / (d0 - d1) * (far - pf);
    pf = far;
    pr = frr;
  }
  return pf - pr == 0.0 ? pf : -1.0;
}

double tdcf_direct(const ScoreSet& cm, const AsvRates& r, const TdcfParams& p) {
  double c0 = p.p_target * p.c_miss * r.p_miss + p.p_nontarget * p.c_fa * r.p_fa;
  double c1 = p.p_target * p.c_miss * (1.0 - r.p_miss) - p.p_nontarget * p.c_fa * r.p_fa;
  double c2 = p.p_spoof * p.c_fa_spoof * (1.0 - r.p_miss_spoof);
  int nb = 0, ns = 0;
  for (const auto& t : cm.trials) (t.label == TrialLabel::Bonafide ? nb : ns)++;
  std::vector<double> sweep = {-1e300, 1e300};
  for (const auto& t : cm.trials) sweep.push_back(t.score);
  double best = 1e300;
  for (double thr : sweep) {
    int miss = 0, fa = 0;
    for (const auto& t : cm.trials) {
      if (t.label == TrialLabel::Bonafide && t.score < thr) ++miss;
      if (t.label == TrialLabel::Spoof && t.score >= thr) ++fa;
    }
    best = std::min(best, c0 + c1 * (static_cast<double>(miss) / nb) +
                              c2 * (static_cast<double>(fa) / ns));
  }
  return best / (c0 + std::min(c1, c2));
}

// ------------------------------------------------------------- criteria 8-10

struct ToyRun {
  fs::path work;
  Dataset train_set, dev_set, eval_set;
  Checkpoint lcnn, senet;
  double clean_eer_lcnn = 1.0, clean_eer_senet = 1.0;
  AttackGrid grid;
  std::vector<TransferCell> white_lcnn, white_senet;
};

ToyRun g_toy;

double cell_eer(const std::vector<TransferCell>& cells, const std::string& src,
                const std::string& tgt, AttackMethod m, double eps) {
  for (const auto& c : cells)
    if (c.source == src && c.target == tgt && c.method == m && c.epsilon == eps) {
      require(c.ok, "cell " + src + "->" + tgt + " failed: " + c.error);
      return c.eer;
    }
  throw std::runtime_error("missing grid cell " + src + "->" + tgt);
}

RunReport toy_report(const ToyRun& run, const std::vector<TransferCell>& a,
                     const std::vector<TransferCell>& b) {
  RunReport rep;
  rep.model_names = {run.lcnn.spec.name, run.senet.spec.name};
  rep.clean_eer[run.lcnn.spec.name] = run.clean_eer_lcnn;
  rep.clean_eer[run.senet.spec.name] = run.clean_eer_senet;
  rep.cells = a;
  rep.cells.insert(rep.cells.end(), b.begin(), b.end());
  rep.seed = run.grid.seed;
  rep.grid_digest = "toy acceptance grid";
  return rep;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

int main() {
  const int threads = default_parallelism();
  std::printf("acceptance suite (%d worker thread%s)\n", threads, threads == 1 ? "" : "s");

  criterion(1, "architecture fidelity: table output columns reproduced exactly", [] {
    check_shapes(build_lcnn_small(),
                 {{"Conv_1", {863, 600, 16}},    {"MFM_2", {863, 600, 8}},
                  {"MaxPool_3", {431, 300, 8}},  {"Conv_4", {431, 300, 16}},
                  {"MFM_5", {431, 300, 8}},      {"BatchNorm_6", {431, 300, 8}},
                  {"Conv_7", {431, 300, 24}},    {"MFM_8", {431, 300, 12}},
                  {"MaxPool_9", {215, 150, 12}}, {"BatchNorm_10", {215, 150, 12}},
                  {"Conv_11", {215, 150, 24}},   {"MFM_12", {215, 150, 12}},
                  {"BatchNorm_13", {215, 150, 12}}, {"Conv_14", {215, 150, 24}},
                  {"MFM_15", {215, 150, 12}},    {"MaxPool_16", {107, 75, 12}},
                  {"Conv_17", {107, 75, 24}},    {"MFM_18", {107, 75, 12}},
                  {"BatchNorm_19", {107, 75, 12}}, {"Conv_20", {107, 75, 8}},
                  {"MFM_21", {107, 75, 4}},      {"BatchNorm_22", {107, 75, 4}},
                  {"Conv_23", {107, 75, 8}},     {"MFM_24", {107, 75, 4}},
                  {"BatchNorm_25", {107, 75, 4}}, {"Conv_26", {107, 75, 8}},
                  {"MFM_27", {107, 75, 4}},      {"MaxPool_28", {53, 37, 4}},
                  {"FC_29", {64}},               {"MFM_30", {32}},
                  {"BatchNorm_31", {32}},        {"FC_32", {2}}});
    check_shapes(build_senet12(),
                 {{"Conv_1", {431, 300, 16}},  {"BatchNorm_2", {431, 300, 16}},
                  {"ReLU_3", {431, 300, 16}},  {"MaxPool_4", {215, 150, 16}},
                  {"SE_5", {215, 150, 16}},    {"SE_6a", {107, 75, 32}},
                  {"SE_6b", {107, 75, 32}},    {"SE_7a", {53, 37, 64}},
                  {"SE_7b", {53, 37, 64}},     {"SE_7c", {53, 37, 64}},
                  {"SE_8", {26, 18, 128}},     {"GlobalAvgPool_9", {128}},
                  {"FC_10", {2}}});
    return std::string("32 + 13 rows matched");
  });

  criterion(2, "parameter counts within 10% of the published sizes", [] {
    int64_t small = param_count(build_lcnn_small());
    int64_t senet = param_count(build_senet12());
    require(small >= 459000 && small <= 561000,
            "lcnn-small count " + std::to_string(small) + " outside 0.51M +/- 10%");
    require(senet >= 432000 && senet <= 528000,
            "senet12 count " + std::to_string(senet) + " outside 0.48M +/- 10%");
    return "lcnn-small " + std::to_string(small) + ", senet12 " + std::to_string(senet);
  });

  criterion(3, "gradient suite: primitives and full architectures vs finite differences", [] {
    using advcm::test::grad_check_leaf;
    using advcm::test::random_tensor;
    using advcm::test::weighted_sum;
    Rng rng(1234);
    double worst = 0.0;
    auto track = [&](double v) { worst = std::max(worst, v); };

    {  // conv2d
      auto x = random_tensor({6, 7, 2}, rng);
      auto k = random_tensor({3, 3, 2, 3}, rng);
      auto b = random_tensor({3}, rng);
      auto w = random_tensor({3, 3, 3}, rng);
      auto mk = [&] { return weighted_sum(conv2d(x, k, b, Stride2{2, 2}, PadMode::SameFloor), w); };
      track(grad_check_leaf(mk, x, 20, rng).max_rel_err);
      track(grad_check_leaf(mk, k, 20, rng).max_rel_err);
    }
    {  // maxpool2d
      auto x = random_tensor({6, 6, 2}, rng);
      auto w = random_tensor({3, 3, 2}, rng);
      auto mk = [&] { return weighted_sum(maxpool2d(x, Window2{2, 2}, Stride2{2, 2}), w); };
      track(grad_check_leaf(mk, x, 20, rng).max_rel_err);
    }
    {  // batchnorm2d (train and eval)
      auto x = random_tensor({2, 3, 3, 2}, rng);
      auto g = make_tensor<double>({2}, {1.3, 0.8});
      auto b = make_tensor<double>({2}, {0.2, -0.1});
      auto w = random_tensor({2, 3, 3, 2}, rng);
      auto mk_train = [&] {
        BnStats<double> st;
        st.mean = {0, 0};
        st.var = {1, 1};
        return weighted_sum(batchnorm2d(x, g, b, &st, true), w);
      };
      auto mk_eval = [&] {
        BnStats<double> st;
        st.mean = {0.3, -0.2};
        st.var = {1.4, 0.6};
        return weighted_sum(batchnorm2d(x, g, b, &st, false), w);
      };
      track(grad_check_leaf(mk_train, x, 20, rng).max_rel_err);
      track(grad_check_leaf(mk_eval, x, 20, rng).max_rel_err);
    }
    {  // linear, elementwise set, reductions, mfm variants, gating, losses
      auto x = random_tensor({3, 5}, rng);
      auto w = random_tensor({5, 4}, rng);
      auto b = random_tensor({4}, rng);
      auto ww = random_tensor({3, 4}, rng);
      auto mk = [&] { return weighted_sum(linear(x, w, b), ww); };
      track(grad_check_leaf(mk, x, 15, rng).max_rel_err);
      track(grad_check_leaf(mk, w, 20, rng).max_rel_err);

      auto e = random_tensor({4, 6}, rng, 0.3, 1.7);
      auto we = random_tensor({4, 6}, rng);
      auto mk2 = [&] {
        auto t = relu(add_const(e, -1.0));
        t = add(t, sigmoid(e));
        t = mul(t, exp_t(scale(e, 0.4)));
        t = sub(t, log_t(e));
        t = div(t, add_const(sqrt_t(e), 1.0));
        return weighted_sum(t, we);
      };
      track(grad_check_leaf(mk2, e, 20, rng).max_rel_err);

      auto sp = random_tensor({2, 2, 4}, rng);
      auto wsp = random_tensor({2, 2, 2}, rng);
      auto mk3 = [&] { return weighted_sum(mfm(sp), wsp); };
      track(grad_check_leaf(mk3, sp, 16, rng).max_rel_err);

      auto d = random_tensor({8}, rng);
      auto wd = random_tensor({4}, rng);
      auto mk4 = [&] { return weighted_sum(mfm_dense(d), wd); };
      track(grad_check_leaf(mk4, d, 8, rng).max_rel_err);

      auto gp = random_tensor({3, 4, 2}, rng);
      auto wg = random_tensor({2}, rng);
      auto mk5 = [&] { return weighted_sum(global_avgpool(gp), wg); };
      track(grad_check_leaf(mk5, gp, 12, rng).max_rel_err);

      auto gate = random_tensor({2}, rng, 0.2, 0.8);
      auto wsc = random_tensor({3, 4, 2}, rng);
      auto mk6 = [&] { return weighted_sum(scale_channels(gp, gate), wsc); };
      track(grad_check_leaf(mk6, gp, 12, rng).max_rel_err);

      auto lg = random_tensor({2, 3}, rng);
      auto mk7 = [&] { return softmax_ce_loss(lg, {1, 2}); };
      track(grad_check_leaf(mk7, lg, 6, rng).max_rel_err);

      auto emb = random_tensor({2, 6}, rng);
      auto hw = random_tensor({6, 2}, rng);
      auto mk8 = [&] { return asoftmax_loss(emb, hw, {0, 1}, 4); };
      track(grad_check_leaf(mk8, emb, 12, rng).max_rel_err);
      track(grad_check_leaf(mk8, hw, 12, rng).max_rel_err);
    }

    // full architectures at 64-bit, end-to-end input gradient
    {
      auto spec = build_lcnn_small();
      auto params = init_params<double>(spec, 2024);
      track(fd_input_grad_check(spec, params, 1, 20, rng));
    }
    {
      auto spec = build_senet12();
      auto params = init_params<double>(spec, 2025);
      track(fd_input_grad_check(spec, params, 0, 20, rng));
    }
    require(worst < 1e-4, "max relative error " + fmt(worst) + " >= 1e-4");
    return "max relative error " + fmt(worst);
  });

  criterion(4, "a-softmax matches the direct transcription of the angular loss", [] {
    Rng rng(777);
    const int64_t d = 8, c = 2;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      int m = std::vector<int>{1, 2, 4}[trial % 3];
      auto x = advcm::test::random_tensor({d}, rng, -1.5, 1.5);
      auto w = advcm::test::random_tensor({d, c}, rng);
      int y = static_cast<int>(rng.below(c));
      double got = asoftmax_loss(x, w, {y}, m)->data[0];

      double nx = 0.0;
      for (int64_t i = 0; i < d; ++i) nx += x->data[i] * x->data[i];
      nx = std::sqrt(nx);
      std::vector<double> coss(2);
      for (int64_t j = 0; j < c; ++j) {
        double dot = 0.0, nw = 0.0;
        for (int64_t i = 0; i < d; ++i) {
          dot += x->data[i] * w->data[static_cast<size_t>(i * c + j)];
          nw += w->data[static_cast<size_t>(i * c + j)] * w->data[static_cast<size_t>(i * c + j)];
        }
        coss[static_cast<size_t>(j)] = dot / (nx * std::sqrt(nw));
      }
      double ty = std::acos(std::clamp(coss[static_cast<size_t>(y)], -1.0, 1.0));
      double num = std::exp(nx * std::cos(m * ty));
      double den = num + std::exp(nx * coss[static_cast<size_t>(1 - y)]);
      double want = -std::log(num / den);
      worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-30));
    }
    require(worst <= 1e-10, "max relative error " + fmt(worst) + " > 1e-10");

    auto x = make_tensor<double>({2}, {1.0, 0.0});
    auto w = make_tensor<double>({2, 2}, {0.6, 0.6, 0.8, -0.8});
    require(asoftmax_loss(x, w, {0}, 1)->data[0] == std::log(2.0),
            "symmetric case is not exactly ln 2");
    return "100 cases, max relative error " + fmt(worst);
  });

  criterion(5, "attack soundness over 1000 randomized runs", [] {
    Rng rng(4242);
    advcm::test::TinyMlpTarget mlp(10, 31);
    int runs = 0;
    // 400 linear runs: PGD with alpha = eps/K must equal FGSM exactly
    for (int t = 0; t < 200; ++t) {
      std::vector<float> w(8), x(8);
      for (auto& v : w) v = static_cast<float>(rng.normal());
      for (auto& v : x) v = static_cast<float>(rng.uniform(-6, 6));
      advcm::test::LinearTarget lin(w);
      double eps = t % 4 == 3 ? rng.uniform(0.0, 5.0) : std::vector<double>{0.1, 1, 5}[t % 3];
      auto f = fgsm(lin, x, 0, eps);
      AttackConfig cfg;
      cfg.method = AttackMethod::Pgd;
      cfg.epsilon = eps;
      cfg.iterations = 1 + static_cast<int>(rng.below(10));
      auto p = pgd(lin, x, 0, cfg);
      require(f.perturbed == p.perturbed, "PGD != FGSM on a linear model");
      for (size_t i = 0; i < x.size(); ++i) {
        require(std::abs(static_cast<double>(f.perturbed[i]) - x[i]) <= eps + kLinfSlack,
                "fgsm broke the l-inf ball");
        require(std::abs(static_cast<double>(p.perturbed[i]) - x[i]) <= eps + kLinfSlack,
                "pgd broke the l-inf ball");
      }
      runs += 2;
    }
    // 400 MLP runs, both methods
    for (int t = 0; t < 400; ++t) {
      std::vector<float> x(10);
      for (auto& v : x) v = static_cast<float>(rng.uniform(-6, 6));
      double eps = t % 4 == 3 ? rng.uniform(0.0, 5.0) : std::vector<double>{0.1, 1, 5}[t % 3];
      AttackConfig cfg;
      cfg.method = t % 2 == 0 ? AttackMethod::Fgsm : AttackMethod::Pgd;
      cfg.epsilon = eps;
      cfg.iterations = 5;
      cfg.restarts = 1 + static_cast<int>(rng.below(3));
      cfg.seed = static_cast<uint64_t>(t);
      auto adv = run_attack(mlp, x, t % 2, cfg);
      require(adv.max_abs_delta <= eps + kLinfSlack, "l-inf constraint violated");
      ++runs;
    }
    // 200 restart-selection runs
    for (int t = 0; t < 200; ++t) {
      std::vector<float> x(10);
      for (auto& v : x) v = static_cast<float>(rng.uniform(-4, 4));
      AttackConfig cfg;
      cfg.epsilon = std::vector<double>{0.1, 1, 5}[t % 3];
      cfg.iterations = 4;
      cfg.restarts = 5;
      cfg.seed = static_cast<uint64_t>(t) + 90000;
      auto adv = pgd_restarts(mlp, x, t % 2, cfg);
      require(adv.restart_losses.size() == 5, "missing per-restart losses");
      double best = adv.restart_losses[0];
      for (double l : adv.restart_losses) {
        require(adv.achieved_loss >= l, "returned loss below a recorded restart");
        best = std::max(best, l);
      }
      require(adv.achieved_loss == best, "returned loss is not the restart maximum");
      require(adv.max_abs_delta <= cfg.epsilon + kLinfSlack, "l-inf constraint violated");
      ++runs;
    }
    require(runs >= 1000, "fewer than 1000 runs");
    return std::to_string(runs) + " runs, all inside the ball";
  });

  criterion(6, "metric oracles: EER sweep, rank invariance, t-DCF direct evaluation", [] {
    Rng rng(515);
    for (int trial = 0; trial < 200; ++trial) {
      int nb = 1 + static_cast<int>(rng.below(25));
      int ns = 1 + static_cast<int>(rng.below(25));
      ScoreSet set;
      for (int i = 0; i < nb; ++i)
        set.trials.push_back({"b" + std::to_string(i),
                              std::floor(rng.uniform(-4, 4) * 8.0) / 8.0, TrialLabel::Bonafide});
      for (int i = 0; i < ns; ++i)
        set.trials.push_back({"s" + std::to_string(i),
                              std::floor(rng.uniform(-4, 4) * 8.0) / 8.0, TrialLabel::Spoof});
      double got = eer(set).eer;
      double want = eer_bruteforce(set);
      require(std::abs(got - want) <= 1e-12,
              "eer " + fmt(got) + " != brute force " + fmt(want));
      ScoreSet warped = set;
      for (auto& t : warped.trials) t.score = std::exp(0.5 * t.score) + t.score * 3.0;
      require(eer(warped).eer == got, "EER changed under a strictly increasing transform");
    }
    // t-DCF toy cases
    AsvRates rates{0.05, 0.02, 0.35};
    TdcfParams params;
    for (int trial = 0; trial < 50; ++trial) {
      ScoreSet cm;
      for (int i = 0; i < 3; ++i)
        cm.trials.push_back({"b" + std::to_string(i), rng.uniform(-1, 1), TrialLabel::Bonafide});
      for (int i = 0; i < 3; ++i)
        cm.trials.push_back({"s" + std::to_string(i), rng.uniform(-1, 1), TrialLabel::Spoof});
      double got = min_tdcf(cm, rates, params);
      double want = tdcf_direct(cm, rates, params);
      require(std::abs(got - want) <= 1e-12, "t-DCF mismatch with direct evaluation");
    }
    return "200 EER sets + 50 t-DCF toys matched";
  });

  criterion(7, "feature round trip: interior SNR above 30 dB, exact 863x600 geometry", [] {
    Rng rng(616);
    FeatureConfig cfg;
    double worst_snr = 1e9;
    for (int trial = 0; trial < 20; ++trial) {
      int len = 20000 + static_cast<int>(rng.below(40000));
      Waveform w;
      w.sample_rate = 16000;
      w.samples.resize(static_cast<size_t>(len));
      double f1 = rng.uniform(100, 600), f2 = rng.uniform(700, 3000), f3 = rng.uniform(3100, 7000);
      for (int i = 0; i < len; ++i) {
        double t = i / 16000.0;
        double v = 0.35 * std::sin(2 * M_PI * f1 * t) + 0.2 * std::sin(2 * M_PI * f2 * t) +
                   0.1 * std::sin(2 * M_PI * f3 * t) + 0.02 * rng.normal();
        w.samples[static_cast<size_t>(i)] = static_cast<float>(std::clamp(v, -0.99, 0.99));
      }
      SpectralFeature f = extract(w, cfg);
      require(f.n_bins() == 863 && f.n_frames() == 600, "geometry is not 863x600");
      require(f.log_power.size() == 863u * 600u, "matrix size mismatch");
      Waveform r = reconstruct(f);
      size_t covered = static_cast<size_t>(f.frames_from_signal - 1) * cfg.hop + cfg.window_len;
      double snr = snr_db(w.samples, r.samples, static_cast<size_t>(cfg.window_len),
                          covered - static_cast<size_t>(cfg.window_len));
      worst_snr = std::min(worst_snr, snr);
    }
    require(worst_snr > 30.0, "worst interior SNR " + fmt(worst_snr) + " dB <= 30 dB");
    return "worst interior SNR " + fmt(worst_snr) + " dB over 20 utterances";
  });

  // ---- toy end-to-end pipeline (criteria 8-10 share the trained models) ----

  criterion(8, "toy end-to-end: training quality and white-box degradation trends", [] {
    const int threads = default_parallelism();
    g_toy.work = fs::current_path() / "acceptance_work";
    fs::create_directories(g_toy.work);
    fs::path corpus = g_toy.work / "corpus";
    ToyCorpusConfig tc;  // 1000/150/250 per class = 2000 train, 500 eval
    tc.seed = 7;
    if (!fs::exists(corpus / "protocols" / "eval.txt")) {
      make_toy_corpus(corpus.string(), tc, &std::cerr);
    }
    FeatureConfig fc;
    auto train_entries = parse_protocol((corpus / "protocols" / "train.txt").string());
    auto dev_entries = parse_protocol((corpus / "protocols" / "dev.txt").string());
    auto eval_entries = parse_protocol((corpus / "protocols" / "eval.txt").string());
    require(train_entries.size() >= 2000, "toy corpus has fewer than 2000 training utterances");
    require(eval_entries.size() >= 500, "toy corpus has fewer than 500 eval utterances");
    fs::path cache = corpus / "cache";
    build_feature_cache(train_entries, (corpus / "wav").string(), cache.string(), fc, threads);
    build_feature_cache(dev_entries, (corpus / "wav").string(), cache.string(), fc, threads);
    build_feature_cache(eval_entries, (corpus / "wav").string(), cache.string(), fc, threads);
    g_toy.train_set = dataset_from_protocol(train_entries, cache.string());
    g_toy.dev_set = dataset_from_protocol(dev_entries, cache.string());
    g_toy.eval_set = dataset_from_protocol(eval_entries, cache.string());

    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.patience = 2;
    cfg.max_epochs = 8;
    cfg.seed = 101;
    g_toy.lcnn = train(build_lcnn_toy(), g_toy.train_set, g_toy.dev_set, cfg, &std::cerr).checkpoint;
    cfg.seed = 102;
    g_toy.senet =
        train(build_senet_toy(), g_toy.train_set, g_toy.dev_set, cfg, &std::cerr).checkpoint;

    g_toy.clean_eer_lcnn = evaluate(g_toy.lcnn, g_toy.eval_set, threads).eer_result.eer;
    g_toy.clean_eer_senet = evaluate(g_toy.senet, g_toy.eval_set, threads).eer_result.eer;
    require(g_toy.clean_eer_lcnn < 0.05,
            "reduced LCNN clean EER " + fmt(g_toy.clean_eer_lcnn * 100) + "% >= 5%");
    require(g_toy.clean_eer_senet < 0.05,
            "reduced SENet clean EER " + fmt(g_toy.clean_eer_senet * 100) + "% >= 5%");

    g_toy.grid.methods = {AttackMethod::Fgsm, AttackMethod::Pgd};
    g_toy.grid.epsilons = {0.1, 1.0, 5.0};
    g_toy.grid.iterations = 5;
    g_toy.grid.restarts = 1;
    g_toy.grid.seed = 1000;
    g_toy.white_lcnn = whitebox_campaign(g_toy.lcnn, g_toy.eval_set, g_toy.grid, threads, &std::cerr);
    g_toy.white_senet =
        whitebox_campaign(g_toy.senet, g_toy.eval_set, g_toy.grid, threads, &std::cerr);

    std::ostringstream detail;
    for (auto* pair : {&g_toy.white_lcnn, &g_toy.white_senet}) {
      const auto& cells = *pair;
      const std::string name = cells.front().source;
      double pgd5 = cell_eer(cells, name, name, AttackMethod::Pgd, 5.0);
      require(pgd5 > 0.5, name + ": PGD eps=5 EER " + fmt(pgd5 * 100) + "% is not above 50%");
      for (auto m : {AttackMethod::Fgsm, AttackMethod::Pgd}) {
        double prev = -1.0;
        for (double eps : {0.1, 1.0, 5.0}) {
          double e = cell_eer(cells, name, name, m, eps);
          require(e >= prev - 1e-12, name + ": EER not non-decreasing in eps");
          prev = e;
        }
      }
      for (double eps : {0.1, 1.0, 5.0}) {
        double f = cell_eer(cells, name, name, AttackMethod::Fgsm, eps);
        double p = cell_eer(cells, name, name, AttackMethod::Pgd, eps);
        require(p >= f - 0.01, name + ": PGD EER below FGSM - 1pp at eps " + fmt(eps));
      }
      detail << name << " clean "
             << fmt((name == g_toy.lcnn.spec.name ? g_toy.clean_eer_lcnn : g_toy.clean_eer_senet) *
                    100)
             << "% -> PGD@5 " << fmt(pgd5 * 100) << "%; ";
    }
    emit_report(toy_report(g_toy, g_toy.white_lcnn, g_toy.white_senet),
                (g_toy.work / "report_run1").string());
    return detail.str();
  });

  criterion(9, "toy black-box transfer: cross-model damage and diagonal consistency", [] {
    require(!g_toy.white_lcnn.empty(), "criterion 8 did not run");
    const int threads = default_parallelism();
    auto matrix = blackbox_campaign({&g_toy.lcnn, &g_toy.senet}, {&g_toy.lcnn, &g_toy.senet},
                                    g_toy.eval_set, g_toy.grid, threads, &std::cerr);
    // diagonal cells equal the white-box campaign bit-exactly
    for (const auto* white : {&g_toy.white_lcnn, &g_toy.white_senet}) {
      for (const auto& w : *white) {
        double diag = cell_eer(matrix, w.source, w.source, w.method, w.epsilon);
        require(diag == w.eer, "black-box diagonal differs from white-box at " + w.source);
      }
    }
    // every ordered cross pair at the largest epsilon strictly degrades
    std::ostringstream detail;
    const std::string a = g_toy.lcnn.spec.name, b = g_toy.senet.spec.name;
    struct Pair {
      std::string src, tgt;
      double clean;
    };
    for (const auto& p : {Pair{a, b, g_toy.clean_eer_senet}, Pair{b, a, g_toy.clean_eer_lcnn}}) {
      for (auto m : {AttackMethod::Fgsm, AttackMethod::Pgd}) {
        double e = cell_eer(matrix, p.src, p.tgt, m, 5.0);
        require(e > p.clean, p.src + "->" + p.tgt + " " + method_name(m) + " eps=5 EER " +
                                 fmt(e * 100) + "% not above clean " + fmt(p.clean * 100) + "%");
        detail << p.src << "->" << p.tgt << " " << method_name(m) << "@5 " << fmt(e * 100)
               << "%; ";
      }
    }
    require(matrix.size() == 2u * 2u * 2u * 3u, "transfer matrix is missing cells");
    return detail.str();
  });

  criterion(10, "determinism: identical config reproduces bit-identical report files", [] {
    require(!g_toy.white_lcnn.empty(), "criterion 8 did not run");
    const int threads = default_parallelism();
    auto white_lcnn2 =
        whitebox_campaign(g_toy.lcnn, g_toy.eval_set, g_toy.grid, threads, &std::cerr);
    auto white_senet2 =
        whitebox_campaign(g_toy.senet, g_toy.eval_set, g_toy.grid, threads, &std::cerr);
    emit_report(toy_report(g_toy, white_lcnn2, white_senet2),
                (g_toy.work / "report_run2").string());
    for (const char* f : {"report.txt", "report.csv", "plot_data.csv"}) {
      std::string a = slurp(g_toy.work / "report_run1" / f);
      std::string b = slurp(g_toy.work / "report_run2" / f);
      require(!a.empty(), std::string(f) + " missing from run 1");
      require(a == b, std::string(f) + " differs between identical runs");
    }
    return "report.txt, report.csv, plot_data.csv byte-identical across runs";
  });

  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return 1;
}
