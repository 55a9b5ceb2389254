// Command-line front end: toy corpus generation, training, evaluation,
// white-box and transfer attack campaigns, report emission.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "advcm/harness.hpp"
#include "advcm/threading.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string data_dir;
  std::string cache_dir;
  uint64_t seed = 1;
  int threads = advcm::default_parallelism();
  std::string config_path;
};

void add_common(CLI::App* cmd, CommonOpts& c, bool needs_data = true) {
  if (needs_data) {
    cmd->add_option("--data", c.data_dir, "corpus directory (wav/ + protocols/)")
        ->envname("ADVCM_DATA")
        ->required();
    cmd->add_option("--cache", c.cache_dir, "feature cache directory (default <data>/cache)")
        ->envname("ADVCM_CACHE");
  }
  cmd->add_option("--seed", c.seed, "base RNG seed")->envname("ADVCM_SEED");
  cmd->add_option("--threads", c.threads, "worker threads")->envname("ADVCM_THREADS");
  cmd->add_option("--config", c.config_path,
                  "JSON experiment config; values in it override flags")
      ->envname("ADVCM_CONFIG");
}

json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  json j;
  f >> j;
  return j;
}

template <class T>
void cfg_override(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

advcm::Dataset prepare_split(const CommonOpts& c, const std::string& split,
                             const advcm::FeatureConfig& fc, bool with_phase = false) {
  fs::path data(c.data_dir);
  std::string cache = c.cache_dir.empty() ? (data / "cache").string() : c.cache_dir;
  auto entries = advcm::parse_protocol((data / "protocols" / (split + ".txt")).string());
  int built = advcm::build_feature_cache(entries, (data / "wav").string(), cache, fc, c.threads,
                                         with_phase);
  if (built > 0) std::cerr << "extracted " << built << " " << split << " features\n";
  return advcm::dataset_from_protocol(entries, cache);
}

std::vector<double> parse_eps_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw std::invalid_argument("empty epsilon list");
  return out;
}

std::vector<advcm::AttackMethod> parse_method_list(const std::string& s) {
  std::vector<advcm::AttackMethod> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(advcm::method_from_name(tok));
  if (out.empty()) throw std::invalid_argument("empty method list");
  return out;
}

std::string grid_digest(const advcm::AttackGrid& g) {
  std::ostringstream os;
  os << "methods=";
  for (size_t i = 0; i < g.methods.size(); ++i)
    os << (i ? "," : "") << advcm::method_name(g.methods[i]);
  os << " epsilons=";
  for (size_t i = 0; i < g.epsilons.size(); ++i) os << (i ? "," : "") << g.epsilons[i];
  os << " K=" << g.iterations << " R=" << g.restarts;
  return os.str();
}

bool all_cells_ok(const std::vector<advcm::TransferCell>& cells) {
  for (const auto& c : cells)
    if (!c.ok) return false;
  return !cells.empty();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"training, attack and evaluation toolkit for audio anti-spoofing countermeasures"};
  app.require_subcommand(1);

  // ------------------------------------------------------------ make-toy-corpus
  auto* mk = app.add_subcommand("make-toy-corpus", "generate the synthetic two-class corpus");
  std::string mk_out;
  advcm::ToyCorpusConfig toy;
  mk->add_option("--out", mk_out, "output directory")->envname("ADVCM_OUT")->required();
  mk->add_option("--train-per-class", toy.train_per_class);
  mk->add_option("--dev-per-class", toy.dev_per_class);
  mk->add_option("--eval-per-class", toy.eval_per_class);
  mk->add_option("--min-duration", toy.min_duration_s);
  mk->add_option("--max-duration", toy.max_duration_s);
  mk->add_option("--corpus-seed", toy.seed);

  // ---------------------------------------------------------------------- train
  auto* tr = app.add_subcommand("train", "train a countermeasure model");
  CommonOpts tr_c;
  std::string tr_model = "lcnn-small";
  std::string tr_out = "model.ckpt";
  advcm::TrainConfig tr_cfg;
  add_common(tr, tr_c);
  tr->add_option("--model", tr_model, "registry name or model config path")->envname("ADVCM_MODEL");
  tr->add_option("--out", tr_out, "checkpoint output path")->envname("ADVCM_OUT");
  tr->add_option("--lr", tr_cfg.lr);
  tr->add_option("--batch-size", tr_cfg.batch_size);
  tr->add_option("--weight-decay", tr_cfg.weight_decay);
  tr->add_flag("--decay-in-loss", tr_cfg.decay_in_loss,
               "apply weight decay as loss-term L2 instead of decoupled decay");
  tr->add_option("--patience", tr_cfg.patience);
  tr->add_option("--max-epochs", tr_cfg.max_epochs);

  // ----------------------------------------------------------------------- eval
  auto* ev = app.add_subcommand("eval", "score a split and report EER (and t-DCF with ASV scores)");
  CommonOpts ev_c;
  std::string ev_ckpt, ev_split = "eval", ev_scores_out, ev_asv, ev_tdcf;
  add_common(ev, ev_c);
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->envname("ADVCM_CKPT")->required();
  ev->add_option("--split", ev_split, "protocol split name");
  ev->add_option("--scores-out", ev_scores_out, "write 'utterance_id score' lines here");
  ev->add_option("--asv-scores", ev_asv, "ASV score file (utterance_id score key)");
  ev->add_option("--tdcf-params", ev_tdcf, "t-DCF cost model config");

  // --------------------------------------------------------------------- attack
  auto* at = app.add_subcommand("attack", "white-box attack campaign on one model");
  CommonOpts at_c;
  std::string at_ckpt, at_out = "attack-report", at_methods = "fgsm,pgd", at_eps = "0.1,1,5";
  std::string at_dump;
  int at_iters = 10, at_restarts = 5;
  bool at_wav = false;
  add_common(at, at_c);
  at->add_option("--ckpt", at_ckpt, "checkpoint path")->envname("ADVCM_CKPT")->required();
  at->add_option("--out", at_out, "report output directory")->envname("ADVCM_OUT");
  at->add_option("--methods", at_methods, "comma list: fgsm,pgd");
  at->add_option("--epsilons", at_eps, "comma list of l-inf budgets");
  at->add_option("--iterations", at_iters, "PGD iterations");
  at->add_option("--restarts", at_restarts, "PGD random restarts");
  at->add_option("--dump-dir", at_dump,
                 "also write perturbed features (first method/epsilon cell) here");
  at->add_flag("--wav", at_wav, "with --dump-dir, also write reconstructed adversarial audio");

  // ------------------------------------------------------------------- transfer
  auto* tf = app.add_subcommand("transfer", "black-box transfer matrix across checkpoints");
  CommonOpts tf_c;
  std::vector<std::string> tf_ckpts;
  std::string tf_out = "transfer-report", tf_methods = "fgsm,pgd", tf_eps = "0.1,1,5";
  int tf_iters = 10, tf_restarts = 5;
  add_common(tf, tf_c);
  tf->add_option("--ckpt", tf_ckpts, "checkpoint paths (repeat; at least 2)")
      ->required()
      ->expected(-2);
  tf->add_option("--out", tf_out, "report output directory")->envname("ADVCM_OUT");
  tf->add_option("--methods", tf_methods);
  tf->add_option("--epsilons", tf_eps);
  tf->add_option("--iterations", tf_iters);
  tf->add_option("--restarts", tf_restarts);

  // --------------------------------------------------------------------- report
  auto* rp = app.add_subcommand("report", "re-emit report files from a report.csv");
  std::string rp_in, rp_out = "report-out";
  uint64_t rp_seed = 0;
  rp->add_option("--in", rp_in, "existing report.csv")->required();
  rp->add_option("--out", rp_out, "output directory")->envname("ADVCM_OUT");
  rp->add_option("--seed", rp_seed, "seed to echo into the report header");

  CLI11_PARSE(app, argc, argv);

  try {
    advcm::FeatureConfig fc;

    if (mk->parsed()) {
      advcm::make_toy_corpus(mk_out, toy, &std::cerr);
      return 0;
    }

    if (tr->parsed()) {
      if (!tr_c.config_path.empty()) {
        json j = load_config(tr_c.config_path);
        cfg_override(j, "model", tr_model);
        cfg_override(j, "data", tr_c.data_dir);
        cfg_override(j, "cache", tr_c.cache_dir);
        cfg_override(j, "out", tr_out);
        cfg_override(j, "seed", tr_c.seed);
        cfg_override(j, "threads", tr_c.threads);
        cfg_override(j, "lr", tr_cfg.lr);
        cfg_override(j, "batch_size", tr_cfg.batch_size);
        cfg_override(j, "weight_decay", tr_cfg.weight_decay);
        cfg_override(j, "decay_in_loss", tr_cfg.decay_in_loss);
        cfg_override(j, "patience", tr_cfg.patience);
        cfg_override(j, "max_epochs", tr_cfg.max_epochs);
      }
      tr_cfg.seed = tr_c.seed;
      advcm::ModelSpec spec = advcm::build_named_model(tr_model);
      advcm::Dataset train_set = prepare_split(tr_c, "train", fc);
      advcm::Dataset dev_set = prepare_split(tr_c, "dev", fc);
      advcm::TrainResult res = advcm::train(spec, train_set, dev_set, tr_cfg, &std::cerr);
      advcm::save_checkpoint(tr_out, res.checkpoint);
      std::cerr << "saved " << tr_out << " (best dev accuracy "
                << res.checkpoint.meta.dev_accuracy << " at epoch " << res.checkpoint.meta.epoch
                << ")\n";
      return 0;
    }

    if (ev->parsed()) {
      if (!ev_c.config_path.empty()) {
        json j = load_config(ev_c.config_path);
        cfg_override(j, "ckpt", ev_ckpt);
        cfg_override(j, "data", ev_c.data_dir);
        cfg_override(j, "cache", ev_c.cache_dir);
        cfg_override(j, "split", ev_split);
        cfg_override(j, "threads", ev_c.threads);
      }
      advcm::Checkpoint ckpt = advcm::load_checkpoint(ev_ckpt);
      advcm::Dataset eval_set = prepare_split(ev_c, ev_split, fc);
      std::vector<advcm::AsvTrial> asv;
      advcm::TdcfParams tp;
      if (!ev_tdcf.empty()) tp = advcm::load_tdcf_params(ev_tdcf);
      advcm::EvalResult res;
      if (!ev_asv.empty()) {
        asv = advcm::read_asv_score_file(ev_asv);
        res = advcm::evaluate(ckpt, eval_set, ev_c.threads, &asv, &tp);
      } else {
        res = advcm::evaluate(ckpt, eval_set, ev_c.threads);
      }
      if (!ev_scores_out.empty()) advcm::write_score_file(ev_scores_out, res.scores);
      std::cout << "EER " << res.eer_result.eer * 100.0 << "% (threshold "
                << res.eer_result.threshold << ")\n";
      if (res.min_tdcf_value) std::cout << "min t-DCF " << *res.min_tdcf_value << "\n";
      return 0;
    }

    if (at->parsed()) {
      if (!at_c.config_path.empty()) {
        json j = load_config(at_c.config_path);
        cfg_override(j, "ckpt", at_ckpt);
        cfg_override(j, "data", at_c.data_dir);
        cfg_override(j, "cache", at_c.cache_dir);
        cfg_override(j, "out", at_out);
        cfg_override(j, "methods", at_methods);
        cfg_override(j, "epsilons", at_eps);
        cfg_override(j, "iterations", at_iters);
        cfg_override(j, "restarts", at_restarts);
        cfg_override(j, "seed", at_c.seed);
        cfg_override(j, "threads", at_c.threads);
      }
      advcm::Checkpoint ckpt = advcm::load_checkpoint(at_ckpt);
      advcm::Dataset eval_set = prepare_split(at_c, "eval", fc);
      advcm::AttackGrid grid;
      grid.methods = parse_method_list(at_methods);
      grid.epsilons = parse_eps_list(at_eps);
      grid.iterations = at_iters;
      grid.restarts = at_restarts;
      grid.seed = at_c.seed;

      advcm::EvalResult clean = advcm::evaluate(ckpt, eval_set, at_c.threads);
      auto cells = advcm::whitebox_campaign(ckpt, eval_set, grid, at_c.threads, &std::cerr);

      advcm::RunReport report;
      report.model_names = {ckpt.spec.name};
      report.clean_eer[ckpt.spec.name] = clean.eer_result.eer;
      report.cells = cells;
      report.seed = at_c.seed;
      report.grid_digest = grid_digest(grid);
      advcm::emit_report(report, at_out);
      std::cerr << "report written to " << at_out << "\n";

      if (!at_dump.empty()) {
        fs::create_directories(at_dump);
        advcm::AttackConfig cfg;
        cfg.method = grid.methods.front();
        cfg.epsilon = grid.epsilons.front();
        cfg.iterations = grid.iterations;
        cfg.restarts = grid.restarts;
        cfg.seed = grid.seed;
        advcm::ModelTarget target(ckpt.spec, ckpt.params);
        auto entries = advcm::parse_protocol(
            (fs::path(at_c.data_dir) / "protocols" / "eval.txt").string());
        advcm::parallel_for(static_cast<int64_t>(entries.size()), at_c.threads, [&](int64_t i) {
          const auto& e = entries[static_cast<size_t>(i)];
          advcm::Waveform w = advcm::read_audio(
              (fs::path(at_c.data_dir) / "wav" / (e.utterance + ".wav")).string());
          advcm::SpectralFeature feat = advcm::extract(w, fc);
          advcm::AttackConfig local = cfg;
          local.seed = advcm::derive_attack_seed(cfg, e.utterance);
          auto adv = advcm::run_attack(target, feat.log_power,
                                       e.key == advcm::TrialLabel::Bonafide ? 1 : 0, local,
                                       e.utterance);
          advcm::SpectralFeature pf = feat;  // keeps the original phase
          pf.log_power = adv.perturbed;
          advcm::save_feature((fs::path(at_dump) / (e.utterance + ".feat")).string(), pf,
                              /*compact=*/false, /*with_phase=*/true);
          if (at_wav)
            advcm::write_audio((fs::path(at_dump) / (e.utterance + ".wav")).string(),
                               advcm::reconstruct(pf));
        });
        std::cerr << "perturbed features written to " << at_dump << "\n";
      }
      return all_cells_ok(cells) ? 0 : 1;
    }

    if (tf->parsed()) {
      if (!tf_c.config_path.empty()) {
        json j = load_config(tf_c.config_path);
        cfg_override(j, "data", tf_c.data_dir);
        cfg_override(j, "cache", tf_c.cache_dir);
        cfg_override(j, "out", tf_out);
        cfg_override(j, "methods", tf_methods);
        cfg_override(j, "epsilons", tf_eps);
        cfg_override(j, "iterations", tf_iters);
        cfg_override(j, "restarts", tf_restarts);
        cfg_override(j, "seed", tf_c.seed);
        cfg_override(j, "threads", tf_c.threads);
      }
      std::vector<advcm::Checkpoint> ckpts;
      ckpts.reserve(tf_ckpts.size());
      for (const auto& p : tf_ckpts) ckpts.push_back(advcm::load_checkpoint(p));
      std::vector<advcm::Checkpoint*> refs;
      for (auto& c : ckpts) refs.push_back(&c);

      advcm::Dataset eval_set = prepare_split(tf_c, "eval", fc);
      advcm::AttackGrid grid;
      grid.methods = parse_method_list(tf_methods);
      grid.epsilons = parse_eps_list(tf_eps);
      grid.iterations = tf_iters;
      grid.restarts = tf_restarts;
      grid.seed = tf_c.seed;

      advcm::RunReport report;
      for (auto& c : ckpts) {
        report.model_names.push_back(c.spec.name);
        report.clean_eer[c.spec.name] =
            advcm::evaluate(c, eval_set, tf_c.threads).eer_result.eer;
      }
      report.cells = advcm::blackbox_campaign(refs, refs, eval_set, grid, tf_c.threads, &std::cerr);
      report.seed = tf_c.seed;
      report.grid_digest = grid_digest(grid);
      advcm::emit_report(report, tf_out);
      std::cerr << "report written to " << tf_out << "\n";
      return all_cells_ok(report.cells) ? 0 : 1;
    }

    if (rp->parsed()) {
      advcm::RunReport report;
      report.cells = advcm::parse_report_csv(rp_in);
      report.seed = rp_seed;
      std::set<std::string> names;
      for (const auto& c : report.cells) {
        names.insert(c.source);
        names.insert(c.target);
      }
      report.model_names.assign(names.begin(), names.end());
      advcm::emit_report(report, rp_out);
      std::cerr << "report written to " << rp_out << "\n";
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
