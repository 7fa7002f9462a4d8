#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "interprior/gradcheck.hpp"
#include "interprior/pipeline.hpp"

namespace fs = std::filesystem;
using namespace interprior;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Usage, path.string() + ": " + e.what());
  }
}

void print_summary(const char* label, const MetricsReport& report) {
  for (const auto& s : report.summaries) {
    std::printf("%s %-9s scenes=%d parts=%d invalid=%d 5deg5cm=%.2f mIoU=%.2f R_err=%.3f T_err=%.3f", label,
                s.category.c_str(), s.scenes, s.parts, s.invalid, s.acc_5deg5cm, s.miou, s.r_err, s.t_err);
    if (s.hand_scenes > 0) std::printf(" MPJPE=%.3f MPVPE=%.3f", s.mpjpe, s.mpvpe);
    std::printf("\n");
  }
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return path.parent_path() / (path.stem().string() + suffix);
}

struct SynthArgs {
  std::string category = "laptop";
  int count = 10;
  std::uint64_t seed = 0;
  std::string out;
  int drawers = 3;
  int points = 1024;
};

int run_synth(const SynthArgs& a) {
  DatasetSpec spec;
  spec.category = parse_category(a.category);
  spec.count = a.count;
  spec.master_seed = a.seed;
  spec.drawers = a.drawers;
  spec.scene.n_points = a.points;
  if (spec.count < 1 || spec.drawers < 1 || spec.drawers > 3 || spec.scene.n_points < 8) {
    throw Error(ErrorCode::Usage, "need count >= 1, drawers in 1..3, points >= 8");
  }
  const Dataset data = generate_dataset(spec);
  write_dataset(data, a.out);
  std::printf("wrote %zu %s scenes to %s (%zu attempts skipped)\n", data.scenes.size(), a.category.c_str(),
              a.out.c_str(), data.skipped_seeds.size());
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out = "model.ckpt";
  std::string log;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  int disc_pretrain_steps = 0;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = TrainConfig::from_json(read_json(a.config));
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  if (a.seed) cfg.seed = *a.seed;
  if (cfg.dataset.empty()) throw Error(ErrorCode::Usage, "no dataset in config or --dataset");
  fs::path dataset = cfg.dataset;
  if (dataset.is_relative() && !fs::exists(dataset)) dataset = fs::path(a.config).parent_path() / dataset;
  const Dataset data = read_dataset(dataset);
  if (data.scenes.empty()) throw Error(ErrorCode::Io, "dataset " + dataset.string() + " is empty");
  TrainedModels models = TrainedModels::initialize(data.spec.category, data.scenes.front().num_parts(), cfg);
  if (a.disc_pretrain_steps > 0) {
    LayoutPretrainConfig lc;
    lc.steps = a.disc_pretrain_steps;
    lc.seed = cfg.seed;
    const double l = pretrain_layout_discriminator(models.discriminator, data.spec.category, data.spec.drawers, lc);
    std::printf("layout pretraining: %d steps, final L_D %.6f\n", lc.steps, l);
  }
  std::vector<EpochLog> log;
  train_models(models, data, cfg, &log, [](const EpochLog& e) {
    std::printf("epoch %3d  L_pose %.5f  seg %.5f  nocs %.5f  rot %.5f  adv %.5f  diff %.5f  D %.5f\n", e.epoch, e.pose,
                e.seg, e.nocs, e.rot, e.adv, e.diff, e.disc);
    std::fflush(stdout);
  });
  models.to_checkpoint().save(a.out);
  const fs::path log_path = a.log.empty() ? sibling(a.out, ".loss.csv") : fs::path(a.log);
  write_loss_log(log_path, log);
  std::printf("wrote %s and %s\n", a.out.c_str(), log_path.c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out = "report.csv";
  std::string predictions;
  bool gt_as_pred = false;
};

int run_eval(const EvalArgs& a) {
  const Dataset data = read_dataset(a.dataset);
  std::vector<PredictionRecord> preds;
  if (a.gt_as_pred) {
    for (const auto& rec : data.scenes) preds.push_back(gt_as_prediction(rec, true));
  } else if (!a.predictions.empty() && a.checkpoint.empty()) {
    preds = read_predictions(a.predictions);
  } else {
    if (a.checkpoint.empty()) throw Error(ErrorCode::Usage, "eval needs --checkpoint, --predictions or --gt-as-pred");
    const TrainedModels models = TrainedModels::from_checkpoint(Checkpoint::load(a.checkpoint));
    preds = predict_dataset(models, data);
    if (!a.predictions.empty()) write_predictions(a.predictions, preds);
  }
  const MetricsReport report = evaluate(preds, data.scenes);
  write_report_csv(a.out, report);
  write_summary_json(sibling(a.out, ".summary.json"), report);
  print_summary("eval", report);
  return 0;
}

struct TtaArgs {
  std::string checkpoint;
  std::string disc;
  std::string dataset;
  std::string config;
  std::string out = "tta";
};

int run_tta_cmd(const TtaArgs& a) {
  const TtaConfig cfg = a.config.empty() ? TtaConfig{} : tta_config_from_json(read_json(a.config));
  const TrainedModels models = TrainedModels::from_checkpoint(Checkpoint::load(a.checkpoint));
  const Discriminator<float> D =
      a.disc.empty() ? models.discriminator : load_discriminator(Checkpoint::load(a.disc));
  const Dataset data = read_dataset(a.dataset);
  const TtaRun run = run_tta(models, D, data, cfg);
  fs::create_directories(a.out);
  const fs::path out = a.out;
  const MetricsReport before = eval_object(run.before, data.scenes);
  const MetricsReport after = eval_object(run.after, data.scenes);
  write_report_csv(out / "before.csv", before);
  write_report_csv(out / "after.csv", after);
  write_summary_json(out / "before.summary.json", before);
  write_summary_json(out / "after.summary.json", after);
  write_adv_trace_csv(out / "adv_trace.csv", data, run);
  int reduced = 0, flagged = 0;
  for (const auto& r : run.results) {
    if (r.flagged) {
      ++flagged;
    } else if (r.adv_trace.back() <= r.adv_trace.front()) {
      ++reduced;
    }
  }
  print_summary("before", before);
  print_summary("after ", after);
  std::printf("L_adv not increased on %d of %zu scenes (%d flagged)\n", reduced, run.results.size(), flagged);
  return 0;
}

struct HandArgs {
  std::string checkpoint;
  std::string dataset;
  double perturb = 0.1;
  std::uint64_t seed = 0;
  std::string contact;
  std::string out = "hand";
  int iters = 200;
  double lr = 1e-2;
};

int run_hand(const HandArgs& a) {
  HandRunConfig cfg;
  cfg.perturb = a.perturb;
  cfg.seed = a.seed;
  cfg.opt.iters = a.iters;
  cfg.opt.lr = a.lr;
  const std::string source = a.contact.empty() ? (a.checkpoint.empty() ? "gt" : "diffusion") : a.contact;
  if (source == "gt") {
    cfg.source = ContactSource::GroundTruth;
  } else if (source == "diffusion") {
    cfg.source = ContactSource::Diffusion;
  } else {
    throw Error(ErrorCode::Usage, "--contact must be gt or diffusion");
  }
  std::optional<TrainedModels> models;
  if (!a.checkpoint.empty()) models = TrainedModels::from_checkpoint(Checkpoint::load(a.checkpoint));
  const Dataset data = read_dataset(a.dataset);
  const auto rows = run_hand_opt(models ? &*models : nullptr, data, cfg);
  fs::create_directories(a.out);
  write_hand_report_csv(fs::path(a.out) / "hand_report.csv", rows);
  write_hand_trace_csv(fs::path(a.out) / "hand_trace.csv", rows);
  double jb = 0, ja = 0, vb = 0, va = 0;
  int improved = 0;
  for (const auto& r : rows) {
    jb += r.mpjpe_before;
    ja += r.mpjpe_after;
    vb += r.mpvpe_before;
    va += r.mpvpe_after;
    if (r.mpjpe_after < r.mpjpe_before) ++improved;
  }
  const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  std::printf("contact=%s MPJPE %.3f -> %.3f mm, MPVPE %.3f -> %.3f mm, improved on %d of %zu scenes\n",
              source.c_str(), jb / n, ja / n, vb / n, va / n, improved, rows.size());
  return 0;
}

int run_gradcheck(std::uint64_t seed, int probes) {
  GradCheckConfig cfg;
  cfg.seed = seed;
  cfg.probes = probes;
  bool ok = true;
  for (const auto& r : run_gradchecks(cfg)) {
    std::printf("%-14s %s  probed=%-4d skipped=%-3d max_rel_error=%.3g  worst: %s\n", r.suite.c_str(),
                r.passed ? "PASS" : "FAIL", r.probed, r.skipped, r.max_rel_error, r.worst.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitRuntime;
}

struct PretrainArgs {
  std::string category = "drawer";
  int drawers = 3;
  int steps = 3000;
  std::uint64_t seed = 0;
  std::string out = "disc.ckpt";
};

int run_pretrain(const PretrainArgs& a) {
  const Category cat = parse_category(a.category);
  DiscriminatorConfig dc;
  dc.num_parts = category_part_count(cat, a.drawers);
  Discriminator<float> D(dc, splitmix64(a.seed + 2));
  LayoutPretrainConfig lc;
  lc.steps = a.steps;
  lc.seed = a.seed;
  const double l = pretrain_layout_discriminator(D, cat, a.drawers, lc);
  discriminator_checkpoint(D, cat).save(a.out);
  std::printf("final L_D %.6f, wrote %s\n", l, a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Articulated-object and hand pose estimation with interaction priors"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic dataset");
  s->add_option("--category", synth.category, "laptop, drawer, safe, microwave or trashcan")->required();
  s->add_option("--count", synth.count, "number of scenes")->required();
  s->add_option("--seed", synth.seed, "master seed");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--drawers", synth.drawers, "drawer count for the drawer category");
  s->add_option("--points", synth.points, "points per cloud");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train estimator and priors jointly");
  t->add_option("--config", train.config, "training config JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "checkpoint path");
  t->add_option("--log", train.log, "loss log CSV (default <out>.loss.csv)");
  t->add_option("--dataset", train.dataset, "overrides the config's dataset");
  t->add_option("--seed", train.seed, "overrides the config's seed");
  t->add_option("--disc-pretrain-steps", train.disc_pretrain_steps, "layout pretraining steps for the discriminator");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate predictions against a dataset");
  e->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
  e->add_option("--dataset", ev.dataset, "dataset directory")->required();
  e->add_option("--out", ev.out, "report CSV; the JSON summary goes next to it");
  e->add_option("--predictions", ev.predictions, "predictions directory (read, or written with --checkpoint)");
  e->add_flag("--gt-as-pred", ev.gt_as_pred, "score the ground truth against itself");

  TtaArgs tta;
  auto* a = app.add_subcommand("tta", "discriminator-guided test-time adaptation");
  a->add_option("--checkpoint", tta.checkpoint, "model checkpoint")->required();
  a->add_option("--disc", tta.disc, "discriminator checkpoint (default: the model's)");
  a->add_option("--dataset", tta.dataset, "dataset directory")->required();
  a->add_option("--config", tta.config, "TTA config JSON");
  a->add_option("--out", tta.out, "output directory");

  HandArgs hand;
  auto* h = app.add_subcommand("hand-opt", "contact-guided hand optimization");
  h->add_option("--checkpoint", hand.checkpoint, "model checkpoint (needed for diffusion contact)");
  h->add_option("--dataset", hand.dataset, "dataset directory")->required();
  h->add_option("--perturb", hand.perturb, "initial root displacement in meters");
  h->add_option("--seed", hand.seed, "seed for displacement and sampling");
  h->add_option("--contact", hand.contact, "gt or diffusion");
  h->add_option("--iters", hand.iters, "optimizer iterations");
  h->add_option("--lr", hand.lr, "optimizer step size");
  h->add_option("--out", hand.out, "output directory");

  std::uint64_t gc_seed = 0;
  int gc_probes = 8;
  auto* g = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  g->add_option("--seed", gc_seed, "seed");
  g->add_option("--probes", gc_probes, "coordinates per tensor");

  PretrainArgs pre;
  auto* p = app.add_subcommand("pretrain-disc", "train a layout discriminator on synthetic layouts");
  p->add_option("--category", pre.category, "category");
  p->add_option("--drawers", pre.drawers, "drawer count");
  p->add_option("--steps", pre.steps, "optimizer steps");
  p->add_option("--seed", pre.seed, "seed");
  p->add_option("--out", pre.out, "checkpoint path");

  auto* v = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(train);
    if (*e) return run_eval(ev);
    if (*a) return run_tta_cmd(tta);
    if (*h) return run_hand(hand);
    if (*g) return run_gradcheck(gc_seed, gc_probes);
    if (*p) return run_pretrain(pre);
    if (*v) {
      std::printf("interprior %s\n", INTERPRIOR_VERSION);
      return 0;
    }
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    if (err.code() == ErrorCode::Usage) {
      std::fprintf(stderr, "%s", app.help().c_str());
      return kExitUsage;
    }
    return kExitRuntime;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
