#include "interprior/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "interprior/parallel.hpp"

namespace interprior {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return f;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<PredictionRecord> predict_dataset(const TrainedModels& models, const Dataset& data) {
  std::vector<PredictionRecord> out(data.scenes.size());
  parallel_for(data.scenes.size(), [&](std::size_t i) {
    const SceneRecord& rec = data.scenes[i];
    const auto pred = models.estimator.forward(rec.cloud);
    out[i] = prediction_from_estimates(rec.id, assemble_pose(rec.cloud, pred, models.canonical_boxes));
  });
  return out;
}

TtaRun run_tta(const TrainedModels& models, const Discriminator<float>& D, const Dataset& data,
               const TtaConfig& cfg) {
  TtaRun run;
  run.results.resize(data.scenes.size());
  if (cfg.reset_per_scene) {
    parallel_for(data.scenes.size(), [&](std::size_t i) {
      PoseEstimator<float> est = models.estimator;
      run.results[i] = adapt_object(est, D, data.scenes[i].cloud, models.canonical_boxes, cfg);
    });
  } else {
    PoseEstimator<float> est = models.estimator;
    for (std::size_t i = 0; i < data.scenes.size(); ++i) {
      run.results[i] = adapt_object(est, D, data.scenes[i].cloud, models.canonical_boxes, cfg);
    }
  }
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    run.before.push_back(prediction_from_estimates(data.scenes[i].id, run.results[i].initial));
    run.after.push_back(prediction_from_estimates(data.scenes[i].id, run.results[i].adapted));
  }
  return run;
}

void write_adv_trace_csv(const std::filesystem::path& path, const Dataset& data, const TtaRun& run) {
  auto f = open_out(path);
  f << "scene,step,L_adv,flagged\n";
  for (std::size_t i = 0; i < run.results.size(); ++i) {
    const auto& r = run.results[i];
    for (std::size_t s = 0; s < r.adv_trace.size(); ++s) {
      f << data.scenes[i].id << ',' << s << ',' << num(r.adv_trace[s]) << ',' << (r.flagged ? 1 : 0) << '\n';
    }
    if (r.adv_trace.empty()) f << data.scenes[i].id << ",0,nan," << (r.flagged ? 1 : 0) << '\n';
  }
}

TtaConfig tta_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"steps", "lr", "scope", "reset_per_scene"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::Usage, "unknown TTA config key '" + key + "'");
  }
  TtaConfig c;
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.reset_per_scene = j.value("reset_per_scene", c.reset_per_scene);
  const std::string scope = j.value("scope", std::string("heads_only"));
  if (scope == "heads_only") {
    c.scope = TtaScope::HeadsOnly;
  } else if (scope == "full_encoder") {
    c.scope = TtaScope::FullEncoder;
  } else {
    throw Error(ErrorCode::Usage, "scope must be heads_only or full_encoder");
  }
  if (c.steps < 0 || !(c.lr > 0.0)) throw Error(ErrorCode::Usage, "TTA needs steps >= 0 and lr > 0");
  return c;
}

KinematicHand displace_hand(const KinematicHand& hand, double distance, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d dir;
  do {
    dir = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (dir.norm() < 1e-6);
  KinematicHand out = hand;
  out.root.t += distance * dir.normalized();
  return out;
}

ContactSample predict_contact(const TrainedModels& models, const SceneRecord& rec, std::uint64_t seed) {
  const nn::Matrix<float> z = models.estimator.encode(rec.cloud);
  return models.diffuser.sample(z, models.diffuser.config().generations, seed);
}

std::vector<HandRunRow> run_hand_opt(const TrainedModels* models, const Dataset& data, const HandRunConfig& cfg) {
  if (cfg.source == ContactSource::Diffusion && !models) {
    throw Error(ErrorCode::Usage, "diffusion contact needs a model checkpoint");
  }
  std::vector<HandRunRow> rows(data.scenes.size());
  parallel_for(data.scenes.size(), [&](std::size_t i) {
    const SceneRecord& rec = data.scenes[i];
    const std::uint64_t scene_seed = splitmix64(cfg.seed ^ fnv1a64(rec.id));
    HandRunRow& row = rows[i];
    row.id = rec.id;
    row.category = rec.category;
    ContactMap contact = rec.contact;
    if (cfg.source == ContactSource::Diffusion) {
      contact = predict_contact(*models, rec, splitmix64(scene_seed + 1)).map;
      row.contact_iou = contact_iou(contact, rec.contact);
    }
    const KinematicHand init = displace_hand(rec.hand, cfg.perturb, scene_seed);
    const HandOptResult res = optimize_hand(init, contact, rec.cloud, cfg.opt);
    row.flagged = res.flagged;
    row.contact_points = static_cast<int>(std::count(contact.begin(), contact.end(), 1));
    row.trace = res.trace;
    const auto g0 = init.geometry();
    const auto g1 = res.hand.geometry();
    const HandMetrics before = eval_hand({g0.joints}, {g0.surface}, {rec.hand_joints}, {rec.hand_surface});
    const HandMetrics after = eval_hand({g1.joints}, {g1.surface}, {rec.hand_joints}, {rec.hand_surface});
    row.mpjpe_before = before.mpjpe;
    row.mpvpe_before = before.mpvpe;
    row.mpjpe_after = after.mpjpe;
    row.mpvpe_after = after.mpvpe;
  });
  return rows;
}

void write_hand_report_csv(const std::filesystem::path& path, const std::vector<HandRunRow>& rows) {
  auto f = open_out(path);
  f << "scene,category,contact_points,flagged,mpjpe_before_mm,mpjpe_after_mm,mpvpe_before_mm,mpvpe_after_mm,"
       "contact_iou\n";
  for (const auto& r : rows) {
    f << r.id << ',' << category_name(r.category) << ',' << r.contact_points << ',' << (r.flagged ? 1 : 0) << ','
      << num(r.mpjpe_before) << ',' << num(r.mpjpe_after) << ',' << num(r.mpvpe_before) << ','
      << num(r.mpvpe_after) << ',' << num(r.contact_iou) << '\n';
  }
}

void write_hand_trace_csv(const std::filesystem::path& path, const std::vector<HandRunRow>& rows) {
  auto f = open_out(path);
  f << "scene,iter,L_CD\n";
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.trace.size(); ++k) f << r.id << ',' << k << ',' << num(r.trace[k]) << '\n';
  }
}

}  // namespace interprior
