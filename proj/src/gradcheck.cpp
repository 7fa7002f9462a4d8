#include "interprior/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "interprior/estimator.hpp"
#include "interprior/priors.hpp"
#include "interprior/synth.hpp"
#include "interprior/train.hpp"
#include "interprior/tta.hpp"

namespace interprior {

namespace {

class Tracker {
 public:
  Tracker(std::string suite, const GradCheckConfig& cfg) : cfg_(cfg) { r_.suite = std::move(suite); }

  // `coarse` and `fine` are central differences at step h and h/2. When they
  // disagree the probe straddles a ReLU or nearest-neighbor switch and is skipped.
  void add(const std::string& where, double analytic, double coarse, double fine) {
    if (std::abs(coarse - fine) > cfg_.tolerance * std::max({std::abs(coarse), std::abs(fine), 1e-6})) {
      ++r_.skipped;
      return;
    }
    const double numeric = fine;
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double err = std::abs(analytic - numeric) / denom;
    ++r_.probed;
    // NaN compares false, so it always becomes the worst entry
    if (r_.probed == 1 || (!std::isnan(r_.max_rel_error) && !(err <= r_.max_rel_error))) {
      r_.max_rel_error = err;
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s analytic=%.6g numeric=%.6g", where.c_str(), analytic, numeric);
      r_.worst = buf;
    }
  }

  GradCheckResult finish() {
    r_.passed = r_.probed > 0 && r_.max_rel_error <= cfg_.tolerance;
    return r_;
  }

 private:
  const GradCheckConfig& cfg_;
  GradCheckResult r_;
};

std::vector<nn::Matrix<double>> grads_of(const nn::ParamStore<double>& store) {
  std::vector<nn::Matrix<double>> g;
  for (const auto& e : store.entries()) g.push_back(e.grad);
  return g;
}

template <typename LossFn>
double central_difference(double& x, double h, LossFn&& loss) {
  const double v = x;
  x = v + h;
  const double lp = loss();
  x = v - h;
  const double lm = loss();
  x = v;
  return (lp - lm) / (2.0 * h);
}

template <typename LossFn>
void probe_store(nn::ParamStore<double>& store, const std::vector<nn::Matrix<double>>& analytic, LossFn&& loss,
                 std::mt19937_64& rng, const GradCheckConfig& cfg, Tracker& tr) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Index rows = store.value(i).rows();
    const Index cols = store.value(i).cols();
    for (int k = 0; k < cfg.probes; ++k) {
      const Index r = std::uniform_int_distribution<Index>(0, rows - 1)(rng);
      const Index c = std::uniform_int_distribution<Index>(0, cols - 1)(rng);
      auto& x = store.mutable_value(i)(r, c);
      tr.add(store.name(i) + "(" + std::to_string(r) + "," + std::to_string(c) + ")", analytic[i](r, c),
             central_difference(x, cfg.step, loss), central_difference(x, 0.5 * cfg.step, loss));
    }
  }
}

template <typename M, typename LossFn>
void probe_matrix(M& m, const M& analytic, const std::string& name, LossFn&& loss, std::mt19937_64& rng,
                  const GradCheckConfig& cfg, Tracker& tr) {
  for (int k = 0; k < cfg.probes; ++k) {
    const Index r = std::uniform_int_distribution<Index>(0, m.rows() - 1)(rng);
    const Index c = std::uniform_int_distribution<Index>(0, m.cols() - 1)(rng);
    auto& x = m(r, c);
    tr.add(name + "(" + std::to_string(r) + "," + std::to_string(c) + ")", analytic(r, c),
           central_difference(x, cfg.step, loss), central_difference(x, 0.5 * cfg.step, loss));
  }
}

nn::Matrix<double> random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  nn::Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

EstimatorConfig small_estimator(int parts) {
  EstimatorConfig c;
  c.num_parts = parts;
  c.local_hidden = 16;
  c.feature = 16;
  c.head_hidden = 16;
  return c;
}

double linear_functional(const HeadOutput<double>& out, const HeadGrad<double>& g) {
  return out.seg_logits.cwiseProduct(g.seg_logits).sum() + out.nocs.cwiseProduct(g.nocs).sum() +
         out.rot6d.cwiseProduct(g.rot6d).sum() + out.z.cwiseProduct(g.z).sum();
}

GradCheckResult check_network(const GradCheckConfig& cfg, bool encoder) {
  Tracker tr(encoder ? "encoder" : "heads", cfg);
  std::mt19937_64 rng(splitmix64(cfg.seed ^ (encoder ? 0xE1ull : 0xE2ull)));
  PoseEstimator<double> est(small_estimator(2), rng());
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  Points<double> cloud(24, 3);
  for (Index i = 0; i < cloud.size(); ++i) cloud.data()[i] = u(rng);
  EstimatorTape<double> tape;
  const HeadOutput<double> out = est.forward(cloud, &tape);
  HeadGrad<double> g;
  g.seg_logits = random_matrix(out.seg_logits.rows(), out.seg_logits.cols(), rng);
  g.nocs = random_matrix(out.nocs.rows(), 3, rng);
  g.rot6d = random_matrix(out.rot6d.rows(), 6, rng);
  g.z = random_matrix(out.z.rows(), out.z.cols(), rng);
  est.zero_grad();
  est.backward(tape, g);
  auto loss = [&] { return linear_functional(est.forward(cloud), g); };
  if (encoder) {
    probe_store(est.encoder_params, grads_of(est.encoder_params), loss, rng, cfg, tr);
  } else {
    probe_store(est.head_params, grads_of(est.head_params), loss, rng, cfg, tr);
  }
  return tr.finish();
}

}  // namespace

GradCheckResult gradcheck_encoder(const GradCheckConfig& cfg) { return check_network(cfg, true); }

GradCheckResult gradcheck_heads(const GradCheckConfig& cfg) { return check_network(cfg, false); }

GradCheckResult gradcheck_end_to_end(const GradCheckConfig& cfg) {
  Tracker tr("end_to_end", cfg);
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xE3ull));
  SceneConfig sc;
  sc.n_points = 96;
  sc.hand_samples = 128;
  const auto inst = make_instance(Category::Laptop, splitmix64(cfg.seed + 11));
  SceneRecord rec;
  for (std::uint64_t attempt = 0;; ++attempt) {
    try {
      rec = sample_scene(inst, scene_seed_for(cfg.seed, attempt), sc);
      break;
    } catch (const Error&) {
      if (attempt > 50) throw;
    }
  }
  const PoseTarget target = make_pose_target(rec);
  const auto canonical = category_canonical_boxes(Category::Laptop, rec.num_parts());

  // Random weights need not claim three points per part; draw until they do.
  PoseEstimator<double> est;
  bool found = false;
  for (int attempt = 0; attempt < 200 && !found; ++attempt) {
    est = PoseEstimator<double>(small_estimator(rec.num_parts()), rng());
    const auto parts = assemble_pose(rec.cloud, est.forward(rec.cloud), canonical);
    found = std::all_of(parts.begin(), parts.end(), [](const auto& p) { return p.valid; });
  }
  if (!found) {
    tr.add("no estimator with all parts valid", 0.0, 1.0, 1.0);
    return tr.finish();
  }
  std::vector<BoxVertices<double>> gb;
  for (int p = 0; p < rec.num_parts(); ++p) gb.push_back(random_matrix(8, 3, rng));

  auto loss = [&] {
    const HeadOutput<double> out = est.forward(rec.cloud);
    double l = pose_loss(out, target, LossWeights{}).total;
    const auto parts = assemble_pose(rec.cloud, out, canonical);
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (parts[p].valid) l += parts[p].box.vertices.cwiseProduct(gb[p]).sum();
    }
    return l;
  };
  EstimatorTape<double> tape;
  const HeadOutput<double> out = est.forward(rec.cloud, &tape);
  HeadGrad<double> grad;
  pose_loss(out, target, LossWeights{}, &grad);
  const auto parts = assemble_pose(rec.cloud, out, canonical);
  assemble_pose_backward(rec.cloud, out, parts, canonical, gb, grad);
  est.zero_grad();
  est.backward(tape, grad);
  probe_store(est.encoder_params, grads_of(est.encoder_params), loss, rng, cfg, tr);
  probe_store(est.head_params, grads_of(est.head_params), loss, rng, cfg, tr);
  return tr.finish();
}

GradCheckResult gradcheck_discriminator(const GradCheckConfig& cfg) {
  Tracker tr("discriminator", cfg);
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xE4ull));
  const int drawers = 2;
  DiscriminatorConfig dc;
  dc.num_parts = category_part_count(Category::Drawer, drawers);
  dc.hidden = {32, 32};
  Discriminator<double> D(dc, rng());
  LayoutPretrainConfig lc;
  std::vector<Layout<double>> real, fake;
  for (int b = 0; b < 4; ++b) {
    const auto s = sample_layout_with_axes(Category::Drawer, drawers, rng());
    real.push_back(s.boxes);
    fake.push_back(random_corruption(s.boxes, s.joint_axes, rng, lc));
  }
  D.params.zero_grad();
  d_loss(D, real, fake, true);
  probe_store(D.params, grads_of(D.params), [&] { return d_loss(D, real, fake, false); }, rng, cfg, tr);

  std::vector<std::vector<BoxVertices<double>>> gb;
  g_adv_loss(D, fake, &gb);
  for (std::size_t b = 0; b < fake.size(); ++b) {
    for (std::size_t p = 0; p < fake[b].size(); ++p) {
      probe_matrix(fake[b][p].vertices, gb[b][p], "layout" + std::to_string(b) + ".box" + std::to_string(p),
                   [&] { return g_adv_loss(D, fake); }, rng, cfg, tr);
    }
  }
  return tr.finish();
}

GradCheckResult gradcheck_denoiser(const GradCheckConfig& cfg) {
  Tracker tr("denoiser", cfg);
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xE5ull));
  DiffusionConfig dc;
  dc.T = 10;
  dc.z_width = 16;
  dc.time_dim = 8;
  dc.hidden = 16;
  ContactDiffuser<double> diff(dc, rng());
  const Index n = 20;
  nn::Matrix<double> z = random_matrix(n, dc.z_width, rng);
  ContactMap contact(static_cast<std::size_t>(n));
  for (auto& c : contact) c = std::bernoulli_distribution(0.3)(rng) ? 1 : 0;
  const std::mt19937_64 draw(rng());
  auto loss = [&] {
    std::mt19937_64 r = draw;
    return diff.diff_loss(z, contact, r);
  };
  std::mt19937_64 r = draw;
  nn::Matrix<double> gz;
  diff.params.zero_grad();
  diff.diff_loss(z, contact, r, true, 1.0, &gz);
  probe_store(diff.params, grads_of(diff.params), loss, rng, cfg, tr);
  probe_matrix(z, gz, "z", loss, rng, cfg, tr);
  return tr.finish();
}

GradCheckResult gradcheck_hand_chamfer(const GradCheckConfig& cfg) {
  Tracker tr("hand_chamfer", cfg);
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xE6ull));
  SceneConfig sc;
  sc.n_points = 256;
  sc.hand_samples = 128;
  const auto inst = make_instance(Category::Drawer, splitmix64(cfg.seed + 12), 2);
  SceneRecord rec;
  for (std::uint64_t attempt = 0;; ++attempt) {
    try {
      rec = sample_scene(inst, scene_seed_for(cfg.seed + 1, attempt), sc);
      if (std::count(rec.contact.begin(), rec.contact.end(), 1) > 0) break;
    } catch (const Error&) {
      if (attempt > 50) throw;
    }
  }
  const Points<double> C = select_contact_points(rec.contact, rec.cloud);
  HandParams p = rec.hand.to_params();
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 6; i < 9; ++i) p(i) += 0.01 * n(rng);
  for (int i = 9; i < kHandParams; ++i) p(i) = std::clamp(p(i) + 0.1 * n(rng), 0.05, kMaxFlexion - 0.05);
  HandParams g;
  hand_chamfer(p, C, rec.hand.surface_samples, &g);
  const auto loss = [&] { return hand_chamfer(p, C, rec.hand.surface_samples); };
  for (int i = 0; i < kHandParams; ++i) {
    tr.add("param" + std::to_string(i), g(i), central_difference(p(i), cfg.step, loss),
           central_difference(p(i), 0.5 * cfg.step, loss));
  }
  return tr.finish();
}

std::vector<GradCheckResult> run_gradchecks(const GradCheckConfig& cfg) {
  return {gradcheck_encoder(cfg),       gradcheck_heads(cfg),    gradcheck_end_to_end(cfg),
          gradcheck_discriminator(cfg), gradcheck_denoiser(cfg), gradcheck_hand_chamfer(cfg)};
}

}  // namespace interprior
