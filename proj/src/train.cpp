#include "interprior/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

namespace interprior {

nlohmann::json TrainConfig::to_json() const {
  return {{"dataset", dataset},
          {"lambda_seg", pose.seg},
          {"lambda_nocs", pose.nocs},
          {"lambda_rot", pose.rot},
          {"lambda_adv", prior.adv},
          {"lambda_diff", prior.diff},
          {"lr", lr},
          {"disc_lr", disc_lr},
          {"diff_lr", diff_lr},
          {"lr_decay", lr_decay},
          {"epochs", epochs},
          {"batch", batch},
          {"adv_start_epoch", adv_start_epoch},
          {"seed", seed},
          {"local_hidden", estimator.local_hidden},
          {"feature", estimator.feature},
          {"head_hidden", estimator.head_hidden},
          {"disc_hidden", disc_hidden},
          {"diffusion_T", diffusion.T},
          {"beta_start", diffusion.beta_start},
          {"beta_end", diffusion.beta_end},
          {"time_dim", diffusion.time_dim},
          {"diffusion_hidden", diffusion.hidden},
          {"generations", diffusion.generations}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  const std::set<std::string> known = [] {
    std::set<std::string> k;
    const nlohmann::json defaults = TrainConfig{}.to_json();
    for (const auto& [key, value] : defaults.items()) k.insert(key);
    return k;
  }();
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::Usage, "unknown training config key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("dataset", c.dataset);
  get("lambda_seg", c.pose.seg);
  get("lambda_nocs", c.pose.nocs);
  get("lambda_rot", c.pose.rot);
  get("lambda_adv", c.prior.adv);
  get("lambda_diff", c.prior.diff);
  get("lr", c.lr);
  get("disc_lr", c.disc_lr);
  get("diff_lr", c.diff_lr);
  get("lr_decay", c.lr_decay);
  get("epochs", c.epochs);
  get("batch", c.batch);
  get("adv_start_epoch", c.adv_start_epoch);
  get("seed", c.seed);
  get("local_hidden", c.estimator.local_hidden);
  get("feature", c.estimator.feature);
  get("head_hidden", c.estimator.head_hidden);
  get("disc_hidden", c.disc_hidden);
  get("diffusion_T", c.diffusion.T);
  get("beta_start", c.diffusion.beta_start);
  get("beta_end", c.diffusion.beta_end);
  get("time_dim", c.diffusion.time_dim);
  get("diffusion_hidden", c.diffusion.hidden);
  get("generations", c.diffusion.generations);
  if (c.epochs < 0 || c.batch < 1) throw Error(ErrorCode::Usage, "epochs must be >= 0 and batch >= 1");
  return c;
}

TrainedModels TrainedModels::initialize(Category category, int num_parts, const TrainConfig& cfg) {
  TrainedModels m;
  m.category = category;
  m.config = cfg;
  EstimatorConfig ec = cfg.estimator;
  ec.num_parts = num_parts;
  m.estimator = PoseEstimator<float>(ec, splitmix64(cfg.seed + 1));
  DiscriminatorConfig dc;
  dc.num_parts = num_parts;
  dc.hidden = cfg.disc_hidden;
  m.discriminator = Discriminator<float>(dc, splitmix64(cfg.seed + 2));
  DiffusionConfig fc = cfg.diffusion;
  fc.z_width = ec.z_width();
  m.diffuser = ContactDiffuser<float>(fc, splitmix64(cfg.seed + 3));
  m.config.diffusion = fc;
  m.canonical_boxes = category_canonical_boxes(category, num_parts);
  return m;
}

Checkpoint TrainedModels::to_checkpoint() const {
  Checkpoint c;
  nlohmann::json halves = nlohmann::json::array();
  for (const auto& b : canonical_boxes) halves.push_back({b.vertices(7, 0), b.vertices(7, 1), b.vertices(7, 2)});
  c.meta = {{"format", "interprior-models"},
            {"category", category_name(category)},
            {"estimator", estimator.config().to_json()},
            {"discriminator", discriminator.config().to_json()},
            {"diffusion", diffuser.config().to_json()},
            {"canonical_half_extents", halves},
            {"train_config", config.to_json()}};
  c.put_group("encoder", estimator.encoder_params);
  c.put_group("heads", estimator.head_params);
  c.put_group("disc", discriminator.params);
  c.put_group("diffuser", diffuser.params);
  return c;
}

TrainedModels TrainedModels::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("format", "") != "interprior-models") throw Error(ErrorCode::Format, "not a model checkpoint");
  TrainedModels m;
  m.category = parse_category(ckpt.meta.at("category").get<std::string>());
  m.config = TrainConfig::from_json(ckpt.meta.at("train_config"));
  m.estimator = PoseEstimator<float>::bind(EstimatorConfig::from_json(ckpt.meta.at("estimator")),
                                           ckpt.get_group<float>("encoder"), ckpt.get_group<float>("heads"));
  m.discriminator = Discriminator<float>::bind(DiscriminatorConfig::from_json(ckpt.meta.at("discriminator")),
                                               ckpt.get_group<float>("disc"));
  m.diffuser = ContactDiffuser<float>::bind(DiffusionConfig::from_json(ckpt.meta.at("diffusion")),
                                            ckpt.get_group<float>("diffuser"));
  for (const auto& h : ckpt.meta.at("canonical_half_extents")) {
    m.canonical_boxes.push_back(
        OrientedBox<double>::from_half_extents({h[0].get<double>(), h[1].get<double>(), h[2].get<double>()}));
  }
  return m;
}

namespace {

nn::AdamConfig adam_with(double lr) {
  nn::AdamConfig a;
  a.lr = lr;
  return a;
}

Layout<float> posed_layout(const SceneRecord& rec) {
  Layout<float> out;
  for (const auto& b : rec.posed_boxes) out.push_back(b.cast<float>());
  return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TrainedModels train_models(const Dataset& data, const TrainConfig& cfg, std::vector<EpochLog>* log,
                           const EpochCallback& on_epoch) {
  if (data.scenes.empty()) throw Error(ErrorCode::Io, "training dataset is empty");
  TrainedModels models = TrainedModels::initialize(data.spec.category, data.scenes.front().num_parts(), cfg);
  train_models(models, data, cfg, log, on_epoch);
  return models;
}

void train_models(TrainedModels& models, const Dataset& data, const TrainConfig& cfg, std::vector<EpochLog>* log,
                  const EpochCallback& on_epoch) {
  if (data.scenes.empty()) throw Error(ErrorCode::Io, "training dataset is empty");
  const int P = models.estimator.config().num_parts;
  for (const auto& rec : data.scenes) {
    if (rec.num_parts() != P) throw Error(ErrorCode::PartCountMismatch, "scene " + rec.id + " part count");
  }
  std::vector<PoseTarget> targets;
  for (const auto& rec : data.scenes) targets.push_back(make_pose_target(rec));

  auto& est = models.estimator;
  auto& disc = models.discriminator;
  auto& diff = models.diffuser;
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x7261696eull));
  std::vector<std::size_t> order(data.scenes.size());
  std::iota(order.begin(), order.end(), 0);
  const bool use_diff = cfg.prior.diff > 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double decay = std::pow(cfg.lr_decay, epoch);
    const bool use_adv = cfg.prior.adv > 0.0 && epoch >= cfg.adv_start_epoch;
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog e;
    e.epoch = epoch + 1;
    int adv_count = 0, disc_count = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      est.zero_grad();
      diff.params.zero_grad();
      disc.params.zero_grad();
      std::vector<Layout<float>> real, fake;
      for (std::size_t k = start; k < stop; ++k) {
        const SceneRecord& rec = data.scenes[order[k]];
        EstimatorTape<float> tape;
        const HeadOutput<float> pred = est.forward(rec.cloud, &tape);
        HeadGrad<float> grad;
        const PoseLoss pl = pose_loss(pred, targets[order[k]], cfg.pose, &grad);
        if (!std::isfinite(pl.total)) throw Error(ErrorCode::NonFiniteLoss, "pose loss diverged at scene " + rec.id);
        e.pose += pl.total;
        e.seg += pl.seg;
        e.nocs += pl.nocs;
        e.rot += pl.rot;
        if (use_adv) {
          const auto parts = assemble_pose(rec.cloud, pred, models.canonical_boxes);
          const bool all_valid = std::all_of(parts.begin(), parts.end(), [](const auto& p) { return p.valid; });
          if (all_valid) {
            Layout<float> boxes;
            for (const auto& p : parts) boxes.push_back(p.box);
            std::vector<std::vector<BoxVertices<float>>> gb;
            const double adv = g_adv_loss(disc, {boxes}, &gb);
            for (auto& g : gb.front()) g *= static_cast<float>(cfg.prior.adv);
            assemble_pose_backward(rec.cloud, pred, parts, models.canonical_boxes, gb.front(), grad);
            e.adv += adv;
            ++adv_count;
            fake.push_back(std::move(boxes));
            real.push_back(posed_layout(rec));
          }
        }
        if (use_diff) {
          nn::Matrix<float> gz;
          e.diff += diff.diff_loss(pred.z, rec.contact, rng, true, cfg.prior.diff, &gz);
          grad.z = std::move(gz);
        }
        est.backward(tape, grad);
      }
      const float inv_b = 1.0f / static_cast<float>(stop - start);
      est.encoder_params.scale_grad(inv_b);
      est.head_params.scale_grad(inv_b);
      est.encoder_params.adam_step(adam_with(cfg.lr * decay));
      est.head_params.adam_step(adam_with(cfg.lr * decay));
      if (use_diff) {
        diff.params.scale_grad(inv_b / static_cast<float>(cfg.prior.diff));
        diff.params.adam_step(adam_with(cfg.diff_lr * decay));
      }
      if (!fake.empty()) {
        e.disc += d_loss(disc, real, fake, true);
        ++disc_count;
        disc.params.adam_step(adam_with(cfg.disc_lr * decay));
      }
    }
    const double n = static_cast<double>(data.scenes.size());
    e.pose /= n;
    e.seg /= n;
    e.nocs /= n;
    e.rot /= n;
    e.diff = use_diff ? e.diff / n : kNaN;
    e.adv = use_adv ? (adv_count ? e.adv / adv_count : kNaN) : kNaN;
    e.disc = use_adv ? (disc_count ? e.disc / disc_count : kNaN) : kNaN;
    if (log) log->push_back(e);
    if (on_epoch) on_epoch(e);
  }
  models.config = cfg;
  models.config.diffusion = diff.config();
}

void write_loss_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f << "epoch,L_pose,L_seg,L_nocs,L_rot,L_adv,L_diff,L_D\n";
  auto cell = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const auto& e : log) {
    f << e.epoch << ',' << cell(e.pose) << ',' << cell(e.seg) << ',' << cell(e.nocs) << ',' << cell(e.rot) << ','
      << cell(e.adv) << ',' << cell(e.diff) << ',' << cell(e.disc) << '\n';
  }
}

Layout<double> random_corruption(const Layout<double>& gt, const std::vector<Eigen::Vector3d>& joint_axes,
                                 std::mt19937_64& rng, const LayoutPretrainConfig& cfg) {
  const std::size_t part = std::uniform_int_distribution<std::size_t>(0, gt.size() - 1)(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < 0.5) {
    const double deg = cfg.min_angle_deg + u(rng) * (cfg.max_angle_deg - cfg.min_angle_deg);
    return corrupt_layout(gt, part, Corruption::Rotation, deg * M_PI / 180.0, rng);
  }
  const double off = cfg.min_offset + u(rng) * (cfg.max_offset - cfg.min_offset);
  return corrupt_layout(gt, part, Corruption::Offset, off, rng, joint_axes[part]);
}

LayoutSample sample_layout_with_axes(Category category, int drawers, std::uint64_t seed) {
  const auto inst = make_instance(category, splitmix64(seed ^ 0x5EEDull), drawers);
  LayoutSample s;
  s.boxes = sample_layout(inst, seed, &s.joint_axes);
  return s;
}

double pretrain_layout_discriminator(Discriminator<float>& D, Category category, int drawers,
                                     const LayoutPretrainConfig& cfg) {
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xD15Cull));
  double last = 0.0;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Layout<float>> real, fake;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto s = sample_layout_with_axes(category, drawers, rng());
      real.push_back(cast_layout<float>(s.boxes));
      fake.push_back(cast_layout<float>(random_corruption(s.boxes, s.joint_axes, rng, cfg)));
    }
    D.params.zero_grad();
    last = d_loss(D, real, fake, true);
    D.params.adam_step(adam_with(cfg.lr));
  }
  return last;
}

Checkpoint discriminator_checkpoint(const Discriminator<float>& D, Category category) {
  Checkpoint c;
  c.meta = {{"format", "interprior-discriminator"},
            {"category", category_name(category)},
            {"discriminator", D.config().to_json()}};
  c.put_group("disc", D.params);
  return c;
}

Discriminator<float> load_discriminator(const Checkpoint& ckpt) {
  const std::string format = ckpt.meta.value("format", "");
  if (format != "interprior-models" && format != "interprior-discriminator") {
    throw Error(ErrorCode::Format, "checkpoint holds no discriminator");
  }
  return Discriminator<float>::bind(DiscriminatorConfig::from_json(ckpt.meta.at("discriminator")),
                                    ckpt.get_group<float>("disc"));
}

}  // namespace interprior
