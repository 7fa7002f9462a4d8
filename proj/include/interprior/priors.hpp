#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <json.hpp>

#include "interprior/geometry.hpp"
#include "interprior/nn.hpp"
#include "interprior/parallel.hpp"
#include "interprior/random.hpp"

namespace interprior {

// ---------------------------------------------------------------------------
// Articulation discriminator

struct DiscriminatorConfig {
  int num_parts = 2;
  std::vector<Index> hidden = {256, 256};

  Index input_width() const { return 24 * num_parts; }

  nlohmann::json to_json() const { return {{"num_parts", num_parts}, {"hidden", hidden}}; }
  static DiscriminatorConfig from_json(const nlohmann::json& j) {
    DiscriminatorConfig c;
    c.num_parts = j.at("num_parts").get<int>();
    c.hidden = j.at("hidden").get<std::vector<Index>>();
    return c;
  }
};

template <typename Scalar>
using Layout = std::vector<OrientedBox<Scalar>>;

/// Layout vertices centered on their mean and divided by the RMS vertex norm.
template <typename Scalar>
struct NormalizedLayout {
  Points<Scalar> centered;
  Scalar rms = Scalar(1);
  /// 1 × 24P, part-major then corner-major then xyz.
  nn::RowVector<Scalar> flat;
};

template <typename Scalar>
NormalizedLayout<Scalar> normalize_layout(const Layout<Scalar>& boxes) {
  const Index m = 8 * static_cast<Index>(boxes.size());
  Points<Scalar> v(m, 3);
  for (std::size_t p = 0; p < boxes.size(); ++p) v.block(8 * static_cast<Index>(p), 0, 8, 3) = boxes[p].vertices;
  NormalizedLayout<Scalar> out;
  out.centered = v.rowwise() - v.colwise().mean();
  out.rms = std::sqrt(out.centered.squaredNorm() / static_cast<Scalar>(m));
  if (!(out.rms > Scalar(0))) throw Error(ErrorCode::DegenerateCorrespondences, "layout collapses to a point");
  out.flat.resize(3 * m);
  for (Index i = 0; i < m; ++i) {
    for (int c = 0; c < 3; ++c) out.flat(3 * i + c) = out.centered(i, c) / out.rms;
  }
  return out;
}

/// Maps d/d(flat) back to d/d(box vertices).
template <typename Scalar>
std::vector<BoxVertices<Scalar>> normalize_layout_backward(const NormalizedLayout<Scalar>& norm,
                                                           const nn::RowVector<Scalar>& grad_flat) {
  const Index m = norm.centered.rows();
  Points<Scalar> gu(m, 3);
  for (Index i = 0; i < m; ++i) {
    for (int c = 0; c < 3; ++c) gu(i, c) = grad_flat(3 * i + c);
  }
  const Scalar rho = norm.rms;
  const Scalar dot = gu.cwiseProduct(norm.centered).sum();
  Points<Scalar> gc = gu / rho - (dot / (static_cast<Scalar>(m) * rho * rho * rho)) * norm.centered;
  gc = (gc.rowwise() - gc.colwise().mean()).eval();
  std::vector<BoxVertices<Scalar>> out(static_cast<std::size_t>(m / 8));
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = gc.block(8 * static_cast<Index>(p), 0, 8, 3);
  return out;
}

template <typename Scalar>
class Discriminator {
 public:
  nn::ParamStore<Scalar> params;

  Discriminator() = default;

  Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    mlp_ = nn::Mlp<Scalar>(spec(cfg), params, "disc", rng);
  }

  static Discriminator bind(const DiscriminatorConfig& cfg, nn::ParamStore<Scalar> store) {
    Discriminator d;
    d.cfg_ = cfg;
    d.params = std::move(store);
    d.mlp_ = nn::Mlp<Scalar>::bind(spec(cfg), d.params, "disc");
    return d;
  }

  Discriminator(const Discriminator& o) : params(o.params), cfg_(o.cfg_) {
    mlp_ = nn::Mlp<Scalar>::bind(spec(cfg_), params, "disc");
  }
  Discriminator& operator=(const Discriminator& o) {
    params = o.params;
    cfg_ = o.cfg_;
    mlp_ = nn::Mlp<Scalar>::bind(spec(cfg_), params, "disc");
    return *this;
  }

  template <typename Other>
  Discriminator<Other> cast() const {
    return Discriminator<Other>::bind(cfg_, params.template cast<Other>());
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  static nn::MlpSpec spec(const DiscriminatorConfig& c) {
    nn::MlpSpec s;
    s.widths.push_back(c.input_width());
    for (Index h : c.hidden) s.widths.push_back(h);
    s.widths.push_back(1);
    s.hidden = nn::Activation::Relu;
    s.output = nn::Activation::None;
    return s;
  }

  /// Stacked normalized inputs, one row per layout.
  nn::Matrix<Scalar> inputs(const std::vector<Layout<Scalar>>& batch,
                            std::vector<NormalizedLayout<Scalar>>* norms = nullptr) const {
    nn::Matrix<Scalar> x(static_cast<Index>(batch.size()), cfg_.input_width());
    if (norms) norms->clear();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      check(batch[b]);
      auto n = normalize_layout(batch[b]);
      x.row(static_cast<Index>(b)) = n.flat;
      if (norms) norms->push_back(std::move(n));
    }
    return x;
  }

  /// One score per layout.
  std::vector<Scalar> scores(const std::vector<Layout<Scalar>>& batch, nn::MlpTape<Scalar>* tape = nullptr,
                             std::vector<NormalizedLayout<Scalar>>* norms = nullptr) const {
    const nn::Matrix<Scalar> y = mlp_.forward(params, inputs(batch, norms), tape);
    return std::vector<Scalar>(y.data(), y.data() + y.size());
  }

  Scalar score(const Layout<Scalar>& boxes) const { return scores({boxes}).front(); }

  /// Parameter gradients from d/d(score) per layout.
  void backward_params(const nn::MlpTape<Scalar>& tape, const std::vector<Scalar>& grad_scores) {
    mlp_.backward(params, tape, column(grad_scores));
  }

  /// d/d(box vertices) per layout; parameters and their gradients untouched.
  std::vector<std::vector<BoxVertices<Scalar>>> backward_boxes(const nn::MlpTape<Scalar>& tape,
                                                               const std::vector<NormalizedLayout<Scalar>>& norms,
                                                               const std::vector<Scalar>& grad_scores) const {
    const nn::Matrix<Scalar> gx = mlp_.backward_input(params, tape, column(grad_scores));
    std::vector<std::vector<BoxVertices<Scalar>>> out;
    for (std::size_t b = 0; b < norms.size(); ++b) {
      out.push_back(normalize_layout_backward(norms[b], nn::RowVector<Scalar>(gx.row(static_cast<Index>(b)))));
    }
    return out;
  }

 private:
  static nn::Matrix<Scalar> column(const std::vector<Scalar>& v) {
    nn::Matrix<Scalar> g(static_cast<Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) g(static_cast<Index>(i), 0) = v[i];
    return g;
  }

  void check(const Layout<Scalar>& boxes) const {
    if (static_cast<int>(boxes.size()) != cfg_.num_parts) {
      throw Error(ErrorCode::PartCountMismatch, "discriminator expects " + std::to_string(cfg_.num_parts) +
                                                    " parts, got " + std::to_string(boxes.size()));
    }
  }

  DiscriminatorConfig cfg_;
  nn::Mlp<Scalar> mlp_;
};

/// Least-squares discriminator loss E[(D(b) - 1)²] + E[D(b̂)²] from scores.
template <typename Scalar>
double lsgan_d_loss(const std::vector<Scalar>& real, const std::vector<Scalar>& fake,
                    std::vector<Scalar>* grad_real = nullptr, std::vector<Scalar>* grad_fake = nullptr) {
  if (real.empty() || fake.empty()) throw Error(ErrorCode::ShapeMismatch, "empty discriminator batch");
  double lr = 0.0, lf = 0.0;
  for (Scalar s : real) lr += (static_cast<double>(s) - 1.0) * (static_cast<double>(s) - 1.0);
  for (Scalar s : fake) lf += static_cast<double>(s) * static_cast<double>(s);
  if (grad_real) {
    grad_real->clear();
    for (Scalar s : real) grad_real->push_back(Scalar(2) * (s - Scalar(1)) / static_cast<Scalar>(real.size()));
  }
  if (grad_fake) {
    grad_fake->clear();
    for (Scalar s : fake) grad_fake->push_back(Scalar(2) * s / static_cast<Scalar>(fake.size()));
  }
  return lr / static_cast<double>(real.size()) + lf / static_cast<double>(fake.size());
}

/// Generator-side loss E[(D(b̂) - 1)²] from scores.
template <typename Scalar>
double lsgan_g_loss(const std::vector<Scalar>& fake, std::vector<Scalar>* grad = nullptr) {
  if (fake.empty()) throw Error(ErrorCode::ShapeMismatch, "empty discriminator batch");
  double l = 0.0;
  for (Scalar s : fake) l += (static_cast<double>(s) - 1.0) * (static_cast<double>(s) - 1.0);
  if (grad) {
    grad->clear();
    for (Scalar s : fake) grad->push_back(Scalar(2) * (s - Scalar(1)) / static_cast<Scalar>(fake.size()));
  }
  return l / static_cast<double>(fake.size());
}

/// Discriminator loss; accumulates parameter gradients when `accumulate`.
/// Fake layouts are treated as constants.
template <typename Scalar>
double d_loss(Discriminator<Scalar>& D, const std::vector<Layout<Scalar>>& real,
              const std::vector<Layout<Scalar>>& fake, bool accumulate = false) {
  nn::MlpTape<Scalar> tr, tf;
  const auto sr = D.scores(real, &tr);
  const auto sf = D.scores(fake, &tf);
  std::vector<Scalar> gr, gf;
  const double loss = lsgan_d_loss(sr, sf, &gr, &gf);
  if (accumulate) {
    D.backward_params(tr, gr);
    D.backward_params(tf, gf);
  }
  return loss;
}

/// Generator loss and its gradient w.r.t. every fake layout's vertices.
template <typename Scalar>
double g_adv_loss(const Discriminator<Scalar>& D, const std::vector<Layout<Scalar>>& fake,
                  std::vector<std::vector<BoxVertices<Scalar>>>* grad_boxes = nullptr) {
  nn::MlpTape<Scalar> tape;
  std::vector<NormalizedLayout<Scalar>> norms;
  const auto s = D.scores(fake, &tape, &norms);
  std::vector<Scalar> g;
  const double loss = lsgan_g_loss(s, &g);
  if (grad_boxes) *grad_boxes = D.backward_boxes(tape, norms, g);
  return loss;
}

enum class Corruption { Rotation, Offset };

/// Rotates part `part` about its center by `magnitude` radians around a
/// random axis, or shifts it by `magnitude` meters in a random direction
/// orthogonal to `avoid_axis` (zero for any direction).
template <typename Scalar>
Layout<Scalar> corrupt_layout(const Layout<Scalar>& boxes, std::size_t part, Corruption kind, double magnitude,
                              std::mt19937_64& rng, const Eigen::Vector3d& avoid_axis = Eigen::Vector3d::Zero()) {
  std::normal_distribution<double> normal;
  Eigen::Vector3d dir(normal(rng), normal(rng), normal(rng));
  if (kind == Corruption::Offset && avoid_axis.norm() > 0.0) {
    const Eigen::Vector3d a = avoid_axis.normalized();
    dir -= a.dot(dir) * a;
  }
  dir.normalize();
  Layout<Scalar> out = boxes;
  auto& v = out[part].vertices;
  const Vector3<Scalar> c = out[part].center();
  if (kind == Corruption::Rotation) {
    const Matrix3<Scalar> R = axis_angle_matrix<double>(dir, magnitude).template cast<Scalar>();
    v = ((v.rowwise() - c.transpose()) * R.transpose()).rowwise() + c.transpose();
  } else {
    v.rowwise() += (magnitude * dir).template cast<Scalar>().transpose();
  }
  return out;
}

template <typename Scalar>
Layout<Scalar> cast_layout(const Layout<double>& boxes) {
  Layout<Scalar> out;
  for (const auto& b : boxes) out.push_back(b.template cast<Scalar>());
  return out;
}

// ---------------------------------------------------------------------------
// Contact diffusion

/// β_t linear in t, ᾱ_t = Π_{s ≤ t}(1 - β_s); vectors are indexed 1..T.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta, alpha, alpha_bar;

  static NoiseSchedule linear(int T, double beta_start = 1e-4, double beta_end = 0.02) {
    if (T < 1) throw Error(ErrorCode::BadTimestep, "T must be at least 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(static_cast<std::size_t>(T + 1), 0.0);
    s.alpha.assign(static_cast<std::size_t>(T + 1), 1.0);
    s.alpha_bar.assign(static_cast<std::size_t>(T + 1), 1.0);
    for (int t = 1; t <= T; ++t) {
      const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
      s.beta[t] = beta_start + frac * (beta_end - beta_start);
      s.alpha[t] = 1.0 - s.beta[t];
      s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    return s;
  }

  void check(int t) const {
    if (t < 1 || t > T) throw Error(ErrorCode::BadTimestep, "timestep " + std::to_string(t) + " outside [1, T]");
  }
};

/// x_t = √ᾱ_t·x₀ + √(1 - ᾱ_t)·ε
inline Eigen::VectorXd q_sample(const NoiseSchedule& s, const Eigen::VectorXd& x0, int t,
                                const Eigen::VectorXd& eps) {
  s.check(t);
  if (eps.size() != x0.size()) throw Error(ErrorCode::ShapeMismatch, "noise and x0 sizes differ");
  return std::sqrt(s.alpha_bar[t]) * x0 + std::sqrt(1.0 - s.alpha_bar[t]) * eps;
}

inline Eigen::VectorXd encode_contact(const ContactMap& c) {
  Eigen::VectorXd x(static_cast<Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) x(static_cast<Index>(i)) = c[i] ? 1.0 : -1.0;
  return x;
}

inline Eigen::VectorXd standard_normal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

/// Ancestral sampling from x_T = `start`; eps_fn(x_t, t) returns ε̂.
template <typename EpsFn>
Eigen::VectorXd reverse_sample(const NoiseSchedule& s, Eigen::VectorXd x, EpsFn&& eps_fn, std::mt19937_64& rng) {
  for (int t = s.T; t >= 1; --t) {
    const Eigen::VectorXd eps_hat = eps_fn(x, t);
    x = (x - (s.beta[t] / std::sqrt(1.0 - s.alpha_bar[t])) * eps_hat) / std::sqrt(s.alpha[t]);
    if (t > 1) x += std::sqrt(s.beta[t]) * standard_normal(x.size(), rng);
  }
  return x;
}

/// Samples t and ε, forms x_t, and returns mean (ε - ε̂)². denoise(x_t, t)
/// returns ε̂; the drawn t and ε are reported through the out-params.
template <typename DenoiseFn>
double diffusion_mse(const NoiseSchedule& s, const Eigen::VectorXd& x0, std::mt19937_64& rng, DenoiseFn&& denoise,
                     int* t_out = nullptr, Eigen::VectorXd* eps_out = nullptr) {
  const int t = std::uniform_int_distribution<int>(1, s.T)(rng);
  const Eigen::VectorXd eps = standard_normal(x0.size(), rng);
  const Eigen::VectorXd eps_hat = denoise(q_sample(s, x0, t, eps), t);
  if (t_out) *t_out = t;
  if (eps_out) *eps_out = eps;
  return (eps - eps_hat).squaredNorm() / static_cast<double>(x0.size());
}

struct DiffusionConfig {
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  Index z_width = 256;
  Index time_dim = 64;
  Index hidden = 128;
  int generations = 5;

  nlohmann::json to_json() const {
    return {{"T", T},           {"beta_start", beta_start}, {"beta_end", beta_end}, {"z_width", z_width},
            {"time_dim", time_dim}, {"hidden", hidden},     {"generations", generations}};
  }
  static DiffusionConfig from_json(const nlohmann::json& j) {
    DiffusionConfig c;
    c.T = j.at("T").get<int>();
    c.beta_start = j.at("beta_start").get<double>();
    c.beta_end = j.at("beta_end").get<double>();
    c.z_width = j.at("z_width").get<Index>();
    c.time_dim = j.at("time_dim").get<Index>();
    c.hidden = j.at("hidden").get<Index>();
    c.generations = j.at("generations").get<int>();
    return c;
  }
};

struct ContactSample {
  ContactMap map;
  /// Average of the K final x₀ estimates; the map is confidence > 0.
  Eigen::VectorXd confidence;
};

/// Per-point denoiser ε_θ([z, x_t, emb(t)]) with a linear noise schedule.
template <typename Scalar>
class ContactDiffuser {
 public:
  nn::ParamStore<Scalar> params;

  ContactDiffuser() = default;

  ContactDiffuser(const DiffusionConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    mlp_ = nn::Mlp<Scalar>(spec(cfg), params, "denoiser", rng);
    schedule_ = NoiseSchedule::linear(cfg.T, cfg.beta_start, cfg.beta_end);
  }

  static ContactDiffuser bind(const DiffusionConfig& cfg, nn::ParamStore<Scalar> store) {
    ContactDiffuser d;
    d.cfg_ = cfg;
    d.params = std::move(store);
    d.mlp_ = nn::Mlp<Scalar>::bind(spec(cfg), d.params, "denoiser");
    d.schedule_ = NoiseSchedule::linear(cfg.T, cfg.beta_start, cfg.beta_end);
    return d;
  }

  ContactDiffuser(const ContactDiffuser& o) : params(o.params), cfg_(o.cfg_), schedule_(o.schedule_) {
    mlp_ = nn::Mlp<Scalar>::bind(spec(cfg_), params, "denoiser");
  }
  ContactDiffuser& operator=(const ContactDiffuser& o) {
    params = o.params;
    cfg_ = o.cfg_;
    schedule_ = o.schedule_;
    mlp_ = nn::Mlp<Scalar>::bind(spec(cfg_), params, "denoiser");
    return *this;
  }

  template <typename Other>
  ContactDiffuser<Other> cast() const {
    return ContactDiffuser<Other>::bind(cfg_, params.template cast<Other>());
  }

  const DiffusionConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  static nn::MlpSpec spec(const DiffusionConfig& c) {
    return {{c.z_width + 1 + c.time_dim, c.hidden, c.hidden, 1}, nn::Activation::Relu, nn::Activation::None};
  }

  nn::Matrix<Scalar> denoiser_input(const nn::Matrix<Scalar>& z, const Eigen::VectorXd& x_t, int t) const {
    if (z.cols() != cfg_.z_width || z.rows() != x_t.size()) {
      throw Error(ErrorCode::ShapeMismatch, "feature and contact rows differ");
    }
    nn::Matrix<Scalar> in(z.rows(), cfg_.z_width + 1 + cfg_.time_dim);
    in.leftCols(cfg_.z_width) = z;
    in.col(cfg_.z_width) = x_t.cast<Scalar>();
    in.rightCols(cfg_.time_dim).rowwise() = nn::time_embedding<Scalar>(t, cfg_.T, cfg_.time_dim);
    return in;
  }

  /// ε̂ for every point.
  Eigen::VectorXd predict_noise(const nn::Matrix<Scalar>& z, const Eigen::VectorXd& x_t, int t,
                                nn::MlpTape<Scalar>* tape = nullptr) const {
    schedule_.check(t);
    return mlp_.forward(params, denoiser_input(z, x_t, t), tape).col(0).template cast<double>();
  }

  /// Diffusion loss at random (t, ε). Accumulates parameter gradients scaled
  /// by `weight` when `accumulate`, and writes weight·dL/dz into grad_z.
  double diff_loss(const nn::Matrix<Scalar>& z, const ContactMap& contact, std::mt19937_64& rng,
                   bool accumulate = false, double weight = 1.0, nn::Matrix<Scalar>* grad_z = nullptr) {
    const Eigen::VectorXd x0 = encode_contact(contact);
    nn::MlpTape<Scalar> tape;
    Eigen::VectorXd eps_hat;
    int t = 0;
    Eigen::VectorXd eps;
    const double loss = diffusion_mse(
        schedule_, x0, rng,
        [&](const Eigen::VectorXd& x_t, int step) {
          eps_hat = predict_noise(z, x_t, step, &tape);
          return eps_hat;
        },
        &t, &eps);
    if (accumulate || grad_z) {
      const nn::Matrix<Scalar> g =
          ((2.0 * weight / static_cast<double>(x0.size())) * (eps_hat - eps)).cast<Scalar>();
      nn::Matrix<Scalar> gin;
      if (accumulate) {
        gin = mlp_.backward(params, tape, g);
      } else {
        gin = mlp_.backward_input(params, tape, g);
      }
      if (grad_z) *grad_z = gin.leftCols(cfg_.z_width);
    }
    return loss;
  }

  /// K reverse chains from independent sub-seeds, averaged then thresholded.
  ContactSample sample(const nn::Matrix<Scalar>& z, int generations, std::uint64_t seed) const {
    if (generations < 1) throw Error(ErrorCode::ShapeMismatch, "need at least one generation");
    const Index n = z.rows();
    // The z part of the first layer is the same at every step.
    const auto& W0 = params.value(mlp_.weight_index(0));
    const nn::Matrix<Scalar> z_proj = z * W0.leftCols(cfg_.z_width).transpose();
    const nn::Matrix<Scalar> w_x = W0.col(cfg_.z_width).transpose();
    const nn::Matrix<Scalar> W_t = W0.rightCols(cfg_.time_dim);
    const nn::Matrix<Scalar> b0 = params.value(mlp_.bias_index(0)).transpose();
    auto eps_fn = [&](const Eigen::VectorXd& x, int t) {
      nn::Matrix<Scalar> bias = nn::time_embedding<Scalar>(t, cfg_.T, cfg_.time_dim) * W_t.transpose() + b0;
      nn::Matrix<Scalar> h = (z_proj + x.cast<Scalar>() * w_x).rowwise() + bias.row(0);
      h = h.cwiseMax(Scalar(0));
      for (std::size_t k = 1; k < mlp_.spec().layer_count(); ++k) {
        nn::Matrix<Scalar> y = h * params.value(mlp_.weight_index(k)).transpose();
        y.rowwise() += params.value(mlp_.bias_index(k)).col(0).transpose();
        h = k + 1 < mlp_.spec().layer_count() ? y.cwiseMax(Scalar(0)) : y;
      }
      return Eigen::VectorXd(h.col(0).template cast<double>());
    };
    std::vector<Eigen::VectorXd> finals(static_cast<std::size_t>(generations));
    parallel_for(finals.size(), [&](std::size_t k) {
      std::mt19937_64 rng(splitmix64(seed + k));
      finals[k] = reverse_sample(schedule_, standard_normal(n, rng), eps_fn, rng);
    });
    ContactSample out;
    out.confidence = Eigen::VectorXd::Zero(n);
    for (const auto& f : finals) out.confidence += f;
    out.confidence /= static_cast<double>(generations);
    out.map.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out.map[static_cast<std::size_t>(i)] = out.confidence(i) > 0.0 ? 1 : 0;
    return out;
  }

 private:
  DiffusionConfig cfg_;
  nn::Mlp<Scalar> mlp_;
  NoiseSchedule schedule_;
};

struct PriorWeights {
  double adv = 0.1;
  double diff = 1.0;
};

/// L = L_pose + λ_adv·L_adv + λ_diff·L_diff
inline double total_loss(double pose, double adv, double diff, const PriorWeights& w) {
  return pose + w.adv * adv + w.diff * diff;
}

/// Intersection over union of the positive labels; 1 when both are empty.
inline double contact_iou(const ContactMap& pred, const ContactMap& gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::CountMismatch, "contact maps differ in length");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += (pred[i] && gt[i]) ? 1 : 0;
    uni += (pred[i] || gt[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace interprior
