#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "interprior/geometry.hpp"
#include "interprior/nn.hpp"
#include "interprior/synth.hpp"

namespace interprior {

struct EstimatorConfig {
  int num_parts = 2;
  Index local_hidden = 64;
  /// Width of the per-point local feature; z is twice as wide.
  Index feature = 128;
  Index head_hidden = 128;

  Index z_width() const { return 2 * feature; }

  nlohmann::json to_json() const {
    return {{"num_parts", num_parts}, {"local_hidden", local_hidden}, {"feature", feature},
            {"head_hidden", head_hidden}};
  }
  static EstimatorConfig from_json(const nlohmann::json& j) {
    EstimatorConfig c;
    c.num_parts = j.at("num_parts").get<int>();
    c.local_hidden = j.at("local_hidden").get<Index>();
    c.feature = j.at("feature").get<Index>();
    c.head_hidden = j.at("head_hidden").get<Index>();
    return c;
  }
};

template <typename Scalar>
struct HeadOutput {
  /// N × (P + 1); class 0 is the hand.
  nn::Matrix<Scalar> seg_logits;
  /// N × 3, one NOCS coordinate per point for its own part.
  nn::Matrix<Scalar> nocs;
  /// P × 6
  nn::Matrix<Scalar> rot6d;
  /// N × 2F encoder feature [local, global].
  nn::Matrix<Scalar> z;

  Index num_points() const { return seg_logits.rows(); }
  int num_parts() const { return static_cast<int>(rot6d.rows()); }
};

/// Loss gradients w.r.t. a HeadOutput. An empty `z` means no extra gradient
/// on the encoder feature.
template <typename Scalar>
struct HeadGrad {
  nn::Matrix<Scalar> seg_logits;
  nn::Matrix<Scalar> nocs;
  nn::Matrix<Scalar> rot6d;
  nn::Matrix<Scalar> z;

  static HeadGrad zeros_like(const HeadOutput<Scalar>& out) {
    HeadGrad g;
    g.seg_logits = nn::Matrix<Scalar>::Zero(out.seg_logits.rows(), out.seg_logits.cols());
    g.nocs = nn::Matrix<Scalar>::Zero(out.nocs.rows(), out.nocs.cols());
    g.rot6d = nn::Matrix<Scalar>::Zero(out.rot6d.rows(), out.rot6d.cols());
    return g;
  }
};

template <typename Scalar>
struct EstimatorTape {
  nn::MlpTape<Scalar> encoder;
  nn::MlpTape<Scalar> seg;
  nn::MlpTape<Scalar> nocs;
  nn::MlpTape<Scalar> rot;
  /// Row that supplied each global feature channel.
  std::vector<Index> argmax;
};

/// Per-point shared MLP with max pooling, then segmentation, NOCS and
/// rotation heads. The input cloud is centered on its bounding-box center.
template <typename Scalar>
class PoseEstimator {
 public:
  nn::ParamStore<Scalar> encoder_params;
  nn::ParamStore<Scalar> head_params;

  PoseEstimator() = default;

  PoseEstimator(const EstimatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    encoder_ = nn::Mlp<Scalar>(encoder_spec(cfg), encoder_params, "encoder", rng);
    seg_ = nn::Mlp<Scalar>(seg_spec(cfg), head_params, "seg", rng);
    nocs_ = nn::Mlp<Scalar>(nocs_spec(cfg), head_params, "nocs", rng);
    rot_ = nn::Mlp<Scalar>(rot_spec(cfg), head_params, "rot", rng);
  }

  static PoseEstimator bind(const EstimatorConfig& cfg, nn::ParamStore<Scalar> encoder, nn::ParamStore<Scalar> heads) {
    PoseEstimator e;
    e.cfg_ = cfg;
    e.encoder_params = std::move(encoder);
    e.head_params = std::move(heads);
    e.rebind();
    return e;
  }

  PoseEstimator(const PoseEstimator& other)
      : encoder_params(other.encoder_params), head_params(other.head_params), cfg_(other.cfg_) {
    rebind();
  }
  PoseEstimator& operator=(const PoseEstimator& other) {
    encoder_params = other.encoder_params;
    head_params = other.head_params;
    cfg_ = other.cfg_;
    rebind();
    return *this;
  }

  template <typename Other>
  PoseEstimator<Other> cast() const {
    return PoseEstimator<Other>::bind(cfg_, encoder_params.template cast<Other>(),
                                      head_params.template cast<Other>());
  }

  const EstimatorConfig& config() const { return cfg_; }

  static nn::MlpSpec encoder_spec(const EstimatorConfig& c) {
    return {{3, c.local_hidden, c.feature}, nn::Activation::Relu, nn::Activation::Relu};
  }
  static nn::MlpSpec seg_spec(const EstimatorConfig& c) {
    return {{c.z_width(), c.head_hidden, c.num_parts + 1}, nn::Activation::Relu, nn::Activation::None};
  }
  static nn::MlpSpec nocs_spec(const EstimatorConfig& c) {
    return {{c.z_width(), c.head_hidden, 3}, nn::Activation::Relu, nn::Activation::None};
  }
  static nn::MlpSpec rot_spec(const EstimatorConfig& c) {
    return {{c.feature, c.head_hidden, 6 * c.num_parts}, nn::Activation::Relu, nn::Activation::None};
  }

  /// Encoder only: N × 2F feature.
  nn::Matrix<Scalar> encode(const Points<double>& cloud, EstimatorTape<Scalar>* tape = nullptr) const {
    if (cloud.rows() < 8) throw Error(ErrorCode::ShapeMismatch, "encoder needs at least 8 points");
    const Eigen::RowVector3d center = 0.5 * (cloud.colwise().minCoeff() + cloud.colwise().maxCoeff());
    const nn::Matrix<Scalar> x = (cloud.rowwise() - center).template cast<Scalar>();
    const nn::Matrix<Scalar> local = encoder_.forward(encoder_params, x, tape ? &tape->encoder : nullptr);
    const Index n = local.rows();
    const Index f = local.cols();
    nn::Matrix<Scalar> z(n, 2 * f);
    z.leftCols(f) = local;
    std::vector<Index> argmax(static_cast<std::size_t>(f), 0);
    for (Index c = 0; c < f; ++c) {
      Index best = 0;
      for (Index i = 1; i < n; ++i) {
        if (local(i, c) > local(best, c)) best = i;
      }
      argmax[static_cast<std::size_t>(c)] = best;
      z.col(f + c).setConstant(local(best, c));
    }
    if (tape) tape->argmax = std::move(argmax);
    return z;
  }

  HeadOutput<Scalar> forward(const Points<double>& cloud, EstimatorTape<Scalar>* tape = nullptr) const {
    HeadOutput<Scalar> out;
    out.z = encode(cloud, tape);
    out.seg_logits = seg_.forward(head_params, out.z, tape ? &tape->seg : nullptr);
    out.nocs = nocs_.forward(head_params, out.z, tape ? &tape->nocs : nullptr);
    const nn::Matrix<Scalar> global = out.z.block(0, cfg_.feature, 1, cfg_.feature);
    const nn::Matrix<Scalar> r = rot_.forward(head_params, global, tape ? &tape->rot : nullptr);
    out.rot6d.resize(cfg_.num_parts, 6);
    for (int p = 0; p < cfg_.num_parts; ++p) out.rot6d.row(p) = r.block(0, 6 * p, 1, 6);
    return out;
  }

  /// Accumulates head gradients, and encoder gradients unless heads_only.
  void backward(const EstimatorTape<Scalar>& tape, const HeadGrad<Scalar>& grad, bool heads_only = false) {
    const Index f = cfg_.feature;
    nn::Matrix<Scalar> g_rot(1, 6 * cfg_.num_parts);
    for (int p = 0; p < cfg_.num_parts; ++p) g_rot.block(0, 6 * p, 1, 6) = grad.rot6d.row(p);
    nn::Matrix<Scalar> g_z = seg_.backward(head_params, tape.seg, grad.seg_logits);
    g_z += nocs_.backward(head_params, tape.nocs, grad.nocs);
    const nn::Matrix<Scalar> g_global_rot = rot_.backward(head_params, tape.rot, g_rot);
    if (heads_only) return;
    if (grad.z.size() > 0) g_z += grad.z;
    nn::Matrix<Scalar> g_local = g_z.leftCols(f);
    const nn::Matrix<Scalar> g_global = g_z.rightCols(f).colwise().sum() + g_global_rot;
    for (Index c = 0; c < f; ++c) g_local(tape.argmax[static_cast<std::size_t>(c)], c) += g_global(0, c);
    encoder_.backward(encoder_params, tape.encoder, g_local);
  }

  void zero_grad() {
    encoder_params.zero_grad();
    head_params.zero_grad();
  }

 private:
  void rebind() {
    encoder_ = nn::Mlp<Scalar>::bind(encoder_spec(cfg_), encoder_params, "encoder");
    seg_ = nn::Mlp<Scalar>::bind(seg_spec(cfg_), head_params, "seg");
    nocs_ = nn::Mlp<Scalar>::bind(nocs_spec(cfg_), head_params, "nocs");
    rot_ = nn::Mlp<Scalar>::bind(rot_spec(cfg_), head_params, "rot");
  }

  EstimatorConfig cfg_;
  nn::Mlp<Scalar> encoder_;
  nn::Mlp<Scalar> seg_;
  nn::Mlp<Scalar> nocs_;
  nn::Mlp<Scalar> rot_;
};

// ---------------------------------------------------------------------------
// Loss

struct PoseTarget {
  std::vector<std::uint8_t> seg;
  Points<double> nocs;
  /// P × 6
  Eigen::MatrixXd rot6d;
};

inline PoseTarget make_pose_target(const SceneRecord& rec) {
  PoseTarget t;
  t.seg = rec.seg;
  t.nocs = rec.nocs;
  t.rot6d.resize(rec.num_parts(), 6);
  for (int p = 0; p < rec.num_parts(); ++p) {
    t.rot6d.row(p) = matrix_to_rot6d<double>(rec.part_poses[static_cast<std::size_t>(p)].R).transpose();
  }
  return t;
}

struct LossWeights {
  double seg = 1.0;
  double nocs = 10.0;
  double rot = 1.0;
};

struct PoseLoss {
  double seg = 0.0;
  double nocs = 0.0;
  double rot = 0.0;
  double total = 0.0;
};

/// Cross-entropy and masked NOCS distance averaged over all N points, plus
/// the 6D rotation distance summed over parts. Writes d(total)/d(pred) into
/// `grad` when given.
template <typename Scalar>
PoseLoss pose_loss(const HeadOutput<Scalar>& pred, const PoseTarget& gt, const LossWeights& w,
                   HeadGrad<Scalar>* grad = nullptr) {
  const Index n = pred.seg_logits.rows();
  const Index classes = pred.seg_logits.cols();
  if (static_cast<Index>(gt.seg.size()) != n || gt.nocs.rows() != n || pred.nocs.rows() != n ||
      gt.rot6d.rows() != pred.rot6d.rows() || pred.rot6d.cols() != 6 || classes != pred.rot6d.rows() + 1) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and target shapes differ");
  }
  if (grad) *grad = HeadGrad<Scalar>::zeros_like(pred);
  PoseLoss loss;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const int label = gt.seg[static_cast<std::size_t>(i)];
    if (label >= classes) throw Error(ErrorCode::ShapeMismatch, "segmentation label out of range");
    const Eigen::RowVectorXd logits = pred.seg_logits.row(i).template cast<double>();
    const double m = logits.maxCoeff();
    const Eigen::RowVectorXd e = (logits.array() - m).exp();
    const double z = e.sum();
    loss.seg += (std::log(z) + m - logits(label)) * inv_n;
    if (grad) {
      Eigen::RowVectorXd g = e / z;
      g(label) -= 1.0;
      grad->seg_logits.row(i) = (w.seg * inv_n * g).template cast<Scalar>();
    }
    if (label > 0) {
      const Eigen::RowVector3d d = pred.nocs.row(i).template cast<double>() - gt.nocs.row(i);
      const double len = d.norm();
      loss.nocs += len * inv_n;
      if (grad && len > 0.0) grad->nocs.row(i) = (w.nocs * inv_n / len * d).template cast<Scalar>();
    }
  }
  for (Index p = 0; p < pred.rot6d.rows(); ++p) {
    const Eigen::RowVectorXd d = pred.rot6d.row(p).template cast<double>() - gt.rot6d.row(p);
    const double len = d.norm();
    loss.rot += len;
    if (grad && len > 0.0) grad->rot6d.row(p) = (w.rot / len * d).template cast<Scalar>();
  }
  loss.total = w.seg * loss.seg + w.nocs * loss.nocs + w.rot * loss.rot;
  return loss;
}

// ---------------------------------------------------------------------------
// Pose assembly

template <typename Scalar>
struct PartEstimate {
  bool valid = false;
  /// Why the part is invalid (TooFewPoints, DegenerateRotation, ...).
  ErrorCode error = ErrorCode::TooFewPoints;
  SimilarityTransform<Scalar> pose;
  OrientedBox<Scalar> box;
  std::vector<Index> members;
  ScaleTranslation<Scalar> fit{Scalar(1), Vector3<Scalar>::Zero(), false};
};

template <typename Scalar>
Points<Scalar> gather_rows(const Points<Scalar>& m, const std::vector<Index>& rows) {
  Points<Scalar> out(static_cast<Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

/// Argmax segmentation, 6D rotation, closed-form (s, t) against the
/// denormalized NOCS (n - 0.5), then the canonical box under that pose.
template <typename Scalar>
std::vector<PartEstimate<Scalar>> assemble_pose(const Points<double>& cloud, const HeadOutput<Scalar>& pred,
                                                const std::vector<OrientedBox<double>>& canonical_boxes) {
  const int P = pred.num_parts();
  if (static_cast<int>(canonical_boxes.size()) != P) throw Error(ErrorCode::PartCountMismatch, "canonical boxes");
  if (cloud.rows() != pred.num_points()) throw Error(ErrorCode::ShapeMismatch, "cloud and prediction sizes differ");
  std::vector<PartEstimate<Scalar>> parts(static_cast<std::size_t>(P));
  for (Index i = 0; i < cloud.rows(); ++i) {
    Index label;
    pred.seg_logits.row(i).maxCoeff(&label);
    if (label > 0) parts[static_cast<std::size_t>(label - 1)].members.push_back(i);
  }
  const Points<Scalar> obs_all = cloud.template cast<Scalar>();
  for (int p = 0; p < P; ++p) {
    auto& part = parts[static_cast<std::size_t>(p)];
    if (part.members.size() < 3) {
      part.error = ErrorCode::TooFewPoints;
      continue;
    }
    try {
      const Rotation6D<Scalar> r = pred.rot6d.row(p).transpose();
      part.pose.R = rot6d_to_matrix<Scalar>(r);
      const Points<Scalar> q = (gather_rows<Scalar>(pred.nocs, part.members).array() - Scalar(0.5)).matrix();
      const Points<Scalar> obs = gather_rows<Scalar>(obs_all, part.members);
      part.fit = fit_translation_scale<Scalar>(q, obs, part.pose.R);
      part.pose.s = part.fit.s;
      part.pose.t = part.fit.t;
      part.box = transform_box(canonical_boxes[static_cast<std::size_t>(p)].template cast<Scalar>(), part.pose);
      part.valid = all_finite(part.box.vertices);
      if (!part.valid) part.error = ErrorCode::NonFiniteLoss;
    } catch (const Error& e) {
      part.error = e.code();
      part.valid = false;
    }
  }
  return parts;
}

/// Adds d(loss)/d(pred.nocs, pred.rot6d) into `grad` given d(loss)/d(box
/// vertices) per part; invalid parts are skipped.
template <typename Scalar>
void assemble_pose_backward(const Points<double>& cloud, const HeadOutput<Scalar>& pred,
                            const std::vector<PartEstimate<Scalar>>& parts,
                            const std::vector<OrientedBox<double>>& canonical_boxes,
                            const std::vector<BoxVertices<Scalar>>& grad_boxes, HeadGrad<Scalar>& grad) {
  const Points<Scalar> obs_all = cloud.template cast<Scalar>();
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& part = parts[p];
    if (!part.valid) continue;
    const auto canonical = canonical_boxes[p].template cast<Scalar>();
    const PoseGrad<Scalar> gp = transform_box_backward(canonical, part.pose, grad_boxes[p]);
    const Points<Scalar> q = (gather_rows<Scalar>(pred.nocs, part.members).array() - Scalar(0.5)).matrix();
    const Points<Scalar> obs = gather_rows<Scalar>(obs_all, part.members);
    const auto gf = fit_translation_scale_backward<Scalar>(q, obs, part.pose.R, part.fit, gp.s, gp.t);
    const Rotation6D<Scalar> r = pred.rot6d.row(static_cast<Index>(p)).transpose();
    grad.rot6d.row(static_cast<Index>(p)) += rot6d_to_matrix_backward<Scalar>(r, gp.R + gf.R).transpose();
    for (std::size_t i = 0; i < part.members.size(); ++i) {
      grad.nocs.row(part.members[i]) += gf.nocs.row(static_cast<Index>(i));
    }
  }
}

}  // namespace interprior
