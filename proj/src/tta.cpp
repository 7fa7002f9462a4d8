#include "interprior/tta.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>

namespace interprior {

AdaptResult adapt_object(PoseEstimator<float>& estimator, const Discriminator<float>& D, const Points<double>& cloud,
                         const std::vector<OrientedBox<double>>& canonical_boxes, const TtaConfig& cfg) {
  if (cfg.steps < 0 || !(cfg.lr > 0.0)) throw Error(ErrorCode::Usage, "TTA needs steps >= 0 and lr > 0");
  // A cast copy starts with fresh optimizer state.
  PoseEstimator<float> local;
  if (cfg.reset_per_scene) local = estimator.cast<float>();
  PoseEstimator<float>& work = cfg.reset_per_scene ? local : estimator;
  nn::AdamConfig adam;
  adam.lr = cfg.lr;
  const bool heads_only = cfg.scope == TtaScope::HeadsOnly;

  AdaptResult result;
  for (int step = 0; step <= cfg.steps; ++step) {
    EstimatorTape<float> tape;
    const HeadOutput<float> pred = work.forward(cloud, &tape);
    auto parts = assemble_pose(cloud, pred, canonical_boxes);
    if (step == 0) result.initial = parts;
    const auto bad = std::find_if(parts.begin(), parts.end(), [](const auto& p) { return !p.valid; });
    if (bad != parts.end()) {
      result.flagged = true;
      result.flag = bad->error;
      result.adapted = result.initial;
      return result;
    }
    Layout<float> boxes;
    for (const auto& p : parts) boxes.push_back(p.box);
    std::vector<std::vector<BoxVertices<float>>> gb;
    const double loss = g_adv_loss(D, {boxes}, &gb);
    if (!std::isfinite(loss)) {
      result.flagged = true;
      result.flag = ErrorCode::NonFiniteLoss;
      result.adapted = result.initial;
      return result;
    }
    result.adv_trace.push_back(loss);
    if (step == cfg.steps) {
      result.adapted = std::move(parts);
      break;
    }
    HeadGrad<float> grad = HeadGrad<float>::zeros_like(pred);
    assemble_pose_backward(cloud, pred, parts, canonical_boxes, gb.front(), grad);
    work.zero_grad();
    work.backward(tape, grad, heads_only);
    work.head_params.adam_step(adam);
    if (!heads_only) work.encoder_params.adam_step(adam);
  }
  return result;
}

Matrix3<double> box_rotation(const OrientedBox<double>& box) {
  Matrix3<double> E;
  E << box.edge_x().normalized(), box.edge_y().normalized(), box.edge_z().normalized();
  Eigen::JacobiSVD<Matrix3<double>> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<double> R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Matrix3<double> U = svd.matrixU();
    U.col(2) *= -1.0;
    R = U * svd.matrixV().transpose();
  }
  return R;
}

BoxAdaptResult adapt_layout_part(const Discriminator<double>& D, const Layout<double>& boxes, std::size_t part,
                                 const Matrix3<double>& reference_rotation, int steps, double lr) {
  const auto& box = boxes.at(part);
  const Vector3<double> half(box.edge_x().norm() / 2.0, box.edge_y().norm() / 2.0, box.edge_z().norm() / 2.0);
  const auto canonical = OrientedBox<double>::from_half_extents(half);

  nn::ParamStore<double> store;
  const std::size_t ir = store.add("r6", 6, 1);
  const std::size_t it = store.add("t", 3, 1);
  store.mutable_value(ir) = matrix_to_rot6d<double>(box_rotation(box));
  store.mutable_value(it) = box.center();
  nn::AdamConfig adam;
  adam.lr = lr;

  BoxAdaptResult out;
  out.boxes = boxes;
  for (int step = 0; step <= steps; ++step) {
    const Rotation6D<double> r6 = store.value(ir);
    SimilarityTransform<double> pose;
    pose.R = rot6d_to_matrix<double>(r6);
    pose.t = store.value(it);
    out.boxes[part] = transform_box(canonical, pose);
    out.rot_err_trace.push_back(rotation_error<double>(pose.R, reference_rotation));
    std::vector<std::vector<BoxVertices<double>>> gb;
    out.adv_trace.push_back(g_adv_loss(D, {out.boxes}, &gb));
    if (step == steps) break;
    const PoseGrad<double> pg = transform_box_backward(canonical, pose, gb.front()[part]);
    store.zero_grad();
    store.grad(ir) = rot6d_to_matrix_backward<double>(r6, pg.R);
    store.grad(it) = pg.t;
    store.adam_step(adam);
  }
  return out;
}

namespace {

using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, kHandParams, 1>>;

}  // namespace

double hand_chamfer(const HandParams& params, const Points<double>& contact_points, int surface_samples,
                    HandParams* grad) {
  if (contact_points.rows() < 1) throw Error(ErrorCode::NoContactPoints, "no contact points");
  const HandSurfaceLayout layout = hand_surface_layout(surface_samples);
  Eigen::Matrix<Ad, kHandParams, 1> p;
  for (int i = 0; i < kHandParams; ++i) p(i) = Ad(params(i), kHandParams, i);
  const Rotation6D<Ad> r6 = p.head<6>();
  const Matrix3<Ad> R = rot6d_to_matrix<Ad>(r6);
  const Vector3<Ad> t = p.segment<3>(6);
  const HandAngles<Ad> angles = p.tail<kHandAngles>();
  const HandGeometry<Ad> geo = hand_forward_kinematics<Ad>(R, t, angles, layout);

  Points<double> surface(geo.surface.rows(), 3);
  for (Index i = 0; i < surface.rows(); ++i) {
    for (int c = 0; c < 3; ++c) surface(i, c) = geo.surface(i, c).value();
  }
  std::vector<Index> nn_hand, nn_contact;
  std::vector<double> d_hand, d_contact;
  nearest_neighbors(surface, contact_points, nn_hand, d_hand);
  nearest_neighbors(contact_points, surface, nn_contact, d_contact);

  Ad loss_a(0.0, Eigen::Matrix<double, kHandParams, 1>::Zero());
  Ad loss_b(0.0, Eigen::Matrix<double, kHandParams, 1>::Zero());
  for (Index i = 0; i < surface.rows(); ++i) {
    const Vector3<Ad> d = geo.surface.row(i).transpose() - contact_points.row(nn_hand[i]).transpose().cast<Ad>();
    if (d_hand[i] > 1e-12) loss_a += d.norm();
  }
  for (Index j = 0; j < contact_points.rows(); ++j) {
    const Vector3<Ad> d = geo.surface.row(nn_contact[j]).transpose() - contact_points.row(j).transpose().cast<Ad>();
    if (d_contact[j] > 1e-12) loss_b += d.norm();
  }
  const Ad loss = loss_a / static_cast<double>(surface.rows()) + loss_b / static_cast<double>(contact_points.rows());
  if (grad) *grad = loss.derivatives();
  return loss.value();
}

Points<double> select_contact_points(const ContactMap& contact, const Points<double>& cloud) {
  if (static_cast<Index>(contact.size()) != cloud.rows()) {
    throw Error(ErrorCode::CountMismatch, "contact map and cloud differ in length");
  }
  std::vector<Index> rows;
  for (std::size_t i = 0; i < contact.size(); ++i) {
    if (contact[i]) rows.push_back(static_cast<Index>(i));
  }
  return gather_rows<double>(cloud, rows);
}

HandOptResult optimize_hand(const KinematicHand& init, const Points<double>& contact_points,
                            const HandOptConfig& cfg) {
  if (cfg.iters < 1 || !(cfg.lr > 0.0)) throw Error(ErrorCode::Usage, "hand optimization needs iters >= 1, lr > 0");
  HandOptResult out;
  out.hand = init;
  if (contact_points.rows() == 0) {
    out.flagged = true;
    return out;
  }
  nn::ParamStore<double> store;
  const std::size_t ip = store.add("hand", kHandParams, 1);
  store.mutable_value(ip) = init.to_params();
  nn::AdamConfig adam;
  adam.lr = cfg.lr;

  HandParams best = init.to_params();
  for (int it = 0; it <= cfg.iters; ++it) {
    const HandParams p = store.value(ip);
    HandParams g;
    const double loss = hand_chamfer(p, contact_points, init.surface_samples, &g);
    out.trace.push_back(loss);
    if (it == 0) {
      out.initial_loss = loss;
      out.best_loss = loss;
    } else if (loss < out.best_loss) {
      out.best_loss = loss;
      best = p;
    }
    if (it == cfg.iters || !g.allFinite()) break;
    store.zero_grad();
    store.grad(ip) = g;
    store.adam_step(adam);
    auto& v = store.mutable_value(ip);
    v.bottomRows(kHandAngles) = v.bottomRows(kHandAngles).cwiseMax(0.0).cwiseMin(kMaxFlexion);
  }
  out.hand = KinematicHand::from_params(best, init.surface_samples);
  if (out.best_loss == out.initial_loss) out.hand = init;
  return out;
}

HandOptResult optimize_hand(const KinematicHand& init, const ContactMap& contact, const Points<double>& cloud,
                            const HandOptConfig& cfg) {
  return optimize_hand(init, select_contact_points(contact, cloud), cfg);
}

}  // namespace interprior
