#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <type_traits>
#include <vector>

#include "interprior/errors.hpp"

namespace interprior {

using Index = Eigen::Index;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Rotation6D = Eigen::Matrix<Scalar, 6, 1>;
/// N x 3 point array, one point per row, meters.
template <typename Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;
template <typename Scalar>
using BoxVertices = Eigen::Matrix<Scalar, 8, 3>;

/// Binary labels aligned with a point cloud.
using ContactMap = std::vector<std::uint8_t>;

/// Plain value of a scalar, including Eigen::AutoDiffScalar.
template <typename T>
double scalar_value(const T& x) {
  if constexpr (std::is_arithmetic_v<T>) {
    return static_cast<double>(x);
  } else {
    return static_cast<double>(x.value());
  }
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.array().isFinite().all();
}

template <typename Scalar>
void require_cloud(const Points<Scalar>& cloud, const char* what) {
  if (cloud.rows() < 1) throw Error(ErrorCode::EmptyCloud, what);
}

template <typename Scalar>
struct SimilarityTransform {
  Matrix3<Scalar> R = Matrix3<Scalar>::Identity();
  Vector3<Scalar> t = Vector3<Scalar>::Zero();
  Scalar s = Scalar(1);

  static SimilarityTransform identity() { return {}; }

  Vector3<Scalar> apply(const Vector3<Scalar>& p) const { return s * (R * p) + t; }

  Points<Scalar> apply(const Points<Scalar>& pts) const {
    Points<Scalar> out = (s * pts * R.transpose()).rowwise() + t.transpose();
    return out;
  }

  SimilarityTransform inverse() const {
    SimilarityTransform inv;
    inv.R = R.transpose();
    inv.s = Scalar(1) / s;
    inv.t = -(inv.s * (inv.R * t));
    return inv;
  }

  /// this ∘ other
  SimilarityTransform compose(const SimilarityTransform& other) const {
    SimilarityTransform out;
    out.R = R * other.R;
    out.s = s * other.s;
    out.t = s * (R * other.t) + t;
    return out;
  }

  template <typename Other>
  SimilarityTransform<Other> cast() const {
    SimilarityTransform<Other> out;
    out.R = R.template cast<Other>();
    out.t = t.template cast<Other>();
    out.s = static_cast<Other>(s);
    return out;
  }

  bool is_valid(double tol = 1e-6) const {
    const Matrix3<double> Rd = R.template cast<double>();
    return (Rd.transpose() * Rd - Matrix3<double>::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(Rd.determinant() - 1.0) <= tol && scalar_value(s) > 0.0;
  }
};

/// Corner k of the axis-aligned box with the given half extents. Corners
/// follow binary counting over (x, y, z) with x as the most significant bit
/// and a zero bit meaning the negative side.
template <typename Scalar>
Vector3<Scalar> box_corner(int k, const Vector3<Scalar>& half_extents) {
  return Vector3<Scalar>((k & 4) ? half_extents.x() : -half_extents.x(),
                         (k & 2) ? half_extents.y() : -half_extents.y(),
                         (k & 1) ? half_extents.z() : -half_extents.z());
}

template <typename Scalar>
struct OrientedBox {
  BoxVertices<Scalar> vertices = BoxVertices<Scalar>::Zero();

  static OrientedBox from_half_extents(const Vector3<Scalar>& half_extents) {
    OrientedBox box;
    for (int k = 0; k < 8; ++k) box.vertices.row(k) = box_corner<Scalar>(k, half_extents).transpose();
    return box;
  }

  Vector3<Scalar> origin() const { return vertices.row(0).transpose(); }
  Vector3<Scalar> edge_x() const { return (vertices.row(4) - vertices.row(0)).transpose(); }
  Vector3<Scalar> edge_y() const { return (vertices.row(2) - vertices.row(0)).transpose(); }
  Vector3<Scalar> edge_z() const { return (vertices.row(1) - vertices.row(0)).transpose(); }
  Vector3<Scalar> center() const { return vertices.colwise().mean().transpose(); }

  Scalar volume() const {
    Matrix3<Scalar> E;
    E << edge_x(), edge_y(), edge_z();
    return std::abs(E.determinant());
  }

  /// Opposite edges equal within tol and positive volume.
  bool is_valid(double tol = 1e-6) const {
    static constexpr std::array<std::array<int, 2>, 12> kEdges = {{{0, 4}, {1, 5}, {2, 6}, {3, 7},
                                                                   {0, 2}, {1, 3}, {4, 6}, {5, 7},
                                                                   {0, 1}, {2, 3}, {4, 5}, {6, 7}}};
    for (int group = 0; group < 3; ++group) {
      const auto& ref = kEdges[group * 4];
      const Vector3<Scalar> e0 = (vertices.row(ref[1]) - vertices.row(ref[0])).transpose();
      for (int j = 1; j < 4; ++j) {
        const auto& e = kEdges[group * 4 + j];
        const Vector3<Scalar> ej = (vertices.row(e[1]) - vertices.row(e[0])).transpose();
        if (scalar_value((ej - e0).cwiseAbs().maxCoeff()) > tol) return false;
      }
    }
    return scalar_value(volume()) > 0.0;
  }

  template <typename Other>
  OrientedBox<Other> cast() const {
    OrientedBox<Other> out;
    out.vertices = vertices.template cast<Other>();
    return out;
  }
};

// ---------------------------------------------------------------------------
// Rotations

template <typename Scalar>
Matrix3<Scalar> rot6d_to_matrix(const Rotation6D<Scalar>& r) {
  using std::sqrt;
  const Vector3<Scalar> a1 = r.template head<3>();
  const Vector3<Scalar> a2 = r.template tail<3>();
  const double n1 = scalar_value(a1.norm());
  const double n2 = scalar_value(a2.norm());
  if (!(n1 >= 1e-8) || !(n2 >= 1e-8) || !(scalar_value(a1.cross(a2).norm()) >= 1e-8 * n1 * n2)) {
    throw Error(ErrorCode::DegenerateRotation, "6D rotation columns are near zero or parallel");
  }
  const Vector3<Scalar> b1 = a1 / a1.norm();
  const Vector3<Scalar> u = a2 - b1.dot(a2) * b1;
  const Vector3<Scalar> b2 = u / u.norm();
  Matrix3<Scalar> R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

template <typename Scalar>
Rotation6D<Scalar> matrix_to_rot6d(const Matrix3<Scalar>& R) {
  Rotation6D<Scalar> r;
  r << R.col(0), R.col(1);
  return r;
}

/// Reverse-mode gradient of rot6d_to_matrix: maps dL/dR to dL/dr.
template <typename Scalar>
Rotation6D<Scalar> rot6d_to_matrix_backward(const Rotation6D<Scalar>& r, const Matrix3<Scalar>& grad_R) {
  const Vector3<Scalar> a1 = r.template head<3>();
  const Vector3<Scalar> a2 = r.template tail<3>();
  const Scalar n1 = a1.norm();
  const Vector3<Scalar> b1 = a1 / n1;
  const Vector3<Scalar> u = a2 - b1.dot(a2) * b1;
  const Scalar nu = u.norm();
  const Vector3<Scalar> b2 = u / nu;

  const Vector3<Scalar> g3 = grad_R.col(2);
  Vector3<Scalar> gb1 = grad_R.col(0) + b2.cross(g3);
  const Vector3<Scalar> gb2 = grad_R.col(1) + g3.cross(b1);

  const Vector3<Scalar> gu = (gb2 - b2 * b2.dot(gb2)) / nu;
  const Vector3<Scalar> ga2 = gu - b1 * b1.dot(gu);
  gb1 -= b1.dot(a2) * gu + a2 * b1.dot(gu);
  const Vector3<Scalar> ga1 = (gb1 - b1 * b1.dot(gb1)) / n1;

  Rotation6D<Scalar> g;
  g << ga1, ga2;
  return g;
}

template <typename Scalar>
Matrix3<Scalar> axis_angle_matrix(const Vector3<Scalar>& axis, Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, axis.normalized()).toRotationMatrix();
}

/// Geodesic angle between two rotations, degrees. Evaluated through the
/// chord ‖R1 - R2‖_F = 2√2·sin(θ/2), which equals arccos((tr(R1ᵀR2) - 1)/2)
/// on exact rotations and stays exactly 0 for identical inputs that are
/// only orthonormal to rounding.
template <typename Scalar>
double rotation_error(const Matrix3<Scalar>& R1, const Matrix3<Scalar>& R2) {
  Eigen::Matrix3d d;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) d(r, c) = scalar_value(R1(r, c)) - scalar_value(R2(r, c));
  }
  const double half_chord = d.norm() / (2.0 * std::sqrt(2.0));
  return 2.0 * std::asin(std::clamp(half_chord, 0.0, 1.0)) * 180.0 / M_PI;
}

// ---------------------------------------------------------------------------
// Similarity fitting

template <typename Scalar>
struct ScaleTranslation {
  Scalar s;
  Vector3<Scalar> t;
  bool scale_clamped = false;
};

inline constexpr double kMinScale = 1e-6;

/// Least-squares (s, t) for obs ≈ s·R·nocs + t with R held fixed.
template <typename Scalar>
ScaleTranslation<Scalar> fit_translation_scale(const Points<Scalar>& nocs_pts, const Points<Scalar>& obs_pts,
                                               const Matrix3<Scalar>& R) {
  if (nocs_pts.rows() != obs_pts.rows()) throw Error(ErrorCode::ShapeMismatch, "correspondence count differs");
  if (nocs_pts.rows() < 2) throw Error(ErrorCode::DegenerateCorrespondences, "need at least two correspondences");
  const Vector3<Scalar> n_mean = nocs_pts.colwise().mean().transpose();
  const Vector3<Scalar> p_mean = obs_pts.colwise().mean().transpose();
  const Points<Scalar> n_c = nocs_pts.rowwise() - n_mean.transpose();
  const Points<Scalar> p_c = obs_pts.rowwise() - p_mean.transpose();
  const double den = n_c.template cast<double>().squaredNorm();
  if (den < 1e-12) throw Error(ErrorCode::DegenerateCorrespondences, "NOCS points are (nearly) identical");
  // Σ <R ñ_i, p̃_i> = Σ ñ_iᵀ Rᵀ p̃_i
  const double num = ((n_c * R.transpose()).cwiseProduct(p_c)).template cast<double>().sum();
  ScaleTranslation<Scalar> out;
  double s = num / den;
  if (s < kMinScale) {
    s = kMinScale;
    out.scale_clamped = true;
  }
  out.s = static_cast<Scalar>(s);
  out.t = p_mean - out.s * (R * n_mean);
  return out;
}

template <typename Scalar>
struct ScaleTranslationGrad {
  Points<Scalar> nocs;
  Matrix3<Scalar> R;
};

/// Reverse-mode gradient of fit_translation_scale w.r.t. the NOCS points and R.
template <typename Scalar>
ScaleTranslationGrad<Scalar> fit_translation_scale_backward(const Points<Scalar>& nocs_pts,
                                                           const Points<Scalar>& obs_pts, const Matrix3<Scalar>& R,
                                                           const ScaleTranslation<Scalar>& fit, Scalar grad_s,
                                                           const Vector3<Scalar>& grad_t) {
  const Index m = nocs_pts.rows();
  const Vector3<Scalar> n_mean = nocs_pts.colwise().mean().transpose();
  const Vector3<Scalar> p_mean = obs_pts.colwise().mean().transpose();
  const Points<Scalar> n_c = nocs_pts.rowwise() - n_mean.transpose();
  const Points<Scalar> p_c = obs_pts.rowwise() - p_mean.transpose();

  ScaleTranslationGrad<Scalar> g;
  // t = p̄ − s·R·n̄
  Scalar gs = grad_s - grad_t.dot(R * n_mean);
  g.R = -fit.s * grad_t * n_mean.transpose();
  const Vector3<Scalar> g_nmean = -fit.s * (R.transpose() * grad_t);

  g.nocs = Points<Scalar>::Zero(m, 3);
  if (!fit.scale_clamped) {
    const Scalar den = n_c.squaredNorm();
    const Scalar num = ((n_c * R.transpose()).cwiseProduct(p_c)).sum();
    // s = num / den
    const Points<Scalar> g_nc = gs * ((p_c * R) / den - (Scalar(2) * num / (den * den)) * n_c);
    g.R += (gs / den) * (p_c.transpose() * n_c);
    const Vector3<Scalar> mean_g = g_nc.colwise().mean().transpose();
    g.nocs = g_nc.rowwise() - mean_g.transpose();
  }
  g.nocs.rowwise() += (g_nmean / Scalar(m)).transpose();
  return g;
}

/// Full least-squares similarity (R, t, s) mapping src onto dst.
template <typename Scalar>
SimilarityTransform<Scalar> umeyama_full(const Points<Scalar>& src, const Points<Scalar>& dst) {
  if (src.rows() != dst.rows()) throw Error(ErrorCode::ShapeMismatch, "correspondence count differs");
  if (src.rows() < 3) throw Error(ErrorCode::DegenerateCorrespondences, "need at least three correspondences");
  const Points<Scalar> src_c = src.rowwise() - src.colwise().mean();
  const Points<Scalar> dst_c = dst.rowwise() - dst.colwise().mean();
  Eigen::JacobiSVD<Matrix3<Scalar>> sv_src(src_c.transpose() * src_c);
  const auto sig = sv_src.singularValues();
  if (!(sig(0) > 0) || sig(1) < 1e-12 * sig(0)) {
    throw Error(ErrorCode::DegenerateCorrespondences, "source points are collinear");
  }
  Eigen::JacobiSVD<Matrix3<Scalar>> sv_cov(dst_c.transpose() * src_c);
  const auto sig_cov = sv_cov.singularValues();
  if (!(sig_cov(0) > 0) || sig_cov(1) < 1e-12 * sig_cov(0)) {
    throw Error(ErrorCode::DegenerateCorrespondences, "rank-deficient cross-covariance");
  }
  const Eigen::Matrix<Scalar, 4, 4> T = Eigen::umeyama(src.transpose(), dst.transpose(), true);
  SimilarityTransform<Scalar> out;
  const Matrix3<Scalar> sR = T.template topLeftCorner<3, 3>();
  out.s = std::cbrt(sR.determinant());
  out.R = sR / out.s;
  out.t = T.template topRightCorner<3, 1>();
  return out;
}

// ---------------------------------------------------------------------------
// Boxes

template <typename Scalar>
OrientedBox<Scalar> transform_box(const OrientedBox<Scalar>& canonical, const SimilarityTransform<Scalar>& pose) {
  OrientedBox<Scalar> out;
  out.vertices = (pose.s * canonical.vertices * pose.R.transpose()).rowwise() + pose.t.transpose();
  return out;
}

template <typename Scalar>
struct PoseGrad {
  Matrix3<Scalar> R = Matrix3<Scalar>::Zero();
  Vector3<Scalar> t = Vector3<Scalar>::Zero();
  Scalar s = Scalar(0);
};

/// Gradient of transform_box w.r.t. the pose, given dL/d(vertices).
template <typename Scalar>
PoseGrad<Scalar> transform_box_backward(const OrientedBox<Scalar>& canonical, const SimilarityTransform<Scalar>& pose,
                                        const BoxVertices<Scalar>& grad_vertices) {
  PoseGrad<Scalar> g;
  g.t = grad_vertices.colwise().sum().transpose();
  g.R = pose.s * grad_vertices.transpose() * canonical.vertices;
  g.s = (grad_vertices.cwiseProduct(canonical.vertices * pose.R.transpose())).sum();
  return g;
}

/// Monte-Carlo IoU of two oriented boxes over their joint axis-aligned bounds.
template <typename Scalar>
double box_iou(const OrientedBox<Scalar>& a, const OrientedBox<Scalar>& b, std::size_t samples = 100000,
               std::uint64_t seed = 0) {
  const BoxVertices<double> va = a.vertices.template cast<double>();
  const BoxVertices<double> vb = b.vertices.template cast<double>();
  const Eigen::RowVector3d lo = va.colwise().minCoeff().cwiseMin(vb.colwise().minCoeff());
  const Eigen::RowVector3d hi = va.colwise().maxCoeff().cwiseMax(vb.colwise().maxCoeff());

  auto inverse_frame = [](const BoxVertices<double>& v) {
    Eigen::Matrix3d E;
    E.col(0) = (v.row(4) - v.row(0)).transpose();
    E.col(1) = (v.row(2) - v.row(0)).transpose();
    E.col(2) = (v.row(1) - v.row(0)).transpose();
    return Eigen::Matrix3d(E.inverse());
  };
  const Eigen::Matrix3d inv_a = inverse_frame(va);
  const Eigen::Matrix3d inv_b = inverse_frame(vb);
  const Eigen::Vector3d oa = va.row(0).transpose();
  const Eigen::Vector3d ob = vb.row(0).transpose();
  auto inside = [](const Eigen::Matrix3d& inv, const Eigen::Vector3d& o, const Eigen::Vector3d& p) {
    const Eigen::Vector3d c = inv * (p - o);
    return (c.array() >= 0.0).all() && (c.array() <= 1.0).all();
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    Eigen::Vector3d p;
    for (int d = 0; d < 3; ++d) p(d) = lo(d) + unit(rng) * (hi(d) - lo(d));
    const bool in_a = inside(inv_a, oa, p);
    const bool in_b = inside(inv_b, ob, p);
    both += (in_a && in_b) ? 1 : 0;
    either += (in_a || in_b) ? 1 : 0;
  }
  if (either == 0) return 0.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

// ---------------------------------------------------------------------------
// Point-set distances

namespace detail {

inline double squared_distance(const Points<double>& s, Index j, const Eigen::RowVector3d& q) {
  const double dx = s(j, 0) - q(0);
  const double dy = s(j, 1) - q(1);
  const double dz = s(j, 2) - q(2);
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace detail

/// Index of the nearest row of `set` for every row of `query`, with distances.
template <typename Scalar>
void nearest_neighbors(const Points<Scalar>& query, const Points<Scalar>& set, std::vector<Index>& index,
                       std::vector<double>& distance) {
  index.assign(static_cast<std::size_t>(query.rows()), 0);
  distance.assign(static_cast<std::size_t>(query.rows()), std::numeric_limits<double>::infinity());
  const Points<double> s = set.template cast<double>();
  for (Index i = 0; i < query.rows(); ++i) {
    const Eigen::RowVector3d q = query.row(i).template cast<double>();
    Index best = 0;
    double d2 = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < s.rows(); ++j) {
      const double e = detail::squared_distance(s, j, q);
      if (e < d2) {
        d2 = e;
        best = j;
      }
    }
    index[static_cast<std::size_t>(i)] = best;
    distance[static_cast<std::size_t>(i)] = std::sqrt(d2);
  }
}

/// Symmetric chamfer distance with unsquared L2 terms, each side averaged.
template <typename Scalar>
double chamfer(const Points<Scalar>& A, const Points<Scalar>& B) {
  require_cloud(A, "chamfer: first cloud is empty");
  require_cloud(B, "chamfer: second cloud is empty");
  std::vector<Index> idx;
  std::vector<double> dab, dba;
  nearest_neighbors(A, B, idx, dab);
  nearest_neighbors(B, A, idx, dba);
  double sa = 0.0, sb = 0.0;
  for (double d : dab) sa += d;
  for (double d : dba) sb += d;
  return sa / static_cast<double>(A.rows()) + sb / static_cast<double>(B.rows());
}

/// Label i is 1 iff some hand point lies strictly closer than tau to obj_i.
template <typename Scalar>
ContactMap compute_contact_map(const Points<Scalar>& obj, const Points<Scalar>& hand, double tau) {
  require_cloud(obj, "contact map: object cloud is empty");
  require_cloud(hand, "contact map: hand cloud is empty");
  const Points<double> h = hand.template cast<double>();
  ContactMap out(static_cast<std::size_t>(obj.rows()), 0);
  for (Index i = 0; i < obj.rows(); ++i) {
    const Eigen::RowVector3d p = obj.row(i).template cast<double>();
    double d2 = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < h.rows(); ++j) d2 = std::min(d2, detail::squared_distance(h, j, p));
    out[static_cast<std::size_t>(i)] = std::sqrt(d2) < tau ? 1 : 0;
  }
  return out;
}

}  // namespace interprior
