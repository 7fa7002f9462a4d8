#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "interprior/geometry.hpp"

namespace interprior {

inline constexpr int kHandJoints = 21;
inline constexpr int kHandAngles = 15;
inline constexpr int kHandBones = 20;
/// rot6d (6) + translation (3) + joint angles (15)
inline constexpr int kHandParams = 24;
inline constexpr double kMaxFlexion = M_PI / 2.0;

template <typename Scalar>
using HandJoints = Eigen::Matrix<Scalar, kHandJoints, 3>;
template <typename Scalar>
using HandAngles = Eigen::Matrix<Scalar, kHandAngles, 1>;
using HandParams = Eigen::Matrix<double, kHandParams, 1>;

/// Fixed capsule skeleton of the proxy hand, in the hand frame: wrist at the
/// origin, fingers along +y, palm facing -z. Joint order is wrist, then
/// base/PIP/DIP/tip for thumb, index, middle, ring, pinky.
struct HandTemplate {
  struct Finger {
    Eigen::Vector3d base;
    Eigen::Matrix3d rest;
    std::array<double, 3> length;
    double radius;
  };
  std::array<Finger, 5> fingers;
  double palm_radius = 0.012;

  static const HandTemplate& standard();
};

inline const HandTemplate& HandTemplate::standard() {
  static const HandTemplate tmpl = [] {
    auto rz = [](double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); };
    auto ry = [](double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix(); };
    HandTemplate t;
    t.fingers[0] = {{0.030, 0.030, -0.010}, rz(-0.9) * ry(-0.6), {0.035, 0.030, 0.025}, 0.010};
    t.fingers[1] = {{0.032, 0.090, 0.0}, rz(-0.08), {0.040, 0.025, 0.020}, 0.009};
    t.fingers[2] = {{0.010, 0.095, 0.0}, Eigen::Matrix3d::Identity(), {0.045, 0.028, 0.021}, 0.009};
    t.fingers[3] = {{-0.012, 0.090, 0.0}, rz(0.08), {0.042, 0.026, 0.020}, 0.009};
    t.fingers[4] = {{-0.032, 0.080, 0.0}, rz(0.16), {0.033, 0.020, 0.018}, 0.008};
    return t;
  }();
  return tmpl;
}

/// One bone per capsule: 5 metacarpals (wrist to finger base), then 3 per finger.
struct HandBone {
  int from;
  int to;
  double radius;
};

inline const std::array<HandBone, kHandBones>& hand_bones() {
  static const std::array<HandBone, kHandBones> bones = [] {
    std::array<HandBone, kHandBones> b{};
    const auto& tmpl = HandTemplate::standard();
    for (int f = 0; f < 5; ++f) b[f] = {0, 1 + 4 * f, tmpl.palm_radius};
    for (int f = 0; f < 5; ++f) {
      for (int k = 0; k < 3; ++k) b[5 + 3 * f + k] = {1 + 4 * f + k, 2 + 4 * f + k, tmpl.fingers[f].radius};
    }
    return b;
  }();
  return bones;
}

/// Deterministic cylinder sampling pattern: per sample, the bone and the
/// offset in that bone's frame (bone along local +y).
struct HandSurfaceLayout {
  std::vector<int> bone;
  std::vector<Eigen::Vector3d> offset;
};

inline HandSurfaceLayout hand_surface_layout(int samples) {
  const auto& tmpl = HandTemplate::standard();
  const auto& bones = hand_bones();
  std::array<double, kHandBones> length{};
  for (int f = 0; f < 5; ++f) {
    length[f] = tmpl.fingers[f].base.norm();
    for (int k = 0; k < 3; ++k) length[5 + 3 * f + k] = tmpl.fingers[f].length[k];
  }
  std::array<double, kHandBones> area{};
  double total = 0.0;
  for (int b = 0; b < kHandBones; ++b) {
    area[b] = 2.0 * M_PI * bones[b].radius * length[b];
    total += area[b];
  }
  // largest-remainder allocation
  std::array<int, kHandBones> count{};
  std::array<double, kHandBones> rem{};
  int assigned = 0;
  for (int b = 0; b < kHandBones; ++b) {
    const double exact = samples * area[b] / total;
    count[b] = static_cast<int>(std::floor(exact));
    rem[b] = exact - count[b];
    assigned += count[b];
  }
  while (assigned < samples) {
    int best = 0;
    for (int b = 1; b < kHandBones; ++b) {
      if (rem[b] > rem[best]) best = b;
    }
    ++count[best];
    rem[best] = -1.0;
    ++assigned;
  }
  HandSurfaceLayout layout;
  constexpr double kGolden = 2.399963229728653;
  for (int b = 0; b < kHandBones; ++b) {
    for (int j = 0; j < count[b]; ++j) {
      const double u = (j + 0.5) / count[b];
      const double phi = j * kGolden + b;
      layout.bone.push_back(b);
      layout.offset.emplace_back(bones[b].radius * std::cos(phi), u * length[b], bones[b].radius * std::sin(phi));
    }
  }
  return layout;
}

template <typename Scalar>
struct HandGeometry {
  HandJoints<Scalar> joints;
  Points<Scalar> surface;
  /// Bone frames in the output frame; column 1 is the bone direction.
  std::array<Matrix3<Scalar>, kHandBones> bone_frames;
};

/// Forward kinematics of the proxy hand under root rotation R and
/// translation t. Each finger joint flexes about its local -x axis.
template <typename Scalar>
HandGeometry<Scalar> hand_forward_kinematics(const Matrix3<Scalar>& R, const Vector3<Scalar>& t,
                                             const HandAngles<Scalar>& angles, const HandSurfaceLayout& layout) {
  using std::cos;
  using std::sin;
  const auto& tmpl = HandTemplate::standard();
  HandGeometry<Scalar> g;
  std::array<Vector3<Scalar>, kHandJoints> local;
  std::array<Matrix3<Scalar>, kHandBones> frame;
  local[0] = Vector3<Scalar>::Zero();
  for (int f = 0; f < 5; ++f) {
    const auto& finger = tmpl.fingers[f];
    const Eigen::Vector3d dir = finger.base.normalized();
    const Eigen::Matrix3d meta =
        Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitY(), dir).toRotationMatrix();
    frame[f] = meta.cast<Scalar>();
    Vector3<Scalar> joint = finger.base.cast<Scalar>();
    local[1 + 4 * f] = joint;
    Matrix3<Scalar> rot = finger.rest.cast<Scalar>();
    for (int k = 0; k < 3; ++k) {
      const Scalar a = angles(3 * f + k);
      Matrix3<Scalar> flex;
      flex << Scalar(1), Scalar(0), Scalar(0), Scalar(0), cos(a), sin(a), Scalar(0), -sin(a), cos(a);
      rot = (rot * flex).eval();
      frame[5 + 3 * f + k] = rot;
      joint = joint + rot.col(1) * Scalar(finger.length[k]);
      local[2 + 4 * f + k] = joint;
    }
  }
  for (int j = 0; j < kHandJoints; ++j) g.joints.row(j) = (R * local[j] + t).transpose();
  for (int b = 0; b < kHandBones; ++b) g.bone_frames[b] = R * frame[b];

  const auto& bones = hand_bones();
  const Index m = static_cast<Index>(layout.bone.size());
  g.surface.resize(m, 3);
  for (Index i = 0; i < m; ++i) {
    const int b = layout.bone[static_cast<std::size_t>(i)];
    const Vector3<Scalar> p = local[bones[b].from] + frame[b] * layout.offset[static_cast<std::size_t>(i)].cast<Scalar>();
    g.surface.row(i) = (R * p + t).transpose();
  }
  return g;
}

/// Proxy hand: rigid root pose plus 15 flexion angles in [0, π/2].
struct KinematicHand {
  SimilarityTransform<double> root;
  HandAngles<double> joint_angles = HandAngles<double>::Zero();
  int surface_samples = 512;

  HandGeometry<double> geometry() const {
    return hand_forward_kinematics<double>(root.R, root.t, joint_angles, hand_surface_layout(surface_samples));
  }

  void clamp_angles() { joint_angles = joint_angles.cwiseMax(0.0).cwiseMin(kMaxFlexion); }

  HandParams to_params() const {
    HandParams p;
    p << matrix_to_rot6d(root.R), root.t, joint_angles;
    return p;
  }

  static KinematicHand from_params(const HandParams& p, int surface_samples) {
    KinematicHand h;
    h.root.R = rot6d_to_matrix<double>(p.head<6>());
    h.root.t = p.segment<3>(6);
    h.root.s = 1.0;
    h.joint_angles = p.tail<kHandAngles>();
    h.surface_samples = surface_samples;
    return h;
  }
};

/// Mean per-joint distance (meters).
inline double mean_joint_error(const HandJoints<double>& a, const HandJoints<double>& b) {
  return (a - b).rowwise().norm().mean();
}

}  // namespace interprior
