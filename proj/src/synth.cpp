#include "interprior/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "interprior/parallel.hpp"

namespace interprior {

namespace {

constexpr double kDeg = M_PI / 180.0;

std::mt19937_64 seeded_rng(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Category template; jitter holds per-axis factors (6 values).
ArticulatedInstance make_template(Category category, const std::vector<double>& j, int drawers) {
  ArticulatedInstance inst;
  inst.category = category;
  inst.scale_jitter = j;
  auto body = [&](double x, double y, double z) {
    const Eigen::Vector3d h(x * j[0], y * j[1], z * j[2]);
    inst.parts.push_back({h, Eigen::Vector3d(0.0, 0.0, h.z())});
    return h;
  };
  switch (category) {
    case Category::Laptop:
    case Category::Trashcan: {
      const bool laptop = category == Category::Laptop;
      const Eigen::Vector3d hb = laptop ? body(0.16, 0.12, 0.008) : body(0.15, 0.15, 0.30);
      const Eigen::Vector3d hl(hb.x(), hb.y(), (laptop ? 0.004 : 0.01) * j[3]);
      inst.parts.push_back({hl, Eigen::Vector3d(0.0, 0.0, 2.0 * hb.z() + hl.z())});
      Joint joint;
      joint.type = JointType::Revolute;
      joint.axis = -Eigen::Vector3d::UnitX();
      joint.anchor = Eigen::Vector3d(0.0, hb.y(), 2.0 * hb.z());
      joint.lo = 0.0;
      joint.hi = (laptop ? 135.0 : 90.0) * kDeg;
      joint.child = 1;
      inst.joints.push_back(joint);
      // laptops are held on the inner lid face, trashcans on top; fingers wrap the free edge
      const double side = laptop ? -1.0 : 1.0;
      inst.handles.push_back({1, Eigen::Vector3d(0.0, -0.55 * hl.y(), side * hl.z()), side * Eigen::Vector3d::UnitZ(),
                              -Eigen::Vector3d::UnitY()});
      break;
    }
    case Category::Safe:
    case Category::Microwave: {
      const bool safe = category == Category::Safe;
      const Eigen::Vector3d hb = safe ? body(0.20, 0.20, 0.20) : body(0.25, 0.18, 0.15);
      const Eigen::Vector3d hd(hb.x(), 0.01 * j[3], hb.z());
      inst.parts.push_back({hd, Eigen::Vector3d(0.0, -hb.y() - hd.y(), hb.z())});
      Joint joint;
      joint.type = JointType::Revolute;
      joint.axis = -Eigen::Vector3d::UnitZ();
      joint.anchor = Eigen::Vector3d(-hb.x(), -hb.y(), hb.z());
      joint.lo = 0.0;
      joint.hi = 120.0 * kDeg;
      joint.child = 1;
      inst.joints.push_back(joint);
      inst.handles.push_back({1, Eigen::Vector3d(0.55 * hd.x(), -hd.y(), 0.0), -Eigen::Vector3d::UnitY(),
                              Eigen::Vector3d::UnitX()});
      break;
    }
    case Category::Drawer: {
      const Eigen::Vector3d hb = body(0.25, 0.22, 0.30);
      const double slot = 2.0 * hb.z() / drawers;
      const Eigen::Vector3d hd(0.9 * hb.x(), 0.85 * hb.y(), 0.4 * slot * j[3]);
      for (int k = 0; k < drawers; ++k) {
        const Eigen::Vector3d rest(0.0, -hb.y() - 0.01 + hd.y(), (k + 0.5) * slot);
        inst.parts.push_back({hd, rest});
        Joint joint;
        joint.type = JointType::Prismatic;
        joint.axis = -Eigen::Vector3d::UnitY();
        joint.anchor = rest;
        joint.lo = 0.0;
        joint.hi = 0.3;
        joint.child = k + 1;
        inst.joints.push_back(joint);
        inst.handles.push_back({k + 1, Eigen::Vector3d(0.0, -hd.y(), 0.0), -Eigen::Vector3d::UnitY(),
                                Eigen::Vector3d::UnitZ()});
      }
      break;
    }
  }
  return inst;
}

bool ray_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& h, double& t_hit) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d(a)) < 1e-15) {
      if (o(a) < -h(a) || o(a) > h(a)) return false;
      continue;
    }
    double ta = (-h(a) - o(a)) / d(a);
    double tb = (h(a) - o(a)) / d(a);
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  t_hit = t0;
  return t0 > 0.0;
}

/// Ray / capsule intersection; d must be unit length.
bool ray_capsule(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& pa,
                 const Eigen::Vector3d& pb, double r, double& t_hit) {
  const Eigen::Vector3d ba = pb - pa;
  const Eigen::Vector3d oa = o - pa;
  const double baba = ba.dot(ba);
  const double bard = ba.dot(d);
  const double baoa = ba.dot(oa);
  const double rdoa = d.dot(oa);
  const double oaoa = oa.dot(oa);
  const double a = baba - bard * bard;
  double b = baba * rdoa - baoa * bard;
  double c = baba * oaoa - baoa * baoa - r * r * baba;
  double h = b * b - a * c;
  if (h < 0.0 || a <= 0.0) return false;
  const double t = (-b - std::sqrt(h)) / a;
  const double y = baoa + t * bard;
  if (y > 0.0 && y < baba) {
    t_hit = t;
    return t > 0.0;
  }
  const Eigen::Vector3d oc = (y <= 0.0) ? oa : Eigen::Vector3d(o - pb);
  b = d.dot(oc);
  c = oc.dot(oc) - r * r;
  h = b * b - c;
  if (h <= 0.0) return false;
  t_hit = -b - std::sqrt(h);
  return t_hit > 0.0;
}

struct SceneView {
  Camera camera;
};

Camera random_camera(std::mt19937_64& rng, const Eigen::Vector3d& target, double radius, int width, int height) {
  const double az = -M_PI / 2.0 + uniform(rng, -80.0, 80.0) * kDeg;
  const double el = uniform(rng, 15.0, 75.0) * kDeg;
  const double dist = uniform(rng, 0.8, 1.5);
  const Eigen::Vector3d eye =
      target + dist * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  return look_at_camera(eye, target, radius, width, height);
}

void bounding_sphere(const std::vector<Eigen::Vector3d>& pts, Eigen::Vector3d& center, double& radius) {
  Eigen::Vector3d lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  center = 0.5 * (lo + hi);
  radius = 0.0;
  for (const auto& p : pts) radius = std::max(radius, (p - center).norm());
  radius += 0.01;
}

std::vector<Eigen::Vector3d> instance_vertices(const ArticulatedInstance& inst,
                                               const std::vector<SimilarityTransform<double>>& frames) {
  std::vector<Eigen::Vector3d> pts;
  for (int k = 0; k < inst.num_parts(); ++k) {
    for (int c = 0; c < 8; ++c) {
      pts.push_back(frames[k].apply(box_corner<double>(c, inst.parts[k].half_extents)));
    }
  }
  return pts;
}

std::vector<double> random_joint_state(const ArticulatedInstance& inst, std::mt19937_64& rng) {
  std::vector<double> q;
  for (const auto& j : inst.joints) q.push_back(uniform(rng, j.lo, j.hi));
  return q;
}

SimilarityTransform<double> part_pose_in_camera(const ArticulatedInstance& inst,
                                                const SimilarityTransform<double>& frame, int part,
                                                const Camera& cam) {
  SimilarityTransform<double> pose;
  pose.R = cam.R_cw * frame.R;
  pose.t = cam.R_cw * frame.t + cam.t_cw;
  pose.s = 2.0 * inst.parts[part].half_extents.norm();
  return pose;
}

template <typename T>
void write_raw(const std::filesystem::path& path, const std::vector<T>& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
  if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

template <typename T>
std::vector<T> read_raw(const std::filesystem::path& path, std::size_t count) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path.string());
  const auto size = static_cast<std::size_t>(f.tellg());
  if (size != count * sizeof(T)) {
    throw Error(ErrorCode::Format, path.string() + ": expected " + std::to_string(count * sizeof(T)) +
                                       " bytes, found " + std::to_string(size));
  }
  f.seekg(0);
  std::vector<T> data(count);
  f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  return data;
}

template <typename Derived>
void append_rows(std::vector<float>& out, const Eigen::MatrixBase<Derived>& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<float>(m(r, c)));
  }
}

Points<double> rows_from(const std::vector<float>& v, std::size_t offset, Index rows) {
  Points<double> p(rows, 3);
  for (Index r = 0; r < rows; ++r) {
    for (int c = 0; c < 3; ++c) p(r, c) = v[offset + static_cast<std::size_t>(r * 3 + c)];
  }
  return p;
}

nlohmann::json vec_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
Eigen::Vector3d json_vec(const nlohmann::json& j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }

}  // namespace

std::string category_name(Category c) {
  switch (c) {
    case Category::Laptop: return "laptop";
    case Category::Drawer: return "drawer";
    case Category::Safe: return "safe";
    case Category::Microwave: return "microwave";
    case Category::Trashcan: return "trashcan";
  }
  return "unknown";
}

Category parse_category(const std::string& name) {
  for (Category c : all_categories()) {
    if (category_name(c) == name) return c;
  }
  throw Error(ErrorCode::Usage, "unknown category '" + name + "'");
}

const std::vector<Category>& all_categories() {
  static const std::vector<Category> cats = {Category::Laptop, Category::Drawer, Category::Safe,
                                             Category::Microwave, Category::Trashcan};
  return cats;
}

std::vector<SimilarityTransform<double>> ArticulatedInstance::part_frames(
    const std::vector<double>& joint_state) const {
  if (joint_state.size() != joints.size()) throw Error(ErrorCode::ShapeMismatch, "joint state size");
  std::vector<SimilarityTransform<double>> frames(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) frames[k].t = parts[k].rest_center;
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const Joint& joint = joints[j];
    auto& f = frames[static_cast<std::size_t>(joint.child)];
    if (joint.type == JointType::Revolute) {
      f.R = axis_angle_matrix<double>(joint.axis, joint_state[j]);
      f.t = joint.anchor + f.R * (parts[static_cast<std::size_t>(joint.child)].rest_center - joint.anchor);
    } else {
      f.t = parts[static_cast<std::size_t>(joint.child)].rest_center + joint_state[j] * joint.axis;
    }
  }
  return frames;
}

bool ArticulatedInstance::joint_state_valid(const std::vector<double>& joint_state) const {
  if (joint_state.size() != joints.size()) return false;
  for (std::size_t j = 0; j < joints.size(); ++j) {
    if (joint_state[j] < joints[j].lo || joint_state[j] > joints[j].hi) return false;
  }
  return true;
}

ArticulatedInstance make_instance(Category category, std::uint64_t seed, int drawers) {
  auto rng = seeded_rng(seed ^ (static_cast<std::uint64_t>(category) << 56));
  std::vector<double> jitter(6);
  for (double& v : jitter) v = uniform(rng, 0.75, 1.25);
  if (category == Category::Drawer && drawers <= 0) drawers = std::uniform_int_distribution<int>(1, 3)(rng);
  ArticulatedInstance inst = make_template(category, jitter, std::max(drawers, 1));
  inst.instance_seed = seed;
  return inst;
}

int category_part_count(Category category, int drawers) {
  return category == Category::Drawer ? 1 + drawers : 2;
}

std::vector<OrientedBox<double>> category_canonical_boxes(Category category, int num_parts) {
  const ArticulatedInstance tmpl =
      make_template(category, std::vector<double>(6, 1.0), category == Category::Drawer ? num_parts - 1 : 1);
  if (tmpl.num_parts() != num_parts) throw Error(ErrorCode::PartCountMismatch, "category part count");
  std::vector<OrientedBox<double>> boxes;
  for (const auto& p : tmpl.parts) {
    boxes.push_back(OrientedBox<double>::from_half_extents(p.half_extents / (2.0 * p.half_extents.norm())));
  }
  return boxes;
}

double distance_to_instance(const ArticulatedInstance& instance, const std::vector<double>& joint_state,
                            const Eigen::Vector3d& p) {
  const auto frames = instance.part_frames(joint_state);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < instance.num_parts(); ++k) {
    const Eigen::Vector3d q = frames[k].R.transpose() * (p - frames[k].t);
    const Eigen::Vector3d outside = (q.cwiseAbs() - instance.parts[k].half_extents).cwiseMax(0.0);
    best = std::min(best, outside.norm());
  }
  return best;
}

KinematicHand pose_hand_grasp(const ArticulatedInstance& instance, const std::vector<double>& joint_state,
                              std::uint64_t seed, double tau, int surface_samples, int min_contacts) {
  if (!instance.joint_state_valid(joint_state)) throw Error(ErrorCode::ShapeMismatch, "joint state outside limits");
  auto rng = seeded_rng(seed);
  const std::size_t pick =
      std::uniform_int_distribution<std::size_t>(0, instance.handles.size() - 1)(rng);
  const HandleSpec& handle = instance.handles[pick];
  const auto frames = instance.part_frames(joint_state);
  const auto& F = frames[static_cast<std::size_t>(handle.part)];
  const Eigen::Vector3d face = F.apply(handle.face_center);
  const Eigen::Vector3d n = F.R * handle.face_normal;
  const double roll = uniform(rng, -15.0, 15.0) * kDeg;
  const Eigen::Vector3d u = axis_angle_matrix<double>(n, roll) * (F.R * handle.finger_direction);
  const double offset = uniform(rng, 0.02, 0.05);

  KinematicHand hand;
  hand.surface_samples = surface_samples;
  hand.root.R.col(0) = u.cross(n);
  hand.root.R.col(1) = u;
  hand.root.R.col(2) = n;
  const Eigen::Vector3d knuckles(0.0, 0.09, 0.0);
  hand.root.t = face + offset * n - hand.root.R * knuckles;

  const HandSurfaceLayout layout = hand_surface_layout(surface_samples);
  std::normal_distribution<double> jiggle(0.0, 0.1);
  for (int attempt = 0; attempt < 50; ++attempt) {
    const double curl = uniform(rng, 0.15, 1.3);
    for (int a = 0; a < kHandAngles; ++a) hand.joint_angles(a) = curl + jiggle(rng);
    hand.clamp_angles();
    const auto geo = hand_forward_kinematics<double>(hand.root.R, hand.root.t, hand.joint_angles, layout);
    int contacts = 0;
    for (Index i = 0; i < geo.surface.rows(); ++i) {
      if (distance_to_instance(instance, joint_state, geo.surface.row(i).transpose()) < tau) ++contacts;
    }
    if (contacts >= min_contacts) return hand;
  }
  throw Error(ErrorCode::GraspFailure, "no finger configuration reached the contact count");
}

Camera look_at_camera(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double radius, int width,
                      int height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.R_cw.row(0) = right.transpose();
  cam.R_cw.row(1) = down.transpose();
  cam.R_cw.row(2) = forward.transpose();
  cam.t_cw = -cam.R_cw * eye;
  const double dist = (target - eye).norm();
  const double half_angle = std::asin(std::min(radius / dist, 0.95));
  cam.fx = cam.fy = 0.45 * height / std::tan(half_angle);
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

RenderResult render_partial_cloud(const ArticulatedInstance& instance, const std::vector<double>& joint_state,
                                  const KinematicHand* hand, const Camera& camera, int n_points,
                                  std::uint64_t seed) {
  const auto frames = instance.part_frames(joint_state);
  std::vector<Eigen::Vector3d> cap_a, cap_b;
  std::vector<double> cap_r;
  if (hand) {
    const auto geo = hand->geometry();
    for (const auto& bone : hand_bones()) {
      cap_a.push_back(geo.joints.row(bone.from).transpose());
      cap_b.push_back(geo.joints.row(bone.to).transpose());
      cap_r.push_back(bone.radius);
    }
  }
  const Eigen::Vector3d eye = camera.position();
  const Eigen::Matrix3d R_wc = camera.R_cw.transpose();

  RenderResult out;
  out.visibility.assign(static_cast<std::size_t>(instance.num_parts() + 1), 0);
  std::vector<Eigen::Vector3d> hits;
  std::vector<std::uint8_t> labels;
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Eigen::Vector3d dir_cam((u + 0.5 - camera.cx) / camera.fx, (v + 0.5 - camera.cy) / camera.fy, 1.0);
      const Eigen::Vector3d d = (R_wc * dir_cam).normalized();
      double best = std::numeric_limits<double>::infinity();
      int label = -1;
      for (int k = 0; k < instance.num_parts(); ++k) {
        double t;
        const Eigen::Vector3d o_local = frames[k].R.transpose() * (eye - frames[k].t);
        const Eigen::Vector3d d_local = frames[k].R.transpose() * d;
        if (ray_box(o_local, d_local, instance.parts[k].half_extents, t) && t < best) {
          best = t;
          label = k + 1;
        }
      }
      for (std::size_t c = 0; c < cap_r.size(); ++c) {
        double t;
        if (ray_capsule(eye, d, cap_a[c], cap_b[c], cap_r[c], t) && t < best) {
          best = t;
          label = 0;
        }
      }
      if (label < 0) continue;
      hits.push_back(camera.R_cw * (eye + best * d) + camera.t_cw);
      labels.push_back(static_cast<std::uint8_t>(label));
      ++out.visibility[static_cast<std::size_t>(label)];
    }
  }
  if (hits.empty()) throw Error(ErrorCode::EmptyView, "no primitive projects into the image");
  if (hits.size() < static_cast<std::size_t>(n_points)) {
    throw Error(ErrorCode::EmptyView, "only " + std::to_string(hits.size()) + " visible pixels for " +
                                          std::to_string(n_points) + " points");
  }

  // furthest point sampling
  const std::size_t m = hits.size();
  std::vector<double> dist(m, std::numeric_limits<double>::infinity());
  std::size_t current = static_cast<std::size_t>(splitmix64(seed) % m);
  out.cloud.resize(n_points, 3);
  out.seg.resize(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    out.cloud.row(i) = hits[current].transpose();
    out.seg[static_cast<std::size_t>(i)] = labels[current];
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t j = 0; j < m; ++j) {
      dist[j] = std::min(dist[j], (hits[j] - hits[current]).squaredNorm());
      if (dist[j] > far) {
        far = dist[j];
        next = j;
      }
    }
    current = next;
  }
  return out;
}

std::vector<Index> SceneRecord::object_indices() const {
  std::vector<Index> idx;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (seg[i] > 0) idx.push_back(static_cast<Index>(i));
  }
  return idx;
}

SceneRecord sample_scene(const ArticulatedInstance& instance, std::uint64_t seed, const SceneConfig& cfg) {
  auto rng = seeded_rng(seed);
  SceneRecord rec;
  rec.id = "seed-" + std::to_string(seed);
  rec.category = instance.category;
  rec.scene_seed = seed;
  rec.instance_seed = instance.instance_seed;
  rec.tau = cfg.tau;
  rec.joint_state = random_joint_state(instance, rng);
  const std::uint64_t hand_seed = rng();
  const std::uint64_t render_seed = rng();
  const KinematicHand hand_world =
      pose_hand_grasp(instance, rec.joint_state, hand_seed, cfg.tau, cfg.hand_samples);

  const auto frames = instance.part_frames(rec.joint_state);
  auto pts = instance_vertices(instance, frames);
  const auto hand_geo = hand_world.geometry();
  for (int j = 0; j < kHandJoints; ++j) pts.push_back(hand_geo.joints.row(j).transpose());
  Eigen::Vector3d target;
  double radius;
  bounding_sphere(pts, target, radius);
  rec.camera = random_camera(rng, target, radius, cfg.image_width, cfg.image_height);

  const RenderResult view =
      render_partial_cloud(instance, rec.joint_state, &hand_world, rec.camera, cfg.n_points, render_seed);
  rec.cloud = view.cloud;
  rec.seg = view.seg;

  for (int k = 0; k < instance.num_parts(); ++k) {
    const auto pose = part_pose_in_camera(instance, frames[k], k, rec.camera);
    const auto canonical = OrientedBox<double>::from_half_extents(instance.parts[k].half_extents / pose.s);
    rec.part_poses.push_back(pose);
    rec.canonical_boxes.push_back(canonical);
    rec.posed_boxes.push_back(transform_box(canonical, pose));
  }

  rec.nocs = Points<double>::Zero(rec.cloud.rows(), 3);
  for (Index i = 0; i < rec.cloud.rows(); ++i) {
    const int label = rec.seg[static_cast<std::size_t>(i)];
    if (label == 0) continue;
    const auto& pose = rec.part_poses[static_cast<std::size_t>(label - 1)];
    const Eigen::Vector3d local = pose.R.transpose() * (rec.cloud.row(i).transpose() - pose.t) / pose.s;
    rec.nocs.row(i) = (local.array() + 0.5).matrix().transpose();
  }

  rec.hand = hand_world;
  rec.hand.root.R = rec.camera.R_cw * hand_world.root.R;
  rec.hand.root.t = rec.camera.R_cw * hand_world.root.t + rec.camera.t_cw;
  const auto geo = rec.hand.geometry();
  rec.hand_joints = geo.joints;
  rec.hand_surface = geo.surface;

  rec.contact.assign(static_cast<std::size_t>(rec.cloud.rows()), 0);
  const auto obj = rec.object_indices();
  if (!obj.empty()) {
    Points<double> obj_pts(static_cast<Index>(obj.size()), 3);
    for (std::size_t i = 0; i < obj.size(); ++i) obj_pts.row(static_cast<Index>(i)) = rec.cloud.row(obj[i]);
    const ContactMap c = compute_contact_map(obj_pts, rec.hand_surface, cfg.tau);
    for (std::size_t i = 0; i < obj.size(); ++i) rec.contact[static_cast<std::size_t>(obj[i])] = c[i];
  }
  return rec;
}

std::vector<OrientedBox<double>> sample_layout(const ArticulatedInstance& instance, std::uint64_t seed,
                                               std::vector<Eigen::Vector3d>* joint_axes) {
  auto rng = seeded_rng(seed);
  const auto q = random_joint_state(instance, rng);
  const auto frames = instance.part_frames(q);
  Eigen::Vector3d target;
  double radius;
  bounding_sphere(instance_vertices(instance, frames), target, radius);
  const Camera cam = random_camera(rng, target, radius, 160, 120);
  std::vector<OrientedBox<double>> boxes;
  for (int k = 0; k < instance.num_parts(); ++k) {
    const auto pose = part_pose_in_camera(instance, frames[k], k, cam);
    boxes.push_back(
        transform_box(OrientedBox<double>::from_half_extents(instance.parts[k].half_extents / pose.s), pose));
  }
  if (joint_axes) {
    joint_axes->assign(static_cast<std::size_t>(instance.num_parts()), Eigen::Vector3d::Zero());
    for (const auto& j : instance.joints) (*joint_axes)[static_cast<std::size_t>(j.child)] = cam.R_cw * j.axis;
  }
  return boxes;
}

std::uint64_t scene_seed_for(std::uint64_t master_seed, std::uint64_t attempt) {
  return splitmix64(master_seed * 0x100000001B3ull + attempt);
}

Dataset generate_dataset(const DatasetSpec& spec) {
  Dataset ds;
  ds.spec = spec;
  std::uint64_t attempt = 0;
  while (static_cast<int>(ds.scenes.size()) < spec.count) {
    const std::size_t batch = static_cast<std::size_t>(spec.count) - ds.scenes.size();
    std::vector<std::optional<SceneRecord>> results(batch);
    parallel_for(batch, [&](std::size_t i) {
      const std::uint64_t seed = scene_seed_for(spec.master_seed, attempt + i);
      try {
        const auto inst = make_instance(spec.category, splitmix64(seed ^ 0xA5A5A5A5ull), spec.drawers);
        results[i] = sample_scene(inst, seed, spec.scene);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::GraspFailure && e.code() != ErrorCode::EmptyView) throw;
      }
    });
    for (std::size_t i = 0; i < batch; ++i) {
      if (results[i]) {
        ds.scenes.push_back(std::move(*results[i]));
      } else {
        ds.skipped_seeds.push_back(scene_seed_for(spec.master_seed, attempt + i));
      }
    }
    attempt += batch;
  }
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%05zu", i);
    ds.scenes[i].id = buf;
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto& spec = dataset.spec;
  const int P = dataset.scenes.empty() ? category_part_count(spec.category, spec.drawers)
                                       : dataset.scenes.front().num_parts();
  nlohmann::json manifest;
  manifest["format"] = "interprior-dataset";
  manifest["version"] = 1;
  manifest["category"] = category_name(spec.category);
  manifest["count"] = dataset.scenes.size();
  manifest["master_seed"] = spec.master_seed;
  manifest["drawers"] = spec.drawers;
  manifest["tau"] = spec.scene.tau;
  manifest["n_points"] = spec.scene.n_points;
  manifest["hand_samples"] = spec.scene.hand_samples;
  manifest["image"] = {spec.scene.image_width, spec.scene.image_height};
  manifest["num_parts"] = P;
  manifest["skipped_seeds"] = dataset.skipped_seeds;
  const int N = spec.scene.n_points;
  const int M = spec.scene.hand_samples;
  manifest["fields"] = {
      {"cloud.f32", {{"dtype", "f32"}, {"shape", {N, 3}}}},
      {"seg.u8", {{"dtype", "u8"}, {"shape", {N}}}},
      {"nocs.f32", {{"dtype", "f32"}, {"shape", {N, 3}}}},
      {"contact.u8", {{"dtype", "u8"}, {"shape", {N}}}},
      {"poses.f32", {{"dtype", "f32"}, {"shape", {P, 13}}}},
      {"boxes.f32", {{"dtype", "f32"}, {"shape", {P, 8, 3}}}},
      {"hand_joints.f32", {{"dtype", "f32"}, {"shape", {kHandJoints, 3}}}},
      {"hand_surface.f32", {{"dtype", "f32"}, {"shape", {M, 3}}}},
      {"hand_params.f32", {{"dtype", "f32"}, {"shape", {12 + kHandAngles}}}},
  };
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& rec : dataset.scenes) {
    const fs::path sdir = dir / rec.id;
    fs::create_directories(sdir);
    std::vector<float> buf;
    append_rows(buf, rec.cloud);
    write_raw(sdir / "cloud.f32", buf);
    write_raw(sdir / "seg.u8", rec.seg);
    buf.clear();
    append_rows(buf, rec.nocs);
    write_raw(sdir / "nocs.f32", buf);
    write_raw(sdir / "contact.u8", rec.contact);
    buf.clear();
    for (const auto& pose : rec.part_poses) {
      append_rows(buf, pose.R);
      append_rows(buf, pose.t.transpose());
      buf.push_back(static_cast<float>(pose.s));
    }
    write_raw(sdir / "poses.f32", buf);
    buf.clear();
    for (const auto& box : rec.posed_boxes) append_rows(buf, box.vertices);
    write_raw(sdir / "boxes.f32", buf);
    buf.clear();
    append_rows(buf, rec.hand_joints);
    write_raw(sdir / "hand_joints.f32", buf);
    buf.clear();
    append_rows(buf, rec.hand_surface);
    write_raw(sdir / "hand_surface.f32", buf);
    buf.clear();
    append_rows(buf, rec.hand.root.R);
    append_rows(buf, rec.hand.root.t.transpose());
    append_rows(buf, rec.hand.joint_angles.transpose());
    write_raw(sdir / "hand_params.f32", buf);

    nlohmann::json meta;
    meta["id"] = rec.id;
    meta["scene_seed"] = rec.scene_seed;
    meta["instance_seed"] = rec.instance_seed;
    meta["joint_state"] = rec.joint_state;
    nlohmann::json halves = nlohmann::json::array();
    for (const auto& box : rec.canonical_boxes) halves.push_back(vec_json(box.vertices.row(7).transpose()));
    meta["canonical_half_extents"] = halves;
    const auto& c = rec.camera;
    meta["camera"] = {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
                      {"height", c.height},
                      {"R_cw", {c.R_cw(0, 0), c.R_cw(0, 1), c.R_cw(0, 2), c.R_cw(1, 0), c.R_cw(1, 1), c.R_cw(1, 2),
                                c.R_cw(2, 0), c.R_cw(2, 1), c.R_cw(2, 2)}},
                      {"t_cw", vec_json(c.t_cw)}};
    std::ofstream(sdir / "scene.json") << meta.dump(2) << "\n";
    scenes.push_back({{"id", rec.id}, {"scene_seed", rec.scene_seed}});
  }
  manifest["scenes"] = scenes;
  std::ofstream f(dir / "manifest.json");
  if (!f) throw Error(ErrorCode::Io, "cannot write manifest in " + dir.string());
  f << manifest.dump(2) << "\n";
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw Error(ErrorCode::Io, "no manifest.json in " + dir.string());
  const nlohmann::json manifest = nlohmann::json::parse(f);
  if (manifest.value("format", "") != "interprior-dataset") throw Error(ErrorCode::Format, "not a dataset manifest");
  Dataset ds;
  ds.spec.category = parse_category(manifest.at("category").get<std::string>());
  ds.spec.count = manifest.at("count").get<int>();
  ds.spec.master_seed = manifest.at("master_seed").get<std::uint64_t>();
  ds.spec.drawers = manifest.at("drawers").get<int>();
  ds.spec.scene.tau = manifest.at("tau").get<double>();
  ds.spec.scene.n_points = manifest.at("n_points").get<int>();
  ds.spec.scene.hand_samples = manifest.at("hand_samples").get<int>();
  ds.spec.scene.image_width = manifest.at("image")[0].get<int>();
  ds.spec.scene.image_height = manifest.at("image")[1].get<int>();
  ds.skipped_seeds = manifest.at("skipped_seeds").get<std::vector<std::uint64_t>>();
  const int P = manifest.at("num_parts").get<int>();
  const int N = ds.spec.scene.n_points;
  const int M = ds.spec.scene.hand_samples;

  for (const auto& entry : manifest.at("scenes")) {
    const auto sdir = dir / entry.at("id").get<std::string>();
    SceneRecord rec;
    rec.id = entry.at("id").get<std::string>();
    rec.category = ds.spec.category;
    rec.tau = ds.spec.scene.tau;
    std::ifstream mf(sdir / "scene.json");
    if (!mf) throw Error(ErrorCode::Io, "missing scene.json in " + sdir.string());
    const nlohmann::json meta = nlohmann::json::parse(mf);
    rec.scene_seed = meta.at("scene_seed").get<std::uint64_t>();
    rec.instance_seed = meta.at("instance_seed").get<std::uint64_t>();
    rec.joint_state = meta.at("joint_state").get<std::vector<double>>();
    const auto& cj = meta.at("camera");
    rec.camera.fx = cj.at("fx");
    rec.camera.fy = cj.at("fy");
    rec.camera.cx = cj.at("cx");
    rec.camera.cy = cj.at("cy");
    rec.camera.width = cj.at("width");
    rec.camera.height = cj.at("height");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rec.camera.R_cw(r, c) = cj.at("R_cw")[r * 3 + c].get<double>();
    }
    rec.camera.t_cw = json_vec(cj.at("t_cw"));

    const auto n = static_cast<std::size_t>(N);
    rec.cloud = rows_from(read_raw<float>(sdir / "cloud.f32", n * 3), 0, N);
    rec.seg = read_raw<std::uint8_t>(sdir / "seg.u8", n);
    rec.nocs = rows_from(read_raw<float>(sdir / "nocs.f32", n * 3), 0, N);
    rec.contact = read_raw<std::uint8_t>(sdir / "contact.u8", n);
    const auto poses = read_raw<float>(sdir / "poses.f32", static_cast<std::size_t>(P) * 13);
    const auto boxes = read_raw<float>(sdir / "boxes.f32", static_cast<std::size_t>(P) * 24);
    const auto& halves = meta.at("canonical_half_extents");
    for (int k = 0; k < P; ++k) {
      SimilarityTransform<double> pose;
      const std::size_t o = static_cast<std::size_t>(k) * 13;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pose.R(r, c) = poses[o + static_cast<std::size_t>(r * 3 + c)];
      }
      pose.t = Eigen::Vector3d(poses[o + 9], poses[o + 10], poses[o + 11]);
      pose.s = poses[o + 12];
      rec.part_poses.push_back(pose);
      OrientedBox<double> box;
      box.vertices = rows_from(boxes, static_cast<std::size_t>(k) * 24, 8);
      rec.posed_boxes.push_back(box);
      rec.canonical_boxes.push_back(OrientedBox<double>::from_half_extents(json_vec(halves[k])));
    }
    rec.hand_joints = rows_from(read_raw<float>(sdir / "hand_joints.f32", kHandJoints * 3), 0, kHandJoints);
    rec.hand_surface = rows_from(read_raw<float>(sdir / "hand_surface.f32", static_cast<std::size_t>(M) * 3), 0, M);
    const auto hp = read_raw<float>(sdir / "hand_params.f32", 12 + kHandAngles);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rec.hand.root.R(r, c) = hp[static_cast<std::size_t>(r * 3 + c)];
    }
    rec.hand.root.t = Eigen::Vector3d(hp[9], hp[10], hp[11]);
    for (int a = 0; a < kHandAngles; ++a) rec.hand.joint_angles(a) = hp[static_cast<std::size_t>(12 + a)];
    rec.hand.surface_samples = M;
    ds.scenes.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace interprior
