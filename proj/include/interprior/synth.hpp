#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "interprior/geometry.hpp"
#include "interprior/hand.hpp"
#include "interprior/random.hpp"

namespace interprior {

enum class Category { Laptop, Drawer, Safe, Microwave, Trashcan };

std::string category_name(Category c);
Category parse_category(const std::string& name);
const std::vector<Category>& all_categories();

enum class JointType { Revolute, Prismatic };

struct Joint {
  JointType type = JointType::Revolute;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  Eigen::Vector3d anchor = Eigen::Vector3d::Zero();
  double lo = 0.0;
  double hi = 1.0;
  /// Part moved by this joint; its parent is always part 0.
  int child = 1;
};

struct PartSpec {
  Eigen::Vector3d half_extents;
  /// Part center in the object frame at joint state zero.
  Eigen::Vector3d rest_center;
};

/// Grasp target on a movable part, in that part's frame.
struct HandleSpec {
  int part = 1;
  Eigen::Vector3d face_center;
  Eigen::Vector3d face_normal;
  /// Direction the extended fingers point along.
  Eigen::Vector3d finger_direction;
};

struct ArticulatedInstance {
  Category category = Category::Laptop;
  std::vector<PartSpec> parts;
  std::vector<Joint> joints;
  /// One handle per movable part (same order as joints).
  std::vector<HandleSpec> handles;
  std::vector<double> scale_jitter;
  std::uint64_t instance_seed = 0;

  int num_parts() const { return static_cast<int>(parts.size()); }
  /// Rigid part frames in the object frame (s = 1).
  std::vector<SimilarityTransform<double>> part_frames(const std::vector<double>& joint_state) const;
  bool joint_state_valid(const std::vector<double>& joint_state) const;
};

/// `drawers` only applies to Category::Drawer; 0 lets the seed choose 1 to 3.
ArticulatedInstance make_instance(Category category, std::uint64_t seed, int drawers = 0);

/// Part count of a category's instances (drawer count as in make_instance).
int category_part_count(Category category, int drawers = 3);

/// Per-part canonical boxes of the unjittered category template, in the
/// diagonal-normalized part frame. Estimators use these at test time.
std::vector<OrientedBox<double>> category_canonical_boxes(Category category, int num_parts);

/// Unsigned distance from p to the solid union of the instance's parts.
double distance_to_instance(const ArticulatedInstance& instance, const std::vector<double>& joint_state,
                            const Eigen::Vector3d& p);

KinematicHand pose_hand_grasp(const ArticulatedInstance& instance, const std::vector<double>& joint_state,
                              std::uint64_t seed, double tau = 0.01, int surface_samples = 512,
                              int min_contacts = 20);

/// Pinhole camera, OpenCV convention (x right, y down, z forward).
struct Camera {
  double fx = 200.0;
  double fy = 200.0;
  double cx = 80.0;
  double cy = 60.0;
  int width = 160;
  int height = 120;
  /// world -> camera
  Eigen::Matrix3d R_cw = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_cw = Eigen::Vector3d::Zero();

  Eigen::Vector3d position() const { return -R_cw.transpose() * t_cw; }
  SimilarityTransform<double> world_to_camera() const {
    SimilarityTransform<double> T;
    T.R = R_cw;
    T.t = t_cw;
    return T;
  }
};

/// Camera at `eye` looking at `target`, world +z up, focal length chosen so
/// a sphere of `radius` about the target fills 90% of the image height.
Camera look_at_camera(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double radius, int width = 160,
                      int height = 120);

struct RenderResult {
  Points<double> cloud;
  /// 0 = hand, k + 1 = part k
  std::vector<std::uint8_t> seg;
  /// Visible pixel count per label before downsampling.
  std::vector<int> visibility;
};

RenderResult render_partial_cloud(const ArticulatedInstance& instance, const std::vector<double>& joint_state,
                                  const KinematicHand* hand, const Camera& camera, int n_points,
                                  std::uint64_t seed);

struct SceneConfig {
  int n_points = 1024;
  double tau = 0.01;
  int hand_samples = 512;
  int image_width = 160;
  int image_height = 120;
};

struct SceneRecord {
  std::string id;
  Category category = Category::Laptop;
  std::uint64_t scene_seed = 0;
  std::uint64_t instance_seed = 0;
  Points<double> cloud;
  std::vector<std::uint8_t> seg;
  Points<double> nocs;
  std::vector<SimilarityTransform<double>> part_poses;
  std::vector<OrientedBox<double>> canonical_boxes;
  std::vector<OrientedBox<double>> posed_boxes;
  /// Aligned with cloud; hand points are always 0.
  ContactMap contact;
  KinematicHand hand;
  HandJoints<double> hand_joints;
  Points<double> hand_surface;
  Camera camera;
  std::vector<double> joint_state;
  double tau = 0.01;

  int num_parts() const { return static_cast<int>(part_poses.size()); }
  std::vector<Index> object_indices() const;
};

SceneRecord sample_scene(const ArticulatedInstance& instance, std::uint64_t seed, const SceneConfig& cfg = {});

/// Camera-frame boxes of a random articulation/view, without rendering.
/// `joint_axes` receives each part's joint axis in the camera frame (zero
/// for the static part).
std::vector<OrientedBox<double>> sample_layout(const ArticulatedInstance& instance, std::uint64_t seed,
                                               std::vector<Eigen::Vector3d>* joint_axes = nullptr);

struct DatasetSpec {
  Category category = Category::Laptop;
  int count = 10;
  std::uint64_t master_seed = 0;
  int drawers = 3;
  SceneConfig scene;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<SceneRecord> scenes;
  std::vector<std::uint64_t> skipped_seeds;
};

/// Scene seed for attempt i of a dataset.
std::uint64_t scene_seed_for(std::uint64_t master_seed, std::uint64_t attempt);

/// Deterministic in spec; scenes whose grasp or view fails are skipped.
Dataset generate_dataset(const DatasetSpec& spec);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace interprior
