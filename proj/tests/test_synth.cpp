#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "interprior/synth.hpp"
#include "test_util.hpp"

using namespace interprior;
using test::max_abs;

namespace {

// Grid samples on every face of every part box, in the object frame.
Points<double> surface_grid(const ArticulatedInstance& inst, const std::vector<double>& q, double spacing) {
  const auto frames = inst.part_frames(q);
  std::vector<Eigen::Vector3d> pts;
  for (int k = 0; k < inst.num_parts(); ++k) {
    const Eigen::Vector3d h = inst.parts[k].half_extents;
    for (int axis = 0; axis < 3; ++axis) {
      const int a = (axis + 1) % 3, b = (axis + 2) % 3;
      const int na = std::max(1, static_cast<int>(2 * h(a) / spacing));
      const int nb = std::max(1, static_cast<int>(2 * h(b) / spacing));
      for (double side : {-1.0, 1.0}) {
        for (int i = 0; i <= na; ++i) {
          for (int j = 0; j <= nb; ++j) {
            Eigen::Vector3d p;
            p(axis) = side * h(axis);
            p(a) = -h(a) + 2 * h(a) * i / na;
            p(b) = -h(b) + 2 * h(b) * j / nb;
            pts.push_back(frames[k].apply(p));
          }
        }
      }
    }
  }
  Points<double> out(static_cast<Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Index>(i)) = pts[i].transpose();
  return out;
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    files[std::filesystem::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  return files;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "interprior-test-synth" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("make_instance templates") {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto laptop = make_instance(Category::Laptop, seed);
    CHECK(laptop.num_parts() == 2);
    REQUIRE(laptop.joints.size() == 1);
    CHECK(laptop.joints[0].type == JointType::Revolute);
  }
  const auto drawer = make_instance(Category::Drawer, 5, 3);
  CHECK(drawer.num_parts() == 4);
  REQUIRE(drawer.joints.size() == 3);
  for (const auto& j : drawer.joints) {
    CHECK(j.type == JointType::Prismatic);
    CHECK(j.axis.dot(drawer.joints[0].axis) == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (Category c : all_categories()) {
    const auto inst = make_instance(c, 17);
    CHECK(inst.num_parts() >= 2);
    for (const auto& j : inst.joints) {
      CHECK(j.lo < j.hi);
      CHECK(j.axis.norm() == doctest::Approx(1.0));
    }
    for (const auto& p : inst.parts) CHECK((p.half_extents.array() > 0.0).all());
  }
}

TEST_CASE("make_instance is deterministic per seed") {
  const auto a = make_instance(Category::Microwave, 42);
  const auto b = make_instance(Category::Microwave, 42);
  REQUIRE(a.parts.size() == b.parts.size());
  for (std::size_t k = 0; k < a.parts.size(); ++k) {
    CHECK(a.parts[k].half_extents == b.parts[k].half_extents);
    CHECK(a.parts[k].rest_center == b.parts[k].rest_center);
  }
  CHECK(a.scale_jitter == b.scale_jitter);
  CHECK(make_instance(Category::Microwave, 43).scale_jitter != a.scale_jitter);
}

TEST_CASE("category names round-trip") {
  for (Category c : all_categories()) CHECK(parse_category(category_name(c)) == c);
  CHECK_THROWS(parse_category("toaster"));
}

TEST_CASE("pose_hand_grasp on an open laptop touches at least 20 surface points") {
  const auto inst = make_instance(Category::Laptop, 3);
  const std::vector<double> q = {100.0 * M_PI / 180.0};
  const Points<double> surface = surface_grid(inst, q, 0.003);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto hand = pose_hand_grasp(inst, q, seed);
    const ContactMap c = compute_contact_map<double>(surface, hand.geometry().surface, 0.01);
    CHECK(std::count(c.begin(), c.end(), 1) >= 20);
    const auto angles = hand.joint_angles;
    CHECK((angles.array() >= 0.0).all());
    CHECK((angles.array() <= kMaxFlexion).all());
  }
}

TEST_CASE("pose_hand_grasp is deterministic within a seed and varies across seeds") {
  const auto inst = make_instance(Category::Laptop, 3);
  const std::vector<double> q = {1.5};
  const auto a = pose_hand_grasp(inst, q, 10);
  const auto b = pose_hand_grasp(inst, q, 10);
  const auto c = pose_hand_grasp(inst, q, 11);
  CHECK(a.root.R == b.root.R);
  CHECK(a.root.t == b.root.t);
  CHECK(a.joint_angles == b.joint_angles);
  CHECK((a.root.t - c.root.t).norm() + (a.root.R - c.root.R).norm() > 0.0);
}

TEST_CASE("drawer grasps concentrate contact on the front face") {
  const auto inst = make_instance(Category::Drawer, 8, 3);
  const std::vector<double> q(3, 0.2);
  const auto& drawer = inst.parts[1];
  const double front_y = drawer.rest_center.y() - 0.2 - drawer.half_extents.y();
  const Points<double> surface = surface_grid(inst, q, 0.003);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto hand = pose_hand_grasp(inst, q, seed);
    const ContactMap c = compute_contact_map<double>(surface, hand.geometry().surface, 0.01);
    int total = 0, near = 0;
    for (Index i = 0; i < surface.rows(); ++i) {
      if (!c[static_cast<std::size_t>(i)]) continue;
      ++total;
      near += std::abs(surface(i, 1) - front_y) <= 0.05;
    }
    REQUIRE(total > 0);
    CHECK(near >= 0.8 * total);
  }
}

TEST_CASE("render_partial_cloud sees only the camera-facing face of a cube") {
  ArticulatedInstance cube;
  cube.parts.push_back({Eigen::Vector3d(0.5, 0.5, 0.5), Eigen::Vector3d::Zero()});
  const Camera cam = look_at_camera({0.0, 0.0, 4.0}, Eigen::Vector3d::Zero(), 0.9);
  const auto view = render_partial_cloud(cube, {}, nullptr, cam, 512, 1);
  CHECK(view.cloud.rows() == 512);
  CHECK(view.seg.size() == 512);
  const Points<double> world = (view.cloud.rowwise() - cam.t_cw.transpose()) * cam.R_cw;
  CHECK((world.col(2).array() - 0.5).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("render_partial_cloud returns exactly n_points") {
  const auto inst = make_instance(Category::Safe, 4);
  const std::vector<double> q = {0.5};
  const Camera cam = look_at_camera({0.2, -1.5, 0.8}, {0.0, 0.0, 0.2}, 0.5);
  CHECK(render_partial_cloud(inst, q, nullptr, cam, 512, 2).cloud.rows() == 512);
  CHECK(render_partial_cloud(inst, q, nullptr, cam, 100, 2).cloud.rows() == 100);
}

TEST_CASE("an open laptop lid hides the base from a grazing rear view") {
  const auto inst = make_instance(Category::Laptop, 6);
  const std::vector<double> q = {M_PI / 2};
  auto base_fraction = [&](const Eigen::Vector3d& eye) {
    const Camera cam = look_at_camera(eye, {0.0, 0.0, 0.05}, 0.25);
    const auto view = render_partial_cloud(inst, q, nullptr, cam, 256, 3);
    return static_cast<double>(std::count(view.seg.begin(), view.seg.end(), 1)) / 256.0;
  };
  const double grazing = base_fraction({0.0, 1.0, 0.12});
  const double top = base_fraction({0.0, 0.01, 1.0});
  CHECK(grazing < top);
}

TEST_CASE("sample_scene record invariants") {
  for (Category c : {Category::Laptop, Category::Drawer, Category::Trashcan}) {
    const auto inst = make_instance(c, 21, 2);
    SceneConfig cfg;
    cfg.n_points = 512;
    const SceneRecord rec = sample_scene(inst, 1234, cfg);
    CHECK(rec.cloud.rows() == 512);
    for (int p = 0; p < rec.num_parts(); ++p) {
      const auto& pose = rec.part_poses[static_cast<std::size_t>(p)];
      CHECK(pose.is_valid());
      CHECK(transform_box(rec.canonical_boxes[static_cast<std::size_t>(p)], pose).vertices ==
            rec.posed_boxes[static_cast<std::size_t>(p)].vertices);
    }
    double worst = 0.0;
    Points<double> obj_pts(0, 3);
    std::vector<Index> obj = rec.object_indices();
    for (Index i : obj) {
      const auto& pose = rec.part_poses[static_cast<std::size_t>(rec.seg[static_cast<std::size_t>(i)] - 1)];
      const Eigen::RowVector3d n = rec.nocs.row(i);
      CHECK(((n.array() >= 0.0) && (n.array() <= 1.0)).all());
      const Eigen::Vector3d back = pose.apply(Eigen::Vector3d((n.array() - 0.5).matrix().transpose()));
      worst = std::max(worst, (back.transpose() - rec.cloud.row(i)).norm());
    }
    CHECK(worst <= 1e-6);

    obj_pts.resize(static_cast<Index>(obj.size()), 3);
    for (std::size_t i = 0; i < obj.size(); ++i) obj_pts.row(static_cast<Index>(i)) = rec.cloud.row(obj[i]);
    const ContactMap c_obj = compute_contact_map<double>(obj_pts, rec.hand_surface, rec.tau);
    for (std::size_t i = 0; i < obj.size(); ++i) CHECK(rec.contact[static_cast<std::size_t>(obj[i])] == c_obj[i]);
    for (std::size_t i = 0; i < rec.seg.size(); ++i) {
      if (rec.seg[i] == 0) CHECK(rec.contact[i] == 0);
    }
    const auto geo = rec.hand.geometry();
    CHECK(max_abs(geo.joints - rec.hand_joints) == 0.0);
    CHECK(rec.hand_surface.rows() == 512);
  }
}

TEST_CASE("drawer layouts keep sliding-part edges parallel") {
  const auto inst = make_instance(Category::Drawer, 31, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto boxes = sample_layout(inst, seed);
    for (std::size_t a = 1; a < boxes.size(); ++a) {
      for (std::size_t b = a + 1; b < boxes.size(); ++b) {
        CHECK(boxes[a].edge_x().normalized().dot(boxes[b].edge_x().normalized()) > 1.0 - 1e-9);
        CHECK(boxes[a].edge_y().normalized().dot(boxes[b].edge_y().normalized()) > 1.0 - 1e-9);
        CHECK(boxes[a].edge_z().normalized().dot(boxes[b].edge_z().normalized()) > 1.0 - 1e-9);
      }
    }
  }
}

TEST_CASE("datasets are byte-identical for one master seed and round-trip through disk") {
  DatasetSpec spec;
  spec.category = Category::Laptop;
  spec.count = 4;
  spec.master_seed = 7;
  spec.scene.n_points = 256;
  const auto a = scratch("a"), b = scratch("b");
  const Dataset da = generate_dataset(spec);
  write_dataset(da, a);
  write_dataset(generate_dataset(spec), b);
  const auto fa = read_tree(a);
  CHECK(fa.size() > 4);
  CHECK(fa == read_tree(b));

  const Dataset back = read_dataset(a);
  REQUIRE(back.scenes.size() == da.scenes.size());
  for (std::size_t i = 0; i < da.scenes.size(); ++i) {
    const auto& x = da.scenes[i];
    const auto& y = back.scenes[i];
    CHECK(x.id == y.id);
    CHECK(x.seg == y.seg);
    CHECK(x.contact == y.contact);
    CHECK(max_abs(x.cloud - y.cloud) <= 1e-6);
    CHECK(max_abs(x.hand_joints - y.hand_joints) <= 1e-6);
    CHECK(y.num_parts() == x.num_parts());
  }
  std::filesystem::remove_all(a.parent_path());
}
