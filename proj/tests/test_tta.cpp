#include <doctest.h>

#include <cmath>

#include "interprior/gradcheck.hpp"
#include "interprior/pipeline.hpp"
#include "interprior/tta.hpp"
#include "test_util.hpp"

using namespace interprior;
using test::max_abs;

namespace {

EstimatorConfig small_config() {
  EstimatorConfig c;
  c.local_hidden = 16;
  c.feature = 24;
  c.head_hidden = 20;
  return c;
}

Discriminator<float> small_discriminator(std::uint64_t seed) {
  DiscriminatorConfig cfg;
  cfg.hidden = {32, 32};
  return Discriminator<float>(cfg, seed);
}

const Dataset& scenes() {
  static const Dataset d = [] {
    DatasetSpec spec;
    spec.count = 6;
    spec.master_seed = 31;
    spec.scene.n_points = 256;
    return generate_dataset(spec);
  }();
  return d;
}

const std::vector<OrientedBox<double>>& canonical() {
  static const auto boxes = category_canonical_boxes(Category::Laptop, 2);
  return boxes;
}

// A random estimator whose argmax segmentation leaves every part valid on `cloud`.
PoseEstimator<float> usable_estimator(const Points<double>& cloud) {
  for (std::uint64_t seed = 1;; ++seed) {
    PoseEstimator<float> est(small_config(), seed);
    const auto parts = assemble_pose(cloud, est.forward(cloud), canonical());
    if (std::all_of(parts.begin(), parts.end(), [](const auto& p) { return p.valid; })) return est;
  }
}

bool same_params(const nn::ParamStore<float>& a, const nn::ParamStore<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.value(i) != b.value(i)) return false;
  }
  return true;
}

bool same_boxes(const std::vector<PartEstimate<float>>& a, const std::vector<PartEstimate<float>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].valid != b[i].valid || a[i].box.vertices != b[i].box.vertices) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("zero adaptation steps return the initial estimate exactly") {
  const auto& cloud = scenes().scenes[0].cloud;
  PoseEstimator<float> est = usable_estimator(cloud);
  TtaConfig cfg;
  cfg.steps = 0;
  const auto r = adapt_object(est, small_discriminator(2), cloud, canonical(), cfg);
  CHECK_FALSE(r.flagged);
  CHECK(same_boxes(r.initial, r.adapted));
  CHECK(r.adv_trace.size() == 1);
}

TEST_CASE("adaptation leaves the discriminator bit-identical and the trace finite") {
  const auto& cloud = scenes().scenes[1].cloud;
  PoseEstimator<float> est = usable_estimator(cloud);
  const Discriminator<float> D = small_discriminator(3);
  const Discriminator<float> before = D;
  for (TtaScope scope : {TtaScope::HeadsOnly, TtaScope::FullEncoder}) {
    TtaConfig cfg;
    cfg.steps = 5;
    cfg.lr = 1e-3;
    cfg.scope = scope;
    const auto r = adapt_object(est, D, cloud, canonical(), cfg);
    CHECK(same_params(D.params, before.params));
    if (r.flagged) continue;
    CHECK(r.adv_trace.size() == 6);
    for (double v : r.adv_trace) CHECK(std::isfinite(v));
  }
}

TEST_CASE("resetting per scene prevents leakage between scenes") {
  const auto& a = scenes().scenes[2].cloud;
  const auto& b = scenes().scenes[3].cloud;
  const PoseEstimator<float> base = usable_estimator(b);
  const Discriminator<float> D = small_discriminator(4);
  TtaConfig cfg;
  cfg.steps = 4;
  cfg.lr = 1e-3;

  PoseEstimator<float> shared = base;
  adapt_object(shared, D, a, canonical(), cfg);
  const auto after_a = adapt_object(shared, D, b, canonical(), cfg);
  PoseEstimator<float> fresh = base;
  const auto alone = adapt_object(fresh, D, b, canonical(), cfg);
  CHECK(same_boxes(after_a.adapted, alone.adapted));
  CHECK(after_a.adv_trace == alone.adv_trace);
  CHECK(same_params(shared.head_params, base.head_params));

  cfg.reset_per_scene = false;
  PoseEstimator<float> carried = base;
  const auto r = adapt_object(carried, D, b, canonical(), cfg);
  if (!r.flagged) CHECK_FALSE(same_params(carried.head_params, base.head_params));
  CHECK(same_params(carried.encoder_params, base.encoder_params));
}

TEST_CASE("adaptation flags scenes whose parts cannot be assembled") {
  const auto& cloud = scenes().scenes[0].cloud;
  PoseEstimator<float> est(small_config(), 5);
  auto& b = est.head_params.mutable_value(est.head_params.index_of("seg.b1"));
  b.setZero();
  b(1, 0) = 1e6f;
  TtaConfig cfg;
  const auto r = adapt_object(est, small_discriminator(6), cloud, canonical(), cfg);
  CHECK(r.flagged);
  CHECK(r.flag == ErrorCode::TooFewPoints);
  CHECK(same_boxes(r.initial, r.adapted));
}

TEST_CASE("tta config parsing") {
  const auto cfg = tta_config_from_json({{"steps", 3}, {"lr", 0.01}, {"scope", "full_encoder"}});
  CHECK(cfg.steps == 3);
  CHECK(cfg.lr == 0.01);
  CHECK(cfg.scope == TtaScope::FullEncoder);
  CHECK(cfg.reset_per_scene);
  CHECK_THROWS_AS(tta_config_from_json({{"stepz", 3}}), Error);
  CHECK_THROWS_AS(tta_config_from_json({{"scope", "everything"}}), Error);
  CHECK_THROWS_AS(tta_config_from_json({{"lr", 0.0}}), Error);
}

TEST_CASE("box_rotation recovers the pose rotation of a transformed box") {
  std::mt19937_64 rng(7);
  const auto box = OrientedBox<double>::from_half_extents({0.3, 0.2, 0.05});
  for (int i = 0; i < 20; ++i) {
    SimilarityTransform<double> T;
    T.R = test::random_rotation(rng);
    T.s = 1.7;
    CHECK(max_abs(box_rotation(transform_box(box, T)) - T.R) <= 1e-9);
  }
}

TEST_CASE("hand optimization with no contact points returns the input flagged") {
  const SceneRecord& rec = scenes().scenes[0];
  const ContactMap none(static_cast<std::size_t>(rec.cloud.rows()), 0);
  const auto r = optimize_hand(rec.hand, none, rec.cloud);
  CHECK(r.flagged);
  CHECK(r.hand.to_params() == rec.hand.to_params());
  CHECK(r.trace.empty());
}

TEST_CASE("hand optimization never returns a worse hand than it started from") {
  for (std::size_t i = 0; i < scenes().scenes.size(); ++i) {
    const SceneRecord& rec = scenes().scenes[i];
    const Points<double> C = select_contact_points(rec.contact, rec.cloud);
    if (C.rows() == 0) continue;
    const KinematicHand init = displace_hand(rec.hand, 0.05, 100 + i);
    HandOptConfig cfg;
    cfg.iters = 60;
    const auto r = optimize_hand(init, C, cfg);
    REQUIRE_FALSE(r.flagged);
    CHECK(r.trace.size() == 61);
    CHECK(r.best_loss <= r.initial_loss);
    const double at_result = hand_chamfer(r.hand.to_params(), C, r.hand.surface_samples);
    CHECK(at_result <= hand_chamfer(init.to_params(), C, init.surface_samples));
    CHECK(at_result == doctest::Approx(r.best_loss).epsilon(1e-9));
    CHECK((r.hand.joint_angles.array() >= 0.0).all());
    CHECK((r.hand.joint_angles.array() <= kMaxFlexion).all());
  }
}

TEST_CASE("the ground-truth hand is a near-stationary start for its own contact") {
  DatasetSpec spec;
  spec.count = 6;
  spec.master_seed = 32;
  const Dataset full = generate_dataset(spec);
  int measured = 0;
  for (const auto& rec : full.scenes) {
    const Points<double> C = select_contact_points(rec.contact, rec.cloud);
    if (C.rows() == 0) continue;
    const auto r = optimize_hand(rec.hand, C);
    const double decrease = (r.initial_loss - r.best_loss) / r.initial_loss;
    INFO(rec.id, " contact points ", C.rows(), " L_CD ", r.initial_loss, " -> ", r.best_loss);
    CHECK(decrease < 0.05);
    ++measured;
  }
  CHECK(measured > 0);
}

TEST_CASE("hand chamfer gradient matches central differences") {
  GradCheckConfig cfg;
  cfg.seed = 12;
  const auto r = gradcheck_hand_chamfer(cfg);
  INFO("worst ", r.worst, " error ", r.max_rel_error);
  CHECK(r.passed);
}

TEST_CASE("displace_hand moves the root by exactly the distance") {
  const auto& hand = scenes().scenes[0].hand;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto moved = displace_hand(hand, 0.1, s);
    CHECK((moved.root.t - hand.root.t).norm() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(moved.root.R == hand.root.R);
    CHECK(moved.joint_angles == hand.joint_angles);
  }
}
