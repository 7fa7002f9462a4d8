#include <doctest.h>

#include <cmath>

#include "interprior/gradcheck.hpp"
#include "interprior/priors.hpp"
#include "interprior/synth.hpp"
#include "interprior/train.hpp"
#include "test_util.hpp"

using namespace interprior;

namespace {

// All weights zero and the output bias set to c: D ≡ c.
Discriminator<double> constant_discriminator(int parts, double c) {
  DiscriminatorConfig cfg;
  cfg.num_parts = parts;
  cfg.hidden = {8};
  Discriminator<double> D(cfg, 1);
  for (std::size_t i = 0; i < D.params.size(); ++i) D.params.mutable_value(i).setZero();
  D.params.mutable_value(D.params.index_of("disc.b1")).setConstant(c);
  return D;
}

Layout<double> laptop_layout(std::uint64_t seed) {
  return sample_layout(make_instance(Category::Laptop, seed), seed + 1);
}

DiffusionConfig small_diffusion() {
  DiffusionConfig c;
  c.z_width = 8;
  c.time_dim = 16;
  c.hidden = 16;
  return c;
}

}  // namespace

TEST_CASE("lsgan losses from stubbed scores") {
  CHECK(lsgan_d_loss<double>({1.0, 1.0}, {0.0, 0.0, 0.0}) == 0.0);
  CHECK(lsgan_d_loss<double>({0.0, 0.0}, {0.0}) == 1.0);
  CHECK(lsgan_g_loss<double>({1.0, 1.0}) == 0.0);
  CHECK(lsgan_g_loss<double>({0.0, 0.0, 0.0}) == 1.0);
}

TEST_CASE("d_loss and g_adv_loss agree with direct formulas on constant discriminators") {
  const std::vector<Layout<double>> real = {laptop_layout(1), laptop_layout(2)};
  const std::vector<Layout<double>> fake = {laptop_layout(3)};
  auto D0 = constant_discriminator(2, 0.0);
  CHECK(d_loss(D0, real, fake) == 1.0);
  CHECK(g_adv_loss(D0, fake) == 1.0);
  const auto D1 = constant_discriminator(2, 1.0);
  CHECK(g_adv_loss(D1, fake) == 0.0);
  for (double c : {-0.3, 0.25, 0.8, 1.7}) {
    auto D = constant_discriminator(2, c);
    CHECK(std::abs(d_loss(D, real, fake) - ((c - 1) * (c - 1) + c * c)) <= 1e-12);
    CHECK(std::abs(g_adv_loss(D, fake) - (c - 1) * (c - 1)) <= 1e-12);
  }
}

TEST_CASE("d_loss matches a recomputation from individual scores") {
  DiscriminatorConfig cfg;
  cfg.num_parts = 2;
  cfg.hidden = {32, 16};
  Discriminator<double> D(cfg, 4);
  std::vector<Layout<double>> real, fake;
  for (std::uint64_t s = 0; s < 5; ++s) real.push_back(laptop_layout(10 + s));
  for (std::uint64_t s = 0; s < 3; ++s) fake.push_back(laptop_layout(20 + s));
  double lr = 0.0, lf = 0.0, lg = 0.0;
  for (const auto& b : real) lr += std::pow(D.score(b) - 1.0, 2) / 5.0;
  for (const auto& b : fake) {
    lf += std::pow(D.score(b), 2) / 3.0;
    lg += std::pow(D.score(b) - 1.0, 2) / 3.0;
  }
  CHECK(std::abs(d_loss(D, real, fake) - (lr + lf)) <= 1e-12);
  CHECK(std::abs(g_adv_loss(D, fake) - lg) <= 1e-12);
}

TEST_CASE("discriminator score ignores layout translation and uniform scale") {
  DiscriminatorConfig cfg;
  cfg.num_parts = 2;
  Discriminator<double> D(cfg, 5);
  const Layout<double> boxes = laptop_layout(6);
  Layout<double> scaled = boxes, moved = boxes;
  for (auto& b : scaled) b.vertices *= 2.0;
  for (auto& b : moved) b.vertices.rowwise() += Eigen::RowVector3d(0.3, -1.2, 0.7);
  CHECK(D.score(scaled) == D.score(boxes));
  CHECK(std::abs(D.score(moved) - D.score(boxes)) <= 1e-12);
  CHECK(D.score(boxes) == D.score(boxes));
  CHECK_THROWS_AS(D.score({boxes[0]}), Error);
}

TEST_CASE("discriminator and denoiser finite-difference suites pass") {
  GradCheckConfig cfg;
  cfg.seed = 8;
  cfg.probes = 20;
  for (const auto& r : {gradcheck_discriminator(cfg), gradcheck_denoiser(cfg)}) {
    INFO(r.suite, " worst ", r.worst, " error ", r.max_rel_error);
    CHECK(r.passed);
  }
}

TEST_CASE("a trained layout discriminator separates real from corrupted two-part layouts") {
  DiscriminatorConfig dcfg;
  dcfg.num_parts = 2;
  dcfg.hidden = {64, 64};
  Discriminator<float> D(dcfg, 9);
  LayoutPretrainConfig cfg;
  cfg.steps = 1500;
  cfg.seed = 10;
  pretrain_layout_discriminator(D, Category::Laptop, 0, cfg);
  std::mt19937_64 rng(11);
  int correct = 0, total = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const LayoutSample sample = sample_layout_with_axes(Category::Laptop, 0, 900000 + s);
    const auto kind = s % 2 ? Corruption::Rotation : Corruption::Offset;
    const double mag = kind == Corruption::Rotation ? 20.0 * M_PI / 180.0 : 0.1;
    const auto bad = corrupt_layout(sample.boxes, 1, kind, mag, rng, sample.joint_axes[1]);
    correct += D.score(cast_layout<float>(sample.boxes)) > 0.5f;
    correct += D.score(cast_layout<float>(bad)) <= 0.5f;
    total += 2;
  }
  CHECK(correct > 0.9 * total);
}

TEST_CASE("noise schedule invariants") {
  const NoiseSchedule s = NoiseSchedule::linear(100);
  CHECK(s.beta[1] == doctest::Approx(1e-4));
  CHECK(s.beta[100] == doctest::Approx(0.02));
  for (int t = 1; t <= 100; ++t) {
    CHECK(s.beta[t] > 0.0);
    CHECK(s.beta[t] < 1.0);
    if (t > 1) {
      CHECK(s.beta[t] > s.beta[t - 1]);
      CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
    }
  }
  CHECK(s.alpha_bar[1] == 1.0 - s.beta[1]);
  CHECK_THROWS_AS(s.check(0), Error);
  CHECK_THROWS_AS(s.check(101), Error);
}

TEST_CASE("q_sample examples") {
  const NoiseSchedule s = NoiseSchedule::linear(100);
  std::mt19937_64 rng(12);
  const Eigen::VectorXd x0 = encode_contact({1, 0, 1, 1, 0});
  const Eigen::VectorXd eps = standard_normal(5, rng);
  const Eigen::VectorXd x1 = q_sample(s, x0, 1, eps);
  const Eigen::VectorXd closed = std::sqrt(1.0 - s.beta[1]) * x0 + std::sqrt(s.beta[1]) * eps;
  CHECK(test::max_abs(x1 - closed) <= 1e-15);
  for (int t : {1, 37, 100}) {
    CHECK(q_sample(s, x0, t, Eigen::VectorXd::Zero(5)) == std::sqrt(s.alpha_bar[t]) * x0);
  }
}

TEST_CASE("q_sample marginal mean and variance") {
  const NoiseSchedule s = NoiseSchedule::linear(100);
  std::mt19937_64 rng(13);
  const int draws = 10000;
  for (int t : {1, 25, 100}) {
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(draws, 1.0);
    const Eigen::VectorXd x = q_sample(s, x0, t, standard_normal(draws, rng));
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / (draws - 1);
    const double v = 1.0 - s.alpha_bar[t];
    CHECK(std::abs(mean - std::sqrt(s.alpha_bar[t])) <= 3.0 * std::sqrt(v / draws));
    CHECK(std::abs(var - v) <= 3.0 * v * std::sqrt(2.0 / (draws - 1)));
  }
}

TEST_CASE("diffusion loss with stubbed denoisers") {
  const NoiseSchedule s = NoiseSchedule::linear(100);
  std::mt19937_64 rng(14);
  const Eigen::VectorXd x0 = encode_contact(ContactMap(20000, 1));
  const double exact = diffusion_mse(s, x0, rng, [&](const Eigen::VectorXd& x_t, int t) {
    return Eigen::VectorXd((x_t - std::sqrt(s.alpha_bar[t]) * x0) / std::sqrt(1.0 - s.alpha_bar[t]));
  });
  CHECK(exact <= 1e-20);
  const double zero =
      diffusion_mse(s, x0, rng, [](const Eigen::VectorXd& x_t, int) { return Eigen::VectorXd::Zero(x_t.size()); });
  CHECK(std::abs(zero - 1.0) <= 0.03);
}

TEST_CASE("single-step schedule reconstructs x0 from a perfect denoiser") {
  const NoiseSchedule s = NoiseSchedule::linear(1, 0.3, 0.3);
  std::mt19937_64 rng(15);
  const Eigen::VectorXd x0 = encode_contact({1, 0, 0, 1});
  const Eigen::VectorXd eps = standard_normal(4, rng);
  const Eigen::VectorXd x1 = q_sample(s, x0, 1, eps);
  const Eigen::VectorXd back = reverse_sample(s, x1, [&](const Eigen::VectorXd&, int) { return eps; }, rng);
  CHECK((back - x0).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("contact sampling determinism") {
  ContactDiffuser<float> diff(small_diffusion(), 16);
  std::mt19937_64 rng(17);
  nn::Matrix<float> z(60, 8);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<float>(std::normal_distribution<double>()(rng));
  const auto a = diff.sample(z, 1, 5);
  const auto b = diff.sample(z, 1, 5);
  CHECK(a.map == b.map);
  CHECK(a.confidence == b.confidence);
  CHECK(diff.sample(z, 1, 6).confidence != a.confidence);
  CHECK(a.map.size() == 60);
}

TEST_CASE("a zero denoiser samples about half ones") {
  ContactDiffuser<float> diff(small_diffusion(), 18);
  for (std::size_t i = 0; i < diff.params.size(); ++i) diff.params.mutable_value(i).setZero();
  const nn::Matrix<float> z = nn::Matrix<float>::Zero(10000, 8);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto out = diff.sample(z, 1, seed);
    const double ones = static_cast<double>(std::count(out.map.begin(), out.map.end(), 1)) / 10000.0;
    CHECK(ones >= 0.45);
    CHECK(ones <= 0.55);
  }
}

TEST_CASE("averaging generations does not increase confidence variance") {
  ContactDiffuser<float> diff(small_diffusion(), 19);
  std::mt19937_64 rng(20);
  nn::Matrix<float> z(200, 8);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<float>(std::normal_distribution<double>()(rng));
  const int seeds = 40;
  auto per_point_variance = [&](int K) {
    Eigen::MatrixXd c(seeds, 200);
    for (int s = 0; s < seeds; ++s) c.row(s) = diff.sample(z, K, 1000 + 17 * s).confidence.transpose();
    const Eigen::RowVectorXd mean = c.colwise().mean();
    return ((c.rowwise() - mean).array().square().colwise().sum() / (seeds - 1)).mean();
  };
  CHECK(per_point_variance(5) <= per_point_variance(1));
}

TEST_CASE("total_loss") {
  CHECK(total_loss(2.5, 7.0, 9.0, PriorWeights{0.0, 0.0}) == 2.5);
  CHECK(total_loss(1.0, 1.0, 1.0, PriorWeights{1.0, 1.0}) == 3.0);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const double p = u(rng), a = u(rng), d = u(rng), wa = u(rng), wd = u(rng);
    CHECK(std::abs(total_loss(p, a, d, PriorWeights{wa, wd}) - (p + wa * a + wd * d)) <= 1e-12);
  }
}

TEST_CASE("contact_iou") {
  CHECK(contact_iou({1, 1, 0, 0}, {1, 0, 1, 0}) == doctest::Approx(1.0 / 3.0));
  CHECK(contact_iou({0, 0}, {0, 0}) == 1.0);
  CHECK_THROWS_AS(contact_iou({1}, {1, 0}), Error);
}
