#pragma once

#include <random>

#include "interprior/geometry.hpp"

namespace test {

using interprior::Index;
using interprior::Points;

inline Points<double> random_points(Index n, std::mt19937_64& rng, double half = 1.0) {
  std::uniform_real_distribution<double> u(-half, half);
  Points<double> p(n, 3);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace test
