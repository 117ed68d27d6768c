#pragma once

// Independent reference implementations used only by tests. Everything here
// is built from first principles (matrix series, finite differences, brute
// force) so it cannot share a bug with the library code under test.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>

#include "se3dif/liegroup.hpp"

namespace oracle {

using Eigen::Matrix3d;
using Eigen::Matrix4d;
using Eigen::Vector3d;
using se3dif::Matrix6d;
using se3dif::Vector6d;

inline Matrix3d skew3(const Vector3d& x) {
  Matrix3d m;
  m << 0, -x.z(), x.y(), x.z(), 0, -x.x(), -x.y(), x.x(), 0;
  return m;
}

// exp of a square matrix by scaling-and-squaring with a long Taylor tail.
template <class Mat>
Mat mat_exp(Mat m) {
  double norm = m.template lpNorm<Eigen::Infinity>();
  int squarings = 0;
  while (norm > 0.25) {
    norm *= 0.5;
    ++squarings;
  }
  m /= std::pow(2.0, squarings);
  Mat acc = Mat::Identity(m.rows(), m.cols());
  Mat term = Mat::Identity(m.rows(), m.cols());
  for (int n = 1; n <= 24; ++n) {
    term = term * m / static_cast<double>(n);
    acc += term;
  }
  for (int s = 0; s < squarings; ++s) acc = acc * acc;
  return acc;
}

// SE(3) exponential through the 4x4 homogeneous twist matrix.
inline Matrix4d se3_exp_homogeneous(const Vector3d& v, const Vector3d& w) {
  Matrix4d m = Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = skew3(w);
  m.topRightCorner<3, 1>() = v;
  return mat_exp(m);
}

// ad matrix for twist ordering (v, w).
inline Matrix6d se3_ad(const Vector3d& v, const Vector3d& w) {
  Matrix6d a = Matrix6d::Zero();
  a.topLeftCorner<3, 3>() = skew3(w);
  a.topRightCorner<3, 3>() = skew3(v);
  a.bottomRightCorner<3, 3>() = skew3(w);
  return a;
}

// Left Jacobian by its defining series sum_n ad^n / (n+1)!.
inline Matrix6d se3_left_jacobian_series(const Vector3d& v, const Vector3d& w) {
  Matrix6d ad = se3_ad(v, w);
  Matrix6d acc = Matrix6d::Identity();
  Matrix6d term = Matrix6d::Identity();
  double fact = 1.0;
  for (int n = 1; n <= 40; ++n) {
    term = term * ad;
    fact *= static_cast<double>(n + 1);
    acc += term / fact;
  }
  return acc;
}

// Central finite difference of a scalar function of a pose under left
// perturbations; returns the 6-vector of directional derivatives.
template <class F>
Vector6d fd_pose_gradient(F&& f, const se3dif::Pose& h, double step = 1e-6) {
  Vector6d g;
  for (int j = 0; j < 6; ++j) {
    Vector6d e = Vector6d::Zero();
    e(j) = step;
    se3dif::Pose hp = se3dif::compose(se3dif::expmap(se3dif::Twist(e)), h);
    e(j) = -step;
    se3dif::Pose hm = se3dif::compose(se3dif::expmap(se3dif::Twist(e)), h);
    g(j) = (f(hp) - f(hm)) / (2.0 * step);
  }
  return g;
}

// Central finite difference of a vector function of a pose (columns indexed
// by the perturbation axis).
template <class F>
Eigen::MatrixXd fd_pose_jacobian(F&& f, const se3dif::Pose& h, int rows, double step = 1e-6) {
  Eigen::MatrixXd jac(rows, 6);
  for (int j = 0; j < 6; ++j) {
    Vector6d e = Vector6d::Zero();
    e(j) = step;
    se3dif::Pose hp = se3dif::compose(se3dif::expmap(se3dif::Twist(e)), h);
    e(j) = -step;
    se3dif::Pose hm = se3dif::compose(se3dif::expmap(se3dif::Twist(e)), h);
    jac.col(j) = (f(hp) - f(hm)) / (2.0 * step);
  }
  return jac;
}

inline se3dif::Pose random_pose(se3dif::Rng& rng, double trans_scale = 1.0,
                                double max_angle = 2.5) {
  Vector3d axis = rng.normal3().normalized();
  double angle = rng.uniform(0.0, max_angle);
  se3dif::Pose p;
  p.rotation = se3dif::so3_expmap(angle * axis);
  p.translation = trans_scale * rng.normal3();
  return p;
}

inline se3dif::Twist random_twist(se3dif::Rng& rng, double v_scale = 1.0,
                                  double max_angle = 2.5) {
  se3dif::Twist xi;
  xi.v = v_scale * rng.normal3();
  xi.w = rng.uniform(0.0, max_angle) * rng.normal3().normalized();
  return xi;
}

// Analytic energy well around a pose: E(H) = ||log(mean^-1 H)||^2 / (2 s^2),
// with the exact left-perturbation gradient. Satisfies the sampler's field
// interface and doubles as the ground truth for score checks.
struct GaussianEnergyField {
  se3dif::LieGaussian target;
  std::vector<double> noise_scales;

  int levels() const { return static_cast<int>(noise_scales.size()); }
  double sigma(int k) const { return noise_scales.at(static_cast<std::size_t>(k - 1)); }
  double energy(const se3dif::Pose& h, int) const {
    se3dif::Twist phi = se3dif::logmap(se3dif::compose(se3dif::inverse(target.mean), h));
    return phi.vec().squaredNorm() / (2.0 * target.sigma * target.sigma);
  }
  se3dif::Twist grad(const se3dif::Pose& h, int) const {
    return se3dif::Twist(-se3dif::lie_gaussian_score(target, h).vec());
  }
};

}  // namespace oracle
