#pragma once

// SE(3) ops used everywhere else. Twist ordering is (v, w): translation first,
// rotation second, in every vector, Jacobian and covariance. Derivatives of
// pose-valued arguments are taken with respect to left perturbations,
// d f(H) = lim_{t->0} [f(expmap(t*xi) * H) - f(H)] / t.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>

#include "se3dif/errors.hpp"
#include "se3dif/rng.hpp"

namespace se3dif {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

constexpr double kAngleNearPiTol = 1e-6;
// Documented small-angle switch for expmap/logmap branches.
constexpr double kSmallAngle = 1e-8;
// The rational trig coefficients below lose precision to cancellation well
// before 1e-8, so they switch to their series around theta = 0.1 where both
// branches agree to ~1e-12.
constexpr double kCoefSwitch = 0.1;

struct Twist {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d w = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& v_in, const Eigen::Vector3d& w_in) : v(v_in), w(w_in) {}
  explicit Twist(const Vector6d& x) : v(x.head<3>()), w(x.tail<3>()) {}

  Vector6d vec() const {
    Vector6d x;
    x << v, w;
    return x;
  }
};

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) : rotation(r), translation(t) {}

  static Pose identity() { return Pose(); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

// Isotropic Gaussian on SE(3): density ~ exp(-||logmap(mean^-1 * query)||^2 / (2 sigma^2)).
struct LieGaussian {
  Pose mean;
  double sigma = 1.0;
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& x) {
  Eigen::Matrix3d m;
  m << 0, -x.z(), x.y(), x.z(), 0, -x.x(), -x.y(), x.x(), 0;
  return m;
}

namespace detail {

// sin(t)/t
inline double coef_sinc(double t) {
  double t2 = t * t;
  if (t < kCoefSwitch)
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0 - t2 * t2 * t2 / 5040.0;
  return std::sin(t) / t;
}

// (1 - cos(t)) / t^2
inline double coef_cos1(double t) {
  double t2 = t * t;
  if (t < kCoefSwitch)
    return 0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0;
  return (1.0 - std::cos(t)) / t2;
}

// (t - sin(t)) / t^3
inline double coef_tsin(double t) {
  double t2 = t * t;
  if (t < kCoefSwitch)
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0;
  return (t - std::sin(t)) / (t2 * t);
}

// coefficient of skew(w)^2 in the inverse SO(3) left Jacobian:
// (1/t^2) * (1 - t*sin(t) / (2*(1-cos(t))))
inline double coef_jlinv(double t) {
  double t2 = t * t;
  if (t < kCoefSwitch)
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 * t2 * t2 / 1209600.0;
  return (1.0 - t * std::sin(t) / (2.0 * (1.0 - std::cos(t)))) / t2;
}

// (t^2/2 + cos(t) - 1) / t^4
inline double coef_q2(double t) {
  double t2 = t * t;
  if (t < kCoefSwitch)
    return 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0 - t2 * t2 * t2 / 3628800.0;
  return (t2 / 2.0 + std::cos(t) - 1.0) / (t2 * t2);
}

// (t - sin(t) - t^3/6) / t^5
inline double coef_q3(double t) {
  double t2 = t * t;
  if (t < kCoefSwitch)
    return -1.0 / 120.0 + t2 / 5040.0 - t2 * t2 / 362880.0;
  return (t - std::sin(t) - t2 * t / 6.0) / (t2 * t2 * t);
}

}  // namespace detail

inline Eigen::Matrix3d so3_expmap(const Eigen::Vector3d& w) {
  double t = w.norm();
  Eigen::Matrix3d W = skew(w);
  return Eigen::Matrix3d::Identity() + detail::coef_sinc(t) * W + detail::coef_cos1(t) * W * W;
}

// Principal branch. Throws AngleNearPi once the angle is within 1e-6 of pi.
inline Eigen::Vector3d so3_logmap(const Eigen::Matrix3d& R) {
  Eigen::Vector3d vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  double cos_t = 0.5 * (R.trace() - 1.0);
  cos_t = std::max(-1.0, std::min(1.0, cos_t));
  double sin_t = 0.5 * vee.norm();
  double t = std::atan2(sin_t, cos_t);
  if (t >= M_PI - kAngleNearPiTol) throw AngleNearPi();
  if (t < M_PI - 0.01) return vee / (2.0 * detail::coef_sinc(t));
  // Close to pi the vee-based formula divides by a small sine; recover the
  // axis from the symmetric part instead and only take signs from vee.
  Eigen::Matrix3d S = 0.5 * (R + R.transpose());
  double c1 = 1.0 - cos_t;
  Eigen::Vector3d d;
  for (int i = 0; i < 3; ++i) d(i) = std::sqrt(std::max(0.0, 1.0 + (S(i, i) - 1.0) / c1));
  int k = 0;
  if (d(1) > d(k)) k = 1;
  if (d(2) > d(k)) k = 2;
  Eigen::Vector3d axis;
  axis(k) = d(k);
  for (int i = 0; i < 3; ++i) {
    if (i == k) continue;
    // off-diagonal of S: S_ki = (1 - cos) * a_k * a_i
    axis(i) = S(k, i) / (c1 * d(k));
  }
  axis.normalize();
  if (vee.dot(axis) < 0.0) axis = -axis;
  return t * axis;
}

inline Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w) {
  double t = w.norm();
  Eigen::Matrix3d W = skew(w);
  return Eigen::Matrix3d::Identity() + detail::coef_cos1(t) * W + detail::coef_tsin(t) * W * W;
}

inline Eigen::Matrix3d so3_inv_left_jacobian(const Eigen::Vector3d& w) {
  double t = w.norm();
  Eigen::Matrix3d W = skew(w);
  return Eigen::Matrix3d::Identity() - 0.5 * W + detail::coef_jlinv(t) * W * W;
}

inline Pose expmap(const Twist& xi) {
  return Pose(so3_expmap(xi.w), so3_left_jacobian(xi.w) * xi.v);
}

inline Twist logmap(const Pose& h) {
  Eigen::Vector3d w = so3_logmap(h.rotation);
  return Twist(so3_inv_left_jacobian(w) * h.translation, w);
}

inline Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.rotation * b.rotation, a.rotation * b.translation + a.translation);
}

inline Pose inverse(const Pose& a) {
  Eigen::Matrix3d rt = a.rotation.transpose();
  return Pose(rt, -(rt * a.translation));
}

inline Eigen::Vector3d transform_point(const Pose& a, const Eigen::Vector3d& x) {
  return a.rotation * x + a.translation;
}

// Adj_H, satisfying expmap(Adj_H * xi) = H * expmap(xi) * H^-1.
inline Matrix6d adjoint(const Pose& h) {
  Matrix6d adj = Matrix6d::Zero();
  adj.topLeftCorner<3, 3>() = h.rotation;
  adj.topRightCorner<3, 3>() = skew(h.translation) * h.rotation;
  adj.bottomRightCorner<3, 3>() = h.rotation;
  return adj;
}

// Barfoot's Q block of the SE(3) left Jacobian, (v, w) ordering.
namespace detail {
inline Eigen::Matrix3d se3_jacobian_q(const Twist& xi) {
  double t = xi.w.norm();
  Eigen::Matrix3d V = skew(xi.v);
  Eigen::Matrix3d W = skew(xi.w);
  Eigen::Matrix3d WV = W * V, VW = V * W;
  Eigen::Matrix3d WVW = WV * W;
  double q1 = coef_tsin(t);
  double q2 = coef_q2(t);
  double q3 = coef_q3(t);
  return 0.5 * V + q1 * (WV + VW + WVW) + q2 * (W * WV + VW * W - 3.0 * WVW) +
         0.5 * (q2 + 3.0 * q3) * (WVW * W + W * WVW);
}
}  // namespace detail

inline Matrix6d left_jacobian(const Twist& xi) {
  Eigen::Matrix3d a = so3_left_jacobian(xi.w);
  Matrix6d j = Matrix6d::Zero();
  j.topLeftCorner<3, 3>() = a;
  j.topRightCorner<3, 3>() = detail::se3_jacobian_q(xi);
  j.bottomRightCorner<3, 3>() = a;
  return j;
}

inline Matrix6d inv_left_jacobian(const Twist& xi) {
  Eigen::Matrix3d ainv = so3_inv_left_jacobian(xi.w);
  Matrix6d j = Matrix6d::Zero();
  j.topLeftCorner<3, 3>() = ainv;
  j.topRightCorner<3, 3>() = -ainv * detail::se3_jacobian_q(xi) * ainv;
  j.bottomRightCorner<3, 3>() = ainv;
  return j;
}

// ||t_a - t_b|| + rotation angle of R_a^T R_b. Throws AngleNearPi at the cut.
inline double se3_distance(const Pose& a, const Pose& b) {
  double rot = so3_logmap(a.rotation.transpose() * b.rotation).norm();
  return (a.translation - b.translation).norm() + rot;
}

// Draw mean * expmap(eps), eps ~ N(0, sigma^2 I_6).
inline Pose sample_lie_gaussian(Rng& rng, const LieGaussian& g) {
  Twist eps;
  eps.v = g.sigma * rng.normal3();
  eps.w = g.sigma * rng.normal3();
  return compose(g.mean, expmap(eps));
}

// Score D log q / D query under the left-perturbation convention:
// with phi = logmap(mean^-1 * query),
//   score = -Adj_{mean^-1}^T J_l^{-1}(phi)^T phi / sigma^2.
inline Twist lie_gaussian_score(const LieGaussian& g, const Pose& query) {
  Pose m = compose(inverse(g.mean), query);
  Twist phi = logmap(m);
  Vector6d s = -(adjoint(inverse(g.mean)).transpose() *
                 (inv_left_jacobian(phi).transpose() * phi.vec())) /
               (g.sigma * g.sigma);
  return Twist(s);
}

// log density up to the normalization constant; handy for test doubles.
inline double lie_gaussian_log_density(const LieGaussian& g, const Pose& query) {
  Twist phi = logmap(compose(inverse(g.mean), query));
  return -0.5 * phi.vec().squaredNorm() / (g.sigma * g.sigma);
}

}  // namespace se3dif
