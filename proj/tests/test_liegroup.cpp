#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "se3dif/liegroup.hpp"

using namespace se3dif;
using Eigen::Matrix3d;
using Eigen::Matrix4d;
using Eigen::Vector3d;

TEST_CASE("expmap of zero twist is identity") {
  Pose p = expmap(Twist());
  CHECK(p.rotation.isApprox(Matrix3d::Identity(), 1e-15));
  CHECK(p.translation.norm() == 0.0);
  Twist xi = logmap(Pose::identity());
  CHECK(xi.vec().norm() == 0.0);
}

TEST_CASE("expmap of pure translation") {
  Twist xi(Vector3d(1.0, 2.0, 3.0), Vector3d::Zero());
  Pose p = expmap(xi);
  CHECK(p.rotation.isApprox(Matrix3d::Identity(), 1e-15));
  CHECK((p.translation - Vector3d(1.0, 2.0, 3.0)).norm() < 1e-15);
}

TEST_CASE("expmap of quarter turn about z") {
  Twist xi(Vector3d::Zero(), Vector3d(0.0, 0.0, M_PI / 2.0));
  Pose p = expmap(xi);
  Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((p.rotation - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(p.translation.norm() < 1e-15);
}

TEST_CASE("expmap matches homogeneous matrix exponential") {
  Rng rng(101);
  for (int i = 0; i < 200; ++i) {
    Twist xi = oracle::random_twist(rng);
    Pose p = expmap(xi);
    Matrix4d ref = oracle::se3_exp_homogeneous(xi.v, xi.w);
    CHECK((p.matrix() - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("logmap(expmap) roundtrip over 1000 seeded twists") {
  Rng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Twist xi = oracle::random_twist(rng, 1.0, M_PI - 0.01);
    Twist back = logmap(expmap(xi));
    worst = std::max(worst, (back.vec() - xi.vec()).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("expmap(logmap) recovers the pose") {
  Rng rng(203);
  for (int i = 0; i < 300; ++i) {
    Pose h = oracle::random_pose(rng, 2.0, M_PI - 0.02);
    Pose back = expmap(logmap(h));
    CHECK((back.rotation - h.rotation).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((back.translation - h.translation).norm() < 1e-11);
  }
}

TEST_CASE("logmap stays accurate near the angle cut") {
  Rng rng(204);
  for (double gap : {1e-2, 1e-3, 1e-4, 2e-6}) {
    for (int i = 0; i < 20; ++i) {
      Twist xi;
      xi.w = (M_PI - gap) * rng.normal3().normalized();
      xi.v = rng.normal3();
      Twist back = logmap(expmap(xi));
      CHECK((back.vec() - xi.vec()).norm() < 1e-8);
    }
  }
}

TEST_CASE("logmap throws AngleNearPi within tolerance of pi") {
  Vector3d axis(0.0, 0.0, 1.0);
  Pose p;
  p.rotation = so3_expmap((M_PI - 1e-7) * axis);
  CHECK_THROWS_AS(logmap(p), AngleNearPi);
  p.rotation = so3_expmap(M_PI * axis);
  CHECK_THROWS_AS(logmap(p), AngleNearPi);
}

TEST_CASE("expmap branches agree across the small-angle switch") {
  // No jump at a branch boundary: on both sides of the switch the
  // implementation must agree with the branch-free series oracle, so any
  // branch-to-branch discontinuity is bounded by the sum of the two errors.
  Vector3d axis = Vector3d(1.0, -2.0, 0.5).normalized();
  Vector3d v(0.3, 0.1, -0.2);
  for (double angle : {0.999e-8, 1.001e-8}) {
    Twist xi(v, angle * axis);
    Matrix4d ref = oracle::se3_exp_homogeneous(xi.v, xi.w);
    CHECK((expmap(xi).matrix() - ref).cwiseAbs().maxCoeff() < 0.5e-12);
  }
  // and across the trig-coefficient switch at 0.1
  for (double angle : {kCoefSwitch - 1e-9, kCoefSwitch + 1e-9}) {
    Twist xi(v, angle * axis);
    Matrix4d ref = oracle::se3_exp_homogeneous(xi.v, xi.w);
    CHECK((expmap(xi).matrix() - ref).cwiseAbs().maxCoeff() < 0.5e-12);
  }
}

TEST_CASE("compose, inverse and transform_point agree with 4x4 algebra") {
  Rng rng(205);
  for (int i = 0; i < 100; ++i) {
    Pose a = oracle::random_pose(rng);
    Pose b = oracle::random_pose(rng);
    CHECK((compose(a, b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((compose(a, inverse(a)).matrix() - Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-13);
    Vector3d x = rng.normal3();
    Eigen::Vector4d xh;
    xh << x, 1.0;
    CHECK((transform_point(a, x) - (a.matrix() * xh).head<3>()).norm() < 1e-13);
  }
}

TEST_CASE("adjoint identity expmap(Adj_H xi) = H expmap(xi) H^-1 over 200 pairs") {
  Rng rng(206);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    Pose h = oracle::random_pose(rng);
    Twist xi = oracle::random_twist(rng, 0.5, 2.0);
    Pose lhs = expmap(Twist(adjoint(h) * xi.vec()));
    Pose rhs = compose(compose(h, expmap(xi)), inverse(h));
    worst = std::max(worst, (lhs.matrix() - rhs.matrix()).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("left jacobian matches its defining series") {
  Rng rng(207);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    Twist xi = oracle::random_twist(rng, 1.0, 2.9);
    Matrix6d ref = oracle::se3_left_jacobian_series(xi.v, xi.w);
    worst = std::max(worst, (left_jacobian(xi) - ref).cwiseAbs().maxCoeff());
  }
  // tiny and coefficient-switch angles too
  for (double angle : {1e-12, 1e-9, 1e-6, 1e-3, 0.0999, 0.1001, 0.5}) {
    Twist xi;
    xi.w = angle * Vector3d(1.0, 2.0, -2.0).normalized();
    xi.v = Vector3d(0.4, -0.3, 0.8);
    Matrix6d ref = oracle::se3_left_jacobian_series(xi.v, xi.w);
    worst = std::max(worst, (left_jacobian(xi) - ref).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("inv_left_jacobian is the inverse of the series jacobian") {
  Rng rng(208);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    Twist xi = oracle::random_twist(rng, 1.0, 2.9);
    Matrix6d prod = inv_left_jacobian(xi) * oracle::se3_left_jacobian_series(xi.v, xi.w);
    worst = std::max(worst, (prod - Matrix6d::Identity()).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("inv_left_jacobian matches finite differences of logmap") {
  Rng rng(209);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Pose h = oracle::random_pose(rng, 1.0, 2.5);
    Twist phi = logmap(h);
    auto f = [](const Pose& p) -> Eigen::VectorXd { return logmap(p).vec(); };
    Eigen::MatrixXd fd = oracle::fd_pose_jacobian(f, h, 6, 1e-6);
    worst = std::max(worst, (inv_left_jacobian(phi) - fd).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("se3_distance basics") {
  Pose a;  // identity
  Pose b;
  b.translation = Vector3d(3.0, 0.0, 4.0);
  CHECK(se3_distance(a, b) == Catch::Approx(5.0).margin(1e-14));
  Pose c;
  c.rotation = so3_expmap(Vector3d(0.0, 0.0, 0.7));
  CHECK(se3_distance(a, c) == Catch::Approx(0.7).margin(1e-12));
  Pose d = compose(b, c);
  CHECK(se3_distance(a, d) == Catch::Approx(5.7).margin(1e-12));
}

TEST_CASE("se3_distance symmetry and triangle inequality on seeded triples") {
  Rng rng(210);
  for (int i = 0; i < 200; ++i) {
    Pose a = oracle::random_pose(rng, 1.0, 1.4);
    Pose b = oracle::random_pose(rng, 1.0, 1.4);
    Pose c = oracle::random_pose(rng, 1.0, 1.4);
    double ab = se3_distance(a, b);
    double ba = se3_distance(b, a);
    CHECK(std::abs(ab - ba) < 1e-12);
    CHECK(se3_distance(a, a) < 1e-12);
    CHECK(ab <= se3_distance(a, c) + se3_distance(c, b) + 1e-12);
  }
}

TEST_CASE("sample_lie_gaussian is seeded and statistically sane") {
  LieGaussian g;
  g.mean = oracle::random_pose(*std::make_unique<Rng>(33), 0.5, 1.0);
  g.sigma = 0.2;

  Rng r1(42), r2(42);
  Pose s1 = sample_lie_gaussian(r1, g);
  Pose s2 = sample_lie_gaussian(r2, g);
  CHECK((s1.matrix() - s2.matrix()).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(77);
  int n = 4000;
  Vector6d mean_acc = Vector6d::Zero();
  double var_acc = 0.0;
  for (int i = 0; i < n; ++i) {
    Pose s = sample_lie_gaussian(rng, g);
    Vector6d eps = logmap(compose(inverse(g.mean), s)).vec();
    mean_acc += eps;
    var_acc += eps.squaredNorm();
  }
  mean_acc /= n;
  var_acc /= 6.0 * n;
  CHECK(mean_acc.norm() < 0.02);
  CHECK(var_acc == Catch::Approx(g.sigma * g.sigma).epsilon(0.05));
}

TEST_CASE("score of a local translation shift with mean at the origin") {
  LieGaussian g;
  g.sigma = 0.5;
  g.mean.rotation = so3_expmap(Vector3d(0.4, -0.2, 0.9));
  Vector3d d(0.03, -0.01, 0.02);
  Pose query = compose(g.mean, expmap(Twist(d, Vector3d::Zero())));
  Twist s = lie_gaussian_score(g, query);
  Vector3d expected = -(g.mean.rotation * d) / (g.sigma * g.sigma);
  CHECK((s.v - expected).norm() < 1e-12);
  CHECK(s.w.norm() < 1e-12);
}

TEST_CASE("score matches finite differences of the log density over 100 cases") {
  Rng rng(211);
  double worst_rel = 0.0;
  for (int i = 0; i < 100; ++i) {
    LieGaussian g;
    g.mean = oracle::random_pose(rng, 0.8, 1.5);
    g.sigma = rng.uniform(0.05, 0.8);
    Pose query = compose(g.mean, expmap(oracle::random_twist(rng, 0.3, 1.0)));
    Twist s = lie_gaussian_score(g, query);
    Vector6d fd = oracle::fd_pose_gradient(
        [&](const Pose& q) { return lie_gaussian_log_density(g, q); }, query, 1e-6);
    double rel = (s.vec() - fd).norm() / std::max(1.0, fd.norm());
    worst_rel = std::max(worst_rel, rel);
  }
  CHECK(worst_rel < 1e-4);
}

TEST_CASE("score throws AngleNearPi when the relative rotation hits the cut") {
  LieGaussian g;
  g.sigma = 0.3;
  Pose query;
  query.rotation = so3_expmap((M_PI - 1e-8) * Vector3d::UnitX());
  CHECK_THROWS_AS(lie_gaussian_score(g, query), AngleNearPi);
}

TEST_CASE("rng streams are order independent") {
  Rng root(9001);
  Rng a = root.derive(3, 7);
  double burn = root.uniform();
  (void)burn;
  Rng b = root.derive(3, 7);
  CHECK(a.normal() == b.normal());
  Rng c = root.derive(4, 7);
  CHECK(a.normal() != c.normal());
}
