#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "se3dif/energy_model.hpp"
#include "se3dif/kinematics.hpp"

using namespace se3dif;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

VectorXd random_q(const KinematicChain& chain, Rng& rng) {
  VectorXd q(chain.dof());
  for (int i = 0; i < q.size(); ++i)
    q(i) = rng.uniform(chain.joints[i].lo, chain.joints[i].hi);
  return q;
}

// central finite difference of the left-perturbation Jacobian
Eigen::MatrixXd fd_jacobian(const KinematicChain& chain, const VectorXd& q, double h = 1e-6) {
  Eigen::MatrixXd jac(6, chain.dof());
  Pose base = fk(chain, q).ee;
  Pose inv_base = inverse(base);
  for (int j = 0; j < chain.dof(); ++j) {
    VectorXd qp = q, qm = q;
    qp(j) += h;
    qm(j) -= h;
    Vector6d lp = logmap(compose(fk(chain, qp).ee, inv_base)).vec();
    Vector6d lm = logmap(compose(fk(chain, qm).ee, inv_base)).vec();
    jac.col(j) = (lp - lm) / (2.0 * h);
  }
  return jac;
}

}  // namespace

TEST_CASE("planar chain forward kinematics") {
  KinematicChain chain = make_planar3_chain();
  chain.validate();
  REQUIRE(chain.dof() == 3);

  FkResult zero = fk(chain, VectorXd::Zero(3));
  CHECK((zero.ee.translation - Vector3d(0.7, 0, 0)).norm() < 1e-15);
  CHECK(zero.ee.rotation.isIdentity(1e-15));
  REQUIRE(zero.links.size() == 4);
  CHECK((zero.links[2].translation - Vector3d(0.3, 0, 0)).norm() < 1e-15);

  VectorXd q(3);
  q << M_PI / 2, 0, 0;
  FkResult bent = fk(chain, q);
  CHECK((bent.ee.translation - Vector3d(0, 0.7, 0)).norm() < 1e-12);
  Eigen::Matrix3d rz90;
  rz90 << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((bent.ee.rotation - rz90).cwiseAbs().maxCoeff() < 1e-12);

  // elbow: rotating joint 2 pivots about (0.3, 0, 0)
  q << 0, M_PI / 2, 0;
  FkResult elbow = fk(chain, q);
  CHECK((elbow.ee.translation - Vector3d(0.3, 0.4, 0)).norm() < 1e-12);

  CHECK_THROWS_AS(fk(chain, VectorXd::Zero(2)), ConfigError);
}

TEST_CASE("fk is 2pi periodic per joint") {
  Rng rng(51);
  for (KinematicChain chain : {make_planar3_chain(), make_arm6_chain()}) {
    for (int trial = 0; trial < 25; ++trial) {
      VectorXd q = random_q(chain, rng);
      int j = static_cast<int>(rng.uniform_int(chain.dof()));
      VectorXd q2 = q;
      q2(j) += 2.0 * M_PI;
      CHECK((fk(chain, q).ee.matrix() - fk(chain, q2).ee.matrix()).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("jacobian columns follow the joint geometry") {
  KinematicChain chain = make_planar3_chain();
  Eigen::MatrixXd jac = fk_jacobian(chain, VectorXd::Zero(3));
  REQUIRE(jac.rows() == 6);
  REQUIRE(jac.cols() == 3);
  // all axes are world z; joint origins sit at x = 0, 0.3, 0.6
  for (int j = 0; j < 3; ++j) {
    CHECK((jac.col(j).tail<3>() - Vector3d(0, 0, 1)).norm() < 1e-15);
    Vector3d p(0.3 * j, 0, 0);
    CHECK((jac.col(j).head<3>() - p.cross(Vector3d(0, 0, 1))).norm() < 1e-15);
  }

  KinematicChain empty;
  CHECK(fk_jacobian(empty, VectorXd(0)).cols() == 0);
  CHECK((fk(empty, VectorXd(0)).ee.matrix() - empty.tool.matrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jacobian matches finite differences") {
  Rng rng(52);
  for (KinematicChain chain : {make_planar3_chain(), make_arm6_chain()}) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      VectorXd q = random_q(chain, rng);
      Eigen::MatrixXd jac = fk_jacobian(chain, q);
      Eigen::MatrixXd fd = fd_jacobian(chain, q);
      worst = std::max(worst, (jac - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.norm()));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("collision spheres ride their links") {
  KinematicChain chain = make_planar3_chain();
  chain.spheres.insert(chain.spheres.begin(), {0, Vector3d::Zero(), 0.03});

  auto at_zero = sphere_positions(chain, VectorXd::Zero(3));
  REQUIRE(at_zero.size() == 4);
  CHECK(at_zero[0].first.norm() == 0.0);  // base sphere stays at the base origin
  CHECK(at_zero[0].second == 0.03);
  CHECK((at_zero[1].first - Vector3d(0.15, 0, 0)).norm() < 1e-15);

  VectorXd q(3);
  q << M_PI / 2, 0, 0;
  auto bent = sphere_positions(chain, q);
  FkResult r = fk(chain, q);
  for (std::size_t s = 0; s < chain.spheres.size(); ++s) {
    Vector3d expect = transform_point(r.links[chain.spheres[s].link], chain.spheres[s].center);
    CHECK((bent[s].first - expect).norm() == 0.0);
    CHECK(bent[s].second == chain.spheres[s].radius);
  }
}

TEST_CASE("energy gradients chain through the jacobian") {
  EnergyModelConfig mc;
  mc.n_shapes = 1;
  mc.encoder_hidden = {32, 32, 32};
  mc.decoder_hidden = {32, 32};
  Rng rng(53);
  EnergyModel m = make_energy_model(rng, mc);
  KinematicChain chain = make_arm6_chain();
  Pose obj = oracle::random_pose(rng, 0.2);

  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd q = random_q(chain, rng);
    EnergyEvaluator ev(m);
    Twist de;
    ev.energy_grad(fk(chain, q).ee, obj, 0, 4, &de);
    Eigen::VectorXd dq = fk_jacobian(chain, q).transpose() * de.vec();

    double h = 1e-6;
    for (int j = 0; j < chain.dof(); ++j) {
      VectorXd qp = q, qm = q;
      qp(j) += h;
      qm(j) -= h;
      EnergyEvaluator e2(m);
      double fd =
          (e2.energy(fk(chain, qp).ee, obj, 0, 4) - e2.energy(fk(chain, qm).ee, obj, 0, 4)) /
          (2 * h);
      worst = std::max(worst, std::abs(dq(j) - fd) / std::max(1e-6, std::abs(fd)));
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("chain validation catches bad descriptions") {
  KinematicChain chain = make_planar3_chain();
  chain.joints[1].axis = Vector3d(0, 0, 2);
  CHECK_THROWS_AS(chain.validate(), ConfigError);

  chain = make_planar3_chain();
  chain.joints[0].lo = chain.joints[0].hi;
  CHECK_THROWS_AS(chain.validate(), ConfigError);

  chain = make_planar3_chain();
  chain.spheres[0].radius = 0.0;
  CHECK_THROWS_AS(chain.validate(), ConfigError);

  chain = make_planar3_chain();
  chain.spheres[0].link = 4;
  CHECK_THROWS_AS(chain.validate(), ConfigError);

  make_arm6_chain().validate();
}
