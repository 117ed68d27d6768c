#pragma once

// Serial revolute chains: forward kinematics, the left-perturbation geometric
// Jacobian of the end effector, and collision-sphere placement. Two reference
// chains ship as builders so tests and data files agree.

#include <Eigen/Core>

#include <cmath>
#include <utility>
#include <vector>

#include "se3dif/errors.hpp"
#include "se3dif/liegroup.hpp"

namespace se3dif {

struct Joint {
  Pose offset;  // parent frame -> joint frame, applied before the joint angle
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double lo = -M_PI;
  double hi = M_PI;
};

struct CollisionSphere {
  int link = 0;  // 0 = base frame, i = frame after joint i
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.05;
};

struct KinematicChain {
  std::vector<Joint> joints;
  Pose tool;  // fixed transform after the last joint
  std::vector<CollisionSphere> spheres;

  int dof() const { return static_cast<int>(joints.size()); }

  void validate() const {
    for (const Joint& j : joints) {
      if (std::abs(j.axis.norm() - 1.0) > 1e-12)
        throw ConfigError("kinematics: joint axis must be unit length");
      if (!(j.lo < j.hi)) throw ConfigError("kinematics: joint limits need lo < hi");
    }
    for (const CollisionSphere& s : spheres) {
      if (s.radius <= 0.0) throw ConfigError("kinematics: sphere radius must be > 0");
      if (s.link < 0 || s.link > dof())
        throw ConfigError("kinematics: sphere link index out of range");
    }
  }
};

struct FkResult {
  Pose ee;
  std::vector<Pose> links;  // links[0] = base, links[i] = frame after joint i
};

// Rotation about a unit axis; bypasses expmap's small-angle handling to keep
// the joint transform exactly periodic.
inline Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis, double angle) {
  Eigen::Matrix3d w = skew(axis);
  return Eigen::Matrix3d::Identity() + std::sin(angle) * w + (1.0 - std::cos(angle)) * w * w;
}

inline FkResult fk(const KinematicChain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.dof()) throw ConfigError("kinematics: q length does not match chain");
  FkResult out;
  out.links.resize(chain.dof() + 1);
  out.links[0] = Pose::identity();
  for (int i = 0; i < chain.dof(); ++i) {
    const Joint& j = chain.joints[i];
    Pose joint_frame = compose(out.links[i], j.offset);
    Pose rotated{joint_frame.rotation * axis_rotation(j.axis, q(i)), joint_frame.translation};
    out.links[i + 1] = rotated;
  }
  out.ee = compose(out.links[chain.dof()], chain.tool);
  return out;
}

// Left-perturbation (spatial) Jacobian of the end effector: column j is
// (p_j x w_j, w_j) with p_j the joint-j origin and w_j its world axis. This
// is exactly d/dq_j of logmap(fk(q + dq) * fk(q)^-1).
inline Eigen::Matrix<double, 6, Eigen::Dynamic> fk_jacobian(const KinematicChain& chain,
                                                            const Eigen::VectorXd& q) {
  FkResult r = fk(chain, q);
  Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, chain.dof());
  for (int j = 0; j < chain.dof(); ++j) {
    Eigen::Vector3d w = r.links[j + 1].rotation * chain.joints[j].axis;
    Eigen::Vector3d p = r.links[j + 1].translation;
    jac.col(j).head<3>() = p.cross(w);
    jac.col(j).tail<3>() = w;
  }
  return jac;
}

inline std::vector<std::pair<Eigen::Vector3d, double>> sphere_positions(
    const KinematicChain& chain, const Eigen::VectorXd& q) {
  FkResult r = fk(chain, q);
  std::vector<std::pair<Eigen::Vector3d, double>> out;
  out.reserve(chain.spheres.size());
  for (const CollisionSphere& s : chain.spheres)
    out.emplace_back(transform_point(r.links[s.link], s.center), s.radius);
  return out;
}

// 3-link planar arm in the xy plane, links 0.3 / 0.3 / 0.1 along x, all
// joints about z. Fast chain for unit tests.
inline KinematicChain make_planar3_chain() {
  KinematicChain c;
  Joint j;
  c.joints.push_back(j);
  j.offset.translation = Eigen::Vector3d(0.3, 0, 0);
  c.joints.push_back(j);
  c.joints.push_back(j);
  c.tool.translation = Eigen::Vector3d(0.1, 0, 0);
  c.spheres.push_back({1, Eigen::Vector3d(0.15, 0, 0), 0.05});
  c.spheres.push_back({2, Eigen::Vector3d(0.15, 0, 0), 0.05});
  c.spheres.push_back({3, Eigen::Vector3d(0.05, 0, 0), 0.04});
  return c;
}

// 6-DoF spatial arm (yaw, pitch, pitch, roll, pitch, roll) with nine
// collision spheres; at q = 0 it points straight up, reach is about 0.95 m.
// The tool advances along +z so the flange-to-grip distance matches the
// gripper skeleton's wrist depth.
inline KinematicChain make_arm6_chain() {
  KinematicChain c;
  auto add = [&](const Eigen::Vector3d& t, const Eigen::Vector3d& axis, double lo, double hi) {
    Joint j;
    j.offset.translation = t;
    j.axis = axis;
    j.lo = lo;
    j.hi = hi;
    c.joints.push_back(j);
  };
  Eigen::Vector3d z = Eigen::Vector3d::UnitZ(), y = Eigen::Vector3d::UnitY();
  add({0, 0, 0.15}, z, -M_PI, M_PI);
  add({0, 0, 0}, y, -2.2, 2.2);
  add({0, 0, 0.35}, y, -2.5, 2.5);
  add({0, 0, 0.30}, z, -M_PI, M_PI);
  add({0, 0, 0}, y, -2.2, 2.2);
  add({0, 0, 0.10}, z, -M_PI, M_PI);
  c.tool.translation = Eigen::Vector3d(0, 0, 0.11);

  c.spheres.push_back({1, {0, 0, -0.05}, 0.08});
  c.spheres.push_back({2, {0, 0, 0.10}, 0.07});
  c.spheres.push_back({2, {0, 0, 0.25}, 0.06});
  c.spheres.push_back({3, {0, 0, 0.10}, 0.06});
  c.spheres.push_back({3, {0, 0, 0.20}, 0.05});
  c.spheres.push_back({4, {0, 0, 0.00}, 0.05});
  c.spheres.push_back({5, {0, 0, 0.05}, 0.05});
  c.spheres.push_back({6, {0, 0, 0.00}, 0.045});
  c.spheres.push_back({6, {0, 0, 0.08}, 0.04});
  return c;
}

}  // namespace se3dif
