#pragma once

// Analytic desk-scale ground truth: exact SDFs for simple solids, closed-form
// grasp families on a cylinder, dataset sampling and the projection that
// serves as the grasp success oracle.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "se3dif/errors.hpp"
#include "se3dif/liegroup.hpp"
#include "se3dif/rng.hpp"

namespace se3dif {

using Matrix3Xd = Eigen::Matrix<double, 3, Eigen::Dynamic>;

struct AnalyticObject {
  enum class Kind { Cylinder, Box };
  Kind kind = Kind::Cylinder;
  double radius = 0.04;   // cylinder
  double height = 0.12;   // cylinder, along z, centered at the origin
  Eigen::Vector3d half_extents = Eigen::Vector3d(0.04, 0.04, 0.06);  // box
  Pose canonical_pose;

  static AnalyticObject cylinder(double r, double h) {
    AnalyticObject o;
    o.kind = Kind::Cylinder;
    o.radius = r;
    o.height = h;
    return o;
  }
  static AnalyticObject box(const Eigen::Vector3d& half) {
    AnalyticObject o;
    o.kind = Kind::Box;
    o.half_extents = half;
    return o;
  }
};

inline double box_sdf(const Eigen::Vector3d& half, const Eigen::Vector3d& p) {
  Eigen::Vector3d q = p.cwiseAbs() - half;
  double outside = q.cwiseMax(0.0).norm();
  double inside = std::min(0.0, q.maxCoeff());
  return outside + inside;
}

inline double cylinder_sdf(double r, double h, const Eigen::Vector3d& p) {
  double dx = std::hypot(p.x(), p.y()) - r;
  double dz = std::abs(p.z()) - h / 2.0;
  double outside = std::hypot(std::max(dx, 0.0), std::max(dz, 0.0));
  double inside = std::min(std::max(dx, dz), 0.0);
  return outside + inside;
}

// exact SDF in the object's local frame (negative inside)
inline double analytic_sdf(const AnalyticObject& obj, const Eigen::Vector3d& x) {
  if (obj.kind == AnalyticObject::Kind::Cylinder) return cylinder_sdf(obj.radius, obj.height, x);
  return box_sdf(obj.half_extents, x);
}

enum class GraspFamily { Side = 0, Top = 1 };

// Two closed-form families on an upright cylinder: side grasps over a height
// band with the approach axis pointing at the cylinder axis, and top grasps
// at the rim approaching along -z.
struct GraspManifold {
  AnalyticObject object;  // cylinder
  bool side_family = true;
  bool top_family = true;
  double standoff = 0.02;

  void validate() const {
    if (object.kind != AnalyticObject::Kind::Cylinder)
      throw ConfigError("grasp manifold requires a cylinder object");
    if (!side_family && !top_family) throw ConfigError("grasp manifold needs at least one family");
  }
};

inline Eigen::Matrix3d rotz(double theta) {
  Eigen::Matrix3d r;
  double c = std::cos(theta), s = std::sin(theta);
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

// Side grasp at azimuth theta, height z in [-h/4, h/4]. Gripper +z approaches
// the cylinder axis radially.
inline Pose side_grasp(const GraspManifold& m, double theta, double z) {
  Eigen::Matrix3d r0;
  r0.col(0) = Eigen::Vector3d(0, 0, -1);
  r0.col(1) = Eigen::Vector3d(0, -1, 0);
  r0.col(2) = Eigen::Vector3d(-1, 0, 0);
  Pose g;
  g.rotation = rotz(theta) * r0;
  double rho = m.object.radius + m.standoff;
  g.translation = Eigen::Vector3d(rho * std::cos(theta), rho * std::sin(theta), z);
  return g;
}

// Top grasp at the rim, approaching along -z.
inline Pose top_grasp(const GraspManifold& m, double theta) {
  Eigen::Matrix3d r0;
  r0.col(0) = Eigen::Vector3d(1, 0, 0);
  r0.col(1) = Eigen::Vector3d(0, -1, 0);
  r0.col(2) = Eigen::Vector3d(0, 0, -1);
  Pose g;
  g.rotation = rotz(theta) * r0;
  double r = m.object.radius;
  g.translation =
      Eigen::Vector3d(r * std::cos(theta), r * std::sin(theta), m.object.height / 2.0 + m.standoff);
  return g;
}

inline Pose sample_manifold_grasp(const GraspManifold& m, Rng& rng,
                                  GraspFamily* family_out = nullptr) {
  m.validate();
  GraspFamily fam;
  if (m.side_family && m.top_family)
    fam = rng.uniform_int(2) == 0 ? GraspFamily::Side : GraspFamily::Top;
  else
    fam = m.side_family ? GraspFamily::Side : GraspFamily::Top;
  if (family_out) *family_out = fam;
  double theta = rng.uniform(0.0, 2.0 * M_PI);
  if (fam == GraspFamily::Side) {
    double band = m.object.height / 4.0;
    return side_grasp(m, theta, rng.uniform(-band, band));
  }
  return top_grasp(m, theta);
}

struct Projection {
  Pose pose;
  double distance = 0.0;
  GraspFamily family = GraspFamily::Side;
};

namespace detail {

// se3_distance that stays usable at the rotation cut (overestimates the
// rotation part by at most 1e-6 there, harmless for projection searches).
inline double guarded_distance(const Pose& a, const Pose& b) {
  try {
    return se3_distance(a, b);
  } catch (const AngleNearPi&) {
    return (a.translation - b.translation).norm() + M_PI;
  }
}

template <class F>
double golden_min(F&& f, double lo, double hi, int iters = 60) {
  const double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

// Closed-form candidate azimuth from the translation, then a guarded 1-D
// polish so the returned pose is the family minimum to high accuracy (the
// rotation term also depends on the azimuth, which the closed form ignores).
template <class GraspAt>
std::pair<double, double> best_azimuth(const Pose& pose, GraspAt&& grasp_at) {
  auto dist = [&](double th) { return guarded_distance(pose, grasp_at(th)); };
  double best_theta = std::atan2(pose.translation.y(), pose.translation.x());
  double best = dist(best_theta);
  const int grid = 64;
  for (int i = 0; i < grid; ++i) {
    double th = -M_PI + (2.0 * M_PI * i) / grid;
    double d = dist(th);
    if (d < best) {
      best = d;
      best_theta = th;
    }
  }
  double span = 2.0 * M_PI / grid;
  double refined = golden_min(dist, best_theta - span, best_theta + span);
  if (dist(refined) < best) best_theta = refined;
  return {best_theta, dist(best_theta)};
}

}  // namespace detail

// Family-wise minimum over the closed-form candidates; ties go to the side
// family.
inline Projection project_to_manifold(const GraspManifold& m, const Pose& pose) {
  m.validate();
  Projection best;
  best.distance = std::numeric_limits<double>::infinity();
  if (m.side_family) {
    double band = m.object.height / 4.0;
    double z = std::clamp(pose.translation.z(), -band, band);
    auto [theta, d] =
        detail::best_azimuth(pose, [&](double th) { return side_grasp(m, th, z); });
    best.pose = side_grasp(m, theta, z);
    best.distance = d;
    best.family = GraspFamily::Side;
  }
  if (m.top_family) {
    auto [theta, d] = detail::best_azimuth(pose, [&](double th) { return top_grasp(m, th); });
    if (d < best.distance) {
      best.pose = top_grasp(m, theta);
      best.distance = d;
      best.family = GraspFamily::Top;
    }
  }
  return best;
}

struct GraspDataset {
  std::vector<Pose> grasps;
  std::vector<GraspFamily> family;

  std::size_t size() const { return grasps.size(); }
};

struct SdfDataset {
  Matrix3Xd points;
  Eigen::VectorXd sdf;

  Eigen::Index size() const { return sdf.size(); }
};

namespace detail {

inline Eigen::Vector3d surface_point(const AnalyticObject& obj, Rng& rng) {
  if (obj.kind == AnalyticObject::Kind::Cylinder) {
    double r = obj.radius, h = obj.height;
    double lateral = 2.0 * M_PI * r * h;
    double caps = 2.0 * M_PI * r * r;
    if (rng.uniform() < lateral / (lateral + caps)) {
      double th = rng.uniform(0.0, 2.0 * M_PI);
      return {r * std::cos(th), r * std::sin(th), rng.uniform(-h / 2.0, h / 2.0)};
    }
    double th = rng.uniform(0.0, 2.0 * M_PI);
    double rho = r * std::sqrt(rng.uniform());
    double z = rng.uniform_int(2) == 0 ? h / 2.0 : -h / 2.0;
    return {rho * std::cos(th), rho * std::sin(th), z};
  }
  const Eigen::Vector3d& b = obj.half_extents;
  double areas[3] = {b.y() * b.z(), b.x() * b.z(), b.x() * b.y()};
  double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  double pick = rng.uniform(0.0, total);
  int axis = 0;
  for (double acc = 0.0; axis < 3; ++axis) {
    acc += 2.0 * areas[axis];
    if (pick < acc) break;
  }
  axis = std::min(axis, 2);
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i) p(i) = rng.uniform(-b(i), b(i));
  p(axis) = rng.uniform_int(2) == 0 ? b(axis) : -b(axis);
  return p;
}

inline Eigen::Vector3d bounding_halfwidths(const AnalyticObject& obj, double margin) {
  if (obj.kind == AnalyticObject::Kind::Cylinder)
    return {obj.radius + margin, obj.radius + margin, obj.height / 2.0 + margin};
  return obj.half_extents + Eigen::Vector3d::Constant(margin);
}

}  // namespace detail

// Grasps uniform over family parameters with an exact 50/50 family split when
// both families are on; SDF points half near-surface, half uniform in a
// bounding box.
inline void generate_datasets(const AnalyticObject& obj, const GraspManifold& manifold,
                              int n_grasps, int n_sdf, std::uint64_t seed,
                              GraspDataset* grasp_out, SdfDataset* sdf_out) {
  Rng root(seed);
  if (grasp_out) {
    manifold.validate();
    Rng rng = root.derive(1);
    grasp_out->grasps.clear();
    grasp_out->family.clear();
    for (int i = 0; i < n_grasps; ++i) {
      GraspFamily fam;
      if (manifold.side_family && manifold.top_family)
        fam = i % 2 == 0 ? GraspFamily::Side : GraspFamily::Top;
      else
        fam = manifold.side_family ? GraspFamily::Side : GraspFamily::Top;
      double theta = rng.uniform(0.0, 2.0 * M_PI);
      Pose g;
      if (fam == GraspFamily::Side) {
        double band = manifold.object.height / 4.0;
        g = side_grasp(manifold, theta, rng.uniform(-band, band));
      } else {
        g = top_grasp(manifold, theta);
      }
      grasp_out->grasps.push_back(g);
      grasp_out->family.push_back(fam);
    }
  }
  if (sdf_out) {
    Rng rng = root.derive(2);
    sdf_out->points.resize(3, n_sdf);
    sdf_out->sdf.resize(n_sdf);
    Eigen::Vector3d half = detail::bounding_halfwidths(obj, 0.05);
    for (int i = 0; i < n_sdf; ++i) {
      Eigen::Vector3d p;
      if (i % 2 == 0) {
        p = detail::surface_point(obj, rng) + 0.01 * rng.normal3();
      } else {
        for (int c = 0; c < 3; ++c) p(c) = rng.uniform(-half(c), half(c));
      }
      sdf_out->points.col(i) = p;
      sdf_out->sdf(i) = analytic_sdf(obj, p);
    }
  }
}

}  // namespace se3dif
