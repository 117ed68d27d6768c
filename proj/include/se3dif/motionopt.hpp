#pragma once

// Trajectory optimization: the hand-designed cost library (smoothness, table
// and box clearance, endpoint anchoring, pregrasp approach, grasp/place
// similarity, learned grasp energy, distance to a fixed grasp) plus the
// annealed inverse-diffusion optimizer and its decoupled two-stage baseline.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "se3dif/datagen.hpp"
#include "se3dif/energy_model.hpp"
#include "se3dif/errors.hpp"
#include "se3dif/kinematics.hpp"
#include "se3dif/liegroup.hpp"
#include "se3dif/parallel.hpp"
#include "se3dif/rng.hpp"
#include "se3dif/sampler.hpp"

namespace se3dif {

struct Trajectory {
  Eigen::MatrixXd waypoints;  // T x d_q

  int length() const { return static_cast<int>(waypoints.rows()); }
  int dof() const { return static_cast<int>(waypoints.cols()); }
};

struct SceneBox {
  Pose pose;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.1);

  void validate() const {
    if ((half_extents.array() <= 0.0).any())
      throw ConfigError("scene box half extents must be > 0");
  }
};

enum class CostKind {
  Smooth,
  Table,
  Box,
  FixInit,
  Pregrasp,
  GraspPlaceSimilarity,
  GraspEnergy,
  DesGraspDist,
};

inline const char* cost_kind_name(CostKind k) {
  switch (k) {
    case CostKind::Smooth: return "smooth";
    case CostKind::Table: return "table";
    case CostKind::Box: return "box";
    case CostKind::FixInit: return "fix_init";
    case CostKind::Pregrasp: return "pregrasp";
    case CostKind::GraspPlaceSimilarity: return "grasp_place_similarity";
    case CostKind::GraspEnergy: return "grasp_energy";
    case CostKind::DesGraspDist: return "des_grasp_dist";
  }
  throw ConfigError("unknown cost kind");
}

inline CostKind cost_kind_from_name(const std::string& s) {
  if (s == "smooth") return CostKind::Smooth;
  if (s == "table") return CostKind::Table;
  if (s == "box") return CostKind::Box;
  if (s == "fix_init") return CostKind::FixInit;
  if (s == "pregrasp") return CostKind::Pregrasp;
  if (s == "grasp_place_similarity") return CostKind::GraspPlaceSimilarity;
  if (s == "grasp_energy") return CostKind::GraspEnergy;
  if (s == "des_grasp_dist") return CostKind::DesGraspDist;
  throw ConfigError("unknown cost term name: " + s);
}

struct CostTerm {
  CostKind kind = CostKind::Smooth;
  double weight = 1.0;

  double table_height = 0.0;          // Table
  std::vector<SceneBox> boxes;        // Box
  Eigen::VectorXd q_init;             // FixInit
  int horizon = 4;                    // Pregrasp window length
  double offset = 0.08;               // Pregrasp back-off along gripper z
  int waypoint = -1;                  // GraspEnergy / GraspPlaceSimilarity, -1 = last (or T/2)
  Pose object_at_grasp;               // GraspPlaceSimilarity
  Pose object_at_place;
  Pose target;                        // DesGraspDist
};

struct Objective {
  const KinematicChain* chain = nullptr;
  std::vector<CostTerm> terms;
  const EnergyModel* model = nullptr;  // required by GraspEnergy terms
  Pose object_pose;
  int code = 0;

  void validate() const {
    if (!chain) throw ConfigError("objective needs a kinematic chain");
    for (const CostTerm& t : terms) {
      if (t.weight <= 0.0) throw ConfigError("cost term weights must be > 0");
      if (t.kind == CostKind::GraspEnergy && !model)
        throw ConfigError("grasp energy term requires an attached model");
      for (const SceneBox& b : t.boxes) b.validate();
    }
  }
};

namespace detail {

// d(A, B) = tw * ||t_A - t_B|| + ||log(R_A^T R_B)|| with exact left-twist
// gradients on both poses. Kinks (coincident translations or rotations) get
// zero subgradient, and so does the antipodal rotation ridge at angle pi.
struct PoseDistGrad {
  double d = 0.0;
  Twist a;
  Twist b;
};

inline PoseDistGrad pose_distance_grad(const Pose& A, const Pose& B, double trans_weight = 1.0) {
  PoseDistGrad out;
  Eigen::Vector3d u = A.translation - B.translation;
  double tn = u.norm();
  if (tn > 0.0) {
    out.d += trans_weight * tn;
    Eigen::Vector3d g = (trans_weight / tn) * u;
    out.a.v += g;
    out.a.w += A.translation.cross(g);
    out.b.v -= g;
    out.b.w -= B.translation.cross(g);
  }
  Eigen::Vector3d rho;
  try {
    rho = so3_logmap(A.rotation.transpose() * B.rotation);
  } catch (const AngleNearPi&) {
    out.d += M_PI;
    return out;
  }
  double rn = rho.norm();
  if (rn > 0.0) {
    out.d += rn;
    Eigen::Vector3d nrm = rho / rn;
    Eigen::Matrix3d jinv = so3_inv_left_jacobian(rho);
    out.a.w += -A.rotation * (jinv.transpose() * nrm);
    out.b.w += B.rotation * (jinv * nrm);
  }
  return out;
}

// gradient of the exact box SDF in the box's local frame; subgradient on
// faces' ridges picks the first maximal axis
inline Eigen::Vector3d box_sdf_local_gradient(const Eigen::Vector3d& half,
                                              const Eigen::Vector3d& p) {
  Eigen::Vector3d q = p.cwiseAbs() - half;
  Eigen::Vector3d sign = p.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
  Eigen::Vector3d outside = q.cwiseMax(0.0);
  double on = outside.norm();
  if (on > 0.0) return sign.cwiseProduct(outside / on);
  int axis;
  q.maxCoeff(&axis);
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  g(axis) = sign(axis);
  return g;
}

using GradRow = Eigen::Ref<Eigen::VectorXd, 0, Eigen::InnerStride<>>;

// accumulate g . dp/dq for a point riding a link
inline void add_point_pullback(const KinematicChain& chain, const FkResult& fkres, int link,
                               const Eigen::Vector3d& point, const Eigen::Vector3d& g,
                               GradRow dq) {
  for (int j = 0; j < link; ++j) {
    Eigen::Vector3d w = fkres.links[j + 1].rotation * chain.joints[j].axis;
    Eigen::Vector3d p = fkres.links[j + 1].translation;
    dq(j) += g.dot(w.cross(point - p));
  }
}

// accumulate J_fk^T g into one trajectory row
inline void add_pose_pullback(const KinematicChain& chain, const Eigen::VectorXd& q,
                              const Twist& g, GradRow dq) {
  Eigen::Matrix<double, 6, Eigen::Dynamic> jac = fk_jacobian(chain, q);
  dq += jac.transpose() * g.vec();
}

inline int resolve_waypoint(int requested, int T) {
  int t = requested < 0 ? T - 1 : requested;
  if (t < 0 || t >= T) throw ConfigError("cost term waypoint index out of range");
  return t;
}

}  // namespace detail

// Sum of squared joint-space steps.
inline double cost_smooth(const Trajectory& traj, Eigen::MatrixXd* grad) {
  double c = 0.0;
  if (grad) grad->setZero(traj.length(), traj.dof());
  for (int t = 0; t + 1 < traj.length(); ++t) {
    Eigen::VectorXd d = traj.waypoints.row(t + 1) - traj.waypoints.row(t);
    c += d.squaredNorm();
    if (grad) {
      grad->row(t) -= 2.0 * d.transpose();
      grad->row(t + 1) += 2.0 * d.transpose();
    }
  }
  return c;
}

// Hinge on collision spheres dipping below the table plane.
inline double cost_table(const KinematicChain& chain, const Trajectory& traj, double z_table,
                         Eigen::MatrixXd* grad) {
  double c = 0.0;
  if (grad) grad->setZero(traj.length(), traj.dof());
  for (int t = 0; t < traj.length(); ++t) {
    FkResult fkres = fk(chain, traj.waypoints.row(t).transpose());
    for (const CollisionSphere& s : chain.spheres) {
      Eigen::Vector3d p = transform_point(fkres.links[s.link], s.center);
      double margin = p.z() - z_table - s.radius;
      if (margin < 0.0) {
        c += -margin;
        if (grad)
          detail::add_point_pullback(chain, fkres, s.link, p, Eigen::Vector3d(0, 0, -1),
                                     grad->row(t).transpose());
      }
    }
  }
  return c;
}

// Hinge on sphere-vs-box penetration using the exact box SDF.
inline double cost_box(const KinematicChain& chain, const Trajectory& traj,
                       const std::vector<SceneBox>& boxes, Eigen::MatrixXd* grad) {
  double c = 0.0;
  if (grad) grad->setZero(traj.length(), traj.dof());
  for (int t = 0; t < traj.length(); ++t) {
    FkResult fkres = fk(chain, traj.waypoints.row(t).transpose());
    for (const CollisionSphere& s : chain.spheres) {
      Eigen::Vector3d p = transform_point(fkres.links[s.link], s.center);
      for (const SceneBox& box : boxes) {
        Eigen::Vector3d local = transform_point(inverse(box.pose), p);
        double margin = box_sdf(box.half_extents, local) - s.radius;
        if (margin < 0.0) {
          c += -margin;
          if (grad) {
            Eigen::Vector3d g =
                -(box.pose.rotation * detail::box_sdf_local_gradient(box.half_extents, local));
            detail::add_point_pullback(chain, fkres, s.link, p, g, grad->row(t).transpose());
          }
        }
      }
    }
  }
  return c;
}

// Unsquared distance of the first waypoint to the start configuration.
inline double cost_fix_init(const Trajectory& traj, const Eigen::VectorXd& q_init,
                            Eigen::MatrixXd* grad) {
  if (q_init.size() != traj.dof()) throw ConfigError("fix-init q_init length mismatch");
  if (grad) grad->setZero(traj.length(), traj.dof());
  Eigen::VectorXd d = traj.waypoints.row(0).transpose() - q_init;
  double n = d.norm();
  if (n > 0.0 && grad) grad->row(0) = (d / n).transpose();
  return n;
}

// Drives the last few waypoints onto the back-off ray of the final pose:
// target for row T-1-i is the final ee pose shifted by -offset*i/n along its
// own approach axis.
inline double cost_pregrasp(const KinematicChain& chain, const Trajectory& traj, int horizon,
                            double offset, Eigen::MatrixXd* grad) {
  if (grad) grad->setZero(traj.length(), traj.dof());
  int T = traj.length();
  int n = std::min(horizon, T - 1);
  if (n <= 0) return 0.0;
  Eigen::VectorXd q_last = traj.waypoints.row(T - 1).transpose();
  Pose final_ee = fk(chain, q_last).ee;
  double c = 0.0;
  Twist g_last;
  for (int i = 1; i <= n; ++i) {
    int t = T - 1 - i;
    Pose back;
    back.translation = Eigen::Vector3d(0, 0, -offset * double(i) / double(n));
    Pose target = compose(final_ee, back);
    Pose ee = fk(chain, traj.waypoints.row(t).transpose()).ee;
    detail::PoseDistGrad pd = detail::pose_distance_grad(ee, target);
    c += pd.d;
    if (grad) {
      detail::add_pose_pullback(chain, traj.waypoints.row(t).transpose(), pd.a,
                                grad->row(t).transpose());
      // the target rides the final pose: left twist xi on final_ee moves the
      // target by Adj(final_ee ... ) — compose(final_ee, back) has left twist
      // equal to xi transported by the fixed right factor, which for left
      // perturbations is xi itself applied at the composed pose; the chain
      // rule below uses d(target)/d(xi): exp(xi h) final_ee back, so the
      // target's left twist equals xi directly.
      g_last.v += pd.b.v;
      g_last.w += pd.b.w;
    }
  }
  if (grad)
    detail::add_pose_pullback(chain, q_last, g_last, grad->row(T - 1).transpose());
  return c;
}

// Relative object->gripper pose at the grasp waypoint vs the final waypoint.
inline double cost_grasp_place_similarity(const KinematicChain& chain, const Trajectory& traj,
                                          int grasp_waypoint, const Pose& object_at_grasp,
                                          const Pose& object_at_place, Eigen::MatrixXd* grad) {
  if (grad) grad->setZero(traj.length(), traj.dof());
  int T = traj.length();
  int tg = grasp_waypoint < 0 ? T / 2 : detail::resolve_waypoint(grasp_waypoint, T);
  int tp = T - 1;
  Pose Cg = inverse(object_at_grasp);
  Pose Cp = inverse(object_at_place);
  Pose ee_g = fk(chain, traj.waypoints.row(tg).transpose()).ee;
  Pose ee_p = fk(chain, traj.waypoints.row(tp).transpose()).ee;
  Pose X = compose(Cg, ee_g);
  Pose Y = compose(Cp, ee_p);
  detail::PoseDistGrad pd = detail::pose_distance_grad(X, Y);
  if (grad) {
    // left twist xi on ee maps to Adj(C) xi on the relative pose
    Twist ga(Twist(adjoint(Cg).transpose() * pd.a.vec()));
    Twist gb(Twist(adjoint(Cp).transpose() * pd.b.vec()));
    detail::add_pose_pullback(chain, traj.waypoints.row(tg).transpose(), ga,
                              grad->row(tg).transpose());
    detail::add_pose_pullback(chain, traj.waypoints.row(tp).transpose(), gb,
                              grad->row(tp).transpose());
  }
  return pd.d;
}

// Learned grasp energy at one waypoint.
inline double cost_grasp_energy(const KinematicChain& chain, const Trajectory& traj,
                                const EnergyModel& model, const Pose& object_pose, int code,
                                int k, int waypoint, Eigen::MatrixXd* grad) {
  if (grad) grad->setZero(traj.length(), traj.dof());
  int t = detail::resolve_waypoint(waypoint, traj.length());
  Eigen::VectorXd q = traj.waypoints.row(t).transpose();
  EnergyEvaluator ev(model);
  if (!grad) return ev.energy(fk(chain, q).ee, object_pose, code, k);
  Twist pose_grad;
  double e = ev.energy_grad(fk(chain, q).ee, object_pose, code, k, &pose_grad);
  detail::add_pose_pullback(chain, q, pose_grad, grad->row(t).transpose());
  return e;
}

// Distance of the final ee pose to a fixed grasp target; translation term
// scaled up so meters compete with radians.
inline double cost_des_grasp_dist(const KinematicChain& chain, const Trajectory& traj,
                                  const Pose& target, Eigen::MatrixXd* grad) {
  if (grad) grad->setZero(traj.length(), traj.dof());
  int t = traj.length() - 1;
  Eigen::VectorXd q = traj.waypoints.row(t).transpose();
  Pose ee = fk(chain, q).ee;
  detail::PoseDistGrad pd = detail::pose_distance_grad(ee, target, 10.0);
  if (grad) detail::add_pose_pullback(chain, q, pd.a, grad->row(t).transpose());
  return pd.d;
}

// Weighted sum J(tau, k); only the grasp-energy term looks at k.
inline double objective_eval(const Objective& obj, const Trajectory& traj, int k,
                             Eigen::MatrixXd* grad) {
  obj.validate();
  if (traj.length() < 2) throw ConfigError("trajectory needs at least 2 waypoints");
  if (traj.dof() != obj.chain->dof()) throw ConfigError("trajectory width does not match chain");
  double total = 0.0;
  if (grad) grad->setZero(traj.length(), traj.dof());
  Eigen::MatrixXd term_grad;
  for (const CostTerm& term : obj.terms) {
    Eigen::MatrixXd* tg = grad ? &term_grad : nullptr;
    double c;
    switch (term.kind) {
      case CostKind::Smooth:
        c = cost_smooth(traj, tg);
        break;
      case CostKind::Table:
        c = cost_table(*obj.chain, traj, term.table_height, tg);
        break;
      case CostKind::Box:
        c = cost_box(*obj.chain, traj, term.boxes, tg);
        break;
      case CostKind::FixInit:
        c = cost_fix_init(traj, term.q_init, tg);
        break;
      case CostKind::Pregrasp:
        c = cost_pregrasp(*obj.chain, traj, term.horizon, term.offset, tg);
        break;
      case CostKind::GraspPlaceSimilarity:
        c = cost_grasp_place_similarity(*obj.chain, traj, term.waypoint, term.object_at_grasp,
                                        term.object_at_place, tg);
        break;
      case CostKind::GraspEnergy:
        c = cost_grasp_energy(*obj.chain, traj, *obj.model, obj.object_pose, obj.code, k,
                              term.waypoint, tg);
        break;
      case CostKind::DesGraspDist:
        c = cost_des_grasp_dist(*obj.chain, traj, term.target, tg);
        break;
      default:
        throw UnknownTerm("unknown cost term kind");
    }
    total += term.weight * c;
    if (grad) *grad += term.weight * term_grad;
  }
  return total;
}

// Unweighted per-term costs, in term order (for reports and output metadata).
inline std::vector<double> term_costs(const Objective& obj, const Trajectory& traj, int k) {
  std::vector<double> out;
  for (const CostTerm& term : obj.terms) {
    Objective one = obj;
    one.terms = {term};
    one.terms[0].weight = 1.0;
    out.push_back(objective_eval(one, traj, k, nullptr));
  }
  return out;
}

struct OptimizeConfig {
  int n_particles = 50;
  int T = 32;
  double epsilon = 1e-2;      // step rate; alpha_k = epsilon * sigma_k / sigma_L
  int steps_per_level = 30;
  bool with_noise = true;
  bool final_polish = true;   // noise-free steps at the lowest level
  int polish_steps = 20;
  bool pin_k = false;         // feed k=1 to the grasp term at every level
  double init_noise_scale = 0.2;
  std::uint64_t seed = 0;
  // annealing schedule when no model is attached (with a model its schedule wins)
  int n_levels = 10;
  double sigma_min = 0.01;
  double sigma_max = 0.5;

  void validate() const {
    if (n_particles < 1) throw ConfigError("optimize.n_particles must be >= 1");
    if (T < 2) throw ConfigError("optimize.T must be >= 2");
    if (epsilon < 0.0) throw ConfigError("optimize.epsilon must be >= 0");
    if (steps_per_level < 1) throw ConfigError("optimize.steps_per_level must be >= 1");
    if (polish_steps < 0) throw ConfigError("optimize.polish_steps must be >= 0");
    if (init_noise_scale < 0.0) throw ConfigError("optimize.init_noise_scale must be >= 0");
    if (n_levels < 1) throw ConfigError("optimize.n_levels must be >= 1");
    if (n_levels > 1 && sigma_min >= sigma_max)
      throw ConfigError("optimize requires sigma_min < sigma_max");
  }
};

struct OptimizeResult {
  Trajectory best;
  int best_particle = 0;
  double best_cost = 0.0;                         // J(tau, 1)
  std::vector<std::vector<double>> cost_history;  // per particle, per step
  Pose stage1_grasp;                              // decoupled runs only
};

namespace detail {

// Cholesky factor of the smoothness precision (second differences plus
// endpoint anchors); samples are solves against the transposed factor.
inline Eigen::MatrixXd smoothness_chol(int T) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(T, T);
  for (int t = 1; t + 1 < T; ++t) {
    A(t, t - 1) += 1.0;
    A(t, t) += -2.0;
    A(t, t + 1) += 1.0;
  }
  Eigen::MatrixXd P = A.transpose() * A;
  P(0, 0) += 1.0;
  P(T - 1, T - 1) += 1.0;
  return Eigen::LLT<Eigen::MatrixXd>(P).matrixL();
}

inline Eigen::VectorXd find_q_init(const Objective& obj) {
  for (const CostTerm& t : obj.terms)
    if (t.kind == CostKind::FixInit) return t.q_init;
  return Eigen::VectorXd::Zero(obj.chain->dof());
}

// straight line to a random in-limits configuration, roughened by a draw from
// the smoothness prior
inline Trajectory initial_particle(const Objective& obj, const OptimizeConfig& cfg,
                                   const Eigen::VectorXd& q_init, const Eigen::MatrixXd& chol_l,
                                   Rng& rng) {
  int T = cfg.T, d = obj.chain->dof();
  Eigen::VectorXd q_end(d);
  for (int j = 0; j < d; ++j)
    q_end(j) = rng.uniform(obj.chain->joints[j].lo, obj.chain->joints[j].hi);
  Trajectory traj;
  traj.waypoints.resize(T, d);
  for (int t = 0; t < T; ++t) {
    double a = T == 1 ? 0.0 : double(t) / double(T - 1);
    traj.waypoints.row(t) = ((1.0 - a) * q_init + a * q_end).transpose();
  }
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd z = rng.normal_vec(T);
    traj.waypoints.col(j) +=
        cfg.init_noise_scale *
        chol_l.transpose().triangularView<Eigen::Upper>().solve(z);
  }
  return traj;
}

}  // namespace detail

// Annealed trajectory diffusion: tau <- tau - (alpha_k^2/2) grad J(tau, k) +
// alpha_k * noise, k = L..1, then an optional noise-free polish at k=1. The
// winner is the lowest-J(tau,1) particle; ties keep the lowest index.
inline OptimizeResult optimize(const Objective& obj, const OptimizeConfig& cfg, int threads = 0) {
  cfg.validate();
  obj.validate();
  std::vector<double> schedule =
      obj.model ? obj.model->noise_scales
                : geometric_noise_schedule(cfg.n_levels, cfg.sigma_min, cfg.sigma_max);
  int levels = static_cast<int>(schedule.size());
  auto sigma = [&](int k) { return schedule[static_cast<std::size_t>(k - 1)]; };
  double sigma_top = sigma(levels);

  Eigen::VectorXd q_init = detail::find_q_init(obj);
  Eigen::MatrixXd chol_l = detail::smoothness_chol(cfg.T);

  int n = cfg.n_particles;
  std::vector<Trajectory> finals(n);
  std::vector<double> final_costs(n);
  std::vector<std::vector<double>> history(n);
  std::vector<int> failed(n, -1);

  Rng root(cfg.seed);
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t p) {
        Rng rng = root.derive(p);
        Trajectory traj = detail::initial_particle(obj, cfg, q_init, chol_l, rng);
        Eigen::MatrixXd grad;
        auto step = [&](int k, bool with_noise) {
          int term_k = cfg.pin_k ? 1 : k;
          double J = objective_eval(obj, traj, term_k, &grad);
          history[p].push_back(J);
          double alpha = cfg.epsilon * sigma(k) / sigma_top;
          traj.waypoints -= (alpha * alpha / 2.0) * grad;
          if (with_noise) {
            Eigen::VectorXd z = rng.normal_vec(traj.waypoints.size());
            traj.waypoints +=
                alpha * Eigen::Map<Eigen::MatrixXd>(z.data(), traj.waypoints.rows(),
                                                    traj.waypoints.cols());
          }
          if (!traj.waypoints.allFinite() || !std::isfinite(J)) failed[p] = static_cast<int>(p);
        };
        for (int k = levels; k >= 1 && failed[p] < 0; --k)
          for (int it = 0; it < cfg.steps_per_level && failed[p] < 0; ++it)
            step(k, cfg.with_noise);
        if (cfg.final_polish)
          for (int it = 0; it < cfg.polish_steps && failed[p] < 0; ++it) step(1, false);
        if (failed[p] < 0) {
          finals[p] = traj;
          final_costs[p] = objective_eval(obj, traj, 1, nullptr);
          if (!std::isfinite(final_costs[p])) failed[p] = static_cast<int>(p);
        }
      },
      threads);

  for (int p = 0; p < n; ++p)
    if (failed[p] >= 0)
      throw NonFiniteCost(p, "trajectory cost diverged in particle " + std::to_string(p));

  int best = 0;
  for (int p = 1; p < n; ++p)
    if (final_costs[p] < final_costs[best]) best = p;

  OptimizeResult out;
  out.best = finals[best];
  out.best_particle = best;
  out.best_cost = final_costs[best];
  out.cost_history = std::move(history);
  return out;
}

// Two-stage baseline: sample a grasp from the energy alone, then optimize the
// trajectory toward that fixed pose (grasp-energy terms swapped for the
// fixed-target distance, same weights).
inline OptimizeResult decoupled_optimize(const Objective& obj, const OptimizeConfig& cfg,
                                         const SamplerConfig& sampler_cfg, int threads = 0) {
  obj.validate();
  if (!obj.model) throw ConfigError("decoupled optimization requires an attached model");
  GraspEnergyField field(*obj.model, obj.object_pose, obj.code);
  SampleTrace trace = sample(field, sampler_cfg, threads);
  Pose grasp = trace.poses.front();

  Objective stage2 = obj;
  for (CostTerm& term : stage2.terms) {
    if (term.kind == CostKind::GraspEnergy) {
      term.kind = CostKind::DesGraspDist;
      term.target = grasp;
    }
  }
  OptimizeResult out = optimize(stage2, cfg, threads);
  out.stage1_grasp = grasp;
  return out;
}

}  // namespace se3dif
