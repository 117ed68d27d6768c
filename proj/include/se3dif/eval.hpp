#pragma once

// Sample-quality metrics: success proxy against the analytic grasp manifold,
// earth mover's distance through an exact assignment solve, and SDF-driven
// object pose inference from a surface pointcloud.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "se3dif/datagen.hpp"
#include "se3dif/energy_model.hpp"
#include "se3dif/errors.hpp"
#include "se3dif/liegroup.hpp"
#include "se3dif/parallel.hpp"

namespace se3dif {

struct AssignmentProblem {
  Eigen::MatrixXd cost;

  void validate() const {
    if (cost.rows() != cost.cols()) throw ConfigError("assignment cost matrix must be square");
    if (!cost.allFinite()) throw ConfigError("assignment cost matrix must be finite");
  }
};

struct Assignment {
  std::vector<int> perm;  // perm[row] = assigned column
  double total = 0.0;
};

namespace detail {

// Mean squared SDF of a world cloud pulled into the object frame, with the
// left-perturbation gradient wrt the pose when asked. k=1 keeps the head at
// its least-noised conditioning.
inline double cloud_sdf_objective(EnergyEvaluator& ev, const Matrix3Xd& world, int code,
                                  const Pose& h, Vector6d* grad = nullptr) {
  const int n = static_cast<int>(world.cols());
  Pose inv = inverse(h);
  Matrix3Xd obj = (inv.rotation * world).colwise() + inv.translation;
  const Eigen::VectorXd& f = ev.sdf(obj, code, 1);
  double j = f.squaredNorm() / n;
  if (grad) {
    Eigen::VectorXd dsdf = (2.0 / n) * f;
    Matrix3Xd dpts;
    ev.sdf_backward(dsdf, nullptr, &dpts);
    // object-frame point gradients pulled back to a left twist on the pose:
    // d(h^-1 y)/dtau = -R^T (xi_v + xi_w x y)
    grad->setZero();
    for (int i = 0; i < n; ++i) {
      Eigen::Vector3d c = h.rotation * dpts.col(i);
      grad->head<3>() -= c;
      grad->tail<3>() -= world.col(i).cross(c);
    }
  }
  return j;
}

// single Kuhn augmentation over tight edges; col_row: -1 free, -2 blocked
inline bool kuhn_augment(const std::vector<std::vector<int>>& tight, int row,
                         std::vector<char>& seen, std::vector<int>& col_row) {
  for (int j : tight[row]) {
    if (col_row[j] == -2 || seen[j]) continue;
    seen[j] = 1;
    if (col_row[j] == -1 || kuhn_augment(tight, col_row[j], seen, col_row)) {
      col_row[j] = row;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Minimum-cost perfect matching, O(n^3) shortest augmenting path with dual
// potentials. Among cost ties the lexicographically smallest permutation is
// returned, found by a greedy pass over the tight-edge graph (every optimal
// matching uses only edges with zero reduced cost). The tie pass is skipped
// for large dense-tie instances where it would dominate the solve; those keep
// the matching the potentials produced.
inline Assignment solve_assignment(const AssignmentProblem& prob) {
  prob.validate();
  const Eigen::MatrixXd& a = prob.cost;
  const int n = static_cast<int>(a.rows());
  Assignment out;
  out.perm.assign(n, -1);
  if (n == 0) return out;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, -1), way(n + 1, n);  // p[col] = matched row, col n virtual
  for (int i = 0; i < n; ++i) {
    p[n] = i;
    int j0 = n;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = inf;
      for (int j = 0; j < n; ++j) {
        if (used[j]) continue;
        double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != -1);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != n);
  }
  for (int j = 0; j < n; ++j) out.perm[p[j]] = j;

  // lexicographic tie resolution on the tight subgraph
  double eps = 1e-9 * (1.0 + a.cwiseAbs().maxCoeff());
  std::vector<std::vector<int>> tight(n);
  std::size_t n_edges = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a(i, j) - u[i] - v[j] <= eps) {
        tight[i].push_back(j);
        ++n_edges;
      }
  if (n_edges > static_cast<std::size_t>(n) &&
      (n <= 64 || n_edges <= static_cast<std::size_t>(8 * n))) {
    std::vector<int> fixed(n, -1);
    std::vector<char> taken(n, 0);
    bool ok_all = true;
    for (int i = 0; i < n && ok_all; ++i) {
      for (int j : tight[i]) {
        if (taken[j]) continue;
        std::vector<int> col_row(n);
        for (int c = 0; c < n; ++c) col_row[c] = (taken[c] || c == j) ? -2 : -1;
        bool ok = true;
        for (int r = i + 1; r < n && ok; ++r) {
          std::vector<char> seen(n, 0);
          ok = detail::kuhn_augment(tight, r, seen, col_row);
        }
        if (ok) {
          fixed[i] = j;
          taken[j] = 1;
          break;
        }
      }
      ok_all = fixed[i] >= 0;
    }
    if (ok_all) out.perm = fixed;
  }

  out.total = 0.0;
  for (int i = 0; i < n; ++i) out.total += a(i, out.perm[i]);
  return out;
}

// Mean matched pose distance between two equal-size sets: fill the pairwise
// distance table, solve the assignment, divide the total by n.
inline double emd(const std::vector<Pose>& samples, const std::vector<Pose>& reference,
                  int threads = 0) {
  if (samples.size() != reference.size()) throw ConfigError("emd needs equal-size pose sets");
  if (samples.empty()) throw ConfigError("emd needs nonempty pose sets");
  const int n = static_cast<int>(samples.size());
  AssignmentProblem prob;
  prob.cost.resize(n, n);
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t i) {
        for (int j = 0; j < n; ++j)
          prob.cost(static_cast<int>(i), j) = detail::guarded_distance(samples[i], reference[j]);
      },
      threads);
  return solve_assignment(prob).total / n;
}

// Fraction of samples whose projection distance onto the manifold is within
// the threshold (the desk-scale stand-in for simulated grasp success).
inline double success_rate(const std::vector<Pose>& samples, const GraspManifold& manifold,
                           double threshold) {
  if (samples.empty()) throw ConfigError("success_rate needs a nonempty sample set");
  int hits = 0;
  for (const Pose& s : samples)
    if (project_to_manifold(manifold, s).distance <= threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

struct EvalReport {
  double success = 0.0;
  double emd = 0.0;
  std::vector<double> distances;  // manifold projection distance per sample
  double side_fraction = 0.0;     // nearest-family share over all samples
  double top_fraction = 0.0;
};

namespace detail {

// Every i-th element so both emd arguments share the smaller size; keeps the
// full spread of an energy-sorted set instead of favoring its head.
inline std::vector<Pose> evenly_subsample(const std::vector<Pose>& v, std::size_t m) {
  if (v.size() <= m) return v;
  std::vector<Pose> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(v[i * v.size() / m]);
  return out;
}

}  // namespace detail

// Full report against the analytic manifold plus a held-out reference set.
// An empty reference skips the emd entry; mismatched sizes are reconciled by
// evenly subsampling the larger set.
inline EvalReport evaluate_grasps(const std::vector<Pose>& samples,
                                  const std::vector<Pose>& reference,
                                  const GraspManifold& manifold, double threshold,
                                  int threads = 0) {
  if (samples.empty()) throw ConfigError("evaluate_grasps needs a nonempty sample set");
  const std::size_t n = samples.size();
  EvalReport rep;
  rep.distances.resize(n);
  std::vector<GraspFamily> fams(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        Projection pr = project_to_manifold(manifold, samples[i]);
        rep.distances[i] = pr.distance;
        fams[i] = pr.family;
      },
      threads);
  int hits = 0, side = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rep.distances[i] <= threshold) ++hits;
    if (fams[i] == GraspFamily::Side) ++side;
  }
  rep.success = static_cast<double>(hits) / static_cast<double>(n);
  rep.side_fraction = static_cast<double>(side) / static_cast<double>(n);
  rep.top_fraction = 1.0 - rep.side_fraction;
  if (!reference.empty()) {
    std::size_t m = std::min(samples.size(), reference.size());
    rep.emd = emd(detail::evenly_subsample(samples, m), detail::evenly_subsample(reference, m),
                  threads);
  }
  return rep;
}

inline std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "samples        " << r.distances.size() << "\n";
  os << "success_rate   " << r.success << "\n";
  os << "emd            " << r.emd << "\n";
  os << "side_fraction  " << r.side_fraction << "\n";
  os << "top_fraction   " << r.top_fraction << "\n";
  return os.str();
}

// one-line form for plotting scripts
inline std::string metrics_line(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "n=" << r.distances.size() << " success=" << r.success << " emd=" << r.emd
     << " side=" << r.side_fraction << " top=" << r.top_fraction;
  return os.str();
}

// Mean absolute SDF residual of a world pointcloud under an object pose
// hypothesis; the success judgment for pose inference (the cylinder azimuth is
// unidentifiable, so raw pose distance is not).
inline double mean_sdf_residual(const EnergyModel& model,
                                const std::vector<Eigen::Vector3d>& pointcloud, int code,
                                const Pose& object_pose) {
  if (pointcloud.empty()) throw ConfigError("pose inference needs a nonempty pointcloud");
  const int n = static_cast<int>(pointcloud.size());
  Matrix3Xd world(3, n);
  for (int i = 0; i < n; ++i) world.col(i) = pointcloud[i];
  Pose inv = inverse(object_pose);
  Matrix3Xd obj = (inv.rotation * world).colwise() + inv.translation;
  EnergyEvaluator ev(model);
  return ev.sdf(obj, code, 1).cwiseAbs().mean();
}

// Object pose from a surface pointcloud: minimize the mean squared SDF head
// over the pose that pulls the cloud into the object frame, by line-searched
// gradient descent on left perturbations. The squared residual (rather than
// the raw signed value) keeps opposing-face contributions from cancelling,
// which would otherwise leave translation along the symmetry axis free.
inline Pose infer_object_pose(const EnergyModel& model,
                              const std::vector<Eigen::Vector3d>& pointcloud, int code,
                              const Pose& init, int iters) {
  if (pointcloud.empty()) throw ConfigError("pose inference needs a nonempty pointcloud");
  if (iters < 0) throw ConfigError("pose inference iters must be >= 0");
  const int n = static_cast<int>(pointcloud.size());
  Matrix3Xd world(3, n);
  for (int i = 0; i < n; ++i) world.col(i) = pointcloud[i];

  EnergyEvaluator ev(model);
  Pose h = init;
  Vector6d g;
  double cur = detail::cloud_sdf_objective(ev, world, code, h, &g);
  double trail = 1.0;
  for (int it = 0; it < iters; ++it) {
    double gn2 = g.squaredNorm();
    if (gn2 < 1e-24) break;

    // cap the per-step motion: the head is only trustworthy near the training
    // support, and an uncapped accepted step can jump a ridge into a spurious
    // far zero set that scores better than the honest fit error at the truth
    double dmax = 0.03;
    double s = std::min(trail, dmax / std::sqrt(gn2));
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      Pose cand = compose(expmap(Twist(-s * g)), h);
      double jc = detail::cloud_sdf_objective(ev, world, code, cand);
      if (jc <= cur - 1e-4 * s * gn2) {
        h = cand;
        cur = detail::cloud_sdf_objective(ev, world, code, h, &g);
        trail = std::min(s * 2.0, 1e3);
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;
  }
  return h;
}

}  // namespace se3dif
