#pragma once

// Annealed Langevin sampling on SE(3). Works against any "field" exposing
//   int levels(); double sigma(int k); double energy(const Pose&, int k);
//   Twist grad(const Pose&, int k);
// so tests can drive it with analytic energies. GraspEnergyField adapts a
// trained EnergyModel.

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "se3dif/energy_model.hpp"
#include "se3dif/errors.hpp"
#include "se3dif/liegroup.hpp"
#include "se3dif/parallel.hpp"
#include "se3dif/rng.hpp"

namespace se3dif {

struct SamplerConfig {
  int n_samples = 32;
  double epsilon = 1e-3;      // step rate; alpha_k = epsilon * sigma_k / sigma_L
  int steps_per_level = 30;
  bool final_polish = true;   // noise-free descent at the lowest noise level
  int polish_steps = 20;
  LieGaussian init{Pose(), -1.0};  // init.sigma <= 0 means "use sigma_L"
  std::uint64_t seed = 0;
  bool record_trace = false;

  void validate() const {
    if (n_samples < 1) throw ConfigError("sampler.n_samples must be >= 1");
    if (epsilon < 0.0) throw ConfigError("sampler.epsilon must be >= 0");
    if (steps_per_level < 1) throw ConfigError("sampler.steps_per_level must be >= 1");
    if (polish_steps < 0) throw ConfigError("sampler.polish_steps must be >= 0");
  }
};

struct SampleTrace {
  std::vector<std::vector<Pose>> levels;  // filled when record_trace is on, outermost k = L..1
  std::vector<Pose> poses;                // final particles, ascending energy
  std::vector<double> energies;
};

// Energy field of a trained model for one object; copy per worker, the model
// itself stays shared and immutable.
struct GraspEnergyField {
  GraspEnergyField(const EnergyModel& m, const Pose& object_pose_in, int code_in)
      : object_pose(object_pose_in), code(code_in), ev_(m) {}

  int levels() const { return ev_.model().levels(); }
  double sigma(int k) const { return ev_.model().sigma(k); }
  double energy(const Pose& h, int k) { return ev_.energy(h, object_pose, code, k); }
  Twist grad(const Pose& h, int k) {
    Twist g;
    ev_.energy_grad(h, object_pose, code, k, &g);
    return g;
  }

  Pose object_pose;
  int code = 0;

 private:
  EnergyEvaluator ev_;
};

namespace detail {

// One Langevin (or pure-descent) update. The noise draw happens whenever
// with_noise is set so rng streams advance identically regardless of alpha.
template <class Field>
Pose langevin_update(Field& field, const Pose& h, int k, double eps, Rng& rng, bool with_noise) {
  double alpha = eps * field.sigma(k) / field.sigma(field.levels());
  Vector6d step = -(alpha * alpha / 2.0) * field.grad(h, k).vec();
  if (with_noise) step += alpha * rng.normal_vec(6);
  return compose(expmap(Twist(step)), h);
}

inline Pose draw_initial(Rng& rng, const LieGaussian& init) {
  for (int attempt = 0;; ++attempt) {
    try {
      return sample_lie_gaussian(rng, init);
    } catch (const AngleNearPi&) {
      if (attempt >= 9) throw;
    }
  }
}

}  // namespace detail

// One annealed step applied to every particle; seed splits per particle so
// parallel and serial runs agree bitwise.
template <class Field>
std::vector<Pose> langevin_step(const Field& field, const std::vector<Pose>& poses, int k,
                                double eps, std::uint64_t seed, bool with_noise = true,
                                int threads = 0) {
  std::vector<Pose> out(poses.size());
  Rng root(seed);
  parallel_for(
      poses.size(),
      [&](std::size_t i) {
        Field local = field;
        Rng rng = root.derive(i);
        out[i] = detail::langevin_update(local, poses[i], k, eps, rng, with_noise);
      },
      threads);
  return out;
}

// Full annealing loop, k = L..1 with steps_per_level iterations each, then the
// optional noise-free polish. Particles are independent chains with derived
// rng streams; output is sorted by energy at the lowest noise level (ties keep
// particle order).
template <class Field>
SampleTrace sample(const Field& field, const SamplerConfig& cfg, int threads = 0) {
  cfg.validate();
  int levels = field.levels();
  LieGaussian init = cfg.init;
  if (init.sigma <= 0.0) init.sigma = field.sigma(levels);

  int n = cfg.n_samples;
  SampleTrace trace;
  if (cfg.record_trace) trace.levels.assign(levels, std::vector<Pose>(n));
  std::vector<Pose> finals(n);
  std::vector<double> energies(n);

  Rng root(cfg.seed);
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t p) {
        Field local = field;
        Rng rng = root.derive(p);
        Pose h = detail::draw_initial(rng, init);
        for (int k = levels; k >= 1; --k) {
          for (int it = 0; it < cfg.steps_per_level; ++it)
            h = detail::langevin_update(local, h, k, cfg.epsilon, rng, true);
          if (cfg.record_trace) trace.levels[levels - k][p] = h;
        }
        if (cfg.final_polish)
          for (int it = 0; it < cfg.polish_steps; ++it)
            h = detail::langevin_update(local, h, 1, cfg.epsilon, rng, false);
        finals[p] = h;
        energies[p] = local.energy(h, 1);
      },
      threads);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return energies[a] < energies[b]; });
  trace.poses.reserve(n);
  trace.energies.reserve(n);
  for (std::size_t i : order) {
    trace.poses.push_back(finals[i]);
    trace.energies.push_back(energies[i]);
  }
  return trace;
}

}  // namespace se3dif
