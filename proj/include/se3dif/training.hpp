#pragma once

// Joint SDF + denoising score matching training. Per step: draw a noise
// level, perturb a grasp minibatch on the group, regress the model's pose
// gradient onto the analytic Gaussian score, add the SDF regression term and
// take an Adam step. Everything is seeded and deterministic.

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "se3dif/datagen.hpp"
#include "se3dif/energy_model.hpp"
#include "se3dif/errors.hpp"
#include "se3dif/liegroup.hpp"
#include "se3dif/parallel.hpp"
#include "se3dif/rng.hpp"

namespace se3dif {

struct TrainConfig {
  int steps = 5000;
  int batch_objects = 1;
  int batch_grasps = 16;
  int batch_sdf = 32;
  // noise schedule (must match the model they are trained with)
  int n_levels = 10;
  double sigma_min = 0.01;
  double sigma_max = 0.5;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool use_adam = true;           // off = the paper's literal plain gradient step
  bool sigma2_weighting = true;   // off = literal unweighted DSM average
  double sdf_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (steps < 0) throw ConfigError("train.steps must be >= 0");
    if (batch_objects < 1 || batch_grasps < 1 || batch_sdf < 1)
      throw ConfigError("train batch sizes must be >= 1");
    if (n_levels < 1) throw ConfigError("train.n_levels must be >= 1");
    if (sigma_min >= sigma_max) throw ConfigError("train requires sigma_min < sigma_max");
    if (learning_rate <= 0.0) throw ConfigError("train.learning_rate must be > 0");
  }
};

struct TrainReport {
  std::vector<double> dsm_loss;
  std::vector<double> sdf_loss;
  std::vector<double> total_loss;
  double wall_seconds = 0.0;  // sidecar only, never serialized into artifacts
  std::string checksum;
};

// One grasp + sdf dataset pair per shape code.
struct TrainingSet {
  std::vector<GraspDataset> grasps;
  std::vector<SdfDataset> sdf;
};

// FNV-1a over the raw parameter bytes in a fixed order; used for determinism
// checks and reports.
inline std::string parameter_checksum(const EnergyModel& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto eat = [&](const double* p, Eigen::Index n) {
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p);
    for (Eigen::Index i = 0; i < n * static_cast<Eigen::Index>(sizeof(double)); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& layer : m.encoder.layers) {
    eat(layer.weight.data(), layer.weight.size());
    eat(layer.bias.data(), layer.bias.size());
  }
  for (const auto& layer : m.decoder.layers) {
    eat(layer.weight.data(), layer.weight.size());
    eat(layer.bias.data(), layer.bias.size());
  }
  eat(m.shape_codes.data(), m.shape_codes.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace detail {

template <class F>
void visit_params(EnergyModel& m, ModelGrads& a, ModelGrads& b, ModelGrads& c, F&& f) {
  for (std::size_t l = 0; l < m.encoder.layers.size(); ++l) {
    f(m.encoder.layers[l].weight, a.encoder.weight[l], b.encoder.weight[l], c.encoder.weight[l]);
    f(m.encoder.layers[l].bias, a.encoder.bias[l], b.encoder.bias[l], c.encoder.bias[l]);
  }
  for (std::size_t l = 0; l < m.decoder.layers.size(); ++l) {
    f(m.decoder.layers[l].weight, a.decoder.weight[l], b.decoder.weight[l], c.decoder.weight[l]);
    f(m.decoder.layers[l].bias, a.decoder.bias[l], b.decoder.bias[l], c.decoder.bias[l]);
  }
  f(m.shape_codes, a.shape_codes, b.shape_codes, c.shape_codes);
}

}  // namespace detail

struct AdamState {
  ModelGrads m1;
  ModelGrads m2;
  long step = 0;
};

inline AdamState make_adam_state(const EnergyModel& m) {
  AdamState s;
  s.m1 = make_zero_grads(m);
  s.m2 = make_zero_grads(m);
  return s;
}

inline void apply_update(EnergyModel& model, ModelGrads& grads, AdamState& state,
                         const TrainConfig& cfg) {
  if (!cfg.use_adam) {
    detail::visit_params(model, grads, state.m1, state.m2,
                         [&](auto& p, auto& g, auto&, auto&) { p -= cfg.learning_rate * g; });
    return;
  }
  ++state.step;
  double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  double lr = cfg.learning_rate;
  double eps = cfg.adam_eps;
  detail::visit_params(model, grads, state.m1, state.m2, [&](auto& p, auto& g, auto& m1, auto& m2) {
    m1 = b1 * m1 + (1.0 - b1) * g;
    m2 = b2 * m2 + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m1.array() / corr1) / ((m2.array() / corr2).sqrt() + eps);
  });
}

// Denoising score matching loss over a grasp minibatch at noise level k.
// Perturbs each grasp by expmap(sigma_k * eps), then penalizes
// || pose_grad(H_hat) + score(H_hat | H, sigma_k) ||^2, optionally weighted
// by sigma_k^2. Loss and exact parameter gradients; rng drives only the
// perturbations.
inline double dsm_loss(const EnergyModel& model, const std::vector<Pose>& grasps,
                       const Pose& object_pose, int code, int k, Rng& rng,
                       bool sigma2_weighting, ModelGrads* grads) {
  if (grasps.empty()) return 0.0;
  double sigma = model.sigma(k);
  double weight = sigma2_weighting ? sigma * sigma : 1.0;
  std::size_t n = grasps.size();

  // Perturbations are drawn up-front, serially, so parallel evaluation sees
  // the exact same batch.
  std::vector<Pose> perturbed(n);
  std::vector<Twist> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng stream = rng.derive(i);
    LieGaussian q{grasps[i], sigma};
    for (int attempt = 0;; ++attempt) {
      try {
        Pose cand = sample_lie_gaussian(stream, q);
        targets[i] = lie_gaussian_score(q, cand);
        perturbed[i] = cand;
        break;
      } catch (const AngleNearPi&) {
        if (attempt >= 9) throw;
      }
    }
  }

  const std::size_t chunk = 8;
  std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<double> losses(n, 0.0);
  std::vector<ModelGrads> chunk_grads;
  if (grads)
    for (std::size_t c = 0; c < n_chunks; ++c) chunk_grads.push_back(make_zero_grads(model));

  parallel_for(n, [&](std::size_t i) {
    EnergyEvaluator ev(model);
    Twist pose_grad;
    ev.energy_grad(perturbed[i], object_pose, code, k, &pose_grad);
    Vector6d r = pose_grad.vec() + targets[i].vec();
    losses[i] = weight * r.squaredNorm();
    if (grads) {
      Vector6d u = (2.0 * weight / static_cast<double>(n)) * r;
      ev.pose_grad_param_backward(u, &chunk_grads[i / chunk]);
    }
  });

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) loss += losses[i];
  loss /= static_cast<double>(n);
  if (grads)
    for (std::size_t c = 0; c < n_chunks; ++c) grads->add_scaled(chunk_grads[c], 1.0);
  if (!std::isfinite(loss)) throw NonFiniteLoss("dsm loss is not finite");
  return loss;
}

// Mean squared error of the SDF head on world-frame points; object_pose maps
// the object into the world, so the encoder sees object_pose^-1 * x.
inline double sdf_loss(const EnergyModel& model, const Matrix3Xd& points,
                       const Eigen::VectorXd& targets, const Pose& object_pose, int code,
                       int k, ModelGrads* grads) {
  Eigen::Index n = targets.size();
  if (n == 0) return 0.0;
  Matrix3Xd local(3, n);
  Pose to_object = inverse(object_pose);
  for (Eigen::Index i = 0; i < n; ++i) local.col(i) = transform_point(to_object, points.col(i));
  EnergyEvaluator ev(model);
  Eigen::VectorXd pred = ev.sdf(local, code, k);
  Eigen::VectorXd resid = pred - targets;
  double loss = resid.squaredNorm() / static_cast<double>(n);
  if (grads) {
    Eigen::VectorXd dpred = (2.0 / static_cast<double>(n)) * resid;
    ev.sdf_backward(dpred, grads);
  }
  if (!std::isfinite(loss)) throw NonFiniteLoss("sdf loss is not finite");
  return loss;
}

// Alg.-1-style loop: total = dsm + sdf_weight * sdf per sampled object.
inline TrainReport train(EnergyModel& model, const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.grasps.size() != static_cast<std::size_t>(model.shape_codes.rows()) ||
      data.sdf.size() != data.grasps.size())
    throw ConfigError("training set must provide one grasp and sdf dataset per shape code");
  if (cfg.n_levels != model.levels() || cfg.sigma_min != model.noise_scales.front() ||
      cfg.sigma_max != model.noise_scales.back())
    throw ConfigError("train noise schedule does not match the model");

  TrainReport report;
  auto t0 = std::chrono::steady_clock::now();
  Rng root(cfg.seed);
  AdamState adam = make_adam_state(model);
  ModelGrads grads = make_zero_grads(model);
  int n_objects = static_cast<int>(data.grasps.size());

  for (int s = 0; s < cfg.steps; ++s) {
    Rng step_rng = root.derive(static_cast<std::uint64_t>(s));
    int k = 1 + static_cast<int>(step_rng.uniform_int(model.levels()));
    grads.set_zero();
    double step_dsm = 0.0, step_sdf = 0.0;
    int b = std::min(cfg.batch_objects, n_objects);
    for (int ob = 0; ob < b; ++ob) {
      int m_idx = static_cast<int>(step_rng.uniform_int(n_objects));
      const GraspDataset& gset = data.grasps[m_idx];
      const SdfDataset& sset = data.sdf[m_idx];

      if (!gset.grasps.empty()) {
        std::vector<Pose> batch(cfg.batch_grasps);
        for (int i = 0; i < cfg.batch_grasps; ++i)
          batch[i] = gset.grasps[step_rng.uniform_int(gset.size())];
        ModelGrads dsm_grads = make_zero_grads(model);
        Rng noise_rng = step_rng.derive(101, static_cast<std::uint64_t>(ob));
        step_dsm += dsm_loss(model, batch, Pose::identity(), m_idx, k, noise_rng,
                             cfg.sigma2_weighting, &dsm_grads) /
                    b;
        grads.add_scaled(dsm_grads, 1.0 / b);
      }
      if (sset.size() > 0) {
        Matrix3Xd pts(3, cfg.batch_sdf);
        Eigen::VectorXd tgt(cfg.batch_sdf);
        for (int j = 0; j < cfg.batch_sdf; ++j) {
          Eigen::Index idx = static_cast<Eigen::Index>(step_rng.uniform_int(sset.size()));
          pts.col(j) = sset.points.col(idx);
          tgt(j) = sset.sdf(idx);
        }
        ModelGrads sdf_grads = make_zero_grads(model);
        step_sdf +=
            sdf_loss(model, pts, tgt, Pose::identity(), m_idx, k, &sdf_grads) / b;
        grads.add_scaled(sdf_grads, cfg.sdf_weight / b);
      }
    }
    double total = step_dsm + cfg.sdf_weight * step_sdf;
    if (!std::isfinite(total))
      throw NonFiniteLoss("training loss not finite at step " + std::to_string(s));
    apply_update(model, grads, adam, cfg);
    report.dsm_loss.push_back(step_dsm);
    report.sdf_loss.push_back(step_sdf);
    report.total_loss.push_back(total);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.checksum = parameter_checksum(model);
  return report;
}

}  // namespace se3dif
