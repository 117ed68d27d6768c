#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "se3dif/sampler.hpp"

using namespace se3dif;
using Eigen::Vector3d;

namespace {

oracle::GaussianEnergyField make_well(double sigma_star) {
  oracle::GaussianEnergyField f;
  f.target.mean.rotation = so3_expmap(0.7 * Vector3d(1, 2, -1).normalized());
  f.target.mean.translation = Vector3d(0.1, -0.05, 0.15);
  f.target.sigma = sigma_star;
  f.noise_scales = geometric_noise_schedule(10, 0.01, 0.5);
  return f;
}

EnergyModelConfig small_config() {
  EnergyModelConfig cfg;
  cfg.n_shapes = 2;
  cfg.encoder_hidden = {32, 32, 32};
  cfg.decoder_hidden = {32, 32};
  return cfg;
}

double rot_error(const Pose& p) {
  return (p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity())
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("zero step rate returns the initial draw") {
  oracle::GaussianEnergyField field = make_well(0.05);
  SamplerConfig cfg;
  cfg.n_samples = 1;
  cfg.epsilon = 0.0;
  cfg.seed = 9;
  SampleTrace out = sample(field, cfg);
  REQUIRE(out.poses.size() == 1);

  // replay the particle stream: derive(0), then the initial Lie-Gaussian draw
  Rng rng = Rng(9).derive(0);
  LieGaussian init;
  init.sigma = field.sigma(field.levels());
  Pose expect = sample_lie_gaussian(rng, init);
  CHECK((out.poses[0].matrix() - expect.matrix()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.energies[0] == Catch::Approx(field.energy(expect, 1)));
}

TEST_CASE("noise-free step with zero gradient is the identity map") {
  Rng rng(41);
  EnergyModel m = make_energy_model(rng, small_config());
  for (auto& layer : m.decoder.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  GraspEnergyField field(m, Pose::identity(), 0);

  std::vector<Pose> poses;
  for (int i = 0; i < 5; ++i) poses.push_back(oracle::random_pose(rng, 0.2));
  std::vector<Pose> stepped = langevin_step(field, poses, 3, 0.5, 77, false);
  for (int i = 0; i < 5; ++i)
    CHECK((stepped[i].matrix() - poses[i].matrix()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("noise-free descent walks monotonically into an analytic well") {
  oracle::GaussianEnergyField field = make_well(0.2);
  Rng rng(42);
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Twist xi;
    xi.v = 0.3 * rng.normal3();
    xi.w = rng.uniform(0.0, M_PI / 2 * 0.95) * rng.normal3().normalized();
    Pose h = compose(field.target.mean, expmap(xi));
    double prev = se3_distance(field.target.mean, h);
    for (int step = 0; step < 50; ++step) {
      h = langevin_step(field, {h}, 1, 1.0, 0, false)[0];
      double d = se3_distance(field.target.mean, h);
      if (!(d < prev)) ++bad;
      prev = d;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("rotations stay orthonormal over ten thousand noisy steps") {
  oracle::GaussianEnergyField field = make_well(0.2);
  Rng rng(43);
  std::vector<Pose> poses{oracle::random_pose(rng, 0.2), oracle::random_pose(rng, 0.2)};
  for (int step = 0; step < 5000; ++step) {
    int k = 1 + step % field.levels();
    poses = langevin_step(field, poses, k, 0.3, 1000 + step);
  }
  for (const Pose& p : poses) {
    CHECK(rot_error(p) < 1e-9);
    CHECK(p.rotation.determinant() == Catch::Approx(1.0).margin(1e-9));
    CHECK(p.translation.allFinite());
  }
}

TEST_CASE("annealed sampling concentrates on the analytic mode") {
  oracle::GaussianEnergyField field = make_well(0.05);
  SamplerConfig cfg;
  cfg.n_samples = 50;
  cfg.epsilon = 0.05;  // keeps alpha_k below the quadratic well's stability bound
  cfg.seed = 4;
  cfg.record_trace = true;
  SampleTrace out = sample(field, cfg);

  REQUIRE(out.poses.size() == 50);
  REQUIRE(out.levels.size() == 10);
  for (const auto& level : out.levels) CHECK(level.size() == 50);
  for (std::size_t i = 0; i + 1 < out.energies.size(); ++i)
    CHECK(out.energies[i] <= out.energies[i + 1]);
  double worst = 0.0;
  for (const Pose& p : out.poses) {
    worst = std::max(worst, se3_distance(field.target.mean, p));
    CHECK(rot_error(p) < 1e-9);
  }
  CHECK(worst < 0.3);

  // bitwise reproducible, and identical across thread counts
  SampleTrace again = sample(field, cfg);
  SampleTrace threaded = sample(field, cfg, 3);
  for (int i = 0; i < 50; ++i) {
    CHECK(out.poses[i].matrix() == again.poses[i].matrix());
    CHECK(out.poses[i].matrix() == threaded.poses[i].matrix());
  }
}

TEST_CASE("mean energy is non-increasing under noise-free refinement") {
  oracle::GaussianEnergyField field = make_well(0.05);
  SamplerConfig cfg;
  cfg.n_samples = 30;
  cfg.epsilon = 0.05;
  cfg.seed = 6;
  cfg.final_polish = false;
  SampleTrace out = sample(field, cfg);

  std::vector<Pose> poses = out.poses;
  auto mean_energy = [&]() {
    double e = 0.0;
    for (const Pose& p : poses) e += field.energy(p, 1);
    return e / poses.size();
  };
  double prev = mean_energy();
  int violations = 0;
  for (int it = 0; it < 20; ++it) {
    poses = langevin_step(field, poses, 1, 0.05, 0, false);
    double e = mean_energy();
    if (e > prev) ++violations;
    prev = e;
  }
  CHECK(violations == 0);
  CHECK(prev < out.energies[out.energies.size() / 2]);
}

TEST_CASE("sampling a raw model produces finite sorted energies") {
  Rng rng(44);
  EnergyModel m = make_energy_model(rng, small_config());
  GraspEnergyField field(m, oracle::random_pose(rng, 0.1), 1);
  SamplerConfig cfg;
  cfg.n_samples = 4;
  cfg.steps_per_level = 3;
  cfg.polish_steps = 3;
  cfg.seed = 12;
  SampleTrace out = sample(field, cfg);
  REQUIRE(out.poses.size() == 4);
  for (double e : out.energies) CHECK(std::isfinite(e));
  for (std::size_t i = 0; i + 1 < out.energies.size(); ++i)
    CHECK(out.energies[i] <= out.energies[i + 1]);
  for (const Pose& p : out.poses) CHECK(rot_error(p) < 1e-9);

  SamplerConfig bad = cfg;
  bad.epsilon = -1.0;
  CHECK_THROWS_AS(sample(field, bad), ConfigError);
}
