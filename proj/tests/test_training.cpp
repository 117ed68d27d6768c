#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "se3dif/training.hpp"

using namespace se3dif;
using Eigen::Vector3d;

namespace {

EnergyModelConfig small_config() {
  EnergyModelConfig cfg;
  cfg.n_shapes = 2;
  cfg.encoder_hidden = {32, 32, 32};
  cfg.decoder_hidden = {32, 32};
  return cfg;
}

struct ParamView {
  std::vector<double*> params;
  std::vector<double*> grads;
};

ParamView view_params(EnergyModel& m, ModelGrads& g) {
  ParamView v;
  auto add_mlp = [&](Mlp& mlp, MlpGrads& mg) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      auto& layer = mlp.layers[l];
      for (int i = 0; i < layer.weight.size(); ++i) {
        v.params.push_back(layer.weight.data() + i);
        v.grads.push_back(mg.weight[l].data() + i);
      }
      for (int i = 0; i < layer.bias.size(); ++i) {
        v.params.push_back(layer.bias.data() + i);
        v.grads.push_back(mg.bias[l].data() + i);
      }
    }
  };
  add_mlp(m.encoder, g.encoder);
  add_mlp(m.decoder, g.decoder);
  for (int i = 0; i < m.shape_codes.size(); ++i) {
    v.params.push_back(m.shape_codes.data() + i);
    v.grads.push_back(g.shape_codes.data() + i);
  }
  return v;
}

void zero_mlp(Mlp& m) {
  for (auto& layer : m.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
}

double median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  return x[x.size() / 2];
}

TrainingSet cylinder_training_set(int n_grasps, int n_sdf, int n_objects, std::uint64_t seed) {
  AnalyticObject cyl = AnalyticObject::cylinder(0.04, 0.12);
  GraspManifold m;
  m.object = cyl;
  TrainingSet set;
  for (int i = 0; i < n_objects; ++i) {
    GraspDataset g;
    SdfDataset s;
    generate_datasets(cyl, m, n_grasps, n_sdf, seed + i, &g, &s);
    set.grasps.push_back(std::move(g));
    set.sdf.push_back(std::move(s));
  }
  return set;
}

}  // namespace

TEST_CASE("dsm loss on a constant model is the mean squared score") {
  Rng rng(71);
  EnergyModel m = make_energy_model(rng, small_config());
  zero_mlp(m.decoder);  // energy identically zero, so pose_grad drops out

  std::vector<Pose> grasps;
  for (int i = 0; i < 16; ++i) grasps.push_back(oracle::random_pose(rng, 0.2));
  int k = 3;
  double sigma = m.sigma(k);

  Rng noise(77);
  double loss = dsm_loss(m, grasps, Pose::identity(), 0, k, noise, false, nullptr);

  // replay the perturbation streams and accumulate the analytic score norms
  double expected = 0.0;
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    Rng stream = Rng(77).derive(i);
    LieGaussian q{grasps[i], sigma};
    Pose cand = sample_lie_gaussian(stream, q);
    expected += lie_gaussian_score(q, cand).vec().squaredNorm();
  }
  expected /= static_cast<double>(grasps.size());
  CHECK(loss == Catch::Approx(expected).epsilon(1e-12));

  Rng noise2(77);
  double weighted = dsm_loss(m, grasps, Pose::identity(), 0, k, noise2, true, nullptr);
  CHECK(weighted == Catch::Approx(sigma * sigma * expected).epsilon(1e-12));

  // empty batch contributes nothing
  Rng noise3(1);
  std::vector<Pose> none;
  CHECK(dsm_loss(m, none, Pose::identity(), 0, k, noise3, true, nullptr) == 0.0);
}

TEST_CASE("dsm loss magnitude matches score statistics at small noise") {
  Rng rng(72);
  EnergyModel m = make_energy_model(rng, small_config());
  zero_mlp(m.decoder);

  // rotation-only means make the adjoint orthogonal, so E||score||^2 = 6/sigma^2
  std::vector<Pose> grasps;
  for (int i = 0; i < 4000; ++i) {
    Pose p = oracle::random_pose(rng, 0.0, 2.5);
    p.translation.setZero();
    grasps.push_back(p);
  }
  int k = 1;
  double sigma = m.sigma(k);
  Rng noise(78);
  double loss = dsm_loss(m, grasps, Pose::identity(), 0, k, noise, false, nullptr);
  CHECK(loss == Catch::Approx(6.0 / (sigma * sigma)).epsilon(0.05));

  Rng noise2(78);
  double weighted = dsm_loss(m, grasps, Pose::identity(), 0, k, noise2, true, nullptr);
  CHECK(weighted == Catch::Approx(6.0).epsilon(0.05));
}

TEST_CASE("dsm parameter gradients match finite differences") {
  Rng rng(73);
  EnergyModel m = make_energy_model(rng, small_config());
  std::vector<Pose> grasps;
  for (int i = 0; i < 6; ++i) grasps.push_back(oracle::random_pose(rng, 0.2));
  Pose obj = oracle::random_pose(rng, 0.2);
  int code = 1, k = 5;

  ModelGrads grads = make_zero_grads(m);
  Rng noise(55);
  dsm_loss(m, grasps, obj, code, k, noise, true, &grads);

  auto eval = [&]() {
    Rng replay(55);
    return dsm_loss(m, grasps, obj, code, k, replay, true, nullptr);
  };
  ParamView v = view_params(m, grads);
  Rng pick(56);
  double h = 1e-5;
  for (int trial = 0; trial < 150; ++trial) {
    std::size_t idx = pick.uniform_int(v.params.size());
    double* p = v.params[idx];
    double saved = *p;
    *p = saved + h;
    double fp = eval();
    *p = saved - h;
    double fm = eval();
    *p = saved;
    double fd = (fp - fm) / (2 * h);
    CHECK(*v.grads[idx] == Catch::Approx(fd).epsilon(2e-4).margin(1e-8));
  }
}

TEST_CASE("sdf loss exact values and finite-difference gradients") {
  Rng rng(74);
  EnergyModel m = make_energy_model(rng, small_config());

  SECTION("zeroed encoder predicts zero") {
    zero_mlp(m.encoder);
    Matrix3Xd pts = Matrix3Xd::Random(3, 10);
    Eigen::VectorXd tgt = Eigen::VectorXd::Constant(10, 0.1);
    CHECK(sdf_loss(m, pts, tgt, Pose::identity(), 0, 1, nullptr) ==
          Catch::Approx(0.01).margin(1e-15));
    tgt.setZero();
    CHECK(sdf_loss(m, pts, tgt, Pose::identity(), 0, 1, nullptr) == 0.0);
  }

  SECTION("object pose maps points into the object frame") {
    Matrix3Xd pts = Matrix3Xd::Random(3, 8);
    Eigen::VectorXd tgt = Eigen::VectorXd::Random(8);
    Pose obj = oracle::random_pose(rng, 0.3);
    Matrix3Xd local(3, 8);
    Pose inv = inverse(obj);
    for (int i = 0; i < 8; ++i) local.col(i) = transform_point(inv, pts.col(i));
    double a = sdf_loss(m, pts, tgt, obj, 1, 2, nullptr);
    double b = sdf_loss(m, local, tgt, Pose::identity(), 1, 2, nullptr);
    CHECK(a == Catch::Approx(b).epsilon(1e-12));
  }

  SECTION("parameter gradients match finite differences") {
    Matrix3Xd pts = 0.1 * Matrix3Xd::Random(3, 12);
    Eigen::VectorXd tgt = 0.05 * Eigen::VectorXd::Random(12);
    Pose obj = oracle::random_pose(rng, 0.2);
    ModelGrads grads = make_zero_grads(m);
    sdf_loss(m, pts, tgt, obj, 0, 4, &grads);

    ParamView v = view_params(m, grads);
    Rng pick(57);
    double h = 1e-6;
    for (int trial = 0; trial < 200; ++trial) {
      std::size_t idx = pick.uniform_int(v.params.size());
      double* p = v.params[idx];
      double saved = *p;
      *p = saved + h;
      double fp = sdf_loss(m, pts, tgt, obj, 0, 4, nullptr);
      *p = saved - h;
      double fm = sdf_loss(m, pts, tgt, obj, 0, 4, nullptr);
      *p = saved;
      double fd = (fp - fm) / (2 * h);
      CHECK(*v.grads[idx] == Catch::Approx(fd).epsilon(2e-4).margin(1e-9));
    }
  }
}

TEST_CASE("non-finite parameters are reported, not propagated") {
  Rng rng(75);
  EnergyModel m = make_energy_model(rng, small_config());
  m.encoder.layers[0].weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<Pose> grasps{oracle::random_pose(rng, 0.1)};
  Rng noise(9);
  CHECK_THROWS_AS(dsm_loss(m, grasps, Pose::identity(), 0, 1, noise, true, nullptr),
                  NonFiniteLoss);
}

TEST_CASE("train is deterministic and validates its inputs") {
  TrainingSet data = cylinder_training_set(32, 64, 2, 11);
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.batch_grasps = 4;
  cfg.batch_sdf = 8;
  cfg.seed = 3;

  Rng r1(100), r2(100);
  EnergyModel a = make_energy_model(r1, small_config());
  EnergyModel b = make_energy_model(r2, small_config());
  std::string before = parameter_checksum(a);
  CHECK(before == parameter_checksum(b));

  TrainReport ra = train(a, data, cfg);
  TrainReport rb = train(b, data, cfg);
  CHECK(ra.checksum == rb.checksum);
  CHECK(ra.checksum != before);
  CHECK(ra.total_loss == rb.total_loss);
  REQUIRE(ra.total_loss.size() == 5);
  for (int s = 0; s < 5; ++s)
    CHECK(ra.total_loss[s] ==
          Catch::Approx(ra.dsm_loss[s] + cfg.sdf_weight * ra.sdf_loss[s]).margin(1e-15));

  // zero steps leave the parameters untouched
  Rng r3(100);
  EnergyModel c = make_energy_model(r3, small_config());
  TrainConfig none = cfg;
  none.steps = 0;
  TrainReport rc = train(c, data, none);
  CHECK(rc.checksum == before);
  CHECK(rc.total_loss.empty());

  // dataset count must match the shape codes
  TrainingSet wrong = cylinder_training_set(8, 8, 1, 12);
  EnergyModel d = make_energy_model(r3, small_config());
  CHECK_THROWS_AS(train(d, wrong, cfg), ConfigError);

  // schedule mismatch is rejected
  TrainConfig off = cfg;
  off.sigma_max = 0.4;
  CHECK_THROWS_AS(train(d, data, off), ConfigError);
}

TEST_CASE("short training run reduces the loss") {
  TrainingSet data = cylinder_training_set(256, 512, 1, 21);
  EnergyModelConfig mc = small_config();
  mc.n_shapes = 1;
  Rng rng(101);
  EnergyModel m = make_energy_model(rng, mc);

  TrainConfig cfg;
  cfg.steps = 300;
  cfg.batch_grasps = 8;
  cfg.batch_sdf = 16;
  cfg.seed = 5;
  TrainReport rep = train(m, data, cfg);

  std::vector<double> head(rep.total_loss.begin(), rep.total_loss.begin() + 50);
  std::vector<double> tail(rep.total_loss.end() - 50, rep.total_loss.end());
  CHECK(median(tail) < median(head));
  // the sdf head alone must also improve
  std::vector<double> shead(rep.sdf_loss.begin(), rep.sdf_loss.begin() + 50);
  std::vector<double> stail(rep.sdf_loss.end() - 50, rep.sdf_loss.end());
  CHECK(median(stail) < median(shead));

  // plain gradient descent also moves the parameters
  Rng rng2(101);
  EnergyModel m2 = make_energy_model(rng2, mc);
  TrainConfig sgd = cfg;
  sgd.steps = 3;
  sgd.use_adam = false;
  std::string before = parameter_checksum(m2);
  CHECK(train(m2, data, sgd).checksum != before);
}
