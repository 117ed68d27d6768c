// Batch front-end: dataset generation, training, grasp sampling, trajectory
// optimization, evaluation, pose inference and a finite-difference audit of
// every gradient the library exposes. All state comes from flags and the JSON
// config; no environment variables. Module errors exit 1, config errors 2,
// both with one machine-readable "error: <code>: <message>" line on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "se3dif/datagen.hpp"
#include "se3dif/energy_model.hpp"
#include "se3dif/errors.hpp"
#include "se3dif/eval.hpp"
#include "se3dif/io.hpp"
#include "se3dif/kinematics.hpp"
#include "se3dif/liegroup.hpp"
#include "se3dif/motionopt.hpp"
#include "se3dif/presets.hpp"
#include "se3dif/sampler.hpp"
#include "se3dif/training.hpp"

using nlohmann::json;
using namespace se3dif;

namespace {

// ---------------------------------------------------------------------------
// config plumbing

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) ok = true;
    if (!ok) throw ConfigError("unknown config key " + where + "." + item.key());
  }
}

template <class T>
void fetch(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for config key " + where + "." + key);
  }
}

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  int threads = 0;

  AnalyticObject object = AnalyticObject::cylinder(0.04, 0.12);
  GraspManifold manifold;
  int n_grasps = 2000;
  int n_sdf = 4096;
  int n_cloud = 0;  // surface points for pose inference; 0 = skip the file

  EnergyModelConfig model;
  TrainConfig train;
  std::string train_grasps;  // empty = <out>/grasps.txt
  std::string train_sdf;     // empty = <out>/sdf.txt

  SamplerConfig sampler;
  OptimizeConfig optimize;
  std::string mode = "joint";
  Eigen::VectorXd q_init;  // empty = zeros
  std::optional<Pose> object_at_place;

  double eval_threshold = 0.3;
  int n_reference = 1000;
  std::string eval_poses;      // empty = <out>/poses.txt
  std::string eval_reference;  // empty = draw n_reference manifold grasps

  int infer_iters = 200;

  std::string scene_path;
  std::string checkpoint_path;  // empty = <out>/model.ckpt
  std::string pointcloud_path;
  int code = 0;

  std::string artifact(const std::string& explicit_path, const char* fallback) const {
    if (!explicit_path.empty()) return explicit_path;
    return (std::filesystem::path(out) / fallback).string();
  }
};

Pose random_probe_pose(Rng& rng, double trans_scale) {
  Pose p;
  p.rotation = so3_expmap(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
  p.translation = trans_scale * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  return p;
}

Pose pose_from_values(const std::vector<double>& v, const std::string& where) {
  if (v.size() != 12)
    throw ConfigError(where + " needs 12 numbers: translation then row-major rotation");
  Pose p;
  for (int i = 0; i < 3; ++i) p.translation(i) = v[i];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = v[3 + 3 * r + c];
  Eigen::Matrix3d err = p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-6 || p.rotation.determinant() < 0.0)
    throw ConfigError(where + " rotation is not a rotation matrix");
  return p;
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  json root;
  try {
    root = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config parse failed for " + path + ": " + e.what());
  }
  check_keys(root, "config",
             {"seed", "out", "threads", "object", "manifold", "data", "model", "train", "sampler",
              "optimize", "eval", "infer", "scene", "checkpoint", "pointcloud", "code"});
  fetch(root, "seed", cfg.seed, "config");
  fetch(root, "out", cfg.out, "config");
  fetch(root, "threads", cfg.threads, "config");
  fetch(root, "scene", cfg.scene_path, "config");
  fetch(root, "checkpoint", cfg.checkpoint_path, "config");
  fetch(root, "pointcloud", cfg.pointcloud_path, "config");
  fetch(root, "code", cfg.code, "config");

  if (root.contains("object")) {
    const json& j = root["object"];
    check_keys(j, "object", {"radius", "height"});
    fetch(j, "radius", cfg.object.radius, "object");
    fetch(j, "height", cfg.object.height, "object");
    if (cfg.object.radius <= 0.0 || cfg.object.height <= 0.0)
      throw ConfigError("object dimensions must be > 0");
  }
  if (root.contains("manifold")) {
    const json& j = root["manifold"];
    check_keys(j, "manifold", {"side", "top", "standoff"});
    fetch(j, "side", cfg.manifold.side_family, "manifold");
    fetch(j, "top", cfg.manifold.top_family, "manifold");
    fetch(j, "standoff", cfg.manifold.standoff, "manifold");
  }
  if (root.contains("data")) {
    const json& j = root["data"];
    check_keys(j, "data", {"n_grasps", "n_sdf", "n_cloud"});
    fetch(j, "n_grasps", cfg.n_grasps, "data");
    fetch(j, "n_sdf", cfg.n_sdf, "data");
    fetch(j, "n_cloud", cfg.n_cloud, "data");
    if (cfg.n_grasps < 0 || cfg.n_sdf < 0 || cfg.n_cloud < 0)
      throw ConfigError("data counts must be >= 0");
  }
  if (root.contains("model")) {
    const json& j = root["model"];
    check_keys(j, "model",
               {"n_shapes", "code_dim", "encoder_out", "encoder_hidden", "decoder_hidden",
                "n_levels", "sigma_min", "sigma_max", "gripper_width", "gripper_depth",
                "code_init_std", "input_scale"});
    fetch(j, "n_shapes", cfg.model.n_shapes, "model");
    fetch(j, "code_dim", cfg.model.code_dim, "model");
    fetch(j, "encoder_out", cfg.model.encoder_out, "model");
    fetch(j, "encoder_hidden", cfg.model.encoder_hidden, "model");
    fetch(j, "decoder_hidden", cfg.model.decoder_hidden, "model");
    fetch(j, "n_levels", cfg.model.n_levels, "model");
    fetch(j, "sigma_min", cfg.model.sigma_min, "model");
    fetch(j, "sigma_max", cfg.model.sigma_max, "model");
    fetch(j, "gripper_width", cfg.model.gripper_width, "model");
    fetch(j, "gripper_depth", cfg.model.gripper_depth, "model");
    fetch(j, "code_init_std", cfg.model.code_init_std, "model");
    fetch(j, "input_scale", cfg.model.input_scale, "model");
    // the training schedule must match the model it builds
    cfg.train.n_levels = cfg.model.n_levels;
    cfg.train.sigma_min = cfg.model.sigma_min;
    cfg.train.sigma_max = cfg.model.sigma_max;
  }
  if (root.contains("train")) {
    const json& j = root["train"];
    check_keys(j, "train",
               {"steps", "batch_objects", "batch_grasps", "batch_sdf", "learning_rate",
                "adam_beta1", "adam_beta2", "adam_eps", "use_adam", "sigma2_weighting",
                "sdf_weight", "grasps", "sdf"});
    fetch(j, "steps", cfg.train.steps, "train");
    fetch(j, "batch_objects", cfg.train.batch_objects, "train");
    fetch(j, "batch_grasps", cfg.train.batch_grasps, "train");
    fetch(j, "batch_sdf", cfg.train.batch_sdf, "train");
    fetch(j, "learning_rate", cfg.train.learning_rate, "train");
    fetch(j, "adam_beta1", cfg.train.adam_beta1, "train");
    fetch(j, "adam_beta2", cfg.train.adam_beta2, "train");
    fetch(j, "adam_eps", cfg.train.adam_eps, "train");
    fetch(j, "use_adam", cfg.train.use_adam, "train");
    fetch(j, "sigma2_weighting", cfg.train.sigma2_weighting, "train");
    fetch(j, "sdf_weight", cfg.train.sdf_weight, "train");
    fetch(j, "grasps", cfg.train_grasps, "train");
    fetch(j, "sdf", cfg.train_sdf, "train");
  }
  if (root.contains("sampler")) {
    const json& j = root["sampler"];
    check_keys(j, "sampler",
               {"n_samples", "epsilon", "steps_per_level", "final_polish", "polish_steps"});
    fetch(j, "n_samples", cfg.sampler.n_samples, "sampler");
    fetch(j, "epsilon", cfg.sampler.epsilon, "sampler");
    fetch(j, "steps_per_level", cfg.sampler.steps_per_level, "sampler");
    fetch(j, "final_polish", cfg.sampler.final_polish, "sampler");
    fetch(j, "polish_steps", cfg.sampler.polish_steps, "sampler");
  }
  if (root.contains("optimize")) {
    const json& j = root["optimize"];
    check_keys(j, "optimize",
               {"particles", "T", "epsilon", "steps_per_level", "with_noise", "final_polish",
                "polish_steps", "pin_k", "init_noise_scale", "mode", "q_init", "object_at_place",
                "n_levels", "sigma_min", "sigma_max"});
    fetch(j, "particles", cfg.optimize.n_particles, "optimize");
    fetch(j, "T", cfg.optimize.T, "optimize");
    fetch(j, "epsilon", cfg.optimize.epsilon, "optimize");
    fetch(j, "steps_per_level", cfg.optimize.steps_per_level, "optimize");
    fetch(j, "with_noise", cfg.optimize.with_noise, "optimize");
    fetch(j, "final_polish", cfg.optimize.final_polish, "optimize");
    fetch(j, "polish_steps", cfg.optimize.polish_steps, "optimize");
    fetch(j, "pin_k", cfg.optimize.pin_k, "optimize");
    fetch(j, "init_noise_scale", cfg.optimize.init_noise_scale, "optimize");
    fetch(j, "n_levels", cfg.optimize.n_levels, "optimize");
    fetch(j, "sigma_min", cfg.optimize.sigma_min, "optimize");
    fetch(j, "sigma_max", cfg.optimize.sigma_max, "optimize");
    fetch(j, "mode", cfg.mode, "optimize");
    if (j.contains("q_init")) {
      std::vector<double> v;
      fetch(j, "q_init", v, "optimize");
      if (!v.empty())
        cfg.q_init = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (j.contains("object_at_place")) {
      std::vector<double> v;
      fetch(j, "object_at_place", v, "optimize");
      cfg.object_at_place = pose_from_values(v, "optimize.object_at_place");
    }
  }
  if (root.contains("eval")) {
    const json& j = root["eval"];
    check_keys(j, "eval", {"threshold", "n_reference", "poses", "reference"});
    fetch(j, "threshold", cfg.eval_threshold, "eval");
    fetch(j, "n_reference", cfg.n_reference, "eval");
    fetch(j, "poses", cfg.eval_poses, "eval");
    fetch(j, "reference", cfg.eval_reference, "eval");
    if (cfg.eval_threshold <= 0.0) throw ConfigError("eval.threshold must be > 0");
    if (cfg.n_reference < 1) throw ConfigError("eval.n_reference must be >= 1");
  }
  if (root.contains("infer")) {
    const json& j = root["infer"];
    check_keys(j, "infer", {"iters"});
    fetch(j, "iters", cfg.infer_iters, "infer");
  }
}

GraspManifold make_manifold(const RunConfig& cfg) {
  GraspManifold m = cfg.manifold;
  m.object = cfg.object;
  m.validate();
  return m;
}

std::vector<Pose> reference_grasps(const RunConfig& cfg, const GraspManifold& manifold) {
  if (!cfg.eval_reference.empty()) {
    PoseSet set = load_pose_set(cfg.eval_reference);
    if (set.poses.empty()) throw ConfigError("reference pose set is empty");
    return set.poses;
  }
  Rng rng = Rng(cfg.seed).derive(9100);
  std::vector<Pose> out;
  out.reserve(cfg.n_reference);
  for (int i = 0; i < cfg.n_reference; ++i) out.push_back(sample_manifold_grasp(manifold, rng));
  return out;
}

Checkpoint load_model_checkpoint(const RunConfig& cfg) {
  return load_checkpoint(cfg.artifact(cfg.checkpoint_path, "model.ckpt"));
}

KinematicChain resolve_chain(const SceneFile& scene, const std::string& scene_path) {
  if (scene.chain == "planar3") return make_planar3_chain();
  if (scene.chain == "arm6") return make_arm6_chain();
  std::filesystem::path p(scene.chain);
  if (p.is_relative()) p = std::filesystem::path(scene_path).parent_path() / p;
  return load_chain(p.string());
}

void write_eval_report(const RunConfig& cfg, const EvalReport& rep) {
  std::string text = format_report(rep) + metrics_line(rep) + "\n";
  atomic_write_file((std::filesystem::path(cfg.out) / "report.txt").string(), text);
  std::cout << metrics_line(rep) << "\n";
}

// ---------------------------------------------------------------------------
// commands

int cmd_gen_data(const RunConfig& cfg) {
  GraspManifold manifold = make_manifold(cfg);
  GraspDataset grasps;
  SdfDataset sdf;
  generate_datasets(cfg.object, manifold, cfg.n_grasps, cfg.n_sdf, cfg.seed, &grasps, &sdf);
  save_grasp_dataset((std::filesystem::path(cfg.out) / "grasps.txt").string(), grasps);
  save_sdf_dataset((std::filesystem::path(cfg.out) / "sdf.txt").string(), sdf);
  if (cfg.n_cloud > 0) {
    Rng rng = Rng(cfg.seed).derive(7700);
    Matrix3Xd cloud(3, cfg.n_cloud);
    for (int i = 0; i < cfg.n_cloud; ++i) cloud.col(i) = detail::surface_point(cfg.object, rng);
    save_pointcloud((std::filesystem::path(cfg.out) / "cloud.txt").string(), cloud);
  }
  std::cout << "wrote " << grasps.size() << " grasps, " << sdf.size() << " sdf samples to "
            << cfg.out << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  TrainingSet data;
  data.grasps.push_back(load_grasp_dataset(cfg.artifact(cfg.train_grasps, "grasps.txt")));
  data.sdf.push_back(load_sdf_dataset(cfg.artifact(cfg.train_sdf, "sdf.txt")));
  if (cfg.model.n_shapes != 1)
    throw ConfigError("cmd_train drives one shape code; set model.n_shapes = 1");

  Rng init_rng = Rng(cfg.seed).derive(100);
  EnergyModel model = make_energy_model(init_rng, cfg.model);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  TrainReport report = train(model, data, tc);

  Checkpoint ckpt;
  ckpt.model = std::move(model);
  ckpt.steps = tc.steps;
  ckpt.seed = cfg.seed;
  save_checkpoint(cfg.artifact(cfg.checkpoint_path, "model.ckpt"), ckpt);
  atomic_write_file((std::filesystem::path(cfg.out) / "metrics.tsv").string(),
                    format_metrics_log(report.dsm_loss, report.sdf_loss, report.total_loss));
  // wall-clock time lives only in the sidecar so artifact bytes stay stable
  std::ostringstream side;
  side << "wall_seconds " << report.wall_seconds << "\nparam_checksum " << report.checksum
       << "\n";
  atomic_write_file((std::filesystem::path(cfg.out) / "train_log.txt").string(), side.str());
  std::cout << "trained " << tc.steps << " steps, checksum " << report.checksum << "\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg) {
  Checkpoint ckpt = load_model_checkpoint(cfg);
  if (cfg.code < 0 || cfg.code >= static_cast<int>(ckpt.model.shape_codes.rows()))
    throw ConfigError("config.code out of range for this checkpoint");
  GraspEnergyField field(ckpt.model, Pose::identity(), cfg.code);
  SamplerConfig sc = cfg.sampler;
  sc.seed = cfg.seed;
  SampleTrace trace = sample(field, sc, cfg.threads);

  PoseSet out;
  out.poses = trace.poses;
  out.energies = trace.energies;
  save_pose_set((std::filesystem::path(cfg.out) / "poses.txt").string(), out);

  GraspManifold manifold = make_manifold(cfg);
  EvalReport rep = evaluate_grasps(trace.poses, reference_grasps(cfg, manifold), manifold,
                                   cfg.eval_threshold, cfg.threads);
  write_eval_report(cfg, rep);
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  PoseSet samples = load_pose_set(cfg.artifact(cfg.eval_poses, "poses.txt"));
  if (samples.poses.empty()) throw ConfigError("pose set under evaluation is empty");
  GraspManifold manifold = make_manifold(cfg);
  EvalReport rep = evaluate_grasps(samples.poses, reference_grasps(cfg, manifold), manifold,
                                   cfg.eval_threshold, cfg.threads);
  write_eval_report(cfg, rep);
  return 0;
}

int cmd_optimize(const RunConfig& cfg) {
  if (cfg.scene_path.empty()) throw ConfigError("optimize needs config.scene");
  SceneFile scene = load_scene(cfg.scene_path);
  KinematicChain chain = resolve_chain(scene, cfg.scene_path);
  Checkpoint ckpt = load_model_checkpoint(cfg);
  if (cfg.code < 0 || cfg.code >= static_cast<int>(ckpt.model.shape_codes.rows()))
    throw ConfigError("config.code out of range for this checkpoint");

  SceneBuildOptions opts;
  opts.T = cfg.optimize.T;
  opts.q_init = cfg.q_init;
  if (cfg.object_at_place) {
    opts.object_at_place = *cfg.object_at_place;
    opts.has_place = true;
  }
  Objective obj = build_objective(scene, chain, &ckpt.model, cfg.code, opts);

  OptimizeConfig oc = cfg.optimize;
  oc.seed = cfg.seed;
  OptimizeResult res;
  if (cfg.mode == "joint") {
    res = optimize(obj, oc, cfg.threads);
  } else if (cfg.mode == "decoupled") {
    SamplerConfig sc = cfg.sampler;
    sc.seed = cfg.seed;
    res = decoupled_optimize(obj, oc, sc, cfg.threads);
    save_pose((std::filesystem::path(cfg.out) / "stage1_grasp.txt").string(), res.stage1_grasp);
  } else {
    throw ConfigError("optimize mode must be joint or decoupled");
  }

  TrajectoryFile tf;
  tf.waypoints = res.best.waypoints;
  tf.seed = cfg.seed;
  std::vector<double> per_term = term_costs(obj, res.best, 1);
  for (std::size_t i = 0; i < per_term.size(); ++i)
    tf.costs.emplace_back(cost_kind_name(obj.terms[i].kind), per_term[i]);
  tf.total = res.best_cost;
  save_trajectory((std::filesystem::path(cfg.out) / "trajectory.txt").string(), tf);

  std::ostringstream hist;
  hist << "step";
  for (std::size_t p = 0; p < res.cost_history.size(); ++p) hist << "\tp" << p;
  hist << '\n';
  std::size_t steps = res.cost_history.empty() ? 0 : res.cost_history.front().size();
  for (std::size_t s = 0; s < steps; ++s) {
    hist << s;
    for (const auto& col : res.cost_history) hist << '\t' << fmt_g17(col[s]);
    hist << '\n';
  }
  atomic_write_file((std::filesystem::path(cfg.out) / "cost_history.tsv").string(), hist.str());
  std::cout << "best particle " << res.best_particle << " cost " << fmt_g17(res.best_cost)
            << "\n";
  return 0;
}

int cmd_infer_pose(const RunConfig& cfg) {
  if (cfg.pointcloud_path.empty()) throw ConfigError("infer-pose needs config.pointcloud");
  Checkpoint ckpt = load_model_checkpoint(cfg);
  if (cfg.code < 0 || cfg.code >= static_cast<int>(ckpt.model.shape_codes.rows()))
    throw ConfigError("config.code out of range for this checkpoint");
  Matrix3Xd pts = load_pointcloud(cfg.pointcloud_path);
  std::vector<Eigen::Vector3d> cloud(pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) cloud[i] = pts.col(i);
  Pose est = infer_object_pose(ckpt.model, cloud, cfg.code, Pose::identity(), cfg.infer_iters);
  save_pose((std::filesystem::path(cfg.out) / "pose.txt").string(), est);
  double residual = mean_sdf_residual(ckpt.model, cloud, cfg.code, est);
  std::cout << "mean_abs_sdf=" << fmt_g17(residual) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck: every analytic gradient against central finite differences

struct CheckRow {
  std::string name;
  double err = 0.0;
  double tol = 0.0;
  bool pass() const { return err <= tol; }
};

// worst |analytic - fd| / (1 + |fd|) over a set of probes
class GradAudit {
 public:
  void record(const std::string& name, double tol, double analytic, double fd) {
    double err = std::abs(analytic - fd) / (1.0 + std::abs(fd));
    for (CheckRow& r : rows_)
      if (r.name == name) {
        r.err = std::max(r.err, err);
        return;
      }
    rows_.push_back({name, err, tol});
  }

  const std::vector<CheckRow>& rows() const { return rows_; }

 private:
  std::vector<CheckRow> rows_;
};

void audit_energy_pose_grad(GradAudit& audit, EnergyModel& model) {
  EnergyEvaluator ev(model);
  Rng rng(41);
  double h = 1e-6;
  for (int trial = 0; trial < 4; ++trial) {
    Pose grasp = random_probe_pose(rng, 0.1);
    Pose object = random_probe_pose(rng, 0.05);
    int k = trial % 2 == 0 ? 1 : model.levels();
    Twist g;
    ev.energy_grad(grasp, object, 0, k, &g);
    for (int d = 0; d < 6; ++d) {
      Vector6d dir = Vector6d::Zero();
      dir(d) = 1.0;
      Pose hp = compose(expmap(Twist(h * dir)), grasp);
      Pose hm = compose(expmap(Twist(-h * dir)), grasp);
      double fd = (ev.energy(hp, object, 0, k) - ev.energy(hm, object, 0, k)) / (2 * h);
      audit.record("energy_pose_grad", 1e-5, g.vec()(d), fd);
    }
  }
}

template <class Eval>
void audit_param_entries(GradAudit& audit, const std::string& name, double tol,
                         EnergyModel& model, const ModelGrads& grads, Eval&& eval, Rng& pick) {
  double h = 1e-6;
  auto probe = [&](double* param, double analytic) {
    double saved = *param;
    *param = saved + h;
    double fp = eval();
    *param = saved - h;
    double fm = eval();
    *param = saved;
    audit.record(name, tol, analytic, (fp - fm) / (2 * h));
  };
  for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
    auto& w = model.encoder.layers[l].weight;
    Eigen::Index i = static_cast<Eigen::Index>(pick.uniform_int(w.size()));
    probe(w.data() + i, grads.encoder.weight[l](i));
    auto& b = model.encoder.layers[l].bias;
    Eigen::Index j = static_cast<Eigen::Index>(pick.uniform_int(b.size()));
    probe(b.data() + j, grads.encoder.bias[l](j));
  }
  for (std::size_t l = 0; l < model.decoder.layers.size(); ++l) {
    auto& w = model.decoder.layers[l].weight;
    Eigen::Index i = static_cast<Eigen::Index>(pick.uniform_int(w.size()));
    probe(w.data() + i, grads.decoder.weight[l](i));
    auto& b = model.decoder.layers[l].bias;
    Eigen::Index j = static_cast<Eigen::Index>(pick.uniform_int(b.size()));
    probe(b.data() + j, grads.decoder.bias[l](j));
  }
  {
    auto& c = model.shape_codes;
    Eigen::Index i = static_cast<Eigen::Index>(pick.uniform_int(c.size()));
    probe(c.data() + i, grads.shape_codes(i));
  }
}

void audit_energy_param_grads(GradAudit& audit, EnergyModel& model) {
  Rng rng(77);
  std::vector<Pose> grasps;
  for (int i = 0; i < 4; ++i) grasps.push_back(random_probe_pose(rng, 0.1));
  Pose object = random_probe_pose(rng, 0.05);

  ModelGrads grads = make_zero_grads(model);
  Rng noise(555);
  dsm_loss(model, grasps, object, 0, 2, noise, true, &grads);
  Rng pick_dsm(11);
  audit_param_entries(audit, "energy_param_grad_dsm", 1e-3, model, grads,
                      [&]() {
                        Rng n2(555);
                        return dsm_loss(model, grasps, object, 0, 2, n2, true, nullptr);
                      },
                      pick_dsm);

  Matrix3Xd pts(3, 16);
  Eigen::VectorXd targets(16);
  for (int i = 0; i < 16; ++i) {
    pts.col(i) = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.06;
    targets(i) = 0.03 * rng.normal();
  }
  grads.set_zero();
  sdf_loss(model, pts, targets, object, 0, 1, &grads);
  Rng pick_sdf(12);
  audit_param_entries(audit, "energy_param_grad_sdf", 1e-3, model, grads,
                      [&]() { return sdf_loss(model, pts, targets, object, 0, 1, nullptr); },
                      pick_sdf);
}

void audit_fk_jacobian(GradAudit& audit) {
  Rng rng(9);
  double h = 1e-6;
  for (const KinematicChain& chain : {make_planar3_chain(), make_arm6_chain()}) {
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXd q(chain.dof());
      for (int i = 0; i < q.size(); ++i) q(i) = rng.uniform(-1.2, 1.2);
      auto jac = fk_jacobian(chain, q);
      Pose base = fk(chain, q).ee;
      for (int j = 0; j < chain.dof(); ++j) {
        Eigen::VectorXd qp = q, qm = q;
        qp(j) += h;
        qm(j) -= h;
        Vector6d fd = (logmap(compose(fk(chain, qp).ee, inverse(base))).vec() -
                       logmap(compose(fk(chain, qm).ee, inverse(base))).vec()) /
                      (2 * h);
        for (int d = 0; d < 6; ++d) audit.record("fk_jacobian", 1e-6, jac(d, j), fd(d));
      }
    }
  }
}

void audit_cost_grads(GradAudit& audit, EnergyModel& model) {
  KinematicChain chain = make_arm6_chain();
  int T = 6, d = chain.dof();
  Rng rng(303);
  Trajectory traj;
  traj.waypoints.resize(T, d);
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < d; ++c) traj.waypoints(t, c) = rng.uniform(-0.9, 0.9);

  auto one_term = [&](CostTerm term) {
    Objective obj;
    obj.chain = &chain;
    obj.model = &model;
    obj.object_pose = Pose::identity();
    obj.terms = {std::move(term)};
    return obj;
  };
  std::vector<CostTerm> terms;
  {
    CostTerm t;
    t.kind = CostKind::Smooth;
    terms.push_back(t);
    t = CostTerm();
    t.kind = CostKind::Table;
    t.table_height = 0.4;  // high table so several spheres sit in violation
    terms.push_back(t);
    t = CostTerm();
    t.kind = CostKind::Box;
    SceneBox box;
    box.pose = Pose::identity();
    box.pose.translation = Eigen::Vector3d(0.1, 0.0, 0.45);
    box.half_extents = Eigen::Vector3d(0.3, 0.3, 0.3);
    t.boxes = {box};
    terms.push_back(t);
    t = CostTerm();
    t.kind = CostKind::FixInit;
    t.q_init = Eigen::VectorXd::Constant(d, 0.2);
    terms.push_back(t);
    t = CostTerm();
    t.kind = CostKind::Pregrasp;
    t.horizon = 3;
    terms.push_back(t);
    t = CostTerm();
    t.kind = CostKind::GraspPlaceSimilarity;
    t.waypoint = T / 2;
    t.object_at_grasp = Pose::identity();
    t.object_at_place = expmap(Twist((Vector6d() << 0.1, -0.05, 0.2, 0.3, 0.1, -0.2).finished()));
    terms.push_back(t);
    t = CostTerm();
    t.kind = CostKind::GraspEnergy;
    terms.push_back(t);
    t = CostTerm();
    t.kind = CostKind::DesGraspDist;
    t.target = expmap(Twist((Vector6d() << 0.3, 0.1, 0.5, 0.0, 0.4, 0.1).finished()));
    terms.push_back(t);
  }

  double h = 1e-5;
  for (const CostTerm& term : terms) {
    std::string name = std::string("cost_") + cost_kind_name(term.kind);
    Objective obj = one_term(term);
    Eigen::MatrixXd grad;
    objective_eval(obj, traj, 1, &grad);
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < d; ++c) {
        Trajectory tp = traj, tm = traj;
        tp.waypoints(t, c) += h;
        tm.waypoints(t, c) -= h;
        double fd = (objective_eval(obj, tp, 1, nullptr) - objective_eval(obj, tm, 1, nullptr)) /
                    (2 * h);
        audit.record(name, 1e-3, grad(t, c), fd);
      }
  }
}

int cmd_gradcheck(const RunConfig& cfg) {
  EnergyModel model;
  std::string ckpt_path = cfg.artifact(cfg.checkpoint_path, "model.ckpt");
  if (!cfg.checkpoint_path.empty() || std::filesystem::exists(ckpt_path)) {
    model = load_checkpoint(ckpt_path).model;
  } else {
    EnergyModelConfig mc = cfg.model;
    mc.encoder_hidden = {32, 32};
    mc.decoder_hidden = {32};
    Rng rng = Rng(cfg.seed).derive(100);
    model = make_energy_model(rng, mc);
  }

  GradAudit audit;
  audit_energy_pose_grad(audit, model);
  audit_energy_param_grads(audit, model);
  audit_fk_jacobian(audit);
  audit_cost_grads(audit, model);

  int failed = 0;
  for (const CheckRow& r : audit.rows()) {
    std::printf("%s %-28s max_rel_err=%-12.3e tol=%.0e\n", r.pass() ? "PASS" : "FAIL",
                r.name.c_str(), r.err, r.tol);
    if (!r.pass()) ++failed;
  }
  std::printf("gradcheck: %zu/%zu checks passed\n", audit.rows().size() - failed,
              audit.rows().size());
  if (failed > 0) {
    std::fprintf(stderr, "error: GradCheckFailed: %d of %zu gradient checks failed\n", failed,
                 audit.rows().size());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale SE(3) grasp diffusion toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_flag = 0;
  std::string out_flag;
  int threads_flag = 0;
  auto* o_config = app.add_option("--config", config_path, "JSON config file");
  auto* o_seed = app.add_option("--seed", seed_flag, "run seed");
  auto* o_out = app.add_option("--out", out_flag, "output directory");
  auto* o_threads = app.add_option("--threads", threads_flag, "worker threads, 0 = serial");

  CLI::App* sub_gen = app.add_subcommand("gen-data", "write grasp and sdf datasets");
  CLI::App* sub_train = app.add_subcommand("train", "train a model, write checkpoint + metrics");
  CLI::App* sub_sample = app.add_subcommand("sample", "draw grasps from a checkpoint");
  CLI::App* sub_opt = app.add_subcommand("optimize", "optimize a trajectory in a scene");
  CLI::App* sub_eval = app.add_subcommand("eval", "score a pose set against the manifold");
  CLI::App* sub_infer = app.add_subcommand("infer-pose", "fit an object pose to a point cloud");
  CLI::App* sub_grad = app.add_subcommand("gradcheck", "audit every gradient against FD");
  for (CLI::App* s : {sub_gen, sub_train, sub_sample, sub_opt, sub_eval, sub_infer, sub_grad})
    s->fallthrough();

  std::string mode_flag;
  int particles_flag = 0;
  auto* o_mode = sub_opt->add_option("--mode", mode_flag, "joint or decoupled")
                     ->check(CLI::IsMember({"joint", "decoupled"}));
  auto* o_particles = sub_opt->add_option("--particles", particles_flag, "particle count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: ConfigError: %s\n", e.what());
    return 2;
  }

  try {
    RunConfig cfg;
    if (*o_config) apply_config_file(cfg, config_path);
    if (*o_seed) cfg.seed = seed_flag;
    if (*o_out) cfg.out = out_flag;
    if (*o_threads) cfg.threads = threads_flag;
    if (*o_mode) cfg.mode = mode_flag;
    if (*o_particles) cfg.optimize.n_particles = particles_flag;
    if (cfg.threads < 0) throw ConfigError("--threads must be >= 0");

    if (app.got_subcommand(sub_gen)) return cmd_gen_data(cfg);
    if (app.got_subcommand(sub_train)) return cmd_train(cfg);
    if (app.got_subcommand(sub_sample)) return cmd_sample(cfg);
    if (app.got_subcommand(sub_opt)) return cmd_optimize(cfg);
    if (app.got_subcommand(sub_eval)) return cmd_eval(cfg);
    if (app.got_subcommand(sub_infer)) return cmd_infer_pose(cfg);
    if (app.got_subcommand(sub_grad)) return cmd_gradcheck(cfg);
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.code().c_str(), e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.code().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 1;
  }
}
