#pragma once

// Text serialization for every artifact the tools exchange: datasets,
// checkpoints, pose sets, chains, scenes, trajectories, point clouds and the
// training metrics log. All files are whitespace-separated token streams with
// a schema tag + version on the first line. Doubles are printed with %.17g so
// save -> load -> save is byte identical. Writes go through a temp file and a
// rename so readers never observe a half-written artifact.

#include <Eigen/Core>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "se3dif/datagen.hpp"
#include "se3dif/energy_model.hpp"
#include "se3dif/errors.hpp"
#include "se3dif/kinematics.hpp"
#include "se3dif/liegroup.hpp"
#include "se3dif/motionopt.hpp"

namespace se3dif {

// ---------------------------------------------------------------------------
// low-level helpers

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("rename failed for " + path + ": " + ec.message());
}

namespace detail {

// Cursor over a whitespace-tokenized file. Formats are token streams; line
// breaks in the writers are purely cosmetic.
class TokenReader {
 public:
  TokenReader(const std::string& text, std::string origin)
      : in_(text), origin_(std::move(origin)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail("unexpected end of file");
    return w;
  }

  void expect(const std::string& tag) {
    std::string w = word();
    if (w != tag) fail("expected '" + tag + "', found '" + w + "'");
  }

  double number() {
    std::string w = word();
    try {
      std::size_t used = 0;
      double v = std::stod(w, &used);
      if (used != w.size()) fail("bad number '" + w + "'");
      return v;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail("bad number '" + w + "'");
    }
    return 0.0;  // unreachable
  }

  long long integer() {
    std::string w = word();
    try {
      std::size_t used = 0;
      long long v = std::stoll(w, &used);
      if (used != w.size()) fail("bad integer '" + w + "'");
      return v;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail("bad integer '" + w + "'");
    }
    return 0;  // unreachable
  }

  int count(const char* what, long long max = 100000000) {
    long long v = integer();
    if (v < 0 || v > max) fail(std::string("bad ") + what + " count");
    return static_cast<int>(v);
  }

  std::uint64_t uint64() {
    std::string w = word();
    try {
      std::size_t used = 0;
      unsigned long long v = std::stoull(w, &used);
      if (used != w.size() || (!w.empty() && w[0] == '-')) fail("bad seed '" + w + "'");
      return v;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail("bad seed '" + w + "'");
    }
    return 0;  // unreachable
  }

  void done() {
    std::string w;
    if (in_ >> w) fail("trailing content '" + w + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw IoError(origin_ + ": " + msg);
  }

 private:
  std::istringstream in_;
  std::string origin_;
};

inline void header(TokenReader& r, const std::string& tag) {
  r.expect(tag);
  long long version = r.integer();
  if (version != 1) r.fail(tag + " version " + std::to_string(version) + " not supported");
}

inline void write_pose(std::ostringstream& os, const Pose& p) {
  for (int i = 0; i < 3; ++i) os << fmt_g17(p.translation(i)) << ' ';
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      os << fmt_g17(p.rotation(r, c));
      if (r != 2 || c != 2) os << ' ';
    }
}

inline Pose read_pose(TokenReader& r) {
  Pose p;
  for (int i = 0; i < 3; ++i) p.translation(i) = r.number();
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) p.rotation(row, col) = r.number();
  if (!p.translation.allFinite() || !p.rotation.allFinite()) r.fail("pose has non-finite entries");
  Eigen::Matrix3d err = p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-6 || p.rotation.determinant() < 0.0)
    r.fail("pose rotation is not a rotation matrix");
  return p;
}

inline void write_vec3(std::ostringstream& os, const Eigen::Vector3d& v) {
  os << fmt_g17(v.x()) << ' ' << fmt_g17(v.y()) << ' ' << fmt_g17(v.z());
}

inline Eigen::Vector3d read_vec3(TokenReader& r) {
  Eigen::Vector3d v;
  v.x() = r.number();
  v.y() = r.number();
  v.z() = r.number();
  return v;
}

inline void write_array(std::ostringstream& os, const std::string& name,
                        const Eigen::MatrixXd& m) {
  os << "array " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      os << fmt_g17(m(r, c));
      os << (c + 1 == m.cols() ? '\n' : ' ');
    }
  }
}

inline Eigen::MatrixXd read_array(TokenReader& r, const std::string& name) {
  r.expect("array");
  std::string got = r.word();
  if (got != name) r.fail("expected array '" + name + "', found '" + got + "'");
  int rows = r.count("array row");
  int cols = r.count("array col");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = r.number();
  if (!m.allFinite()) r.fail("array '" + name + "' has non-finite entries");
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// grasp dataset: one grasp per line, pose (3 translation + 9 row-major
// rotation floats) followed by the family label.

inline std::string format_grasp_dataset(const GraspDataset& set) {
  if (set.family.size() != set.grasps.size())
    throw ConfigError("grasp dataset family labels out of sync");
  std::ostringstream os;
  os << "se3dif.graspset 1\n";
  os << "count " << set.grasps.size() << '\n';
  for (std::size_t i = 0; i < set.grasps.size(); ++i) {
    detail::write_pose(os, set.grasps[i]);
    os << ' ' << (set.family[i] == GraspFamily::Side ? "side" : "top") << '\n';
  }
  return os.str();
}

inline GraspDataset parse_grasp_dataset(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.graspset");
  r.expect("count");
  int n = r.count("grasp");
  GraspDataset set;
  set.grasps.reserve(n);
  set.family.reserve(n);
  for (int i = 0; i < n; ++i) {
    set.grasps.push_back(detail::read_pose(r));
    std::string fam = r.word();
    if (fam == "side")
      set.family.push_back(GraspFamily::Side);
    else if (fam == "top")
      set.family.push_back(GraspFamily::Top);
    else
      r.fail("unknown grasp family '" + fam + "'");
  }
  r.done();
  return set;
}

inline void save_grasp_dataset(const std::string& path, const GraspDataset& set) {
  atomic_write_file(path, format_grasp_dataset(set));
}

inline GraspDataset load_grasp_dataset(const std::string& path) {
  return parse_grasp_dataset(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// sdf dataset: x y z value per line.

inline std::string format_sdf_dataset(const SdfDataset& set) {
  if (set.points.cols() != set.sdf.size())
    throw ConfigError("sdf dataset points and values out of sync");
  std::ostringstream os;
  os << "se3dif.sdfset 1\n";
  os << "count " << set.sdf.size() << '\n';
  for (Eigen::Index i = 0; i < set.sdf.size(); ++i) {
    detail::write_vec3(os, set.points.col(i));
    os << ' ' << fmt_g17(set.sdf(i)) << '\n';
  }
  return os.str();
}

inline SdfDataset parse_sdf_dataset(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.sdfset");
  r.expect("count");
  int n = r.count("sdf sample");
  SdfDataset set;
  set.points.resize(3, n);
  set.sdf.resize(n);
  for (int i = 0; i < n; ++i) {
    set.points.col(i) = detail::read_vec3(r);
    set.sdf(i) = r.number();
  }
  r.done();
  return set;
}

inline void save_sdf_dataset(const std::string& path, const SdfDataset& set) {
  atomic_write_file(path, format_sdf_dataset(set));
}

inline SdfDataset load_sdf_dataset(const std::string& path) {
  return parse_sdf_dataset(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// pose set: sampler output. Each line is a pose, optionally followed by the
// model energy at that pose.

struct PoseSet {
  std::vector<Pose> poses;
  std::vector<double> energies;  // empty or one per pose
};

inline std::string format_pose_set(const PoseSet& set) {
  bool with_energy = !set.energies.empty();
  if (with_energy && set.energies.size() != set.poses.size())
    throw ConfigError("pose set energies out of sync");
  std::ostringstream os;
  os << "se3dif.poseset 1\n";
  os << "count " << set.poses.size() << " energies " << (with_energy ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < set.poses.size(); ++i) {
    detail::write_pose(os, set.poses[i]);
    if (with_energy) os << ' ' << fmt_g17(set.energies[i]);
    os << '\n';
  }
  return os.str();
}

inline PoseSet parse_pose_set(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.poseset");
  r.expect("count");
  int n = r.count("pose");
  r.expect("energies");
  long long flag = r.integer();
  if (flag != 0 && flag != 1) r.fail("energies flag must be 0 or 1");
  PoseSet set;
  set.poses.reserve(n);
  if (flag) set.energies.reserve(n);
  for (int i = 0; i < n; ++i) {
    set.poses.push_back(detail::read_pose(r));
    if (flag) set.energies.push_back(r.number());
  }
  r.done();
  return set;
}

inline void save_pose_set(const std::string& path, const PoseSet& set) {
  atomic_write_file(path, format_pose_set(set));
}

inline PoseSet load_pose_set(const std::string& path) {
  return parse_pose_set(read_text_file(path), path);
}

// single pose (infer-pose output)

inline std::string format_pose(const Pose& p) {
  std::ostringstream os;
  os << "se3dif.pose 1\n";
  detail::write_pose(os, p);
  os << '\n';
  return os.str();
}

inline Pose parse_pose_file(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.pose");
  Pose p = detail::read_pose(r);
  r.done();
  return p;
}

inline void save_pose(const std::string& path, const Pose& p) {
  atomic_write_file(path, format_pose(p));
}

inline Pose load_pose(const std::string& path) {
  return parse_pose_file(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// point cloud (infer-pose input): x y z per line.

inline std::string format_pointcloud(const Matrix3Xd& pts) {
  std::ostringstream os;
  os << "se3dif.pointcloud 1\n";
  os << "count " << pts.cols() << '\n';
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    detail::write_vec3(os, pts.col(i));
    os << '\n';
  }
  return os.str();
}

inline Matrix3Xd parse_pointcloud(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.pointcloud");
  r.expect("count");
  int n = r.count("point");
  Matrix3Xd pts(3, n);
  for (int i = 0; i < n; ++i) pts.col(i) = detail::read_vec3(r);
  r.done();
  return pts;
}

inline void save_pointcloud(const std::string& path, const Matrix3Xd& pts) {
  atomic_write_file(path, format_pointcloud(pts));
}

inline Matrix3Xd load_pointcloud(const std::string& path) {
  return parse_pointcloud(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// checkpoint: hyperparameters, every parameter array by name, the training
// step counter and the seed the run was launched with.

struct Checkpoint {
  EnergyModel model;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
};

inline std::string format_checkpoint(const Checkpoint& ckpt) {
  const EnergyModel& m = ckpt.model;
  std::ostringstream os;
  os << "se3dif.checkpoint 1\n";
  os << "steps " << ckpt.steps << '\n';
  os << "seed " << ckpt.seed << '\n';
  os << "input_scale " << fmt_g17(m.input_scale) << '\n';
  os << "levels " << m.levels() << '\n';
  os << "scales";
  for (double s : m.noise_scales) os << ' ' << fmt_g17(s);
  os << '\n';
  os << "encoder_layers " << m.encoder.layers.size() << '\n';
  os << "decoder_layers " << m.decoder.layers.size() << '\n';
  detail::write_array(os, "gripper_points", m.gripper_points);
  detail::write_array(os, "shape_codes", m.shape_codes);
  for (std::size_t l = 0; l < m.encoder.layers.size(); ++l) {
    std::string base = "encoder." + std::to_string(l);
    detail::write_array(os, base + ".weight", m.encoder.layers[l].weight);
    detail::write_array(os, base + ".bias", m.encoder.layers[l].bias.transpose());
  }
  for (std::size_t l = 0; l < m.decoder.layers.size(); ++l) {
    std::string base = "decoder." + std::to_string(l);
    detail::write_array(os, base + ".weight", m.decoder.layers[l].weight);
    detail::write_array(os, base + ".bias", m.decoder.layers[l].bias.transpose());
  }
  os << "end\n";
  return os.str();
}

namespace detail {

inline Mlp read_mlp(TokenReader& r, const std::string& prefix, int n_layers) {
  Mlp mlp;
  for (int l = 0; l < n_layers; ++l) {
    std::string base = prefix + "." + std::to_string(l);
    DenseLayer layer;
    layer.weight = read_array(r, base + ".weight");
    Eigen::MatrixXd bias = read_array(r, base + ".bias");
    if (bias.rows() != 1 || bias.cols() != layer.weight.rows())
      r.fail(base + ".bias shape does not match its weight");
    layer.bias = bias.transpose();
    if (l > 0 && layer.weight.cols() != mlp.layers.back().weight.rows())
      r.fail(base + ".weight input width does not chain with the previous layer");
    mlp.layers.push_back(std::move(layer));
  }
  if (mlp.layers.empty()) r.fail(prefix + " needs at least one layer");
  return mlp;
}

}  // namespace detail

inline Checkpoint parse_checkpoint(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.checkpoint");
  Checkpoint ckpt;
  r.expect("steps");
  ckpt.steps = r.integer();
  if (ckpt.steps < 0) r.fail("negative step counter");
  r.expect("seed");
  ckpt.seed = r.uint64();
  EnergyModel& m = ckpt.model;
  r.expect("input_scale");
  m.input_scale = r.number();
  if (!(m.input_scale > 0.0)) r.fail("input_scale must be > 0");
  r.expect("levels");
  int levels = r.count("noise level", 1000000);
  if (levels < 1) r.fail("need at least one noise level");
  r.expect("scales");
  m.noise_scales.resize(levels);
  for (int i = 0; i < levels; ++i) {
    m.noise_scales[i] = r.number();
    if (!(m.noise_scales[i] > 0.0)) r.fail("noise scales must be > 0");
  }
  r.expect("encoder_layers");
  int enc_layers = r.count("encoder layer", 1000);
  r.expect("decoder_layers");
  int dec_layers = r.count("decoder layer", 1000);
  Eigen::MatrixXd gp = detail::read_array(r, "gripper_points");
  if (gp.rows() != 3 || gp.cols() < 1) r.fail("gripper_points must be 3 x N");
  m.gripper_points = gp;
  m.shape_codes = detail::read_array(r, "shape_codes");
  if (m.shape_codes.rows() < 1 || m.shape_codes.cols() < 1)
    r.fail("shape_codes must be non-empty");
  m.encoder = detail::read_mlp(r, "encoder", enc_layers);
  m.decoder = detail::read_mlp(r, "decoder", dec_layers);
  if (m.encoder.in_dim() != 3 + m.code_dim() + 1)
    r.fail("encoder input width does not match 3 + code_dim + 1");
  if (m.decoder.in_dim() != m.encoder.out_dim() * m.n_points())
    r.fail("decoder input width does not match encoder output x gripper points");
  if (m.decoder.out_dim() != 1) r.fail("decoder must produce a scalar energy");
  r.expect("end");
  r.done();
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  atomic_write_file(path, format_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// kinematic chain: joints carry the fixed offset (translation + rotation
// vector), the rotation axis and the limits; spheres attach to link frames.

inline std::string format_chain(const KinematicChain& chain) {
  std::ostringstream os;
  os << "se3dif.chain 1\n";
  os << "joints " << chain.joints.size() << '\n';
  for (const Joint& j : chain.joints) {
    os << "joint ";
    detail::write_vec3(os, j.offset.translation);
    os << ' ';
    detail::write_vec3(os, so3_logmap(j.offset.rotation));
    os << ' ';
    detail::write_vec3(os, j.axis);
    os << ' ' << fmt_g17(j.lo) << ' ' << fmt_g17(j.hi) << '\n';
  }
  os << "tool ";
  detail::write_vec3(os, chain.tool.translation);
  os << ' ';
  detail::write_vec3(os, so3_logmap(chain.tool.rotation));
  os << '\n';
  os << "spheres " << chain.spheres.size() << '\n';
  for (const CollisionSphere& s : chain.spheres) {
    os << "sphere " << s.link << ' ';
    detail::write_vec3(os, s.center);
    os << ' ' << fmt_g17(s.radius) << '\n';
  }
  return os.str();
}

inline KinematicChain parse_chain(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.chain");
  KinematicChain chain;
  r.expect("joints");
  int n = r.count("joint", 1000);
  for (int i = 0; i < n; ++i) {
    r.expect("joint");
    Joint j;
    j.offset.translation = detail::read_vec3(r);
    j.offset.rotation = so3_expmap(detail::read_vec3(r));
    j.axis = detail::read_vec3(r);
    j.lo = r.number();
    j.hi = r.number();
    chain.joints.push_back(j);
  }
  r.expect("tool");
  chain.tool.translation = detail::read_vec3(r);
  chain.tool.rotation = so3_expmap(detail::read_vec3(r));
  r.expect("spheres");
  int ns = r.count("sphere", 100000);
  for (int i = 0; i < ns; ++i) {
    r.expect("sphere");
    CollisionSphere s;
    s.link = static_cast<int>(r.integer());
    s.center = detail::read_vec3(r);
    s.radius = r.number();
    chain.spheres.push_back(s);
  }
  r.done();
  try {
    chain.validate();
  } catch (const Error& e) {
    throw IoError(origin + ": " + e.what());
  }
  return chain;
}

inline void save_chain(const std::string& path, const KinematicChain& chain) {
  atomic_write_file(path, format_chain(chain));
}

inline KinematicChain load_chain(const std::string& path) {
  return parse_chain(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// scene: everything the trajectory optimizer needs besides the model. The
// chain field is a file path (or a builtin name the CLI resolves), the preset
// picks a named weight set and overrides tweak individual terms.

struct SceneFile {
  std::string chain;
  double table_height = 0.0;
  Pose object_pose;
  std::vector<SceneBox> boxes;
  std::string preset;
  std::vector<std::pair<std::string, double>> overrides;
};

inline std::string format_scene(const SceneFile& scene) {
  std::ostringstream os;
  os << "se3dif.scene 1\n";
  os << "chain " << scene.chain << '\n';
  os << "table_height " << fmt_g17(scene.table_height) << '\n';
  os << "object ";
  detail::write_pose(os, scene.object_pose);
  os << '\n';
  os << "boxes " << scene.boxes.size() << '\n';
  for (const SceneBox& b : scene.boxes) {
    os << "box ";
    detail::write_pose(os, b.pose);
    os << ' ';
    detail::write_vec3(os, b.half_extents);
    os << '\n';
  }
  os << "preset " << scene.preset << '\n';
  os << "overrides " << scene.overrides.size() << '\n';
  for (const auto& [name, w] : scene.overrides)
    os << "override " << name << ' ' << fmt_g17(w) << '\n';
  return os.str();
}

inline SceneFile parse_scene(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.scene");
  SceneFile scene;
  r.expect("chain");
  scene.chain = r.word();
  r.expect("table_height");
  scene.table_height = r.number();
  r.expect("object");
  scene.object_pose = detail::read_pose(r);
  r.expect("boxes");
  int nb = r.count("box", 10000);
  for (int i = 0; i < nb; ++i) {
    r.expect("box");
    SceneBox b;
    b.pose = detail::read_pose(r);
    b.half_extents = detail::read_vec3(r);
    try {
      b.validate();
    } catch (const Error& e) {
      r.fail(e.what());
    }
    scene.boxes.push_back(b);
  }
  r.expect("preset");
  scene.preset = r.word();
  r.expect("overrides");
  int no = r.count("override", 1000);
  for (int i = 0; i < no; ++i) {
    r.expect("override");
    std::string name = r.word();
    try {
      cost_kind_from_name(name);  // reject unknown term names at load time
    } catch (const Error&) {
      r.fail("unknown cost term '" + name + "'");
    }
    double w = r.number();
    if (!(w > 0.0)) r.fail("override weight for '" + name + "' must be > 0");
    scene.overrides.emplace_back(name, w);
  }
  r.done();
  return scene;
}

inline void save_scene(const std::string& path, const SceneFile& scene) {
  atomic_write_file(path, format_scene(scene));
}

inline SceneFile load_scene(const std::string& path) {
  return parse_scene(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// trajectory: the T x d joint matrix plus the run seed and the final cost of
// every objective term.

struct TrajectoryFile {
  Eigen::MatrixXd waypoints;  // T x dof
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> costs;
  double total = 0.0;
};

inline std::string format_trajectory(const TrajectoryFile& tf) {
  std::ostringstream os;
  os << "se3dif.trajectory 1\n";
  os << "rows " << tf.waypoints.rows() << " cols " << tf.waypoints.cols() << '\n';
  for (Eigen::Index t = 0; t < tf.waypoints.rows(); ++t) {
    for (Eigen::Index c = 0; c < tf.waypoints.cols(); ++c) {
      os << fmt_g17(tf.waypoints(t, c));
      os << (c + 1 == tf.waypoints.cols() ? '\n' : ' ');
    }
  }
  os << "seed " << tf.seed << '\n';
  os << "costs " << tf.costs.size() << '\n';
  for (const auto& [name, v] : tf.costs) os << "cost " << name << ' ' << fmt_g17(v) << '\n';
  os << "total " << fmt_g17(tf.total) << '\n';
  return os.str();
}

inline TrajectoryFile parse_trajectory(const std::string& text, const std::string& origin) {
  detail::TokenReader r(text, origin);
  detail::header(r, "se3dif.trajectory");
  TrajectoryFile tf;
  r.expect("rows");
  int rows = r.count("waypoint");
  r.expect("cols");
  int cols = r.count("joint", 1000);
  tf.waypoints.resize(rows, cols);
  for (int t = 0; t < rows; ++t)
    for (int c = 0; c < cols; ++c) tf.waypoints(t, c) = r.number();
  if (!tf.waypoints.allFinite()) r.fail("trajectory has non-finite entries");
  r.expect("seed");
  tf.seed = r.uint64();
  r.expect("costs");
  int nc = r.count("cost term", 1000);
  for (int i = 0; i < nc; ++i) {
    r.expect("cost");
    std::string name = r.word();
    tf.costs.emplace_back(name, r.number());
  }
  r.expect("total");
  tf.total = r.number();
  r.done();
  return tf;
}

inline void save_trajectory(const std::string& path, const TrajectoryFile& tf) {
  atomic_write_file(path, format_trajectory(tf));
}

inline TrajectoryFile load_trajectory(const std::string& path) {
  return parse_trajectory(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// metrics log: tab-separated, one record per training step, header row first.
// Wall-clock time stays out; it goes to a sidecar so reruns are byte stable.

inline std::string format_metrics_log(const std::vector<double>& dsm,
                                      const std::vector<double>& sdf,
                                      const std::vector<double>& total) {
  if (dsm.size() != sdf.size() || dsm.size() != total.size())
    throw ConfigError("metrics columns out of sync");
  std::ostringstream os;
  os << "step\tL_dsm\tL_sdf\tL_total\n";
  for (std::size_t i = 0; i < dsm.size(); ++i)
    os << i << '\t' << fmt_g17(dsm[i]) << '\t' << fmt_g17(sdf[i]) << '\t' << fmt_g17(total[i])
       << '\n';
  return os.str();
}

}  // namespace se3dif
