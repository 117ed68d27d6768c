#pragma once

// Named cost-weight presets for the trajectory optimizer and the glue that
// turns a scene file into a ready objective. Presets pin the weights used for
// the three desk tasks; a scene file's overrides then adjust individual terms.

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

#include "se3dif/errors.hpp"
#include "se3dif/io.hpp"
#include "se3dif/kinematics.hpp"
#include "se3dif/motionopt.hpp"

namespace se3dif {

// Options the scene file cannot know: the run's start configuration and,
// for the reorient/shelf tasks, where the object should end up.
struct SceneBuildOptions {
  int T = 32;
  Eigen::VectorXd q_init;  // empty = zeros
  Pose object_at_place;    // used by grasp_place_similarity terms
  bool has_place = false;  // false = place equals the scene's object pose
};

inline std::vector<std::string> preset_names() {
  return {"pick-occlusion", "pick-reorient", "pick-place-shelf"};
}

// Weighted term list for one preset. Box and table terms get their geometry
// filled in by build_objective; grasp terms attach at the final waypoint for
// the pick task and at the trajectory midpoint for the two place tasks.
inline std::vector<CostTerm> preset_terms(const std::string& name, int T) {
  auto term = [](CostKind kind, double w) {
    CostTerm t;
    t.kind = kind;
    t.weight = w;
    return t;
  };
  std::vector<CostTerm> out;
  if (name == "pick-occlusion") {
    CostTerm grasp = term(CostKind::GraspEnergy, 0.5);
    grasp.waypoint = -1;  // last waypoint
    out.push_back(grasp);
    out.push_back(term(CostKind::Smooth, 10.0));
    out.push_back(term(CostKind::Table, 20.0));
    out.push_back(term(CostKind::Box, 20.0));
    out.push_back(term(CostKind::FixInit, 10.0));
    out.push_back(term(CostKind::Pregrasp, 5.0));
  } else if (name == "pick-reorient") {
    CostTerm grasp = term(CostKind::GraspEnergy, 2.0);
    grasp.waypoint = T / 2;
    out.push_back(grasp);
    out.push_back(term(CostKind::Smooth, 10.0));
    out.push_back(term(CostKind::Table, 20.0));
    out.push_back(term(CostKind::FixInit, 1.0));
    out.push_back(term(CostKind::Pregrasp, 1.0));
    CostTerm sim = term(CostKind::GraspPlaceSimilarity, 10.0);
    sim.waypoint = T / 2;
    out.push_back(sim);
  } else if (name == "pick-place-shelf") {
    CostTerm grasp = term(CostKind::GraspEnergy, 1.0);
    grasp.waypoint = T / 2;
    out.push_back(grasp);
    out.push_back(term(CostKind::Smooth, 10.0));
    out.push_back(term(CostKind::Table, 10.0));
    out.push_back(term(CostKind::FixInit, 10.0));
    out.push_back(term(CostKind::Pregrasp, 10.0));
    CostTerm sim = term(CostKind::GraspPlaceSimilarity, 1.0);
    sim.waypoint = T / 2;
    out.push_back(sim);
    out.push_back(term(CostKind::Box, 10.0));
  } else {
    throw ConfigError("unknown weight preset: " + name);
  }
  return out;
}

// Scene + chain + model -> objective. Overrides replace the weight of every
// term of the named kind; an override for a kind the preset lacks is an error
// (the scene asked for a term that will never be evaluated).
inline Objective build_objective(const SceneFile& scene, const KinematicChain& chain,
                                 const EnergyModel* model, int code,
                                 const SceneBuildOptions& opts) {
  Objective obj;
  obj.chain = &chain;
  obj.model = model;
  obj.object_pose = scene.object_pose;
  obj.code = code;
  obj.terms = preset_terms(scene.preset, opts.T);

  Eigen::VectorXd q_init = opts.q_init;
  if (q_init.size() == 0) q_init = Eigen::VectorXd::Zero(chain.dof());
  if (q_init.size() != chain.dof())
    throw ConfigError("q_init length does not match the chain's dof");
  Pose place = opts.has_place ? opts.object_at_place : scene.object_pose;

  for (CostTerm& t : obj.terms) {
    switch (t.kind) {
      case CostKind::Table:
        t.table_height = scene.table_height;
        break;
      case CostKind::Box:
        t.boxes = scene.boxes;
        break;
      case CostKind::FixInit:
        t.q_init = q_init;
        break;
      case CostKind::GraspPlaceSimilarity:
        t.object_at_grasp = scene.object_pose;
        t.object_at_place = place;
        break;
      default:
        break;
    }
  }

  for (const auto& [name, w] : scene.overrides) {
    CostKind kind = cost_kind_from_name(name);
    bool hit = false;
    for (CostTerm& t : obj.terms)
      if (t.kind == kind) {
        t.weight = w;
        hit = true;
      }
    if (!hit)
      throw ConfigError("override '" + name + "' matches no term of preset " + scene.preset);
  }

  // a box preset term with no scene boxes contributes nothing; drop it
  std::vector<CostTerm> kept;
  for (CostTerm& t : obj.terms)
    if (t.kind != CostKind::Box || !t.boxes.empty()) kept.push_back(std::move(t));
  obj.terms = std::move(kept);

  obj.validate();
  return obj;
}

}  // namespace se3dif
