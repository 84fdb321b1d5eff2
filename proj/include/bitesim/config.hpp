#pragma once

#include "bitesim/bite.hpp"
#include "bitesim/contact.hpp"
#include "bitesim/fem.hpp"
#include "bitesim/geometry.hpp"
#include "bitesim/skeleton.hpp"
#include "bitesim/skinning.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace bitesim {

struct HeadConfig {
  std::string mesh_path;  // empty: use the procedural proxy
  HeadProxySpec proxy;
  std::optional<MouthAnnotation> mouth;  // required with mesh_path
  double total_mass = 5.0;               // kg
  bool gravity = false;
  Vec3 gravity_vector{0.0, 0.0, -9.81};
};

struct SkullConfig {
  std::string upper_mesh_path;     // trimesh v1; empty: ellipsoid shell below
  std::string mandible_mesh_path;  // trimesh v1; empty: box shell below
  Vec3 upper_center{0.0, 0.0, 0.01};
  Vec3 upper_semi_axes{0.07, 0.1, 0.045};
  int shell_rings = 8;
  int shell_segments = 12;
  Vec3 mandible_center{0.0, 0.03, -0.065};
  Vec3 mandible_half_extents{0.055, 0.055, 0.012};
  double sample_spacing = 0.06;  // m
};

/// Everything needed to assemble and run a scene. Defaults are the values
/// documented in the README.
struct SceneConfig {
  HeadConfig head;
  MaterialParams material;
  SkullConfig skull;
  MandibleJoint jaw;
  TendonDefaults tendon;
  SpoonGeometry spoon;
  ContactParams contact;
  double dt = 0.01;  // s
  SolverSettings solver;
  BiteTransferParams trajectory;
  // Added to every spoon position. The default aims the spoon at the middle
  // of the opening with the jaw dropped, just below the slit center.
  Vec3 spoon_offset{0.0, 0.0, -0.006};

  void validate() const;
};

/// Parses the flat `key = value` format with `[section]` headers. Unknown
/// sections or keys and malformed values throw ConfigError with the line.
SceneConfig parse_scene_config(std::istream& in);
SceneConfig load_scene_config(const std::string& path);

/// Writes every key with its current value; parse_scene_config reads it back.
void write_scene_config(std::ostream& out, const SceneConfig& config);

}  // namespace bitesim
