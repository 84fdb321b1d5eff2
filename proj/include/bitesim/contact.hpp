#pragma once

#include "bitesim/common.hpp"
#include "bitesim/fem.hpp"

#include <span>
#include <vector>

namespace bitesim {

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

/// Closest point to `p` on segment [a, b].
Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);

/// Signed distance from `p` to the capsule surface (negative inside).
double capsule_signed_distance(const Vec3& p, const Capsule& capsule);

struct SpoonGeometry {
  double bowl_length = 0.060;    // tip to back of bowl, m
  double bowl_radius = 0.012;
  double handle_length = 0.12;
  double handle_radius = 0.004;

  void validate() const;
};

/// Kinematic spoon. Body frame: origin at the bowl tip, +x along the spoon
/// axis toward the tip, +z out of the bowl.
struct Spoon {
  SpoonGeometry geometry;
  Pose pose;
  Vec3 linear_velocity = Vec3::Zero();   // of the tip
  Vec3 angular_velocity = Vec3::Zero();

  Vec3 tip() const { return pose.translation; }
  Vec3 axis() const { return pose.rotation * Vec3::UnitX(); }
  Capsule bowl() const;
  Capsule handle() const;
  Vec3 point_velocity(const Vec3& world_point) const {
    return linear_velocity + angular_velocity.cross(world_point - pose.translation);
  }
};

struct SpoonContact {
  int vertex = 0;
  double penetration = 0.0;
  Vec3 normal = Vec3::UnitZ();           // from spoon into skin
  Vec3 spoon_velocity = Vec3::Zero();    // spoon surface velocity at the closest point
};

/// Every listed vertex with negative signed distance to the bowl/handle union,
/// in the order given (callers pass ascending surface vertex indices).
std::vector<SpoonContact> detect_spoon_contacts(const Spoon& spoon, std::span<const int> surface_vertices,
                                                std::span<const Vec3> positions);

struct ContactEvent {
  int step_index = 0;
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double penetration = 0.0;
  double force_magnitude = 0.0;
};

struct ContactParams {
  double stiffness = 5000.0;          // N/m
  double damping = 10.0;              // N s/m
  double tangential_viscosity = 0.0;  // N s/m, off by default

  void validate() const;
};

struct PenaltyResult {
  Vec3List vertex_forces;
  std::vector<ContactEvent> events;
  std::vector<VertexCoupling> couplings;
};

/// Normal force max(0, k * penetration + c * penetration_rate) along the
/// contact normal, repulsive only. One event per contact.
PenaltyResult penalty_forces(std::span<const SpoonContact> contacts, std::span<const Vec3> positions,
                             std::span<const Vec3> velocities, const ContactParams& params, int step_index);

/// Mean force magnitude over one step's events; 0 for an empty step.
double average_step_force(std::span<const ContactEvent> events);

struct ForceTrace {
  double dt = 0.0;
  std::vector<double> per_step_avg;
  double peak = 0.0;
  double total = 0.0;

  double impulse() const { return total * dt; }
};

/// peak = max, total = plain sum of the per-step averages.
ForceTrace accumulate_metrics(std::span<const double> per_step_avg, double dt);

}  // namespace bitesim
