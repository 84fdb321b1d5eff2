#pragma once

#include "bitesim/common.hpp"
#include "bitesim/geometry.hpp"

#include <string>

namespace bitesim {

enum class SkullPart { upper, mandible };

const char* to_string(SkullPart part);

struct RigidBody {
  std::string name;
  Pose pose;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  bool kinematic = true;
  TriMesh collision;  // in the body frame

  /// World velocity of a point rigidly attached to the body.
  Vec3 point_velocity(const Vec3& world_point) const {
    return linear_velocity + angular_velocity.cross(world_point - pose.translation);
  }
};

/// Force and torque about the body origin, both in world coordinates.
struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

/// Actuated hinge between skull and mandible. Angle 0 is the closed jaw;
/// positive angles open the mouth.
struct MandibleJoint {
  Vec3 pivot{0.0, -0.04, -0.03};      // skull frame, m
  Vec3 hinge_axis{-1.0, 0.0, 0.0};    // skull frame, unit
  double angle = 0.0;                 // rad
  double rate = 0.0;                  // rad/s
  double max_open = 0.35;             // rad
  double stiffness = 200.0;           // N m / rad
  double damping = 5.0;               // N m s / rad
  double target_angle = 0.0;          // rad
  double max_torque = 50.0;           // N m
  double inertia = 6.4e-6;            // kg m^2 about the hinge

  void validate() const;
};

/// Mandible pose relative to the skull: rotation by `angle` about the hinge
/// axis through the pivot. Throws ValidationError for angles outside range.
Pose mandible_pose(const MandibleJoint& joint, double angle);

/// PD servo torque kp (target - angle) - kd rate, clamped to max_torque.
double jaw_torque(const MandibleJoint& joint, double current_angle, double current_rate);

/// Torque of `wrench` (taken about `origin`) about the hinge axis.
double hinge_torque(const Wrench& wrench, const Vec3& origin, const Vec3& pivot_world, const Vec3& axis_world);

/// Advances the 1-DoF jaw by dt with semi-implicit Euler. The PD term is
/// integrated implicitly (stable for near-zero inertia) unless it saturates,
/// in which case the clamped torque is applied explicitly. The angle is
/// clamped to [0, max_open] with the rate zeroed at a limit. Updates the
/// mandible pose and velocities; the skull is never modified.
void step_skeleton(const RigidBody& skull, RigidBody& mandible, MandibleJoint& joint,
                   const Wrench& tendon_wrench, double dt);

/// Places the mandible at the joint's current angle with zero velocity.
void sync_mandible(const RigidBody& skull, RigidBody& mandible, const MandibleJoint& joint);

}  // namespace bitesim
