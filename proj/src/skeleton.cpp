#include "bitesim/skeleton.hpp"

#include <algorithm>
#include <cmath>

namespace bitesim {

const char* to_string(SkullPart part) { return part == SkullPart::upper ? "upper" : "mandible"; }

void MandibleJoint::validate() const {
  if (std::abs(hinge_axis.norm() - 1.0) > 1e-12) throw ValidationError("jaw: hinge_axis must be unit length");
  if (!(max_open >= 0.0)) throw ValidationError("jaw: max_open must be >= 0");
  if (angle < 0.0 || angle > max_open) throw ValidationError("jaw: angle outside [0, max_open]");
  if (stiffness < 0.0 || damping < 0.0 || max_torque < 0.0) throw ValidationError("jaw: gains must be >= 0");
  if (!(inertia > 0.0)) throw ValidationError("jaw: inertia must be > 0");
}

Pose mandible_pose(const MandibleJoint& joint, double angle) {
  if (!(angle >= 0.0 && angle <= joint.max_open)) {
    throw ValidationError("mandible angle " + fmt9(angle) + " outside [0, " + fmt9(joint.max_open) + "]");
  }
  Pose p;
  p.rotation = Quat(Eigen::AngleAxisd(angle, joint.hinge_axis.normalized()));
  p.translation = joint.pivot - p.rotation * joint.pivot;
  return p;
}

double jaw_torque(const MandibleJoint& joint, double current_angle, double current_rate) {
  const double tau = joint.stiffness * (joint.target_angle - current_angle) - joint.damping * current_rate;
  return std::clamp(tau, -joint.max_torque, joint.max_torque);
}

double hinge_torque(const Wrench& wrench, const Vec3& origin, const Vec3& pivot_world, const Vec3& axis_world) {
  const Vec3 about_pivot = wrench.torque + (origin - pivot_world).cross(wrench.force);
  return axis_world.dot(about_pivot);
}

void sync_mandible(const RigidBody& skull, RigidBody& mandible, const MandibleJoint& joint) {
  mandible.pose = skull.pose.compose(mandible_pose(joint, joint.angle));
  const Vec3 axis = skull.pose.rotation * joint.hinge_axis;
  const Vec3 pivot = skull.pose.apply(joint.pivot);
  mandible.angular_velocity = joint.rate * axis;
  mandible.linear_velocity = mandible.angular_velocity.cross(mandible.pose.translation - pivot);
}

void step_skeleton(const RigidBody& skull, RigidBody& mandible, MandibleJoint& joint,
                   const Wrench& tendon_wrench, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  const Vec3 axis = skull.pose.rotation * joint.hinge_axis;
  const Vec3 pivot = skull.pose.apply(joint.pivot);
  const double external = hinge_torque(tendon_wrench, mandible.pose.translation, pivot, axis);
  if (!std::isfinite(external)) throw ValidationError("non-finite torque on mandible");

  const double i = joint.inertia;
  const double kp = joint.stiffness;
  const double kd = joint.damping;
  // Backward-Euler PD: tau = kp (target - angle - dt rate') - kd rate'.
  double rate = (i * joint.rate + dt * (kp * (joint.target_angle - joint.angle) + external)) /
                (i + dt * kd + dt * dt * kp);
  const double pd = kp * (joint.target_angle - joint.angle - dt * rate) - kd * rate;
  if (std::abs(pd) > joint.max_torque) {
    const double clamped = std::copysign(joint.max_torque, pd);
    rate = joint.rate + dt * (clamped + external) / i;
  }
  double angle = joint.angle + dt * rate;
  if (angle <= 0.0) {
    angle = 0.0;
    rate = 0.0;
  } else if (angle >= joint.max_open) {
    angle = joint.max_open;
    rate = 0.0;
  }
  joint.angle = angle;
  joint.rate = rate;
  sync_mandible(skull, mandible, joint);
}

}  // namespace bitesim
