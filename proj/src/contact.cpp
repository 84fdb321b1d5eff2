#include "bitesim/contact.hpp"

#include <algorithm>
#include <cmath>

namespace bitesim {

Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

double capsule_signed_distance(const Vec3& p, const Capsule& capsule) {
  return (p - closest_point_on_segment(p, capsule.a, capsule.b)).norm() - capsule.radius;
}

void SpoonGeometry::validate() const {
  if (!(bowl_radius > 0.0) || !(handle_radius > 0.0) || !(handle_length >= 0.0)) {
    throw ValidationError("spoon: radii must be > 0 and handle_length >= 0");
  }
  if (!(bowl_length >= 2.0 * bowl_radius)) throw ValidationError("spoon: bowl_length must be >= 2 * bowl_radius");
}

Capsule Spoon::bowl() const {
  const double r = geometry.bowl_radius;
  return {pose.apply(Vec3(-r, 0, 0)), pose.apply(Vec3(-(geometry.bowl_length - r), 0, 0)), r};
}

Capsule Spoon::handle() const {
  const double back = geometry.bowl_length;
  return {pose.apply(Vec3(-back, 0, 0)), pose.apply(Vec3(-(back + geometry.handle_length), 0, 0)),
          geometry.handle_radius};
}

std::vector<SpoonContact> detect_spoon_contacts(const Spoon& spoon, std::span<const int> surface_vertices,
                                                std::span<const Vec3> positions) {
  const std::array<Capsule, 2> parts{spoon.bowl(), spoon.handle()};
  const double reach = std::max(parts[0].radius, parts[1].radius) + spoon.geometry.bowl_length +
                       spoon.geometry.handle_length;
  std::vector<SpoonContact> out;
  for (int v : surface_vertices) {
    const Vec3& p = positions[v];
    if ((p - spoon.tip()).squaredNorm() > reach * reach) continue;
    double best = 0.0;
    Vec3 best_closest = Vec3::Zero();
    bool hit = false;
    for (const Capsule& c : parts) {
      const Vec3 q = closest_point_on_segment(p, c.a, c.b);
      const double d = (p - q).norm() - c.radius;
      if (d < 0.0 && (!hit || d < best)) {
        best = d;
        best_closest = q;
        hit = true;
      }
    }
    if (!hit) continue;
    SpoonContact sc;
    sc.vertex = v;
    sc.penetration = -best;
    const Vec3 radial = p - best_closest;
    const double n = radial.norm();
    sc.normal = n > 0.0 ? Vec3(radial / n) : Vec3(spoon.pose.rotation * Vec3::UnitZ());
    sc.spoon_velocity = spoon.point_velocity(best_closest);
    out.push_back(sc);
  }
  return out;
}

void ContactParams::validate() const {
  if (stiffness < 0.0 || damping < 0.0 || tangential_viscosity < 0.0) {
    throw ValidationError("contact gains must be >= 0");
  }
}

PenaltyResult penalty_forces(std::span<const SpoonContact> contacts, std::span<const Vec3> positions,
                             std::span<const Vec3> velocities, const ContactParams& params, int step_index) {
  PenaltyResult out;
  out.vertex_forces.assign(positions.size(), Vec3::Zero());
  out.events.reserve(contacts.size());
  for (const SpoonContact& c : contacts) {
    const Vec3 relative = velocities[c.vertex] - c.spoon_velocity;
    const double penetration_rate = -relative.dot(c.normal);
    const double magnitude =
        std::max(0.0, params.stiffness * c.penetration + params.damping * penetration_rate);
    out.events.push_back({step_index, positions[c.vertex], c.normal, c.penetration, magnitude});
    if (magnitude <= 0.0) continue;
    Vec3 force = magnitude * c.normal;
    const Mat3 nn = c.normal * c.normal.transpose();
    Mat3 damping = params.damping * nn;
    if (params.tangential_viscosity > 0.0) {
      // Viscous sliding resistance, only while the contact is loaded.
      const Mat3 tangential = Mat3::Identity() - nn;
      force -= params.tangential_viscosity * (tangential * relative);
      damping += params.tangential_viscosity * tangential;
    }
    out.vertex_forces[c.vertex] += force;
    out.couplings.push_back({c.vertex, params.stiffness * nn, damping});
  }
  return out;
}

double average_step_force(std::span<const ContactEvent> events) {
  if (events.empty()) return 0.0;
  double sum = 0.0;
  for (const ContactEvent& e : events) sum += e.force_magnitude;
  return sum / static_cast<double>(events.size());
}

ForceTrace accumulate_metrics(std::span<const double> per_step_avg, double dt) {
  ForceTrace trace;
  trace.dt = dt;
  trace.per_step_avg.assign(per_step_avg.begin(), per_step_avg.end());
  for (double f : per_step_avg) {
    if (!(f >= 0.0)) throw ValidationError("per-step force must be finite and >= 0");
    trace.peak = std::max(trace.peak, f);
    trace.total += f;
  }
  return trace;
}

}  // namespace bitesim
