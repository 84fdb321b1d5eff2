#include "bitesim/skinning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace bitesim {

bool point_in_tet(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Mat3 m;
  m << b - a, c - a, d - a;
  const Vec3 w = m.partialPivLu().solve(p - a);
  constexpr double eps = 1e-12;
  return w.x() >= -eps && w.y() >= -eps && w.z() >= -eps && w.sum() <= 1.0 + eps;
}

Vec3List sample_surface(const TriMesh& mesh, double spacing) {
  if (!(spacing > 0.0)) throw ValidationError("sample spacing must be positive");
  Vec3List out;
  for (const Tri& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double longest = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    const int n = std::max(1, static_cast<int>(std::ceil(longest / spacing - 1e-9)));
    const Vec3 e1 = (b - a) / n;
    const Vec3 e2 = (c - a) / n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; i + j < n; ++j) {
        const Vec3 base = a + i * e1 + j * e2;
        out.push_back(base + (e1 + e2) / 3.0);  // upward sub-triangle
        if (i + j + 1 < n) out.push_back(base + 2.0 * (e1 + e2) / 3.0);  // downward one
      }
    }
  }
  return out;
}

std::vector<AttachmentContact> detect_attachment_contacts(std::span<const SkullSurface> surfaces,
                                                          const TetMesh& soft_mesh, double sample_spacing) {
  struct Box {
    Vec3 lo, hi;
  };
  std::vector<Box> boxes;
  boxes.reserve(soft_mesh.tets.size());
  for (const Tet& t : soft_mesh.tets) {
    Box b{soft_mesh.vertices[t[0]], soft_mesh.vertices[t[0]]};
    for (int k = 1; k < 4; ++k) {
      b.lo = b.lo.cwiseMin(soft_mesh.vertices[t[k]]);
      b.hi = b.hi.cwiseMax(soft_mesh.vertices[t[k]]);
    }
    boxes.push_back(b);
  }
  auto inside_head = [&](const Vec3& p) {
    for (std::size_t i = 0; i < soft_mesh.tets.size(); ++i) {
      if ((p.array() < boxes[i].lo.array() - 1e-12).any() || (p.array() > boxes[i].hi.array() + 1e-12).any()) {
        continue;
      }
      const Tet& t = soft_mesh.tets[i];
      if (point_in_tet(p, soft_mesh.vertices[t[0]], soft_mesh.vertices[t[1]], soft_mesh.vertices[t[2]],
                       soft_mesh.vertices[t[3]])) {
        return true;
      }
    }
    return false;
  };

  std::vector<AttachmentContact> contacts;
  for (const SkullSurface& s : surfaces) {
    for (const Vec3& local : sample_surface(s.mesh, sample_spacing)) {
      const Vec3 world = s.pose.apply(local);
      if (inside_head(world)) contacts.push_back({world, s.part, local});
    }
  }
  if (contacts.empty()) throw ValidationError("no skull surface sample lies inside the soft head");
  return contacts;
}

std::vector<int> build_injective_mapping(std::span<const Vec3> contacts, std::span<const Vec3> vertices) {
  if (contacts.size() > vertices.size()) {
    throw ValidationError("injective mapping impossible: " + std::to_string(contacts.size()) + " contacts, " +
                          std::to_string(vertices.size()) + " vertices");
  }
  std::vector<char> used(vertices.size(), 0);
  std::vector<int> mapping;
  mapping.reserve(contacts.size());
  for (const Vec3& c : contacts) {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < vertices.size(); ++v) {
      if (used[v]) continue;
      const double d2 = (vertices[v] - c).squaredNorm();
      if (d2 < best_d2) {  // strict: lowest index wins ties
        best_d2 = d2;
        best = static_cast<int>(v);
      }
    }
    used[best] = 1;
    mapping.push_back(best);
  }
  return mapping;
}

TendonRig create_tendons(std::span<const int> mapping, std::span<const AttachmentContact> contacts,
                         const TetMesh& soft_mesh, const TendonDefaults& defaults) {
  if (mapping.size() != contacts.size()) throw ValidationError("mapping and contact counts differ");
  if (defaults.stiffness < 0.0 || defaults.damping < 0.0 || defaults.slack_fraction < 0.0 ||
      defaults.slack_fraction > 1.0) {
    throw ValidationError("tendon defaults out of range");
  }
  TendonRig rig;
  std::vector<char> seen(soft_mesh.vertices.size(), 0);
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const int v = mapping[i];
    if (v < 0 || static_cast<std::size_t>(v) >= soft_mesh.vertices.size() || seen[v]) {
      throw ValidationError("mapping is not injective at contact " + std::to_string(i));
    }
    seen[v] = 1;
    Tendon t;
    t.skull_part = contacts[i].skull_part;
    t.site_local = contacts[i].local_coords;
    t.soft_vertex = v;
    t.rest_length = (contacts[i].position - soft_mesh.vertices[v]).norm();
    t.min_length = t.rest_length * (1.0 - defaults.slack_fraction);
    t.max_length = t.rest_length * (1.0 + defaults.slack_fraction);
    t.stiffness = defaults.stiffness;
    t.damping = defaults.damping;
    rig.tendons.push_back(t);
  }
  rig.skull_skin_collision = false;
  return rig;
}

TendonForces tendon_forces(const TendonRig& rig, const RigidBody& skull, const RigidBody& mandible,
                           std::span<const Vec3> positions, std::span<const Vec3> velocities) {
  TendonForces out;
  out.vertex_forces.assign(positions.size(), Vec3::Zero());
  for (const Tendon& t : rig.tendons) {
    const RigidBody& body = t.skull_part == SkullPart::upper ? skull : mandible;
    Wrench& wrench = t.skull_part == SkullPart::upper ? out.upper : out.mandible;
    const Vec3 site = body.pose.apply(t.site_local);
    const Vec3& x = positions[t.soft_vertex];
    const Vec3 delta = site - x;
    const double length = delta.norm();
    if (!std::isfinite(length)) throw ValidationError("non-finite tendon state");
    if (length <= 0.0) continue;  // direction undefined
    const Vec3 u = delta / length;
    const double rate = u.dot(body.point_velocity(site) - velocities[t.soft_vertex]);

    double tension = 0.0;
    if (length > t.max_length) {
      tension = std::max(0.0, t.stiffness * (length - t.max_length) + t.damping * rate);
    } else if (length < t.min_length) {
      tension = std::min(0.0, t.stiffness * (length - t.min_length) + t.damping * rate);
    } else {
      continue;
    }
    const Vec3 on_vertex = tension * u;
    out.vertex_forces[t.soft_vertex] += on_vertex;
    wrench.force -= on_vertex;
    wrench.torque += (site - body.pose.translation).cross(-on_vertex);
    if (tension != 0.0) {
      const Mat3 uu = u * u.transpose();
      out.couplings.push_back({t.soft_vertex, t.stiffness * uu, t.damping * uu});
    }
  }
  return out;
}

void write_rig_dump(std::ostream& out, const TendonRig& rig) {
  for (std::size_t i = 0; i < rig.tendons.size(); ++i) {
    const Tendon& t = rig.tendons[i];
    out << "tendon " << i << " part=" << to_string(t.skull_part) << " site=" << fmt9(t.site_local.x()) << ','
        << fmt9(t.site_local.y()) << ',' << fmt9(t.site_local.z()) << " vertex=" << t.soft_vertex
        << " rest=" << fmt9(t.rest_length) << " range=" << fmt9(t.min_length) << ',' << fmt9(t.max_length)
        << '\n';
  }
}

}  // namespace bitesim
