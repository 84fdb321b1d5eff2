#pragma once

#include "bitesim/common.hpp"
#include "bitesim/fem.hpp"
#include "bitesim/geometry.hpp"
#include "bitesim/skeleton.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace bitesim {

/// A skull part's collision shell together with the part's rest pose.
struct SkullSurface {
  SkullPart part = SkullPart::upper;
  TriMesh mesh;  // part frame
  Pose pose;     // part frame -> world at rest
};

struct AttachmentContact {
  Vec3 position = Vec3::Zero();  // world, at rest
  SkullPart skull_part = SkullPart::upper;
  Vec3 local_coords = Vec3::Zero();  // in the part frame
};

struct Tendon {
  SkullPart skull_part = SkullPart::upper;
  Vec3 site_local = Vec3::Zero();
  int soft_vertex = 0;
  double rest_length = 0.0;
  double min_length = 0.0;
  double max_length = 0.0;
  double stiffness = 0.0;
  double damping = 0.0;
};

struct TendonDefaults {
  double stiffness = 2000.0;    // N/m
  double damping = 5.0;         // N s/m
  double slack_fraction = 0.05;
};

struct TendonRig {
  std::vector<Tendon> tendons;
  /// Skull and skin never collide once tendons carry the coupling.
  bool skull_skin_collision = false;
};

/// Barycentric point-in-tet test; points on faces count as inside.
bool point_in_tet(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Centroids of an n x n barycentric subdivision of every face, where n is
/// the smallest integer making sub-edges no longer than `spacing`. Ordered by
/// face, then sub-triangle.
Vec3List sample_surface(const TriMesh& mesh, double spacing);

/// Samples each skull surface (in its rest pose) and keeps the samples lying
/// inside some tet of the soft mesh. Ordered by surface, then sample. Throws
/// ValidationError when nothing lies inside the head.
std::vector<AttachmentContact> detect_attachment_contacts(std::span<const SkullSurface> surfaces,
                                                          const TetMesh& soft_mesh, double sample_spacing);

/// Greedy injective nearest-vertex assignment: contacts are visited in order
/// and each takes the closest vertex not yet taken (lowest index on exact
/// ties). Returns the vertex index per contact. Throws ValidationError when
/// there are more contacts than vertices.
std::vector<int> build_injective_mapping(std::span<const Vec3> contacts, std::span<const Vec3> vertices);

/// One tendon per contact, linking the contact's skull site to its mapped
/// vertex, with slack band rest_length * (1 -/+ slack_fraction).
TendonRig create_tendons(std::span<const int> mapping, std::span<const AttachmentContact> contacts,
                         const TetMesh& soft_mesh, const TendonDefaults& defaults);

struct TendonForces {
  Vec3List vertex_forces;
  Wrench upper;     // about the upper skull origin
  Wrench mandible;  // about the mandible origin
  std::vector<VertexCoupling> couplings;  // linearization of engaged tendons
};

/// Spring-damper with a deadband. Tension k (L - nearest bound) + c dL/dt is
/// applied along the tendon line, equal and opposite on the vertex and the
/// skull site. The damping term never flips the sign of the spring term.
TendonForces tendon_forces(const TendonRig& rig, const RigidBody& skull, const RigidBody& mandible,
                           std::span<const Vec3> positions, std::span<const Vec3> velocities);

/// Text dump, one line per tendon.
void write_rig_dump(std::ostream& out, const TendonRig& rig);

}  // namespace bitesim
