#pragma once

#include "bitesim/common.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bitesim {

using Tet = std::array<int, 4>;
using Tri = std::array<int, 3>;

/// Center and axes of the mouth opening, carried by meshes that have one.
struct MouthAnnotation {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();
  Vec3 up = Vec3::UnitZ();
};

/// Volumetric mesh of the deformable head.
///
/// Invariants (enforced by every constructor in this module):
///  - all tet and surface indices are in range;
///  - every tet has signed volume >= kMinTetVolume in its stored order;
///  - surface_tris are exactly the faces owned by one tet, outward oriented;
///  - vertex_mass has one entry per vertex.
struct TetMesh {
  Vec3List vertices;
  std::vector<Tet> tets;
  std::vector<Tri> surface_tris;
  std::vector<double> vertex_mass;
  std::optional<MouthAnnotation> mouth;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t tet_count() const { return tets.size(); }

  /// Sorted, de-duplicated indices of vertices referenced by surface_tris.
  std::vector<int> surface_vertices() const;
};

/// Closed triangle shell (skull parts, spoon-free geometry).
struct TriMesh {
  Vec3List vertices;
  std::vector<Tri> faces;
};

struct MouthSlit {
  Vec3 center{0.0, 0.11, -0.03};  // on the front of the head
  double half_width = 0.025;      // along x
  double half_height = 0.006;     // along z
  double depth = 0.0825;          // along -y from center
};

/// Procedural stand-in for a scanned head: an ellipsoidal tet lattice with a
/// box-shaped mouth cavity. The head looks along +y with +z up.
struct HeadProxySpec {
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes{0.09, 0.11, 0.10};
  std::array<int, 3> lattice_resolution{6, 8, 10};
  MouthSlit mouth_slit;
};

inline constexpr double kMinTetVolume = 1e-12;

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Signed volume of tet `tet_index` under its stored vertex order.
double tet_volume(const TetMesh& mesh, std::size_t tet_index);

double total_volume(const TetMesh& mesh);

/// Builds a mesh from raw vertices and tets: checks indices and orientation,
/// derives the boundary, and zero-initializes masses. Throws ValidationError
/// naming the first offending element.
TetMesh build_tet_mesh(Vec3List vertices, std::vector<Tet> tets);

/// Boundary faces (owned by exactly one tet), outward oriented, in tet order.
/// Throws ValidationError for faces shared by more than two tets (non-manifold)
/// or internal faces whose two tets agree in orientation.
std::vector<Tri> extract_surface(const std::vector<Tet>& tets);

/// Parses the `tetmesh v1` text format.
TetMesh load_tet_mesh(std::istream& in);
TetMesh load_tet_mesh_file(const std::string& path);
void write_tet_mesh(std::ostream& out, const TetMesh& mesh);

/// Parses the `trimesh v1` text format.
TriMesh load_tri_mesh(std::istream& in);
TriMesh load_tri_mesh_file(const std::string& path);

/// Regular lattice over [0,dims], each cell split into 5 tets; the split
/// alternates with cell parity so neighbouring cells share face diagonals.
TetMesh make_box_tet_mesh(const Vec3& dims, const std::array<int, 3>& resolution);

/// Ellipsoidal lattice head with a mouth cavity carved out. Keeps cells whose
/// center lies inside the ellipsoid, then removes tets whose centroid lies in
/// the slit box. Throws ValidationError on an invalid spec or when carving
/// disconnects the mesh.
TetMesh make_head_proxy(const HeadProxySpec& spec);

/// Uniform lumped mass: every vertex receives total_mass / vertex_count.
TetMesh distribute_mass(TetMesh mesh, double total_mass);

/// Number of face-connected components among the tets.
int tet_components(const TetMesh& mesh);

/// Applies a rigid transform to vertices (and the mouth annotation).
TetMesh transformed(const TetMesh& mesh, const Pose& pose);
TriMesh transformed(const TriMesh& mesh, const Pose& pose);

/// Closed UV-ellipsoid shell with `rings` latitude bands and `segments`
/// longitude sectors, outward oriented.
TriMesh make_ellipsoid_shell(const Vec3& center, const Vec3& semi_axes, int rings, int segments);

/// Closed box shell, two triangles per face, outward oriented.
TriMesh make_box_shell(const Vec3& center, const Vec3& half_extents);

}  // namespace bitesim
