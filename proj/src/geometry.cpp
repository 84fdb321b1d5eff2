#include "bitesim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace bitesim {

std::string fmt9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

namespace {

// Outward faces of a positively oriented tet (v0, v1, v2, v3).
constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}}};

using FaceKey = std::array<int, 3>;

FaceKey sorted_face(const Tri& f) {
  FaceKey k = f;
  std::sort(k.begin(), k.end());
  return k;
}

// True when `a` and `b` visit the same cyclic vertex order.
bool same_winding(const Tri& a, const Tri& b) {
  for (int s = 0; s < 3; ++s) {
    if (a[0] == b[s] && a[1] == b[(s + 1) % 3] && a[2] == b[(s + 2) % 3]) return true;
  }
  return false;
}

// Strips `#` comments and surrounding whitespace; returns false for blank lines.
bool next_content_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    return true;
  }
  return false;
}

[[noreturn]] void parse_fail(int line_no, const std::string& msg) {
  throw ParseError("line " + std::to_string(line_no) + ": " + msg);
}

struct RawMesh {
  Vec3List vertices;
  std::vector<std::array<int, 4>> cells;  // only the first `arity` entries used
};

// Shared reader for the tetmesh/trimesh text formats.
RawMesh read_indexed_text(std::istream& in, const std::string& magic, char element_tag, int arity) {
  std::string line;
  int line_no = 0;
  if (!next_content_line(in, line, line_no) || line != magic) {
    parse_fail(line_no, "expected header '" + magic + "'");
  }
  if (!next_content_line(in, line, line_no)) parse_fail(line_no, "missing counts line");
  long nv = -1, ne = -1;
  {
    std::istringstream ss(line);
    std::string extra;
    if (!(ss >> nv >> ne) || (ss >> extra) || nv < 0 || ne < 0) {
      parse_fail(line_no, "malformed counts line '" + line + "'");
    }
  }
  RawMesh raw;
  raw.vertices.reserve(static_cast<std::size_t>(nv));
  raw.cells.reserve(static_cast<std::size_t>(ne));
  for (long i = 0; i < nv; ++i) {
    if (!next_content_line(in, line, line_no)) {
      parse_fail(line_no, "expected " + std::to_string(nv) + " vertices, found " + std::to_string(i));
    }
    std::istringstream ss(line);
    std::string tag, extra;
    double x, y, z;
    if (!(ss >> tag >> x >> y >> z) || tag != "v" || (ss >> extra)) {
      parse_fail(line_no, "malformed vertex " + std::to_string(i));
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      parse_fail(line_no, "non-finite vertex " + std::to_string(i));
    }
    raw.vertices.emplace_back(x, y, z);
  }
  const std::string tag_str(1, element_tag);
  for (long i = 0; i < ne; ++i) {
    if (!next_content_line(in, line, line_no)) {
      parse_fail(line_no, "expected " + std::to_string(ne) + " elements, found " + std::to_string(i));
    }
    std::istringstream ss(line);
    std::string tag, extra;
    std::array<int, 4> idx{0, 0, 0, 0};
    ss >> tag;
    bool ok = tag == tag_str;
    for (int k = 0; k < arity && ok; ++k) ok = static_cast<bool>(ss >> idx[k]);
    if (!ok || (ss >> extra)) parse_fail(line_no, "malformed element " + std::to_string(i));
    raw.cells.push_back(idx);
  }
  if (next_content_line(in, line, line_no)) parse_fail(line_no, "unexpected trailing content");
  return raw;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

// Flips triangles of a convex, closed shell so normals face away from `inside`.
void orient_outward(TriMesh& mesh, const Vec3& inside) {
  for (auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const Vec3 n = (b - a).cross(c - a);
    if (n.dot((a + b + c) / 3.0 - inside) < 0.0) std::swap(f[1], f[2]);
  }
}

}  // namespace

std::vector<int> TetMesh::surface_vertices() const {
  std::vector<char> used(vertices.size(), 0);
  for (const auto& t : surface_tris) {
    for (int v : t) used[v] = 1;
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (used[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double tet_volume(const TetMesh& mesh, std::size_t tet_index) {
  const Tet& t = mesh.tets.at(tet_index);
  return signed_tet_volume(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]],
                           mesh.vertices[t[3]]);
}

double total_volume(const TetMesh& mesh) {
  double sum = 0.0;
  for (std::size_t i = 0; i < mesh.tets.size(); ++i) sum += tet_volume(mesh, i);
  return sum;
}

std::vector<Tri> extract_surface(const std::vector<Tet>& tets) {
  struct FaceUse {
    Tri oriented;
    int tet;
    int count;
  };
  std::map<FaceKey, FaceUse> faces;
  for (std::size_t t = 0; t < tets.size(); ++t) {
    for (const auto& lf : kTetFaces) {
      const Tri f{tets[t][lf[0]], tets[t][lf[1]], tets[t][lf[2]]};
      auto [it, inserted] = faces.try_emplace(sorted_face(f), FaceUse{f, static_cast<int>(t), 1});
      if (inserted) continue;
      FaceUse& use = it->second;
      if (use.count >= 2) {
        throw ValidationError("non-manifold boundary: face shared by more than two tets at tet " +
                              std::to_string(t));
      }
      if (same_winding(use.oriented, f)) {
        throw ValidationError("inconsistent orientation between tet " + std::to_string(use.tet) +
                              " and tet " + std::to_string(t));
      }
      ++use.count;
    }
  }

  // Collect boundary faces in (tet, local face) order for determinism.
  std::vector<Tri> surface;
  for (std::size_t t = 0; t < tets.size(); ++t) {
    for (const auto& lf : kTetFaces) {
      const Tri f{tets[t][lf[0]], tets[t][lf[1]], tets[t][lf[2]]};
      if (faces.at(sorted_face(f)).count == 1) surface.push_back(f);
    }
  }

  return surface;
}

TetMesh build_tet_mesh(Vec3List vertices, std::vector<Tet> tets) {
  const int nv = static_cast<int>(vertices.size());
  for (std::size_t t = 0; t < tets.size(); ++t) {
    for (int v : tets[t]) {
      if (v < 0 || v >= nv) {
        throw ValidationError("tet " + std::to_string(t) + " references out-of-range vertex " +
                              std::to_string(v));
      }
    }
    const double vol = signed_tet_volume(vertices[tets[t][0]], vertices[tets[t][1]],
                                         vertices[tets[t][2]], vertices[tets[t][3]]);
    if (!(vol >= kMinTetVolume)) {
      throw ValidationError("tet " + std::to_string(t) + (vol < 0.0 ? " is inverted" : " is degenerate") +
                            " (signed volume " + fmt9(vol) + ")");
    }
  }
  TetMesh mesh;
  mesh.surface_tris = extract_surface(tets);
  mesh.vertex_mass.assign(vertices.size(), 0.0);
  mesh.vertices = std::move(vertices);
  mesh.tets = std::move(tets);
  return mesh;
}

TetMesh load_tet_mesh(std::istream& in) {
  RawMesh raw = read_indexed_text(in, "tetmesh v1", 't', 4);
  std::vector<Tet> tets(raw.cells.begin(), raw.cells.end());
  return build_tet_mesh(std::move(raw.vertices), std::move(tets));
}

TetMesh load_tet_mesh_file(const std::string& path) {
  auto in = open_or_throw(path);
  return load_tet_mesh(in);
}

void write_tet_mesh(std::ostream& out, const TetMesh& mesh) {
  out << "tetmesh v1\n" << mesh.vertices.size() << ' ' << mesh.tets.size() << '\n';
  for (const auto& v : mesh.vertices) {
    out << "v " << fmt9(v.x()) << ' ' << fmt9(v.y()) << ' ' << fmt9(v.z()) << '\n';
  }
  for (const auto& t : mesh.tets) {
    out << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  }
}

TriMesh load_tri_mesh(std::istream& in) {
  RawMesh raw = read_indexed_text(in, "trimesh v1", 'f', 3);
  TriMesh mesh;
  const int nv = static_cast<int>(raw.vertices.size());
  for (std::size_t f = 0; f < raw.cells.size(); ++f) {
    const Tri tri{raw.cells[f][0], raw.cells[f][1], raw.cells[f][2]};
    for (int v : tri) {
      if (v < 0 || v >= nv) {
        throw ValidationError("face " + std::to_string(f) + " references out-of-range vertex " +
                              std::to_string(v));
      }
    }
    mesh.faces.push_back(tri);
  }
  mesh.vertices = std::move(raw.vertices);
  return mesh;
}

TriMesh load_tri_mesh_file(const std::string& path) {
  auto in = open_or_throw(path);
  return load_tri_mesh(in);
}

namespace {

// Corner c of a lattice cell is encoded as bit0 = +x, bit1 = +y, bit2 = +z.
constexpr std::array<std::array<int, 4>, 5> kEvenSplit{
    {{0, 1, 2, 4}, {3, 1, 2, 7}, {5, 1, 4, 7}, {6, 2, 4, 7}, {1, 2, 4, 7}}};
constexpr std::array<std::array<int, 4>, 5> kOddSplit{
    {{1, 0, 3, 5}, {2, 0, 3, 6}, {4, 0, 5, 6}, {7, 3, 5, 6}, {0, 3, 5, 6}}};

struct Lattice {
  Vec3 origin;
  Vec3 spacing;
  std::array<int, 3> res;

  int vertex_index(int i, int j, int k) const { return i + (res[0] + 1) * (j + (res[1] + 1) * k); }
  Vec3 vertex(int i, int j, int k) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }
  Vec3List vertices() const {
    Vec3List out;
    out.reserve(static_cast<std::size_t>((res[0] + 1) * (res[1] + 1) * (res[2] + 1)));
    for (int k = 0; k <= res[2]; ++k)
      for (int j = 0; j <= res[1]; ++j)
        for (int i = 0; i <= res[0]; ++i) out.push_back(vertex(i, j, k));
    return out;
  }
  Vec3 cell_center(int i, int j, int k) const {
    return origin + Vec3((i + 0.5) * spacing.x(), (j + 0.5) * spacing.y(), (k + 0.5) * spacing.z());
  }
  void append_cell_tets(int i, int j, int k, const Vec3List& verts, std::vector<Tet>& out) const {
    std::array<int, 8> corner{};
    for (int c = 0; c < 8; ++c) {
      corner[c] = vertex_index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
    }
    const auto& split = ((i + j + k) % 2 == 0) ? kEvenSplit : kOddSplit;
    for (const auto& local : split) {
      Tet t{corner[local[0]], corner[local[1]], corner[local[2]], corner[local[3]]};
      if (signed_tet_volume(verts[t[0]], verts[t[1]], verts[t[2]], verts[t[3]]) < 0.0) {
        std::swap(t[2], t[3]);
      }
      out.push_back(t);
    }
  }
};

// Drops unreferenced vertices, preserving relative order.
void compact(Vec3List& vertices, std::vector<Tet>& tets) {
  std::vector<int> remap(vertices.size(), -1);
  for (const auto& t : tets)
    for (int v : t) remap[v] = 0;
  Vec3List kept;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (remap[i] == 0) {
      remap[i] = static_cast<int>(kept.size());
      kept.push_back(vertices[i]);
    }
  }
  for (auto& t : tets)
    for (int& v : t) v = remap[v];
  vertices = std::move(kept);
}

}  // namespace

TetMesh make_box_tet_mesh(const Vec3& dims, const std::array<int, 3>& resolution) {
  if (!(dims.array() > 0.0).all() || resolution[0] < 1 || resolution[1] < 1 || resolution[2] < 1) {
    throw ValidationError("box mesh requires positive dims and resolution >= 1");
  }
  const Lattice lat{Vec3::Zero(), dims.cwiseQuotient(Vec3(resolution[0], resolution[1], resolution[2])),
                    resolution};
  Vec3List verts = lat.vertices();
  std::vector<Tet> tets;
  tets.reserve(static_cast<std::size_t>(5 * resolution[0] * resolution[1] * resolution[2]));
  for (int k = 0; k < resolution[2]; ++k)
    for (int j = 0; j < resolution[1]; ++j)
      for (int i = 0; i < resolution[0]; ++i) lat.append_cell_tets(i, j, k, verts, tets);
  return build_tet_mesh(std::move(verts), std::move(tets));
}

TetMesh make_head_proxy(const HeadProxySpec& spec) {
  const Vec3& ax = spec.semi_axes;
  const auto& res = spec.lattice_resolution;
  const MouthSlit& slit = spec.mouth_slit;
  if (!(ax.array() > 0.0).all()) throw ValidationError("head proxy: semi_axes must be positive");
  if (res[0] < 1 || res[1] < 1 || res[2] < 1) throw ValidationError("head proxy: resolution must be >= 1");
  if (slit.half_width < 0.0 || slit.half_height < 0.0 || slit.depth < 0.0) {
    throw ValidationError("head proxy: mouth slit extents must be non-negative");
  }
  const Vec3 rel = slit.center - spec.center;
  if (std::abs(rel.x()) + slit.half_width > ax.x() || std::abs(rel.z()) + slit.half_height > ax.z() ||
      std::abs(rel.y()) > ax.y() || rel.y() - slit.depth < -ax.y()) {
    throw ValidationError("head proxy: mouth slit exceeds the ellipsoid bounding box");
  }

  const Lattice lat{spec.center - ax, (2.0 * ax).cwiseQuotient(Vec3(res[0], res[1], res[2])), res};
  Vec3List verts = lat.vertices();
  std::vector<Tet> tets;
  for (int k = 0; k < res[2]; ++k)
    for (int j = 0; j < res[1]; ++j)
      for (int i = 0; i < res[0]; ++i) {
        const Vec3 q = (lat.cell_center(i, j, k) - spec.center).cwiseQuotient(ax);
        if (q.squaredNorm() <= 1.0) lat.append_cell_tets(i, j, k, verts, tets);
      }
  if (tets.empty()) throw ValidationError("head proxy: lattice too coarse, no cells inside ellipsoid");

  auto in_slit = [&](const Vec3& p) {
    return std::abs(p.x() - slit.center.x()) <= slit.half_width &&
           std::abs(p.z() - slit.center.z()) <= slit.half_height && p.y() <= slit.center.y() &&
           p.y() >= slit.center.y() - slit.depth;
  };
  std::erase_if(tets, [&](const Tet& t) {
    const Vec3 centroid = (verts[t[0]] + verts[t[1]] + verts[t[2]] + verts[t[3]]) / 4.0;
    return in_slit(centroid);
  });
  if (tets.empty()) throw ValidationError("head proxy: mouth cavity removes every tet");
  compact(verts, tets);

  TetMesh mesh = build_tet_mesh(std::move(verts), std::move(tets));
  if (tet_components(mesh) != 1) throw ValidationError("head proxy: mouth cavity disconnects the mesh");
  mesh.mouth = MouthAnnotation{slit.center, Vec3::UnitY(), Vec3::UnitZ()};
  return mesh;
}

TetMesh distribute_mass(TetMesh mesh, double total_mass) {
  if (!(total_mass > 0.0)) throw ValidationError("total mass must be positive");
  if (mesh.vertices.empty()) throw ValidationError("cannot distribute mass over an empty mesh");
  mesh.vertex_mass.assign(mesh.vertices.size(), total_mass / static_cast<double>(mesh.vertices.size()));
  return mesh;
}

int tet_components(const TetMesh& mesh) {
  const int n = static_cast<int>(mesh.tets.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::map<FaceKey, int> first_owner;
  for (int t = 0; t < n; ++t) {
    for (const auto& lf : kTetFaces) {
      const FaceKey key = sorted_face({mesh.tets[t][lf[0]], mesh.tets[t][lf[1]], mesh.tets[t][lf[2]]});
      auto [it, inserted] = first_owner.try_emplace(key, t);
      if (!inserted) parent[find(t)] = find(it->second);
    }
  }
  int roots = 0;
  for (int t = 0; t < n; ++t) roots += (find(t) == t);
  return roots;
}

TetMesh transformed(const TetMesh& mesh, const Pose& pose) {
  TetMesh out = mesh;
  for (auto& v : out.vertices) v = pose.apply(v);
  if (out.mouth) {
    out.mouth->origin = pose.apply(mesh.mouth->origin);
    out.mouth->normal = pose.rotation * mesh.mouth->normal;
    out.mouth->up = pose.rotation * mesh.mouth->up;
  }
  return out;
}

TriMesh transformed(const TriMesh& mesh, const Pose& pose) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = pose.apply(v);
  return out;
}

TriMesh make_ellipsoid_shell(const Vec3& center, const Vec3& semi_axes, int rings, int segments) {
  if (rings < 2 || segments < 3) throw ValidationError("ellipsoid shell needs rings >= 2, segments >= 3");
  TriMesh mesh;
  const double pi = std::acos(-1.0);
  mesh.vertices.push_back(center + Vec3(0, 0, semi_axes.z()));
  for (int r = 1; r < rings; ++r) {
    const double theta = pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * pi * s / segments;
      mesh.vertices.push_back(center + Vec3(semi_axes.x() * std::sin(theta) * std::cos(phi),
                                            semi_axes.y() * std::sin(theta) * std::sin(phi),
                                            semi_axes.z() * std::cos(theta)));
    }
  }
  const int south = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(center - Vec3(0, 0, semi_axes.z()));
  auto ring_vertex = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) mesh.faces.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      mesh.faces.push_back({ring_vertex(r, s), ring_vertex(r + 1, s), ring_vertex(r + 1, s + 1)});
      mesh.faces.push_back({ring_vertex(r, s), ring_vertex(r + 1, s + 1), ring_vertex(r, s + 1)});
    }
  }
  for (int s = 0; s < segments; ++s) {
    mesh.faces.push_back({south, ring_vertex(rings - 1, s + 1), ring_vertex(rings - 1, s)});
  }
  orient_outward(mesh, center);
  return mesh;
}

TriMesh make_box_shell(const Vec3& center, const Vec3& half_extents) {
  TriMesh mesh;
  for (int c = 0; c < 8; ++c) {
    const Vec3 sign((c & 1) ? 1.0 : -1.0, (c & 2) ? 1.0 : -1.0, (c & 4) ? 1.0 : -1.0);
    mesh.vertices.push_back(center + sign.cwiseProduct(half_extents));
  }
  const std::array<std::array<int, 4>, 6> quads{
      {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}}};
  for (const auto& q : quads) {
    mesh.faces.push_back({q[0], q[1], q[2]});
    mesh.faces.push_back({q[0], q[2], q[3]});
  }
  orient_outward(mesh, center);
  return mesh;
}

}  // namespace bitesim
