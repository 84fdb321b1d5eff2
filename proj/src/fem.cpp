#include "bitesim/fem.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <map>

namespace bitesim {

void MaterialParams::validate() const {
  if (!(young_modulus > 0.0)) throw ValidationError("material: young_modulus must be > 0");
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
    throw ValidationError("material: poisson_ratio must be in [0, 0.5)");
  }
  if (!(rayleigh_mass_damping >= 0.0) || !(rayleigh_stiffness_damping >= 0.0)) {
    throw ValidationError("material: damping coefficients must be >= 0");
  }
}

LameParameters lame_parameters(double young_modulus, double poisson_ratio) {
  if (!(poisson_ratio < 0.5)) throw ValidationError("poisson_ratio >= 0.5 is incompressible");
  if (!(young_modulus > 0.0) || poisson_ratio < 0.0) throw ValidationError("invalid elastic constants");
  const double nu = poisson_ratio;
  return {young_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), young_modulus / (2.0 * (1.0 + nu))};
}

SoftBodyState make_soft_body_state(const TetMesh& mesh) {
  SoftBodyState s;
  s.positions = mesh.vertices;
  s.rest_positions = mesh.vertices;
  s.velocities.assign(mesh.vertices.size(), Vec3::Zero());
  s.rest_shape_inverse.reserve(mesh.tets.size());
  s.rest_volume.reserve(mesh.tets.size());
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const Tet& tet = mesh.tets[t];
    Mat3 dm;
    for (int i = 0; i < 3; ++i) dm.col(i) = mesh.vertices[tet[i + 1]] - mesh.vertices[tet[0]];
    const double vol = dm.determinant() / 6.0;
    if (!(vol >= kMinTetVolume)) throw ValidationError("tet " + std::to_string(t) + " has non-positive rest volume");
    s.rest_shape_inverse.push_back(dm.inverse());
    s.rest_volume.push_back(vol);
  }
  s.rotations.assign(mesh.tets.size(), Mat3::Identity());
  return s;
}

Mat3 polar_rotation(const Mat3& f, const Mat3& previous) {
  if (f.determinant() < 1e-8) return previous;
  // Scaled Newton iteration X <- (g X + X^-T / g) / 2; converges quadratically
  // to the orthogonal polar factor, which is a rotation since det F > 0.
  Mat3 x = f;
  for (int i = 0; i < 30; ++i) {
    const Mat3 inv_t = x.inverse().transpose();
    const double g = std::sqrt(std::sqrt(inv_t.squaredNorm() / x.squaredNorm()));
    const Mat3 next = 0.5 * (g * x + inv_t / g);
    const double change = (next - x).squaredNorm();
    x = next;
    if (change < 1e-28) break;
  }
  return x;
}

Mat3 deformation_gradient(const TetMesh& mesh, const SoftBodyState& state, std::size_t tet) {
  const Tet& t = mesh.tets[tet];
  Mat3 ds;
  for (int i = 0; i < 3; ++i) ds.col(i) = state.positions[t[i + 1]] - state.positions[t[0]];
  return ds * state.rest_shape_inverse[tet];
}

namespace {

void require_finite(const SoftBodyState& state) {
  for (std::size_t i = 0; i < state.positions.size(); ++i) {
    if (!state.positions[i].allFinite()) {
      throw ValidationError("non-finite position at vertex " + std::to_string(i));
    }
  }
}

// Applies a factorization owned by the integrator; compute() leaves it
// untouched so it can be refreshed on the integrator's own schedule.
class LaggedPreconditioner {
 public:
  using Scalar = double;
  using StorageIndex = int;

  template <typename M>
  LaggedPreconditioner& analyzePattern(const M&) {
    return *this;
  }
  template <typename M>
  LaggedPreconditioner& factorize(const M&) {
    return *this;
  }
  template <typename M>
  LaggedPreconditioner& compute(const M&) {
    return *this;
  }
  template <typename Rhs>
  Eigen::VectorXd solve(const Rhs& b) const {
    return factor->solve(b);
  }
  Eigen::ComputationInfo info() const { return Eigen::Success; }

  const IncompleteFactor* factor = nullptr;
};

// First Piola-Kirchhoff stress of the corotated linear model.
Mat3 corotated_stress(const Mat3& f, const Mat3& r, const LameParameters& lame) {
  const double trace_term = (r.transpose() * f).trace() - 3.0;
  return 2.0 * lame.mu * (f - r) + lame.lambda * trace_term * r;
}

}  // namespace

double elastic_energy(const TetMesh& mesh, const SoftBodyState& state, const MaterialParams& mat) {
  require_finite(state);
  const LameParameters lame = lame_parameters(mat.young_modulus, mat.poisson_ratio);
  double energy = 0.0;
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const Mat3 f = deformation_gradient(mesh, state, t);
    const Mat3 r = polar_rotation(f, state.rotations[t]);
    const double tr = (r.transpose() * f).trace() - 3.0;
    energy += state.rest_volume[t] * (lame.mu * (f - r).squaredNorm() + 0.5 * lame.lambda * tr * tr);
  }
  return energy;
}

Vec3List elastic_forces(const TetMesh& mesh, const SoftBodyState& state, const MaterialParams& mat) {
  require_finite(state);
  const LameParameters lame = lame_parameters(mat.young_modulus, mat.poisson_ratio);
  Vec3List forces(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const Tet& tet = mesh.tets[t];
    const Mat3 f = deformation_gradient(mesh, state, t);
    const Mat3 r = polar_rotation(f, state.rotations[t]);
    // Columns of H are the forces on vertices 1..3.
    const Mat3 h = -state.rest_volume[t] * corotated_stress(f, r, lame) *
                   state.rest_shape_inverse[t].transpose();
    forces[tet[1]] += h.col(0);
    forces[tet[2]] += h.col(1);
    forces[tet[3]] += h.col(2);
    forces[tet[0]] -= h.col(0) + h.col(1) + h.col(2);
  }
  return forces;
}

ImplicitIntegrator::ImplicitIntegrator(const TetMesh& mesh, MaterialParams material, SolverSettings settings)
    : mesh_(&mesh), material_(material), settings_(settings) {
  material_.validate();
  lame_ = lame_parameters(material_.young_modulus, material_.poisson_ratio);
  const int nv = static_cast<int>(mesh.vertices.size());
  const Eigen::Index n = 3 * static_cast<Eigen::Index>(nv);

  // Unique vertex-pair blocks, including every diagonal block.
  std::map<std::pair<int, int>, int> block_index;
  auto block_of = [&](int a, int b) {
    auto [it, inserted] = block_index.try_emplace({a, b}, static_cast<int>(blocks_.size()));
    if (inserted) blocks_.push_back({a, b, {0, 0, 0}});
    return it->second;
  };
  diagonal_block_.resize(static_cast<std::size_t>(nv));
  for (int v = 0; v < nv; ++v) diagonal_block_[v] = block_of(v, v);
  tet_blocks_.reserve(mesh.tets.size());
  for (const Tet& tet : mesh.tets) {
    std::array<int, 16> ids{};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) ids[4 * a + b] = block_of(tet[a], tet[b]);
    tet_blocks_.push_back(ids);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(blocks_.size() * 9);
  for (const Block& blk : blocks_) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) triplets.emplace_back(3 * blk.row_vertex + i, 3 * blk.col_vertex + j, 1.0);
  }
  system_.resize(n, n);
  system_.setFromTriplets(triplets.begin(), triplets.end());
  system_.makeCompressed();
  factor_.analyzePattern(system_);

  // Rows 3a..3a+2 are contiguous within each column of block (a, b).
  const auto* outer = system_.outerIndexPtr();
  const auto* inner = system_.innerIndexPtr();
  for (Block& blk : blocks_) {
    for (int j = 0; j < 3; ++j) {
      const Eigen::Index col = 3 * blk.col_vertex + j;
      const auto* first = inner + outer[col];
      const auto* last = inner + outer[col + 1];
      const auto* hit = std::lower_bound(first, last, 3 * blk.row_vertex);
      blk.column_offset[j] = hit - inner;
    }
  }
}

void ImplicitIntegrator::add_block(int block, const Mat3& m) {
  double* values = system_.valuePtr();
  const Block& blk = blocks_[block];
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) values[blk.column_offset[j] + i] += m(i, j);
}

SolverStats ImplicitIntegrator::step(SoftBodyState& state, double dt, std::span<const Vec3> external_forces,
                                     std::span<const int> pinned, std::span<const VertexCoupling> couplings) {
  const TetMesh& mesh = *mesh_;
  const std::size_t nv = mesh.vertices.size();
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (external_forces.size() != nv) throw ValidationError("external force count does not match vertex count");
  require_finite(state);

  const double alpha = material_.rayleigh_mass_damping;
  const double beta = material_.rayleigh_stiffness_damping;
  const double k_scale = dt * beta + dt * dt;

  std::fill(system_.valuePtr(), system_.valuePtr() + system_.nonZeros(), 0.0);
  Eigen::VectorXd rhs(3 * static_cast<Eigen::Index>(nv));
  for (std::size_t v = 0; v < nv; ++v) {
    const double m = mesh.vertex_mass[v];
    add_block(diagonal_block_[v], (m * (1.0 + dt * alpha)) * Mat3::Identity());
    rhs.segment<3>(3 * static_cast<Eigen::Index>(v)) = m * state.velocities[v] + dt * external_forces[v];
  }

  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const Tet& tet = mesh.tets[t];
    const Mat3 f = deformation_gradient(mesh, state, t);
    const Mat3 r = polar_rotation(f, state.rotations[t]);
    state.rotations[t] = r;
    const double vol = state.rest_volume[t];
    const Mat3& dm_inv = state.rest_shape_inverse[t];

    const Mat3 h = -vol * corotated_stress(f, r, lame_) * dm_inv.transpose();
    std::array<Vec3, 4> fe{-(h.col(0) + h.col(1) + h.col(2)), h.col(0), h.col(1), h.col(2)};
    for (int a = 0; a < 4; ++a) rhs.segment<3>(3 * tet[a]) += dt * fe[a];

    // Shape-function gradients rotated into the current frame; the warped
    // stiffness block is R K0_ab R^T expressed through them.
    std::array<Vec3, 4> g;
    for (int i = 0; i < 3; ++i) g[i + 1] = dm_inv.row(i).transpose();
    g[0] = -(g[1] + g[2] + g[3]);
    std::array<Vec3, 4> rg;
    for (int a = 0; a < 4; ++a) rg[a] = r * g[a];
    const auto& ids = tet_blocks_[t];
    for (int a = 0; a < 4; ++a) {
      for (int b = a; b < 4; ++b) {
        Mat3 k = lame_.lambda * rg[a] * rg[b].transpose() + lame_.mu * rg[b] * rg[a].transpose();
        k.diagonal().array() += lame_.mu * g[a].dot(g[b]);
        k *= k_scale * vol;
        add_block(ids[4 * a + b], k);
        if (b != a) add_block(ids[4 * b + a], k.transpose());
      }
    }
  }

  for (const VertexCoupling& c : couplings) {
    add_block(diagonal_block_[c.vertex], dt * c.damping + dt * dt * c.stiffness);
    rhs.segment<3>(3 * c.vertex) += dt * (c.damping * state.velocities[c.vertex]);
  }

  if (!pinned.empty()) {
    std::vector<char> is_pinned(nv, 0);
    for (int v : pinned) is_pinned.at(static_cast<std::size_t>(v)) = 1;
    double* values = system_.valuePtr();
    for (const Block& blk : blocks_) {
      if (!is_pinned[blk.row_vertex] && !is_pinned[blk.col_vertex]) continue;
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) values[blk.column_offset[j] + i] = (blk.row_vertex == blk.col_vertex && i == j) ? 1.0 : 0.0;
    }
    for (int v : pinned) rhs.segment<3>(3 * v).setZero();
  }

  Eigen::VectorXd guess(rhs.size());
  for (std::size_t v = 0; v < nv; ++v) guess.segment<3>(3 * static_cast<Eigen::Index>(v)) = state.velocities[v];
  for (int v : pinned) guess.segment<3>(3 * v).setZero();

  if (steps_since_factor_ < 0 || steps_since_factor_ >= kFactorRefreshSteps) {
    factor_.factorize(system_);
    steps_since_factor_ = 0;
  }
  ++steps_since_factor_;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper, LaggedPreconditioner> cg;
  cg.preconditioner().factor = &factor_;
  cg.setTolerance(settings_.tolerance);
  cg.setMaxIterations(settings_.max_iterations);
  cg.compute(system_);
  const Eigen::VectorXd v_new = cg.solveWithGuess(rhs, guess);
  SolverStats stats{static_cast<int>(cg.iterations()), cg.error()};
  if (!v_new.allFinite() || !std::isfinite(stats.residual)) {
    throw SolverError("implicit step produced non-finite velocities", stats.residual);
  }
  if (cg.info() != Eigen::Success) {
    throw SolverError("conjugate gradient did not converge in " + std::to_string(stats.iterations) +
                          " iterations (relative residual " + fmt9(stats.residual) + ")",
                      stats.residual);
  }

  for (std::size_t v = 0; v < nv; ++v) {
    state.velocities[v] = v_new.segment<3>(3 * static_cast<Eigen::Index>(v));
    state.positions[v] += dt * state.velocities[v];
  }
  return stats;
}

SoftBodyState step_implicit(const SoftBodyState& state, const TetMesh& mesh, const MaterialParams& mat,
                            double dt, std::span<const Vec3> external_forces, std::span<const int> pinned,
                            SolverSettings settings) {
  ImplicitIntegrator integrator(mesh, mat, settings);
  SoftBodyState next = state;
  integrator.step(next, dt, external_forces, pinned);
  return next;
}

Vec3 linear_momentum(const TetMesh& mesh, const SoftBodyState& state) {
  Vec3 p = Vec3::Zero();
  for (std::size_t v = 0; v < state.velocities.size(); ++v) p += mesh.vertex_mass[v] * state.velocities[v];
  return p;
}

}  // namespace bitesim
