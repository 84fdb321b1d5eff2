#pragma once

#include "bitesim/common.hpp"
#include "bitesim/geometry.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <span>
#include <vector>

namespace bitesim {

struct MaterialParams {
  double young_modulus = 5e4;               // Pa
  double poisson_ratio = 0.4;
  double rayleigh_mass_damping = 1.0;       // 1/s
  double rayleigh_stiffness_damping = 0.01; // s

  /// Throws ValidationError when any invariant is violated.
  void validate() const;
};

struct LameParameters {
  double lambda = 0.0;
  double mu = 0.0;
};

/// mu = E / (2(1+nu)), lambda = E nu / ((1+nu)(1-2nu)). Rejects nu >= 0.5.
LameParameters lame_parameters(double young_modulus, double poisson_ratio);

/// Dynamic configuration of the soft body plus per-tet rest precomputation.
struct SoftBodyState {
  Vec3List positions;
  Vec3List velocities;
  Vec3List rest_positions;
  std::vector<Mat3> rest_shape_inverse;  // Dm^-1 per tet
  std::vector<double> rest_volume;
  /// Rotation of each tet from the most recent polar decomposition; reused
  /// for tets whose deformation gradient is (nearly) inverted.
  std::vector<Mat3> rotations;
};

/// Rest state for `mesh`: positions at rest, zero velocity, identity rotations.
SoftBodyState make_soft_body_state(const TetMesh& mesh);

/// Rotation factor of the polar decomposition F = R S. Falls back to
/// `previous` when det(F) < 1e-8.
Mat3 polar_rotation(const Mat3& deformation_gradient, const Mat3& previous);

/// Deformation gradient F = Ds * Dm^-1 of one tet.
Mat3 deformation_gradient(const TetMesh& mesh, const SoftBodyState& state, std::size_t tet);

/// Corotated linear elastic energy, sum over tets of
/// V * (mu |F - R|^2 + lambda/2 (tr(R^T F) - 3)^2).
double elastic_energy(const TetMesh& mesh, const SoftBodyState& state, const MaterialParams& mat);

/// Minus the gradient of elastic_energy, per vertex. Throws ValidationError on
/// non-finite positions.
Vec3List elastic_forces(const TetMesh& mesh, const SoftBodyState& state, const MaterialParams& mat);

struct SolverSettings {
  double tolerance = 1e-8;  // relative residual
  int max_iterations = 1000;
};

struct SolverStats {
  int iterations = 0;
  double residual = 0.0;
};

/// Extra per-vertex linear force model treated implicitly by the integrator:
/// f(x, v) ~= f0 - stiffness * dx - damping * dv. The caller includes the
/// force at the current state in `external_forces`.
struct VertexCoupling {
  int vertex = 0;
  Mat3 stiffness = Mat3::Zero();
  Mat3 damping = Mat3::Zero();
};

using IncompleteFactor = Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>>;

/// Steps between refreshes of the incomplete Cholesky preconditioner.
inline constexpr int kFactorRefreshSteps = 25;

/// Linearized implicit Euler integrator with a cached sparsity pattern.
///
/// Each step solves (M + dt C + dt^2 K) v' = M v + dt (f_ext + f_elastic),
/// with K the corotated stiffness at the current rotations and
/// C = a M + b K (Rayleigh), by conjugate gradients with an incomplete
/// Cholesky preconditioner refreshed every kFactorRefreshSteps steps.
class ImplicitIntegrator {
 public:
  ImplicitIntegrator(const TetMesh& mesh, MaterialParams material, SolverSettings settings = {});

  /// Advances `state` by dt in place. Pinned vertices keep their position and
  /// get zero velocity. Throws SolverError on non-convergence or NaN.
  SolverStats step(SoftBodyState& state, double dt, std::span<const Vec3> external_forces,
                   std::span<const int> pinned = {}, std::span<const VertexCoupling> couplings = {});

  const MaterialParams& material() const { return material_; }

 private:
  struct Block {
    int row_vertex;
    int col_vertex;
    std::array<Eigen::Index, 3> column_offset;  // value index of row 3*row_vertex in each column
  };

  void add_block(int block, const Mat3& m);

  const TetMesh* mesh_;
  MaterialParams material_;
  SolverSettings settings_;
  LameParameters lame_;
  Eigen::SparseMatrix<double> system_;
  std::vector<Block> blocks_;
  std::vector<std::array<int, 16>> tet_blocks_;
  std::vector<int> diagonal_block_;
  IncompleteFactor factor_;
  int steps_since_factor_ = -1;
};

/// Convenience wrapper that builds an integrator for a single step.
SoftBodyState step_implicit(const SoftBodyState& state, const TetMesh& mesh, const MaterialParams& mat,
                            double dt, std::span<const Vec3> external_forces,
                            std::span<const int> pinned = {}, SolverSettings settings = {});

Vec3 linear_momentum(const TetMesh& mesh, const SoftBodyState& state);

}  // namespace bitesim
