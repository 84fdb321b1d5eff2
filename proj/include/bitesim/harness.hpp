#pragma once

#include "bitesim/bite.hpp"
#include "bitesim/config.hpp"
#include "bitesim/contact.hpp"
#include "bitesim/fem.hpp"
#include "bitesim/geometry.hpp"
#include "bitesim/skeleton.hpp"
#include "bitesim/skinning.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace bitesim {

/// Assembled, immutable scene shared read-only by every run.
struct Scene {
  SceneConfig config;
  TetMesh mesh;  // masses distributed
  MouthFrame mouth;
  RigidBody skull;
  RigidBody mandible;  // at the joint's closed rest angle
  MandibleJoint joint;
  std::vector<SkullSurface> skull_surfaces;
  std::vector<AttachmentContact> contacts;
  TendonRig rig;
  std::vector<int> surface_vertices;
};

/// Builds the head, skull parts and tendon rig. Throws ConfigError,
/// ParseError or ValidationError.
Scene assemble_scene(const SceneConfig& config);

enum class MetricWindow { entry_and_close, exit_only, full };

const char* to_string(MetricWindow window);
bool in_window(MetricWindow window, Phase phase);

enum class RunStatus { ok, solver_failure, invalid_params };

const char* to_string(RunStatus status);

struct RunRecord {
  double alpha_deg = 0.0;
  double depth_m = 0.0;
  double beta_deg = 0.0;
  double exit_depth_m = 0.0;
  double peak_n = 0.0;
  double total_n = 0.0;
  double impulse_ns = 0.0;
  double max_penetration_m = 0.0;
  int steps = 0;
  long solver_iterations = 0;
  double max_residual = 0.0;
  RunStatus status = RunStatus::ok;
  std::string message;
};

/// One row of the per-step force trace.
struct TraceRow {
  int step = 0;
  double time_s = 0.0;
  int num_contacts = 0;
  double f_t = 0.0;
};

/// Per-step sample of the run, kept only when requested.
struct StepSample {
  double time_s = 0.0;
  Phase phase = Phase::approach;
  double jaw_angle = 0.0;
  double f_t = 0.0;
};

struct RunResult {
  RunRecord record;
  ForceTrace trace;             // windowed steps only
  std::vector<TraceRow> rows;   // windowed steps only
  std::vector<StepSample> samples;
  Vec3List final_positions;
};

struct RunOptions {
  MetricWindow window = MetricWindow::full;
  bool keep_samples = false;
};

/// Simulates the full schedule for `params`. Forces per step: tendons,
/// spoon contact, optional gravity. Solver failures yield status
/// solver_failure with a partial trace; invalid params yield invalid_params.
RunResult run_bite_transfer(const Scene& scene, const BiteTransferParams& params, const RunOptions& options = {});

/// Inclusive arithmetic range; values are start + i * step.
struct ParamRange {
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;

  /// Throws ValidationError unless step > 0, stop >= start and the span is a
  /// whole number of steps.
  std::vector<double> values() const;
};

enum class SweepPhase { entry, exit };

struct SweepSpec {
  SweepPhase phase = SweepPhase::entry;
  ParamRange angle;  // alpha for entry, beta for exit
  ParamRange depth;  // d for entry, e for exit
  BiteTransferParams base;  // fixed counterpart parameters and speeds
  MetricWindow window = MetricWindow::entry_and_close;
};

/// Standard sweep grids. Entry runs exit straight out (beta = alpha, e = 0); exit
/// runs use base's alpha and d.
SweepSpec standard_entry_spec(const BiteTransferParams& base);
SweepSpec standard_exit_spec(const BiteTransferParams& base);

/// Parameters for every grid point, angle-major.
std::vector<BiteTransferParams> sweep_grid(const SweepSpec& spec);

/// Runs the grid on `threads` workers; records come back in grid order.
std::vector<RunRecord> run_sweep(const Scene& scene, const SweepSpec& spec, int threads = 1);

struct Selection {
  std::size_t chosen = 0;           // index into the records
  std::vector<std::size_t> pareto;  // ascending indices of non-dominated ok records
};

inline constexpr double kPerceptiblePeakGapN = 1.0;
inline constexpr double kTotalTolerance = 0.05;

/// Pareto set over (total, peak) among ok records, then the minimum-total
/// point unless another Pareto point lowers the peak by more than 1 N while
/// staying within 5% of its total. Throws ValidationError without ok records.
Selection select_optimal(const std::vector<RunRecord>& records);

inline constexpr const char* kSweepCsvHeader =
    "alpha_deg,depth_m,beta_deg,exit_depth_m,peak_N,total_N,impulse_Ns,max_penetration_m,status";
inline constexpr const char* kTraceCsvHeader = "step,time_s,num_contacts,f_t_N";

void write_sweep_csv(std::ostream& out, const std::vector<RunRecord>& records);
void write_sweep_csv(const std::vector<RunRecord>& records, const std::string& path);
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path);
/// Two columns `time_s f_t_N` for external plotting.
void write_plot_data(const std::vector<TraceRow>& rows, const std::string& path);

/// Reads back a sweep CSV written by write_sweep_csv.
std::vector<RunRecord> read_sweep_csv(const std::string& path);

/// Text report on whether peak force is non-decreasing in exit depth for
/// each exit angle of an exit sweep. Informational only.
std::string exit_depth_trend_report(const std::vector<RunRecord>& records);

}  // namespace bitesim
