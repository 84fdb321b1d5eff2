#include "bitesim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace bitesim {

Scene assemble_scene(const SceneConfig& config) {
  config.validate();
  Scene scene;
  scene.config = config;

  TetMesh mesh;
  if (config.head.mesh_path.empty()) {
    mesh = make_head_proxy(config.head.proxy);
  } else {
    mesh = load_tet_mesh_file(config.head.mesh_path);
    mesh.mouth = config.head.mouth;
  }
  scene.mesh = distribute_mass(std::move(mesh), config.head.total_mass);
  scene.mouth = mouth_frame(scene.mesh);
  scene.surface_vertices = scene.mesh.surface_vertices();

  scene.joint = config.jaw;
  scene.joint.angle = 0.0;
  scene.joint.rate = 0.0;
  scene.joint.target_angle = 0.0;
  scene.joint.validate();

  scene.skull.name = "upper_skull";
  scene.skull.kinematic = true;
  scene.skull.collision = config.skull.upper_mesh_path.empty()
                              ? make_ellipsoid_shell(config.skull.upper_center, config.skull.upper_semi_axes,
                                                     config.skull.shell_rings, config.skull.shell_segments)
                              : load_tri_mesh_file(config.skull.upper_mesh_path);
  scene.mandible.name = "mandible";
  scene.mandible.kinematic = false;
  scene.mandible.collision = config.skull.mandible_mesh_path.empty()
                                 ? make_box_shell(config.skull.mandible_center, config.skull.mandible_half_extents)
                                 : load_tri_mesh_file(config.skull.mandible_mesh_path);
  sync_mandible(scene.skull, scene.mandible, scene.joint);

  scene.skull_surfaces = {{SkullPart::upper, scene.skull.collision, scene.skull.pose},
                          {SkullPart::mandible, scene.mandible.collision, scene.mandible.pose}};
  scene.contacts = detect_attachment_contacts(scene.skull_surfaces, scene.mesh, config.skull.sample_spacing);
  Vec3List contact_points;
  contact_points.reserve(scene.contacts.size());
  for (const auto& c : scene.contacts) contact_points.push_back(c.position);
  const std::vector<int> mapping = build_injective_mapping(contact_points, scene.mesh.vertices);
  scene.rig = create_tendons(mapping, scene.contacts, scene.mesh, config.tendon);
  return scene;
}

const char* to_string(MetricWindow window) {
  switch (window) {
    case MetricWindow::entry_and_close: return "entry_and_close";
    case MetricWindow::exit_only: return "exit_only";
    case MetricWindow::full: return "full";
  }
  return "unknown";
}

bool in_window(MetricWindow window, Phase phase) {
  switch (window) {
    case MetricWindow::entry_and_close:
      return phase == Phase::approach || phase == Phase::entry || phase == Phase::close;
    case MetricWindow::exit_only:
      return phase == Phase::retract_to_e || phase == Phase::rotate_to_beta || phase == Phase::exit;
    case MetricWindow::full: return true;
  }
  return false;
}

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::ok: return "ok";
    case RunStatus::solver_failure: return "solver_failure";
    case RunStatus::invalid_params: return "invalid_params";
  }
  return "unknown";
}

namespace {

Spoon spoon_between(const Scene& scene, const ScheduledPose& now, const ScheduledPose& next, double interval) {
  Spoon spoon;
  spoon.geometry = scene.config.spoon;
  spoon.pose = now.spoon;
  spoon.pose.translation += scene.config.spoon_offset;
  if (interval > 0.0) {
    spoon.linear_velocity = (next.spoon.translation - now.spoon.translation) / interval;
    const Eigen::AngleAxisd turn(next.spoon.rotation * now.spoon.rotation.conjugate());
    spoon.angular_velocity = turn.angle() / interval * turn.axis();
  }
  return spoon;
}

}  // namespace

RunResult run_bite_transfer(const Scene& scene, const BiteTransferParams& params, const RunOptions& options) {
  RunResult result;
  RunRecord& rec = result.record;
  rec.alpha_deg = params.entry_angle_deg;
  rec.depth_m = params.insertion_depth_m;
  rec.beta_deg = params.exit_angle_deg;
  rec.exit_depth_m = params.exit_depth_m;
  const double dt = scene.config.dt;
  result.trace.dt = dt;

  PhaseSchedule schedule;
  try {
    schedule = keyframe_poses(params, scene.mouth);
  } catch (const ValidationError& e) {
    rec.status = RunStatus::invalid_params;
    rec.message = e.what();
    rec.peak_n = rec.total_n = rec.impulse_ns = rec.max_penetration_m = std::nan("");
    return result;
  }

  const TetMesh& mesh = scene.mesh;
  const std::size_t nv = mesh.vertex_count();
  SoftBodyState state = make_soft_body_state(mesh);
  ImplicitIntegrator integrator(mesh, scene.config.material, scene.config.solver);
  RigidBody skull = scene.skull;
  RigidBody mandible = scene.mandible;
  MandibleJoint joint = scene.joint;

  Vec3List gravity(nv, Vec3::Zero());
  if (scene.config.head.gravity) {
    for (std::size_t v = 0; v < nv; ++v) gravity[v] = mesh.vertex_mass[v] * scene.config.head.gravity_vector;
  }

  const double end = schedule.end_time();
  const int steps = static_cast<int>(std::ceil(end / dt - 1e-9));
  std::vector<double> windowed;
  Vec3List external(nv);
  try {
    for (int n = 0; n < steps; ++n) {
      const double t = n * dt;
      const double t_next = std::min((n + 1) * dt, end);
      const ScheduledPose now = pose_at(schedule, t);
      const ScheduledPose next = pose_at(schedule, t_next);
      const Spoon spoon = spoon_between(scene, now, next, t_next - t);
      joint.target_angle = now.jaw_openness * joint.max_open;

      TendonForces tendons = tendon_forces(scene.rig, skull, mandible, state.positions, state.velocities);
      const auto contacts = detect_spoon_contacts(spoon, scene.surface_vertices, state.positions);
      PenaltyResult penalty = penalty_forces(contacts, state.positions, state.velocities, scene.config.contact, n);

      for (std::size_t v = 0; v < nv; ++v) {
        external[v] = tendons.vertex_forces[v] + penalty.vertex_forces[v] + gravity[v];
      }
      std::vector<VertexCoupling> couplings = std::move(tendons.couplings);
      couplings.insert(couplings.end(), penalty.couplings.begin(), penalty.couplings.end());

      step_skeleton(skull, mandible, joint, tendons.mandible, dt);
      const SolverStats stats = integrator.step(state, dt, external, {}, couplings);
      rec.solver_iterations += stats.iterations;
      rec.max_residual = std::max(rec.max_residual, stats.residual);
      rec.steps = n + 1;

      const Phase phase = phase_at(schedule, t);
      const double f_t = average_step_force(penalty.events);
      if (in_window(options.window, phase)) {
        windowed.push_back(f_t);
        result.rows.push_back({n, t, static_cast<int>(penalty.events.size()), f_t});
        for (const ContactEvent& e : penalty.events) {
          rec.max_penetration_m = std::max(rec.max_penetration_m, e.penetration);
        }
      }
      if (options.keep_samples) result.samples.push_back({t, phase, joint.angle, f_t});
    }
  } catch (const SolverError& e) {
    rec.status = RunStatus::solver_failure;
    rec.message = e.what();
  } catch (const ValidationError& e) {
    rec.status = RunStatus::solver_failure;
    rec.message = e.what();
  }

  result.trace = accumulate_metrics(windowed, dt);
  rec.peak_n = result.trace.peak;
  rec.total_n = result.trace.total;
  rec.impulse_ns = result.trace.impulse();
  result.final_positions = state.positions;
  return result;
}

std::vector<double> ParamRange::values() const {
  if (!(step > 0.0) || !(stop >= start)) throw ValidationError("range needs step > 0 and stop >= start");
  const double span = (stop - start) / step;
  const double count = std::round(span);
  if (std::abs(span - count) > 1e-9) throw ValidationError("range span is not a whole number of steps");
  std::vector<double> out;
  for (int i = 0; i <= static_cast<int>(count); ++i) out.push_back(start + i * step);
  return out;
}

SweepSpec standard_entry_spec(const BiteTransferParams& base) {
  return {SweepPhase::entry, {80.0, 110.0, 10.0}, {0.050, 0.100, 0.010}, base, MetricWindow::entry_and_close};
}

SweepSpec standard_exit_spec(const BiteTransferParams& base) {
  return {SweepPhase::exit, {80.0, 120.0, 10.0}, {0.0, 0.040, 0.010}, base, MetricWindow::exit_only};
}

std::vector<BiteTransferParams> sweep_grid(const SweepSpec& spec) {
  std::vector<BiteTransferParams> grid;
  for (double angle : spec.angle.values()) {
    for (double depth : spec.depth.values()) {
      BiteTransferParams p = spec.base;
      if (spec.phase == SweepPhase::entry) {
        p.entry_angle_deg = angle;
        p.insertion_depth_m = depth;
        p.exit_angle_deg = angle;  // straight out
        p.exit_depth_m = 0.0;
      } else {
        p.exit_angle_deg = angle;
        p.exit_depth_m = depth;
      }
      grid.push_back(p);
    }
  }
  if (grid.empty()) throw ValidationError("sweep grid is empty");
  return grid;
}

std::vector<RunRecord> run_sweep(const Scene& scene, const SweepSpec& spec, int threads) {
  const std::vector<BiteTransferParams> grid = sweep_grid(spec);
  std::vector<RunRecord> records(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      records[i] = run_bite_transfer(scene, grid[i], {spec.window, false}).record;
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(grid.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  return records;
}

Selection select_optimal(const std::vector<RunRecord>& records) {
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].status == RunStatus::ok) ok.push_back(i);
  }
  if (ok.empty()) throw ValidationError("no successful runs to select from");

  auto dominates = [&](std::size_t a, std::size_t b) {
    const RunRecord& x = records[a];
    const RunRecord& y = records[b];
    return x.total_n <= y.total_n && x.peak_n <= y.peak_n && (x.total_n < y.total_n || x.peak_n < y.peak_n);
  };
  Selection sel;
  for (std::size_t i : ok) {
    const bool dominated = std::any_of(ok.begin(), ok.end(), [&](std::size_t j) { return dominates(j, i); });
    if (!dominated) sel.pareto.push_back(i);
  }

  // Lowest total; ties by lower peak, then grid order.
  auto better_total = [&](std::size_t a, std::size_t b) {
    if (records[a].total_n != records[b].total_n) return records[a].total_n < records[b].total_n;
    if (records[a].peak_n != records[b].peak_n) return records[a].peak_n < records[b].peak_n;
    return a < b;
  };
  std::size_t chosen = *std::min_element(sel.pareto.begin(), sel.pareto.end(), better_total);

  // A clearly lower peak at a comparable total wins.
  const RunRecord& base = records[chosen];
  std::size_t alternative = chosen;
  for (std::size_t i : sel.pareto) {
    const RunRecord& r = records[i];
    const bool perceptible = base.peak_n - r.peak_n > kPerceptiblePeakGapN;
    const bool comparable = r.total_n <= base.total_n * (1.0 + kTotalTolerance);
    if (!perceptible || !comparable) continue;
    if (alternative == chosen || r.peak_n < records[alternative].peak_n ||
        (r.peak_n == records[alternative].peak_n && better_total(i, alternative))) {
      alternative = i;
    }
  }
  sel.chosen = alternative;
  return sel;
}

namespace {

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

void check_written(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << kSweepCsvHeader << '\n';
  for (const RunRecord& r : records) {
    out << fmt9(r.alpha_deg) << ',' << fmt9(r.depth_m) << ',' << fmt9(r.beta_deg) << ',' << fmt9(r.exit_depth_m)
        << ',' << fmt9(r.peak_n) << ',' << fmt9(r.total_n) << ',' << fmt9(r.impulse_ns) << ','
        << fmt9(r.max_penetration_m) << ',' << to_string(r.status) << '\n';
  }
}

void write_sweep_csv(const std::vector<RunRecord>& records, const std::string& path) {
  if (records.empty()) throw ValidationError("no records to write");
  auto out = open_for_write(path);
  write_sweep_csv(out, records);
  check_written(out, path);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceCsvHeader << '\n';
  for (const TraceRow& r : rows) {
    out << r.step << ',' << fmt9(r.time_s) << ',' << r.num_contacts << ',' << fmt9(r.f_t) << '\n';
  }
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path) {
  auto out = open_for_write(path);
  write_trace_csv(out, rows);
  check_written(out, path);
}

void write_plot_data(const std::vector<TraceRow>& rows, const std::string& path) {
  auto out = open_for_write(path);
  out << "# time_s f_t_N\n";
  for (const TraceRow& r : rows) out << fmt9(r.time_s) << ' ' << fmt9(r.f_t) << '\n';
  check_written(out, path);
}

std::vector<RunRecord> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader) throw ParseError(path + ": unexpected sweep CSV header");
  std::vector<RunRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 9) throw ParseError(path + ":" + std::to_string(line_no) + ": expected 9 columns");
    RunRecord r;
    try {
      r.alpha_deg = std::stod(cells[0]);
      r.depth_m = std::stod(cells[1]);
      r.beta_deg = std::stod(cells[2]);
      r.exit_depth_m = std::stod(cells[3]);
      r.peak_n = std::stod(cells[4]);
      r.total_n = std::stod(cells[5]);
      r.impulse_ns = std::stod(cells[6]);
      r.max_penetration_m = std::stod(cells[7]);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (cells[8] == "ok") {
      r.status = RunStatus::ok;
    } else if (cells[8] == "solver_failure") {
      r.status = RunStatus::solver_failure;
    } else if (cells[8] == "invalid_params") {
      r.status = RunStatus::invalid_params;
    } else {
      throw ParseError(path + ":" + std::to_string(line_no) + ": unknown status '" + cells[8] + "'");
    }
    records.push_back(r);
  }
  return records;
}

std::string exit_depth_trend_report(const std::vector<RunRecord>& records) {
  constexpr double kTrendToleranceN = 1e-6;  // smaller drops are solver noise
  std::ostringstream out;
  std::vector<double> angles;
  for (const RunRecord& r : records) {
    if (std::find(angles.begin(), angles.end(), r.beta_deg) == angles.end()) angles.push_back(r.beta_deg);
  }
  for (double beta : angles) {
    std::vector<const RunRecord*> series;
    for (const RunRecord& r : records) {
      if (r.beta_deg == beta && r.status == RunStatus::ok) series.push_back(&r);
    }
    std::sort(series.begin(), series.end(),
              [](const RunRecord* a, const RunRecord* b) { return a->exit_depth_m < b->exit_depth_m; });
    int deviations = 0;
    std::ostringstream detail;
    for (std::size_t i = 1; i < series.size(); ++i) {
      if (series[i]->peak_n < series[i - 1]->peak_n - kTrendToleranceN) {
        ++deviations;
        detail << " e=" << fmt9(series[i - 1]->exit_depth_m) << "->" << fmt9(series[i]->exit_depth_m) << " peak "
               << fmt9(series[i - 1]->peak_n) << "->" << fmt9(series[i]->peak_n) << ';';
      }
    }
    out << "beta=" << fmt9(beta) << " peak non-decreasing in exit depth: " << (deviations == 0 ? "yes" : "no");
    if (deviations > 0) out << " (" << deviations << " deviation(s):" << detail.str() << ")";
    out << '\n';
  }
  return out.str();
}

}  // namespace bitesim
