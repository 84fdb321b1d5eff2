#include "bitesim/cli.hpp"

#include "bitesim/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

namespace bitesim {
namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitSolver = 2;

SceneConfig scene_config(const std::string& path, bool gravity) {
  SceneConfig config = path.empty() ? SceneConfig{} : load_scene_config(path);
  if (gravity) config.head.gravity = true;
  return config;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory '" + dir + "'");
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string describe(const RunRecord& r) {
  std::ostringstream s;
  s << "alpha=" << fmt9(r.alpha_deg) << " d=" << fmt9(r.depth_m) << " beta=" << fmt9(r.beta_deg)
    << " e=" << fmt9(r.exit_depth_m) << " peak=" << fmt9(r.peak_n) << " total=" << fmt9(r.total_n);
  return s.str();
}

struct SimulateArgs {
  std::string config;
  std::optional<double> alpha, depth, beta, exit_depth;
  std::string out;
  bool plot = false;
  bool gravity = false;
};

int simulate(const SimulateArgs& args) {
  const SceneConfig config = scene_config(args.config, args.gravity);
  BiteTransferParams params = config.trajectory;
  if (args.alpha) params.entry_angle_deg = *args.alpha;
  if (args.depth) params.insertion_depth_m = *args.depth;
  if (args.beta) params.exit_angle_deg = *args.beta;
  if (args.exit_depth) params.exit_depth_m = *args.exit_depth;
  params.validate();

  const Scene scene = assemble_scene(config);
  const RunResult result = run_bite_transfer(scene, params, {MetricWindow::full, false});
  ensure_dir(args.out);
  write_sweep_csv({result.record}, join(args.out, "run.csv"));
  write_trace_csv(result.rows, join(args.out, "trace.csv"));
  {
    std::ostringstream schedule;
    write_schedule_dump(schedule, keyframe_poses(params, scene.mouth));
    write_text(join(args.out, "schedule.txt"), schedule.str());
  }
  if (args.plot) write_plot_data(result.rows, join(args.out, "force.dat"));

  std::cout << describe(result.record) << " status=" << to_string(result.record.status) << '\n';
  if (result.record.status == RunStatus::solver_failure) {
    std::cerr << "solver failure: " << result.record.message << '\n';
    return kExitSolver;
  }
  return kExitOk;
}

struct SweepArgs {
  std::string config;
  std::string phase;
  std::string out;
  std::string entry_csv;
  int threads = 1;
  bool plot = false;
  bool gravity = false;
};

int sweep(const SweepArgs& args) {
  const SceneConfig config = scene_config(args.config, args.gravity);
  BiteTransferParams base = config.trajectory;
  const bool entry = args.phase == "entry";
  if (!entry && !args.entry_csv.empty()) {
    const auto entry_records = read_sweep_csv(args.entry_csv);
    const RunRecord& best = entry_records[select_optimal(entry_records).chosen];
    base.entry_angle_deg = best.alpha_deg;
    base.insertion_depth_m = best.depth_m;
  }
  const SweepSpec spec = entry ? standard_entry_spec(base) : standard_exit_spec(base);

  const Scene scene = assemble_scene(config);
  const std::vector<RunRecord> records = run_sweep(scene, spec, args.threads);
  ensure_dir(args.out);
  write_sweep_csv(records, join(args.out, entry ? "entry_sweep.csv" : "exit_sweep.csv"));

  std::ostringstream summary;
  summary << "phase=" << args.phase << " window=" << to_string(spec.window) << " runs=" << records.size() << '\n';
  int failures = 0;
  for (const RunRecord& r : records) {
    if (r.status == RunStatus::ok) continue;
    if (r.status == RunStatus::solver_failure) ++failures;
    summary << "failed " << describe(r) << " status=" << to_string(r.status) << ": " << r.message << '\n';
  }
  std::optional<RunRecord> chosen;
  try {
    const Selection sel = select_optimal(records);
    chosen = records[sel.chosen];
    summary << "chosen " << describe(*chosen) << '\n';
    for (std::size_t i : sel.pareto) summary << "pareto " << describe(records[i]) << '\n';
  } catch (const ValidationError& e) {
    summary << "no selection: " << e.what() << '\n';
  }
  if (!entry) summary << exit_depth_trend_report(records);
  write_text(join(args.out, entry ? "entry_summary.txt" : "exit_summary.txt"), summary.str());
  std::cout << summary.str();

  if (args.plot && chosen) {
    BiteTransferParams p = base;
    p.entry_angle_deg = chosen->alpha_deg;
    p.insertion_depth_m = chosen->depth_m;
    p.exit_angle_deg = chosen->beta_deg;
    p.exit_depth_m = chosen->exit_depth_m;
    const RunResult run = run_bite_transfer(scene, p, {spec.window, false});
    write_plot_data(run.rows, join(args.out, entry ? "entry_chosen_force.dat" : "exit_chosen_force.dat"));
  }
  return failures > 0 ? kExitSolver : kExitOk;
}

int make_head(const std::string& config_path, const std::string& out_path) {
  const SceneConfig config = scene_config(config_path, false);
  const TetMesh mesh = make_head_proxy(config.head.proxy);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  write_tet_mesh(out, mesh);
  if (!out) throw std::runtime_error("failed writing '" + out_path + "'");
  std::cout << "vertices=" << mesh.vertex_count() << " tets=" << mesh.tets.size()
            << " surface_tris=" << mesh.surface_tris.size() << '\n';
  return kExitOk;
}

int validate_mesh(const std::string& path) {
  const TetMesh mesh = load_tet_mesh_file(path);
  std::cout << "vertices=" << mesh.vertex_count() << " tets=" << mesh.tets.size()
            << " surface_tris=" << mesh.surface_tris.size() << " volume=" << fmt9(total_volume(mesh))
            << " components=" << tet_components(mesh) << '\n';
  return kExitOk;
}

int rig_info(const std::string& config_path, const std::string& out_path) {
  const Scene scene = assemble_scene(scene_config(config_path, false));
  std::ostringstream dump;
  dump << "# contacts=" << scene.contacts.size() << " tendons=" << scene.rig.tendons.size()
       << " vertices=" << scene.mesh.vertex_count() << '\n';
  write_rig_dump(dump, scene.rig);
  if (out_path.empty()) {
    std::cout << dump.str();
  } else {
    write_text(out_path, dump.str());
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Soft-body head simulator and bite-transfer experiment harness"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run one bite transfer");
  simulate_cmd->add_option("--config", sim.config, "Scene config file")->check(CLI::ExistingFile);
  simulate_cmd->add_option("--alpha", sim.alpha, "Entry angle (deg)");
  simulate_cmd->add_option("--depth", sim.depth, "Insertion depth (m)");
  simulate_cmd->add_option("--beta", sim.beta, "Exit angle (deg)");
  simulate_cmd->add_option("--exit-depth", sim.exit_depth, "Exit depth (m)");
  simulate_cmd->add_option("--out", sim.out, "Output directory")->required();
  simulate_cmd->add_flag("--plot", sim.plot, "Write force-vs-time plot data");
  simulate_cmd->add_flag("--gravity", sim.gravity, "Enable gravity on the soft body");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep over the standard grid");
  sweep_cmd->add_option("--config", sw.config, "Scene config file")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--phase", sw.phase, "entry or exit")->required()->check(CLI::IsMember({"entry", "exit"}));
  sweep_cmd->add_option("--out", sw.out, "Output directory")->required();
  sweep_cmd->add_option("--threads", sw.threads, "Worker threads (0: hardware concurrency)")
      ->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--entry-csv", sw.entry_csv, "Entry sweep CSV; its optimum fixes alpha and d")
      ->check(CLI::ExistingFile);
  sweep_cmd->add_flag("--plot", sw.plot, "Write plot data for the chosen point");
  sweep_cmd->add_flag("--gravity", sw.gravity, "Enable gravity on the soft body");

  std::string head_config, head_out;
  auto* head_cmd = app.add_subcommand("make-head", "Write the procedural head proxy as a tet mesh");
  head_cmd->add_option("--config", head_config, "Scene config file")->check(CLI::ExistingFile);
  head_cmd->add_option("--out", head_out, "Output mesh file")->required();

  std::string mesh_path;
  auto* validate_cmd = app.add_subcommand("validate", "Load and check a tet mesh");
  validate_cmd->add_option("--mesh", mesh_path, "Tet mesh file")->required()->check(CLI::ExistingFile);

  std::string rig_config, rig_out;
  auto* rig_cmd = app.add_subcommand("rig-info", "Dump the tendon rig");
  rig_cmd->add_option("--config", rig_config, "Scene config file")->check(CLI::ExistingFile);
  rig_cmd->add_option("--out", rig_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*simulate_cmd) return simulate(sim);
    if (*sweep_cmd) {
      if (sw.threads == 0) sw.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
      return sweep(sw);
    }
    if (*head_cmd) return make_head(head_config, head_out);
    if (*validate_cmd) return validate_mesh(mesh_path);
    if (*rig_cmd) return rig_info(rig_config, rig_out);
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace bitesim
