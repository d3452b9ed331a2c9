#pragma once

// Command-line front end: search, allocate, simulate, batch and replay.
//
// Exit codes: 0 ok, 1 I/O failure, 2 usage or malformed input,
// 3 infeasible (thruster set cannot produce the request).

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "thrustopt/errors.hpp"
#include "thrustopt/geometry.hpp"
#include "thrustopt/io.hpp"
#include "thrustopt/nnls.hpp"
#include "thrustopt/search.hpp"
#include "thrustopt/sim.hpp"

namespace thrustopt::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kUsage = 2, kInfeasible = 3 };

/// Thrown by command handlers to leave with a specific exit code.
class Exit : public std::runtime_error {
 public:
  Exit(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  [[nodiscard]] int code() const { return code_; }

 private:
  int code_;
};

inline int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

struct SharedArgs {
  std::string out;
  int threads = default_threads();
  double eps = 1e-8;
  std::uint64_t seed = 0;  // reserved; every command is deterministic
};

struct LayoutArgs {
  double side_length = 0.5;
  double theta_deg = 0.0;
  double phi_deg = 90.0;
  std::string layout_file;

  [[nodiscard]] LayoutFile resolve() const {
    if (!layout_file.empty()) {
      return layout_from_json(parse_json_text(read_text(layout_file), layout_file));
    }
    if (!(side_length > 0.0)) throw Exit(kUsage, "--side-length must be positive");
    LayoutFile f;
    f.geometry = make_cube_geometry(side_length);
    f.angles = {deg2rad(theta_deg), deg2rad(phi_deg)};
    if (!f.angles.valid()) throw Exit(kUsage, "--theta must be in [0,360), --phi in [0,90]");
    f.thrusters = build_layout(f.geometry, f.angles);
    return f;
  }
};

struct SearchArgs {
  int n_min = 6;
  int n_max = 24;
  double tie_tol = 1e-6;
  double theta_step = 0.0;
  double phi_step = 0.0;
  bool ids_only = false;
};

struct AllocateArgs {
  std::string ids = "all";
  std::vector<double> force = {0.0, 0.0, 0.0};
  std::vector<double> torque = {0.0, 0.0, 0.0};
};

struct SimulateArgs {
  std::string scenario;
  std::string ids;
};

struct BatchArgs {
  std::string scenario;
  std::string search_dir;
  int n_min = 6;
  int n_max = 24;
  bool trajectories = false;
};

inline void add_shared(CLI::App* app, SharedArgs& a, bool out_required) {
  auto* out = app->add_option("--out", a.out, "Output directory");
  if (out_required) out->required();
  app->add_option("--threads", a.threads, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--eps", a.eps, "Squared-residual threshold for unit commands")
      ->check(CLI::PositiveNumber);
  app->add_option("--seed", a.seed, "Reserved; results do not depend on it");
}

inline void add_layout(CLI::App* app, LayoutArgs& a) {
  app->add_option("--side-length", a.side_length, "Cube side length [m]");
  app->add_option("--theta", a.theta_deg, "Thrust azimuth on every face [deg]");
  app->add_option("--phi", a.phi_deg, "Thrust elevation on every face [deg]");
  app->add_option("--layout", a.layout_file, "Layout JSON (overrides the three above)");
}

/// "all" or a comma-separated id list.
inline std::vector<int> parse_ids(const std::string& text) {
  std::vector<int> ids;
  if (text == "all") {
    for (int i = 1; i <= kMaxThrusters; ++i) ids.push_back(i);
    return ids;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    int id = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), id);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw Exit(kUsage, "--ids: '" + tok + "' is not an integer");
    }
    if (id < 1 || id > kMaxThrusters) {
      throw Exit(kUsage, "--ids: unknown thruster id " + std::to_string(id));
    }
    ids.push_back(id);
  }
  if (ids.empty()) throw Exit(kUsage, "--ids: empty list");
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Exit(kUsage, "--ids: duplicate thruster id");
  }
  return ids;
}

inline std::vector<double> grid(double step, double lo, double hi, bool include_hi) {
  std::vector<double> g;
  for (int k = 0;; ++k) {
    const double v = lo + k * step;
    if (v > hi + 1e-9 || (!include_hi && v > hi - 1e-9)) break;
    g.push_back(v);
  }
  return g;
}

// ---------------------------------------------------------------------------

inline int cmd_search(const SharedArgs& sa, const LayoutArgs& la, const SearchArgs& a,
                      const std::vector<std::string>& argv, std::ostream& out) {
  if (a.n_min < 1 || a.n_max > kMaxThrusters || a.n_min > a.n_max) {
    throw Exit(kUsage, "--n-min/--n-max must satisfy 1 <= n-min <= n-max <= 24");
  }
  const LayoutFile lay = la.resolve();
  SearchOptions opts;
  opts.eps = sa.eps;
  opts.tie_tol = a.tie_tol;
  opts.threads = sa.threads;
  opts.keep_all_solutions = !a.ids_only;

  const SearchResult res = sweep(lay.thrusters, a.n_min, a.n_max, opts);
  const std::filesystem::path dir(sa.out);
  std::vector<std::string> files = emit_report(res, opts, dir);
  write_json(dir / "layout.json", layout_to_json(lay.geometry, lay.angles, lay.thrusters));
  files.emplace_back("layout.json");

  if (a.theta_step > 0.0 || a.phi_step > 0.0) {
    const auto thetas = a.theta_step > 0.0 ? grid(a.theta_step, 0.0, 360.0, false)
                                           : std::vector<double>{rad2deg(lay.angles.theta)};
    const auto phis = a.phi_step > 0.0 ? grid(a.phi_step, 0.0, 90.0, true)
                                       : std::vector<double>{rad2deg(lay.angles.phi)};
    std::vector<double> th_rad;
    std::vector<double> ph_rad;
    for (double t : thetas) th_rad.push_back(deg2rad(t));
    for (double p : phis) ph_rad.push_back(deg2rad(p));
    CsvTable t({"theta", "phi", "N", "combinations", "viable", "optimal", "f_min"});
    for (int n = a.n_min; n <= a.n_max; ++n) {
      for (const auto& p : orientation_sweep(lay.geometry, th_rad, ph_rad, n, opts)) {
        const auto& s = p.summary;
        t.add({fmt_fixed(rad2deg(p.angles.theta), 3), fmt_fixed(rad2deg(p.angles.phi), 3),
               std::to_string(n), std::to_string(s.combinations), std::to_string(s.viable),
               std::to_string(s.optimal), s.f_min ? fmt_fixed(*s.f_min, kTablePrecision) : "--"});
      }
    }
    t.save(dir / "orientation.csv");
    files.emplace_back("orientation.csv");
  }

  Json cfg;
  cfg["side_length"] = lay.geometry.side_length;
  cfg["theta"] = rad2deg(lay.angles.theta);
  cfg["phi"] = rad2deg(lay.angles.phi);
  cfg["n_min"] = a.n_min;
  cfg["n_max"] = a.n_max;
  cfg["eps"] = opts.eps;
  cfg["rank_tol"] = opts.rank_tol;
  cfg["tie_tol"] = opts.tie_tol;
  cfg["nnls_tol"] = opts.nnls_tol;
  cfg["threads"] = opts.threads;
  write_manifest(dir, {argv, cfg, files});

  out << summary_csv(res);
  return kOk;
}

inline int cmd_allocate(const SharedArgs& sa, const LayoutArgs& la, const AllocateArgs& a,
                        std::ostream& out) {
  const LayoutFile lay = la.resolve();
  if (a.force.size() != 3 || a.torque.size() != 3) {
    throw Exit(kUsage, "--force and --torque take three values");
  }
  std::vector<int> ids = parse_ids(a.ids);
  std::sort(ids.begin(), ids.end());
  const AllocationMatrix alloc = allocation_matrix(lay.thrusters, ids);
  Vector6 w;
  w << a.force[0], a.force[1], a.force[2], a.torque[0], a.torque[1], a.torque[2];
  if (!w.allFinite()) throw Exit(kUsage, "wrench must be finite");

  SearchOptions opts;
  opts.eps = sa.eps;
  const bool viable = viability_test(alloc, unit_commands(), opts).viable;
  const auto sol = nnls_solve(alloc.columns, w, NnlsOptions{opts.nnls_tol, 0});

  CsvTable t({"id", "thrust"});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    t.add({std::to_string(ids[i]), fmt_fixed(sol.x(static_cast<Eigen::Index>(i)), 9)});
  }
  out << t.str();
  out << "residual_sq," << fmt_exact(sol.residual_norm_sq) << "\n";
  out << "total_thrust," << fmt_fixed(sol.x.sum(), 9) << "\n";
  out << "full_6dof," << (viable ? "1" : "0") << "\n";
  if (!sa.out.empty()) {
    const std::filesystem::path dir(sa.out);
    ensure_directory(dir);
    t.save(dir / "allocation.csv");
  }
  if (sol.residual_norm_sq > sa.eps) {
    throw Exit(kInfeasible, "wrench not attainable: squared residual " +
                                fmt_exact(sol.residual_norm_sq) + " > eps " + fmt_exact(sa.eps));
  }
  if (!viable) {
    throw Exit(kInfeasible, "thruster set lacks full 6-DOF control (fails a unit command)");
  }
  return kOk;
}

/// Throws Exit(kInfeasible) unless the scenario's thruster set is viable.
inline void require_viable(const ScenarioConfig& cfg, double eps) {
  const auto layout = build_layout(make_cube_geometry(cfg.side_length), cfg.angles);
  std::vector<int> ids = cfg.thruster_ids;
  std::sort(ids.begin(), ids.end());
  SearchOptions opts;
  opts.eps = eps;
  if (!viability_test(allocation_matrix(layout, ids), unit_commands(), opts).viable) {
    throw Exit(kInfeasible, "thruster set lacks full 6-DOF control (fails a unit command)");
  }
}

inline std::vector<std::string> write_sim_outputs(const std::filesystem::path& dir,
                                                  const SimResult& r) {
  ensure_directory(dir);
  const std::vector<BatchRow> rows = {{static_cast<int>(r.thruster_ids.size()), &r}};
  write_json(dir / "result.json", sim_result_json(r));
  write_text(dir / "trajectory.csv", trajectory_csv(r));
  write_text(dir / "table4.csv", table4_csv(rows));
  write_text(dir / "activity.csv", activity_csv(rows));
  write_text(dir / "rms.csv", rms_csv(rows));
  return {"result.json", "trajectory.csv", "table4.csv", "activity.csv", "rms.csv"};
}

/// Reads a scenario file, or the resolved config stored in a manifest.
inline ScenarioConfig load_scenario_or_manifest(const std::string& path) {
  const Json j = parse_json_text(read_text(path), path);
  if (j.is_object() && j.contains("command_line") && j.contains("config")) {
    return scenario_from_json(j.at("config"));
  }
  return scenario_from_json(j);
}

inline int cmd_simulate(const SharedArgs& sa, const SimulateArgs& a,
                        const std::vector<std::string>& argv, std::ostream& out) {
  ScenarioConfig cfg = load_scenario_or_manifest(a.scenario);
  if (!a.ids.empty()) {
    cfg.thruster_ids = parse_ids(a.ids);
    cfg.validate();
  }
  require_viable(cfg, sa.eps);
  const SimResult r = run(cfg);
  const std::filesystem::path dir(sa.out);
  auto files = write_sim_outputs(dir, r);
  write_manifest(dir, {argv, scenario_to_json(cfg), files});
  out << "docked," << (r.docked ? "1" : "0") << "\n";
  out << "time_to_dock," << opt_fixed(r.time_to_dock, 1) << "\n";
  out << "total_impulse," << fmt_fixed(r.metrics.total_impulse, 4) << "\n";
  if (!r.diagnostic.empty()) out << "diagnostic," << r.diagnostic << "\n";
  return kOk;
}

/// Picks the first optimal configuration for size n, from a search report
/// directory when given, otherwise by searching.
inline std::optional<std::vector<int>> optimal_ids(const LayoutFile& lay, int n,
                                                   const std::string& search_dir,
                                                   const SearchOptions& opts) {
  if (!search_dir.empty()) {
    const auto path = std::filesystem::path(search_dir) / optimal_file_name(n);
    if (!std::filesystem::exists(path)) {
      throw IoError("missing " + path.string() + " (run search over this range first)");
    }
    return read_first_optimal(path);
  }
  SearchOptions o = opts;
  o.keep_all_solutions = false;
  const SizeResult s = search_size(lay.thrusters, n, o);
  if (s.optimal.empty()) return std::nullopt;
  return s.optimal.front().thruster_ids;
}

inline int cmd_batch(const SharedArgs& sa, const BatchArgs& a,
                     const std::vector<std::string>& argv, std::ostream& out) {
  if (a.n_min < 1 || a.n_max > kMaxThrusters || a.n_min > a.n_max) {
    throw Exit(kUsage, "--n-min/--n-max must satisfy 1 <= n-min <= n-max <= 24");
  }
  ScenarioConfig base;
  base.thruster_ids = {1};
  if (!a.scenario.empty()) base = load_scenario_or_manifest(a.scenario);

  LayoutFile lay;
  lay.geometry = make_cube_geometry(base.side_length);
  lay.angles = base.angles;
  lay.thrusters = build_layout(lay.geometry, lay.angles);
  SearchOptions opts;
  opts.eps = sa.eps;
  opts.threads = sa.threads;

  std::vector<int> sizes;
  std::vector<ScenarioConfig> configs;
  std::vector<std::optional<std::size_t>> slot;
  for (int n = a.n_min; n <= a.n_max; ++n) {
    const auto ids = optimal_ids(lay, n, a.search_dir, opts);
    sizes.push_back(n);
    if (!ids) {
      slot.emplace_back();
      continue;
    }
    ScenarioConfig c = base;
    c.thruster_ids = *ids;
    slot.emplace_back(configs.size());
    configs.push_back(std::move(c));
  }
  const std::vector<SimResult> results = batch(configs, sa.threads);

  std::vector<BatchRow> rows;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    rows.push_back({sizes[i], slot[i] ? &results[*slot[i]] : nullptr});
  }
  const std::filesystem::path dir(sa.out);
  ensure_directory(dir);
  write_text(dir / "table4.csv", table4_csv(rows));
  write_text(dir / "activity.csv", activity_csv(rows));
  write_text(dir / "rms.csv", rms_csv(rows));
  std::vector<std::string> files = {"table4.csv", "activity.csv", "rms.csv"};

  // Trend summary: small (N <= 11) against large (N >= 12) configurations.
  Json trend;
  double imp[2] = {0.0, 0.0};
  double rms[2] = {0.0, 0.0};
  int cnt[2] = {0, 0};
  Json per_n = Json::array();
  for (const auto& e : rows) {
    if (!e.result) continue;
    const int g = e.n >= 12 ? 1 : 0;
    imp[g] += e.result->metrics.total_impulse;
    rms[g] += e.result->metrics.rate_rms_norm;
    ++cnt[g];
    Json r = sim_result_json(*e.result);
    r["n"] = e.n;
    per_n.push_back(std::move(r));
    if (a.trajectories) {
      const std::string name = "trajectory_N" + std::string(e.n < 10 ? "0" : "") +
                               std::to_string(e.n) + ".csv";
      write_text(dir / name, trajectory_csv(*e.result));
      files.push_back(name);
    }
  }
  for (int g = 0; g < 2; ++g) {
    const char* key = g == 0 ? "small" : "large";
    trend[key]["count"] = cnt[g];
    trend[key]["mean_impulse"] = cnt[g] ? Json(imp[g] / cnt[g]) : Json(nullptr);
    trend[key]["mean_rate_rms"] = cnt[g] ? Json(rms[g] / cnt[g]) : Json(nullptr);
  }
  if (cnt[0] && cnt[1]) {
    trend["impulse_decreases"] = imp[1] / cnt[1] < imp[0] / cnt[0];
    trend["rate_rms_decreases"] = rms[1] / cnt[1] < rms[0] / cnt[0];
  }
  Json summary;
  summary["trend"] = std::move(trend);
  summary["results"] = std::move(per_n);
  write_json(dir / "batch.json", summary);
  files.emplace_back("batch.json");

  Json cfg;
  cfg["n_min"] = a.n_min;
  cfg["n_max"] = a.n_max;
  cfg["eps"] = sa.eps;
  cfg["search_dir"] = a.search_dir;
  cfg["scenario"] = scenario_to_json(base);
  write_manifest(dir, {argv, cfg, files});
  out << table4_csv(rows);
  return kOk;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Re-runs the command recorded in a manifest, writing to `out_dir`.
inline int cmd_replay(const std::string& manifest, const std::string& out_dir, std::ostream& out,
                      std::ostream& err) {
  const Json j = parse_json_text(read_text(manifest), manifest);
  if (!j.is_object() || !j.contains("command_line") || !j.at("command_line").is_array()) {
    throw ParseError(manifest + ": missing command_line");
  }
  std::vector<std::string> args = j.at("command_line").get<std::vector<std::string>>();
  if (args.size() < 2 || args[1] == "replay") throw ParseError(manifest + ": nothing to replay");
  bool replaced = false;
  for (std::size_t i = 1; i + 1 < args.size(); ++i) {
    if (args[i] == "--out") {
      args[i + 1] = out_dir;
      replaced = true;
    }
  }
  for (auto& s : args) {
    if (s.rfind("--out=", 0) == 0) {
      s = "--out=" + out_dir;
      replaced = true;
    }
  }
  if (!replaced) args.insert(args.end(), {"--out", out_dir});
  return run_cli(args, out, err);
}

/// Entry point; args[0] is the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Thruster configuration search and docking simulation", "thrustopt"};
  app.require_subcommand(1);

  SharedArgs shared;
  LayoutArgs layout;
  SearchArgs search;
  AllocateArgs alloc;
  SimulateArgs simulate;
  BatchArgs batch_args;
  std::string manifest;

  auto* s = app.add_subcommand("search", "Exhaustive search for minimal thruster sets");
  add_shared(s, shared, true);
  add_layout(s, layout);
  s->add_option("--n-min", search.n_min, "Smallest subset size");
  s->add_option("--n-max", search.n_max, "Largest subset size");
  s->add_option("--tie-tol", search.tie_tol, "Optimal band above f_min [N]")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--theta-step", search.theta_step, "Orientation grid step in theta [deg]")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--phi-step", search.phi_step, "Orientation grid step in phi [deg]")
      ->check(CLI::NonNegativeNumber);
  s->add_flag("--ids-only", search.ids_only, "Omit unit-command solutions from optimal sets");

  auto* a = app.add_subcommand("allocate", "Solve one wrench with non-negative thrusts");
  add_shared(a, shared, false);
  add_layout(a, layout);
  a->add_option("--ids", alloc.ids, "Comma-separated ids or 'all'");
  a->add_option("--force", alloc.force, "Body force [N]")->expected(3);
  a->add_option("--torque", alloc.torque, "Body torque [N m]")->expected(3);

  auto* m = app.add_subcommand("simulate", "Closed-loop docking run for one scenario");
  add_shared(m, shared, true);
  m->add_option("scenario", simulate.scenario, "Scenario JSON or run manifest")
      ->required();
  m->add_option("--ids", simulate.ids, "Override the scenario's thruster ids");

  auto* b = app.add_subcommand("batch", "Docking runs for the optimal set of each size");
  add_shared(b, shared, true);
  b->add_option("--scenario", batch_args.scenario, "Base scenario JSON");
  b->add_option("--search-dir", batch_args.search_dir, "Search report with optimal sets");
  b->add_option("--n-min", batch_args.n_min, "Smallest size");
  b->add_option("--n-max", batch_args.n_max, "Largest size");
  b->add_flag("--trajectories", batch_args.trajectories, "Write one trajectory per size");

  auto* r = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  r->add_option("manifest", manifest, "manifest.json")->required();
  r->add_option("--out", shared.out, "Output directory")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& x : args) argv.push_back(x.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (s->parsed()) return cmd_search(shared, layout, search, args, out);
    if (a->parsed()) return cmd_allocate(shared, layout, alloc, out);
    if (m->parsed()) return cmd_simulate(shared, simulate, args, out);
    if (b->parsed()) return cmd_batch(shared, batch_args, args, out);
    if (r->parsed()) return cmd_replay(manifest, shared.out, out, err);
  } catch (const Exit& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kUsage;
}

}  // namespace thrustopt::cli
