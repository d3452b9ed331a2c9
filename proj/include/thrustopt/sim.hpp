#pragma once

// Closed-loop rendezvous and docking: the MPC drives the nonlinear relative
// dynamics at a fixed step until the docking bands hold or time runs out.

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "thrustopt/dynamics.hpp"
#include "thrustopt/geometry.hpp"
#include "thrustopt/mpc.hpp"

namespace thrustopt {

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct ScenarioConfig {
  // Vehicle
  double side_length = 0.5;
  double mass = 20.0;
  std::optional<Eigen::Matrix3d> inertia;  // default: uniform cube
  FaceAngles angles;
  std::vector<int> thruster_ids;

  // Target orbit
  double mu = kEarthMu;
  double semi_major_axis = 12'000e3;
  double eccentricity = 0.1;
  double initial_anomaly = 0.0;

  // Timing
  double dt = 0.1;
  double t_final = 400.0;

  // Initial relative state. The relative rate is derived from the chaser and
  // target rates unless given explicitly.
  Eigen::Vector3d initial_position = Eigen::Vector3d(10.0, 0.0, 0.0);
  Eigen::Vector3d initial_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d initial_attitude_axis = Eigen::Vector3d::UnitZ();
  double initial_attitude_angle = deg2rad(30.0);
  Eigen::Vector3d chaser_rate = Eigen::Vector3d::Zero();
  Eigen::Vector3d target_rate = deg2rad(1.0) * Eigen::Vector3d(1.0, 1.0, 1.0).normalized();
  std::optional<Eigen::Vector3d> initial_relative_rate;

  // Controller
  MpcConfig mpc;
  PhaseSchedule schedule = [] {
    PhaseSchedule s;
    s.waypoint = default_waypoint();
    return s;
  }();
  TerminalSet terminal;
  double activity_threshold = 1e-4;  // fraction of f_max

  [[nodiscard]] InertiaModel body() const {
    InertiaModel b = InertiaModel::cube(mass, side_length);
    if (inertia) b.inertia = *inertia;
    return b;
  }

  [[nodiscard]] RelativeState initial_state() const {
    RelativeState s;
    s.r = initial_position;
    s.v = initial_velocity;
    s.q = initial_attitude_angle == 0.0
              ? quat_identity()
              : quat_canonical(quat_from_axis_angle(initial_attitude_axis, initial_attitude_angle));
    s.w = initial_relative_rate ? *initial_relative_rate : omega_rel(chaser_rate, target_rate, s.q);
    return s;
  }

  [[nodiscard]] TargetOrbit orbit() const {
    return TargetOrbit::make(mu, semi_major_axis, eccentricity, initial_anomaly);
  }

  void validate() const {
    if (!(dt > 0.0)) throw DomainError("scenario: dt must be positive");
    if (!(t_final >= dt)) throw DomainError("scenario: t_final must be >= dt");
    if (thruster_ids.empty()) throw DomainError("scenario: thruster_ids is empty");
    for (int id : thruster_ids) {
      if (id < 1 || id > kMaxThrusters) {
        throw DomainError("scenario: unknown thruster id " + std::to_string(id));
      }
    }
    std::vector<int> sorted = thruster_ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw DomainError("scenario: duplicate thruster id");
    }
    if (!angles.valid()) throw DomainError("scenario: thrust angles out of range");
    if (!(initial_attitude_axis.norm() > 0.0)) {
      throw DomainError("scenario: attitude axis must be non-zero");
    }
    if (schedule.approach_glide_speed < 0.0 || schedule.docking_glide_speed < 0.0 ||
        schedule.glide_time_constant < 0.0 || schedule.attitude_slew_rate < 0.0) {
      throw DomainError("scenario: glide speeds, time constant and slew rate must be >= 0");
    }
    if (!(terminal.r_tol > 0.0) || !(terminal.v_tol > 0.0) || !(terminal.alpha_tol > 0.0)) {
      throw DomainError("scenario: terminal tolerances must be positive");
    }
    mpc.validate();
    body().validate();
  }
};

struct LogRow {
  double t = 0.0;
  Vector13 state;
  Eigen::VectorXd thrust;
  int phase = 1;
};

struct SimMetrics {
  double total_impulse = 0.0;                    // [N s]
  Eigen::Vector3d rate_rms = Eigen::Vector3d::Zero();  // per axis [rad/s]
  double rate_rms_norm = 0.0;                    // sqrt(mean |w|^2) [rad/s]
  Eigen::VectorXd activity;                      // firing fraction per thruster
};

struct SimResult {
  std::vector<int> thruster_ids;
  bool docked = false;
  std::optional<double> time_to_dock;
  double t_end = 0.0;
  std::vector<LogRow> log;
  SimMetrics metrics;
  int qp_unconverged_steps = 0;
  std::optional<double> phase_switch_time;
  std::string diagnostic;
};

inline SimMetrics metrics(const std::vector<LogRow>& log, double dt, double f_max,
                          double activity_threshold, Eigen::Index n_thrusters) {
  SimMetrics m;
  m.activity = Eigen::VectorXd::Zero(n_thrusters);
  if (log.empty()) return m;
  Eigen::Vector3d sq = Eigen::Vector3d::Zero();
  const double fire = activity_threshold * f_max;
  for (const auto& row : log) {
    m.total_impulse += row.thrust.sum() * dt;
    sq += row.state.tail<3>().cwiseAbs2();
    for (Eigen::Index i = 0; i < row.thrust.size(); ++i) {
      if (row.thrust(i) > fire) m.activity(i) += 1.0;
    }
  }
  const double count = static_cast<double>(log.size());
  m.rate_rms = (sq / count).cwiseSqrt();
  m.rate_rms_norm = std::sqrt(sq.sum() / count);
  m.activity /= count;
  return m;
}

inline SimResult run(const ScenarioConfig& cfg) {
  cfg.validate();
  SimResult res;
  std::vector<int> ids = cfg.thruster_ids;
  std::sort(ids.begin(), ids.end());
  res.thruster_ids = ids;

  const auto layout = build_layout(make_cube_geometry(cfg.side_length), cfg.angles);
  AllocationMatrix alloc = allocation_matrix(layout, ids);
  const InertiaModel body = cfg.body();

  MpcConfig mpc = cfg.mpc;
  mpc.ts = cfg.dt;
  MpcController ctrl(alloc, body, mpc, cfg.schedule, cfg.terminal);

  RelativeState state = cfg.initial_state();
  TargetOrbit orbit = cfg.orbit();
  const auto steps = static_cast<long>(std::ceil(cfg.t_final / cfg.dt - 1e-9));
  res.log.reserve(static_cast<std::size_t>(steps));

  long k = 0;
  for (;; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    res.t_end = t;
    if (cfg.terminal.contains(state)) {
      res.docked = true;
      res.time_to_dock = t;
      break;
    }
    if (k >= steps) break;

    ControlDiagnostics diag;
    Eigen::VectorXd f;
    try {
      f = ctrl.control_step(state, orbit, &diag);
    } catch (const std::exception& e) {
      res.diagnostic = std::string("controller failure: ") + e.what();
      break;
    }
    if (!diag.qp_converged) ++res.qp_unconverged_steps;
    if (diag.switched) res.phase_switch_time = t;
    res.log.push_back({t, state.stacked(), f, diag.phase});

    state = nonlinear_step(state, wrench_of(alloc, f), body, orbit, cfg.dt);
    orbit = propagate_orbit(orbit, cfg.dt);
    if (!state.stacked().allFinite()) {
      res.diagnostic = "state diverged";
      break;
    }
  }
  res.metrics = metrics(res.log, cfg.dt, cfg.mpc.f_max, cfg.activity_threshold,
                        static_cast<Eigen::Index>(ids.size()));
  return res;
}

/// Runs one scenario per configuration; results keep input order.
inline std::vector<SimResult> batch(const std::vector<ScenarioConfig>& configs, int threads = 1) {
  std::vector<SimResult> out(configs.size());
  if (threads <= 1 || configs.size() < 2) {
    for (std::size_t i = 0; i < configs.size(); ++i) out[i] = run(configs[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) out[i] = run(configs[i]);
      });
    }
  }
  return out;
}

}  // namespace thrustopt
