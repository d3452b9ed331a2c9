#pragma once

// Linear time-varying MPC over individual thruster forces.
//
// Each control step linearises the relative dynamics at the measured state,
// discretises over the horizon (the orbit coefficients advance with the
// true anomaly), condenses the tracking/effort/slew cost into a dense QP in
// the stacked thrust vector and solves it under the thrust box with an
// accelerated projected-gradient method.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "thrustopt/dynamics.hpp"
#include "thrustopt/errors.hpp"
#include "thrustopt/geometry.hpp"

namespace thrustopt {

/// Diagonal weight specification for one phase.
struct PhaseWeights {
  Vector13 q_diag = Vector13::Ones();
  double r = 1.0;     // thrust weight, R = r I
  double r_df = 0.0;  // slew weight, R_df = r_df I
};

/// Default phase weights (approach, final docking).
inline PhaseWeights approach_weights() {
  PhaseWeights w;
  w.q_diag << 8, 8, 8, 8, 8, 8, 5, 5, 5, 5, 5, 5, 5;
  w.q_diag *= 100.0;
  w.r = 500.0;
  w.r_df = 1000.0;
  return w;
}

inline PhaseWeights docking_weights() {
  PhaseWeights w;
  w.q_diag << 0.9, 0.9, 0.9, 5, 5, 5, 10, 10, 10, 10, 1, 1, 1;
  w.q_diag *= 1e4;
  w.r = 5e4;
  w.r_df = 5e4;
  return w;
}

/// Fully expanded weights for a given thruster count.
struct MpcWeights {
  Matrix13 Q;
  Eigen::MatrixXd R;
  Eigen::MatrixXd R_df;
  Matrix13 P;
  double rho = 0.0;

  static MpcWeights from_phase(const PhaseWeights& pw, int n_thrusters, double terminal_scale,
                               double rho) {
    if ((pw.q_diag.array() < 0.0).any() || !(pw.r > 0.0) || pw.r_df < 0.0 || rho < 0.0 ||
        terminal_scale < 0.0) {
      throw DomainError("MpcWeights: Q, R_df, P, rho must be >= 0 and R > 0");
    }
    MpcWeights w;
    w.Q = pw.q_diag.asDiagonal();
    w.R = Eigen::MatrixXd::Identity(n_thrusters, n_thrusters) * pw.r;
    w.R_df = Eigen::MatrixXd::Identity(n_thrusters, n_thrusters) * pw.r_df;
    w.P = terminal_scale * w.Q;
    w.rho = rho;
    return w;
  }
};

struct TerminalSet {
  double r_tol = 0.05;                              // [m]
  double v_tol = 0.01;                              // [m/s]
  double alpha_tol = 2.0 * std::numbers::pi / 180;  // [rad]

  [[nodiscard]] bool contains(const RelativeState& s, const Quat& q_dock = quat_identity()) const {
    return s.r.norm() <= r_tol && s.v.norm() <= v_tol && quat_angle(s.q, q_dock) <= alpha_tol;
  }
};

/// Phase weights and references. Phase 1 steers to `waypoint`, phase 2 to
/// the docking state (origin, zero velocity, identity attitude, zero rate).
/// With a positive glide speed the reference position moves toward the
/// phase target along a straight line at that speed instead of jumping to
/// it; zero gives a fixed set-point. The attitude reference is treated the
/// same way, rotating toward the target attitude at attitude_slew_rate.
struct PhaseSchedule {
  PhaseWeights approach = approach_weights();
  PhaseWeights docking = docking_weights();
  RelativeState waypoint;
  double switch_r_tol = 0.1;
  double switch_v_tol = 0.02;
  double approach_glide_speed = 0.05;  // [m/s]
  double docking_glide_speed = 0.02;   // [m/s]
  double glide_time_constant = 20.0;   // [s] taper near the phase target
  double attitude_slew_rate = 0.5 * std::numbers::pi / 180.0;  // [rad/s], 0 = step

  [[nodiscard]] bool reached_waypoint(const RelativeState& s) const {
    return (s.r - waypoint.r).norm() <= switch_r_tol && (s.v - waypoint.v).norm() <= switch_v_tol;
  }
};

inline RelativeState default_waypoint() {
  RelativeState w;
  w.r = Eigen::Vector3d(2.0, 0.0, 0.0);
  return w;
}

struct MpcConfig {
  int horizon = 10;
  double ts = 0.1;
  double f_min = 0.0;
  double f_max = 0.05;
  double rho = 1e3;
  double terminal_scale = 100.0;  // P = terminal_scale * Q
  int qp_max_iterations = 5000;
  double qp_tol = 1e-6;

  void validate() const {
    if (horizon < 1) throw DomainError("MpcConfig: horizon must be >= 1");
    if (!(ts > 0.0)) throw DomainError("MpcConfig: ts must be positive");
    if (!(f_min >= 0.0) || !(f_max >= f_min)) {
      throw DomainError("MpcConfig: need 0 <= f_min <= f_max");
    }
  }
};

// ---------------------------------------------------------------------------
// Prediction

/// x_{i+1} = A[i] x_i + B[i] f_i + c[i], i = 0..horizon-1. The affine term
/// carries the offset of linearising away from the origin.
struct Prediction {
  std::vector<Matrix13> A;
  std::vector<Eigen::MatrixXd> B;  // 13 x n_thrusters
  std::vector<Vector13> c;

  [[nodiscard]] int horizon() const { return static_cast<int>(A.size()); }
  [[nodiscard]] Eigen::Index inputs() const { return B.empty() ? 0 : B.front().cols(); }
};

/// Maps thruster forces to the model input [accel; torque].
inline Eigen::MatrixXd input_map(const AllocationMatrix& alloc, const InertiaModel& body) {
  Eigen::MatrixXd m = alloc.columns;
  m.topRows(3) /= body.mass;
  return m;
}

inline Prediction build_prediction(const Vector13& x, const TargetOrbit& orbit,
                                   const AllocationMatrix& alloc, const InertiaModel& body,
                                   double ts, int horizon) {
  if (horizon < 1) throw DomainError("build_prediction: horizon must be >= 1");
  const Eigen::MatrixXd in_map = input_map(alloc, body);
  const Vector13 f0 = relative_deriv(x, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), body,
                                     orbit);

  Prediction p;
  p.A.reserve(static_cast<std::size_t>(horizon));
  TargetOrbit o = orbit;
  for (int i = 0; i < horizon; ++i) {
    if (i > 0) o = propagate_orbit(o, ts);
    const ContinuousLtv lin = linearize(x, o, body);
    // Drift at the linearisation point is only non-trivial in the attitude
    // rows; translation is exactly linear.
    Vector13 drift = Vector13::Zero();
    drift.tail<7>() = f0.tail<7>() - (lin.A * x).tail<7>();
    Eigen::Matrix<double, kStateDim, 7> b_aug;
    b_aug << lin.B, drift;
    const auto d = discretize(lin.A, b_aug, ts);
    p.A.push_back(d.A);
    p.B.push_back(d.B.leftCols<6>() * in_map);
    p.c.push_back(d.B.col(6));
  }
  return p;
}

/// Rolls the linear prediction forward for a stacked thrust sequence.
inline std::vector<Vector13> rollout(const Prediction& p, const Vector13& x0,
                                     const Eigen::VectorXd& stacked_f) {
  const Eigen::Index n = p.inputs();
  std::vector<Vector13> xs{x0};
  for (int i = 0; i < p.horizon(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    xs.push_back(p.A[idx] * xs.back() + p.B[idx] * stacked_f.segment(i * n, n) + p.c[idx]);
  }
  return xs;
}

// ---------------------------------------------------------------------------
// QP

/// minimise 0.5 U' H U + g' U + constant  subject to  lower <= U <= upper.
struct MpcProblem {
  int horizon = 0;
  Eigen::Index n_inputs = 0;
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double constant = 0.0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  [[nodiscard]] double objective(const Eigen::VectorXd& u) const {
    return 0.5 * u.dot(H * u) + g.dot(u) + constant;
  }
};

/// Condenses the horizon cost. `refs` holds horizon + 1 reference states;
/// `q_lin` is the quaternion about which the norm penalty is linearised.
inline MpcProblem assemble_qp(const Prediction& p, const Vector13& x0,
                              const std::vector<Vector13>& refs, const MpcWeights& w,
                              const Eigen::VectorXd& prev_f, double f_min, double f_max,
                              const Quat& q_lin) {
  const int nh = p.horizon();
  const Eigen::Index n = p.inputs();
  const Eigen::Index nu = n * nh;
  if (nh < 1 || static_cast<int>(refs.size()) != nh + 1) {
    throw DomainError("assemble_qp: need horizon + 1 reference states");
  }
  if (prev_f.size() != n || w.R.rows() != n || w.R_df.rows() != n) {
    throw DomainError("assemble_qp: thrust dimension mismatch");
  }

  MpcProblem qp;
  qp.horizon = nh;
  qp.n_inputs = n;
  qp.H = Eigen::MatrixXd::Zero(nu, nu);
  qp.g = Eigen::VectorXd::Zero(nu);
  qp.lower = Eigen::VectorXd::Constant(nu, f_min);
  qp.upper = Eigen::VectorXd::Constant(nu, f_max);

  // x_i = s_i + G_i U; cost terms are accumulated as 0.5 U'HU + g'U + c.
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(kStateDim, nu);
  Vector13 s = x0;
  auto add_state_term = [&](const Matrix13& weight, const Vector13& ref) {
    const Vector13 e = s - ref;
    const Eigen::MatrixXd wg = weight * G;
    qp.H.noalias() += 2.0 * G.transpose() * wg;
    qp.g.noalias() += 2.0 * wg.transpose() * e;
    qp.constant += e.dot(weight * e);
  };

  for (int i = 0; i < nh; ++i) {
    add_state_term(w.Q, refs[static_cast<std::size_t>(i)]);
    const auto idx = static_cast<std::size_t>(i);
    Eigen::MatrixXd g_next = p.A[idx] * G;
    g_next.middleCols(i * n, n) += p.B[idx];
    G = std::move(g_next);
    s = p.A[idx] * s + p.c[idx];
  }
  add_state_term(w.P, refs.back());

  // Thrust effort (reference thrust zero) and slew.
  for (int i = 0; i < nh; ++i) {
    qp.H.block(i * n, i * n, n, n) += 2.0 * (w.R + w.R_df);
    if (i > 0) {
      qp.H.block((i - 1) * n, (i - 1) * n, n, n) += 2.0 * w.R_df;
      qp.H.block(i * n, (i - 1) * n, n, n) -= 2.0 * w.R_df;
      qp.H.block((i - 1) * n, i * n, n, n) -= 2.0 * w.R_df;
    }
  }
  qp.g.head(n) -= 2.0 * w.R_df * prev_f;
  qp.constant += prev_f.dot(w.R_df * prev_f);

  // Linearised quaternion norm penalty on the terminal state:
  // rho * (phi0 + 2 q_lin' (q_N - q_lin))^2 with q_N = s_q + G_q U.
  if (w.rho > 0.0) {
    const double phi0 = q_lin.squaredNorm() - 1.0;
    const double a0 = phi0 + 2.0 * q_lin.dot(s.segment<4>(6) - q_lin);
    const Eigen::VectorXd a = 2.0 * G.middleRows<4>(6).transpose() * q_lin;
    qp.H.noalias() += 2.0 * w.rho * a * a.transpose();
    qp.g += 2.0 * w.rho * a0 * a;
    qp.constant += w.rho * a0 * a0;
  }

  qp.H = 0.5 * (qp.H + qp.H.transpose());
  return qp;
}

struct QpResult {
  Eigen::VectorXd u;
  int iterations = 0;
  bool converged = false;
  double projected_gradient_norm = 0.0;
};

inline double projected_gradient_norm(const MpcProblem& qp, const Eigen::VectorXd& u) {
  const Eigen::VectorXd grad = qp.H * u + qp.g;
  double sq = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    double gk = grad(k);
    if (u(k) <= qp.lower(k) && gk > 0.0) gk = 0.0;
    if (u(k) >= qp.upper(k) && gk < 0.0) gk = 0.0;
    sq += gk * gk;
  }
  return std::sqrt(sq);
}

/// Accelerated projected gradient (FISTA with gradient restart). Step size
/// from a Gershgorin bound on the Hessian spectrum.
inline QpResult solve_qp(const MpcProblem& qp, const Eigen::VectorXd& warm_start = {},
                         int max_iterations = 5000, double tol = 1e-6) {
  const Eigen::Index nu = qp.g.size();
  auto project = [&](Eigen::VectorXd& v) { v = v.cwiseMax(qp.lower).cwiseMin(qp.upper); };

  double lip = 0.0;
  for (Eigen::Index r = 0; r < nu; ++r) lip = std::max(lip, qp.H.row(r).cwiseAbs().sum());
  if (!(lip > 0.0)) throw DomainError("solve_qp: Hessian must be positive definite");
  const double step = 1.0 / lip;
  const double stop = tol * (1.0 + qp.g.norm());

  QpResult res;
  res.u = warm_start.size() == nu ? warm_start : Eigen::VectorXd::Zero(nu);
  project(res.u);
  Eigen::VectorXd y = res.u;
  Eigen::VectorXd prev = res.u;
  double t = 1.0;
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::VectorXd grad = qp.H * y + qp.g;
    prev = res.u;
    res.u = y - step * grad;
    project(res.u);
    res.iterations = it;

    res.projected_gradient_norm = projected_gradient_norm(qp, res.u);
    if (res.projected_gradient_norm <= stop) {
      res.converged = true;
      return res;
    }
    // Restart momentum when it points uphill.
    if (grad.dot(res.u - prev) > 0.0) {
      t = 1.0;
      y = res.u;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = res.u + ((t - 1.0) / t_next) * (res.u - prev);
    t = t_next;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Receding-horizon controller

struct ControlDiagnostics {
  int phase = 1;
  bool switched = false;
  bool in_terminal_set = false;
  int qp_iterations = 0;
  bool qp_converged = true;
  double objective = 0.0;
};

class MpcController {
 public:
  MpcController(AllocationMatrix alloc, InertiaModel body, MpcConfig config,
                PhaseSchedule schedule, TerminalSet terminal)
      : alloc_(std::move(alloc)),
        body_(std::move(body)),
        config_(config),
        schedule_(std::move(schedule)),
        terminal_(terminal) {
    config_.validate();
    body_.validate();
    const int n = alloc_.size();
    weights_[0] = MpcWeights::from_phase(schedule_.approach, n, config_.terminal_scale,
                                         config_.rho);
    weights_[1] = MpcWeights::from_phase(schedule_.docking, n, config_.terminal_scale,
                                         config_.rho);
    prev_f_ = Eigen::VectorXd::Zero(n);
  }

  [[nodiscard]] int phase() const { return phase_; }
  [[nodiscard]] const Eigen::VectorXd& previous_thrust() const { return prev_f_; }
  [[nodiscard]] const AllocationMatrix& allocation() const { return alloc_; }
  [[nodiscard]] const TerminalSet& terminal_set() const { return terminal_; }
  [[nodiscard]] const MpcConfig& config() const { return config_; }

  /// Phase target (the fixed end point of the current phase).
  [[nodiscard]] const RelativeState& phase_target() const {
    return phase_ == 1 ? schedule_.waypoint : docking_state_;
  }

  /// Reference states for the horizon starting at the current step.
  [[nodiscard]] std::vector<Vector13> horizon_references(const RelativeState& state) const {
    const RelativeState& target = phase_target();
    std::vector<Vector13> refs;
    refs.reserve(static_cast<std::size_t>(config_.horizon + 1));
    Eigen::Vector3d pos = glide_pos_.value_or(state.r);
    Quat q = glide_q_.value_or(state.q);
    for (int i = 0; i <= config_.horizon; ++i) {
      RelativeState ref = target;
      if (glide_speed() > 0.0) {
        const Eigen::Vector3d vel = glide_velocity(pos);
        ref.r = pos;
        ref.v = target.v + vel;
        pos += vel * config_.ts;
      }
      if (schedule_.attitude_slew_rate > 0.0) {
        const Eigen::Vector3d w = slew_rate(q);
        ref.q = q;
        ref.w = target.w + w;
        const double step = w.norm() * config_.ts;
        if (step > 0.0) {
          q = quat_canonical(quat_mul(q, quat_from_axis_angle(w, step)));
        }
      }
      refs.push_back(ref.stacked());
    }
    return refs;
  }

  /// Body rate that turns reference attitude `q` toward the phase target at
  /// the slew rate, tapered like the position glide.
  [[nodiscard]] Eigen::Vector3d slew_rate(const Quat& q) const {
    const Quat err = quat_canonical(quat_relative(phase_target().q, q));
    const double vnorm = err.tail<3>().norm();
    if (vnorm <= 0.0) return Eigen::Vector3d::Zero();
    const double angle = 2.0 * std::atan2(vnorm, err(0));
    double rate = schedule_.attitude_slew_rate;
    if (schedule_.glide_time_constant > 0.0) {
      rate = std::min(rate, angle / schedule_.glide_time_constant);
    }
    rate = std::min(rate, angle / config_.ts);
    return -err.tail<3>() / vnorm * rate;
  }

  [[nodiscard]] double glide_speed() const {
    return phase_ == 1 ? schedule_.approach_glide_speed : schedule_.docking_glide_speed;
  }

  /// Glide velocity at reference position `pos`: the configured speed,
  /// tapered to remaining distance / glide_time_constant near the target.
  [[nodiscard]] Eigen::Vector3d glide_velocity(const Eigen::Vector3d& pos) const {
    const Eigen::Vector3d gap = phase_target().r - pos;
    const double dist = gap.norm();
    if (dist <= 0.0) return Eigen::Vector3d::Zero();
    double speed = glide_speed();
    if (schedule_.glide_time_constant > 0.0) {
      speed = std::min(speed, dist / schedule_.glide_time_constant);
    }
    speed = std::min(speed, dist / config_.ts);
    return gap / dist * speed;
  }

  /// Computes and records the thrust to apply at this step.
  Eigen::VectorXd control_step(const RelativeState& state, const TargetOrbit& orbit,
                               ControlDiagnostics* diag = nullptr) {
    ControlDiagnostics d;
    if (phase_ == 1 && schedule_.reached_waypoint(state)) {
      phase_ = 2;
      d.switched = true;
    }
    d.phase = phase_;
    d.in_terminal_set = terminal_.contains(state);

    const Vector13 x = state.stacked();
    const Prediction pred =
        build_prediction(x, orbit, alloc_, body_, config_.ts, config_.horizon);
    const std::vector<Vector13> refs = horizon_references(state);
    if (glide_speed() > 0.0) glide_pos_ = refs[1].head<3>();
    if (schedule_.attitude_slew_rate > 0.0) glide_q_ = refs[1].segment<4>(6);
    const MpcProblem qp = assemble_qp(pred, x, refs, weights_[phase_ - 1], prev_f_,
                                      config_.f_min, config_.f_max, state.q);

    const Eigen::Index n = prev_f_.size();
    Eigen::VectorXd warm;
    if (last_plan_.size() == qp.g.size()) {
      warm.resize(last_plan_.size());
      const Eigen::Index tail = last_plan_.size() - n;
      warm.head(tail) = last_plan_.tail(tail);
      warm.tail(n) = last_plan_.tail(n);
    }
    const QpResult sol = solve_qp(qp, warm, config_.qp_max_iterations, config_.qp_tol);
    last_plan_ = sol.u;

    Eigen::VectorXd f = sol.u.head(n).cwiseMax(config_.f_min).cwiseMin(config_.f_max);
    prev_f_ = f;
    d.qp_iterations = sol.iterations;
    d.qp_converged = sol.converged;
    d.objective = qp.objective(sol.u);
    if (diag != nullptr) *diag = d;
    return f;
  }

 private:
  AllocationMatrix alloc_;
  InertiaModel body_;
  MpcConfig config_;
  PhaseSchedule schedule_;
  TerminalSet terminal_;
  std::array<MpcWeights, 2> weights_;
  RelativeState docking_state_;
  std::optional<Eigen::Vector3d> glide_pos_;
  std::optional<Quat> glide_q_;
  int phase_ = 1;
  Eigen::VectorXd prev_f_;
  Eigen::VectorXd last_plan_;
};

}  // namespace thrustopt
