#pragma once

// Chaser-relative dynamics: Tschauner-Hempel translation in the target's
// LVLH frame, scalar-first relative quaternion attitude, their Jacobians and
// zero-order-hold discretisation.
//
// Full state layout (13): [x y z | vx vy vz | q0 q1 q2 q3 | wx wy wz].

#include <Eigen/Core>
#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

#include "thrustopt/errors.hpp"
#include "thrustopt/geometry.hpp"

namespace thrustopt {

inline constexpr int kStateDim = 13;

using Vector13 = Eigen::Matrix<double, kStateDim, 1>;
using Matrix13 = Eigen::Matrix<double, kStateDim, kStateDim>;
using Matrix13x6 = Eigen::Matrix<double, kStateDim, 6>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Matrix6x3 = Eigen::Matrix<double, 6, 3>;
using Matrix7 = Eigen::Matrix<double, 7, 7>;
using Matrix7x3 = Eigen::Matrix<double, 7, 3>;
using Quat = Eigen::Vector4d;  // [q0, q1, q2, q3], scalar first

inline constexpr double kEarthMu = 3.986e14;

// ---------------------------------------------------------------------------
// Target orbit

struct TargetOrbit {
  double mu = kEarthMu;
  double a = 12'000e3;
  double e = 0.1;
  double h = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  double theta_ddot = 0.0;

  [[nodiscard]] double semi_latus_rectum() const { return a * (1.0 - e * e); }
  [[nodiscard]] double radius() const { return semi_latus_rectum() / (1.0 + e * std::cos(theta)); }
  [[nodiscard]] double radial_rate() const { return mu / h * e * std::sin(theta); }

  /// Derived quantities (h, theta_dot, theta_ddot) from mu, a, e, theta.
  static TargetOrbit make(double mu, double a, double e, double theta) {
    if (!(mu > 0.0) || !(a > 0.0) || !(e >= 0.0 && e < 1.0) || !std::isfinite(theta)) {
      throw DomainError("TargetOrbit: need mu > 0, a > 0, 0 <= e < 1");
    }
    TargetOrbit o;
    o.mu = mu;
    o.a = a;
    o.e = e;
    o.h = std::sqrt(mu * a * (1.0 - e * e));
    o.set_anomaly(theta);
    return o;
  }

  void set_anomaly(double th) {
    theta = th;
    const double r = radius();
    theta_dot = h / (r * r);
    theta_ddot = -2.0 * radial_rate() * theta_dot / r;
  }

  [[nodiscard]] double period() const {
    return 2.0 * std::numbers::pi * std::sqrt(a * a * a / mu);
  }
};

/// Advances the true anomaly by RK4 on theta_dot = h / r^2, in substeps no
/// longer than `max_step`.
inline TargetOrbit propagate_orbit(const TargetOrbit& orbit, double dt, double max_step = 1.0) {
  if (!(dt > 0.0)) throw DomainError("propagate_orbit: dt must be positive");
  const double p = orbit.semi_latus_rectum();
  auto rate = [&](double th) {
    const double r = p / (1.0 + orbit.e * std::cos(th));
    return orbit.h / (r * r);
  };
  const int steps = std::max(1, static_cast<int>(std::ceil(dt / max_step)));
  const double step = dt / steps;
  double th = orbit.theta;
  for (int i = 0; i < steps; ++i) {
    const double k1 = rate(th);
    const double k2 = rate(th + 0.5 * step * k1);
    const double k3 = rate(th + 0.5 * step * k2);
    const double k4 = rate(th + step * k3);
    th += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  TargetOrbit out = orbit;
  out.set_anomaly(th);
  return out;
}

// ---------------------------------------------------------------------------
// Translational relative motion

/// Equations of motion in LVLH with `u` the control acceleration. The
/// coefficient (theta_dot / h)^(3/2) equals 1 / r^3.
inline Eigen::Matrix<double, 6, 1> th_nonlinear_deriv(const Eigen::Matrix<double, 6, 1>& s,
                                                      const Eigen::Vector3d& u,
                                                      const TargetOrbit& o) {
  const double td = o.theta_dot;
  const double tdd = o.theta_ddot;
  const double k = o.mu * std::pow(td / o.h, 1.5);
  const double x = s(0), y = s(1), z = s(2);
  const double vx = s(3), vy = s(4);

  Eigen::Matrix<double, 6, 1> d;
  d.head<3>() = s.tail<3>();
  d(3) = 2.0 * td * vy + tdd * y + td * td * x + 2.0 * k * x + u.x();
  d(4) = -2.0 * td * vx - tdd * x + td * td * y - k * y + u.y();
  d(5) = -k * z + u.z();
  return d;
}

struct TranslationalLtv {
  Matrix6 A;
  Matrix6x3 B;
  Eigen::Matrix<double, 3, 6> C;
};

inline TranslationalLtv th_ltv(const TargetOrbit& o) {
  const double td2 = o.theta_dot * o.theta_dot;
  const double ec = o.e * std::cos(o.theta);
  TranslationalLtv m;
  m.A.setZero();
  m.A.topRightCorner<3, 3>().setIdentity();
  m.A(3, 0) = (3.0 + ec) / (1.0 + ec) * td2;
  m.A(3, 1) = o.theta_ddot;
  m.A(3, 4) = 2.0 * o.theta_dot;
  m.A(4, 0) = -o.theta_ddot;
  m.A(4, 1) = ec / (1.0 + ec) * td2;
  m.A(4, 3) = -2.0 * o.theta_dot;
  m.A(5, 2) = -td2 / (1.0 + ec);
  m.B.setZero();
  m.B.bottomRows<3>().setIdentity();
  m.C.setZero();
  m.C.leftCols<3>().setIdentity();
  return m;
}

// ---------------------------------------------------------------------------
// Quaternions (Hamilton product, scalar first)

inline Quat quat_identity() { return Quat(1.0, 0.0, 0.0, 0.0); }

inline Quat quat_mul(const Quat& p, const Quat& q) {
  const double p0 = p(0);
  const Eigen::Vector3d pv = p.tail<3>();
  const double q0 = q(0);
  const Eigen::Vector3d qv = q.tail<3>();
  Quat r;
  r(0) = p0 * q0 - pv.dot(qv);
  r.tail<3>() = p0 * qv + q0 * pv + pv.cross(qv);
  return r;
}

inline Quat quat_conj(const Quat& q) { return Quat(q(0), -q(1), -q(2), -q(3)); }

inline Quat quat_from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const Eigen::Vector3d u = axis.normalized();
  Quat q;
  q(0) = std::cos(angle / 2.0);
  q.tail<3>() = std::sin(angle / 2.0) * u;
  return q;
}

/// Rotation matrix of a unit quaternion: maps vectors expressed in the
/// rotated (body) frame into the reference frame.
inline Eigen::Matrix3d quat_to_rotation(const Quat& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Target-to-chaser relative attitude, q_T^-1 (x) q_C.
inline Quat quat_relative(const Quat& q_target, const Quat& q_chaser) {
  Quat r = quat_mul(quat_conj(q_target), q_chaser);
  return r / r.norm();
}

/// Flips sign so that the scalar part is non-negative.
inline Quat quat_canonical(const Quat& q) { return q(0) < 0.0 ? Quat(-q) : q; }

/// Rotation angle between two attitudes, in [0, pi].
inline double quat_angle(const Quat& a, const Quat& b) {
  const double c = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
  return 2.0 * std::acos(c);
}

/// Chaser rate relative to the target, in chaser body axes. The target rate
/// is brought into chaser axes with the transpose of quat_to_rotation(q_rel).
inline Eigen::Vector3d omega_rel(const Eigen::Vector3d& w_chaser, const Eigen::Vector3d& w_target,
                                 const Quat& q_rel) {
  return w_chaser - quat_to_rotation(q_rel).transpose() * w_target;
}

inline Eigen::Matrix4d omega_matrix(const Eigen::Vector3d& w) {
  Eigen::Matrix4d m;
  m << 0.0, -w.x(), -w.y(), -w.z(),
      w.x(), 0.0, w.z(), -w.y(),
      w.y(), -w.z(), 0.0, w.x(),
      w.z(), w.y(), -w.x(), 0.0;
  return m;
}

/// Xi(q) such that omega_matrix(w) * q == Xi(q) * w.
inline Eigen::Matrix<double, 4, 3> quat_rate_matrix(const Quat& q) {
  Eigen::Matrix<double, 4, 3> m;
  m << -q(1), -q(2), -q(3),
      q(0), -q(3), q(2),
      q(3), q(0), -q(1),
      -q(2), q(1), q(0);
  return m;
}

inline Quat quat_kinematics(const Quat& q, const Eigen::Vector3d& w) {
  return 0.5 * omega_matrix(w) * q;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Rigid body

struct InertiaModel {
  double mass = 20.0;
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Identity();

  /// Uniform cube: I = m L^2 / 6 on the diagonal.
  static InertiaModel cube(double mass, double side) {
    InertiaModel m;
    m.mass = mass;
    m.inertia = Eigen::Matrix3d::Identity() * (mass * side * side / 6.0);
    return m;
  }

  void validate() const {
    if (!(mass > 0.0)) throw DomainError("InertiaModel: mass must be positive");
    if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * inertia.norm()) {
      throw DomainError("InertiaModel: inertia must be symmetric");
    }
    Eigen::LLT<Eigen::Matrix3d> llt(inertia);
    if (llt.info() != Eigen::Success) {
      throw DomainError("InertiaModel: inertia must be positive definite");
    }
  }
};

inline Eigen::Vector3d attitude_deriv(const Eigen::Vector3d& w, const Eigen::Vector3d& tau,
                                      const Eigen::Matrix3d& inertia) {
  Eigen::LLT<Eigen::Matrix3d> llt(inertia);
  if (llt.info() != Eigen::Success) {
    throw DomainError("attitude_deriv: inertia must be symmetric positive definite");
  }
  return llt.solve(tau - w.cross(inertia * w));
}

struct AttitudeLinearization {
  Matrix7 A;
  Matrix7x3 B;
};

inline AttitudeLinearization attitude_jacobians(const Quat& q, const Eigen::Vector3d& w,
                                                const Eigen::Matrix3d& inertia) {
  const Eigen::Matrix3d inv = inertia.inverse();
  AttitudeLinearization lin;
  lin.A.setZero();
  lin.A.topLeftCorner<4, 4>() = 0.5 * omega_matrix(w);
  lin.A.topRightCorner<4, 3>() = 0.5 * quat_rate_matrix(q);
  lin.A.bottomRightCorner<3, 3>() = inv * (skew(inertia * w) - skew(w) * inertia);
  lin.B.setZero();
  lin.B.bottomRows<3>() = inv;
  return lin;
}

struct ContinuousLtv {
  Matrix13 A;
  Matrix13x6 B;  // input [accel (3); torque (3)]
};

inline ContinuousLtv combine(const Matrix6& a_t, const Matrix6x3& b_t, const Matrix7& a_a,
                             const Matrix7x3& b_a) {
  ContinuousLtv m;
  m.A.setZero();
  m.B.setZero();
  m.A.topLeftCorner<6, 6>() = a_t;
  m.A.bottomRightCorner<7, 7>() = a_a;
  m.B.topLeftCorner<6, 3>() = b_t;
  m.B.bottomRightCorner<7, 3>() = b_a;
  return m;
}

// ---------------------------------------------------------------------------
// Zero-order hold

template <int N, int M>
struct DiscretePair {
  Eigen::Matrix<double, N, N> A;
  Eigen::Matrix<double, N, M> B;
};

/// A_d = exp(A Ts), B_d = int_0^Ts exp(A s) ds B, from the upper blocks of
/// exp([[A, B], [0, 0]] Ts).
template <typename DerivedA, typename DerivedB>
auto discretize(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                double ts) {
  constexpr int N = DerivedA::RowsAtCompileTime;
  constexpr int M = DerivedB::ColsAtCompileTime;
  if (!(ts > 0.0)) throw DomainError("discretize: sample time must be positive");
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw DomainError("discretize: dimension mismatch");
  }
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = a * ts;
  aug.topRightCorner(n, m) = b * ts;
  const Eigen::MatrixXd phi = aug.exp();
  if (!phi.allFinite()) throw NumericError("discretize: matrix exponential did not converge");
  DiscretePair<N, M> out;
  out.A = phi.topLeftCorner(n, n);
  out.B = phi.topRightCorner(n, m);
  return out;
}

// ---------------------------------------------------------------------------
// State and truth propagation

struct RelativeState {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Quat q = quat_identity();
  Eigen::Vector3d w = Eigen::Vector3d::Zero();

  [[nodiscard]] Vector13 stacked() const {
    Vector13 x;
    x << r, v, q, w;
    return x;
  }

  static RelativeState from_stacked(const Vector13& x) {
    RelativeState s;
    s.r = x.segment<3>(0);
    s.v = x.segment<3>(3);
    s.q = x.segment<4>(6);
    s.w = x.segment<3>(10);
    return s;
  }
};

/// Full state derivative given body wrench (force [N], torque [N m]).
inline Vector13 relative_deriv(const Vector13& x, const Eigen::Vector3d& force,
                               const Eigen::Vector3d& torque, const InertiaModel& body,
                               const TargetOrbit& orbit) {
  Vector13 d;
  d.head<6>() = th_nonlinear_deriv(x.head<6>(), force / body.mass, orbit);
  const Quat q = x.segment<4>(6);
  const Eigen::Vector3d w = x.tail<3>();
  d.segment<4>(6) = quat_kinematics(q, w);
  d.tail<3>() = attitude_deriv(w, torque, body.inertia);
  return d;
}

/// One RK4 step of the truth model with thrusts held constant. The orbit
/// coefficients follow the true anomaly through the step.
inline RelativeState nonlinear_step(const RelativeState& state, const Wrench& wrench,
                                    const InertiaModel& body, const TargetOrbit& orbit,
                                    double dt, bool renormalize = true) {
  if (!(dt > 0.0)) throw DomainError("nonlinear_step: dt must be positive");
  const TargetOrbit mid = propagate_orbit(orbit, dt / 2.0);
  const TargetOrbit end = propagate_orbit(orbit, dt);
  const Vector13 x = state.stacked();
  const Vector13 k1 = relative_deriv(x, wrench.force, wrench.torque, body, orbit);
  const Vector13 k2 = relative_deriv(x + 0.5 * dt * k1, wrench.force, wrench.torque, body, mid);
  const Vector13 k3 = relative_deriv(x + 0.5 * dt * k2, wrench.force, wrench.torque, body, mid);
  const Vector13 k4 = relative_deriv(x + dt * k3, wrench.force, wrench.torque, body, end);
  RelativeState out = RelativeState::from_stacked(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  if (renormalize) out.q = quat_canonical(out.q / out.q.norm());
  return out;
}

template <typename Derived>
RelativeState nonlinear_step(const RelativeState& state, const Eigen::MatrixBase<Derived>& thrusts,
                             const AllocationMatrix& alloc, const InertiaModel& body,
                             const TargetOrbit& orbit, double dt) {
  return nonlinear_step(state, wrench_of(alloc, thrusts), body, orbit, dt);
}

/// Continuous Jacobians of the full model at `x` (translation block from
/// the orbit, attitude block from the current quaternion and rate).
inline ContinuousLtv linearize(const Vector13& x, const TargetOrbit& orbit,
                               const InertiaModel& body) {
  const TranslationalLtv t = th_ltv(orbit);
  const AttitudeLinearization att =
      attitude_jacobians(x.segment<4>(6), x.tail<3>(), body.inertia);
  return combine(t.A, t.B, att.A, att.B);
}

}  // namespace thrustopt
