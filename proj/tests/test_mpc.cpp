#include "thrustopt/mpc.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"

namespace thrustopt {
namespace {

AllocationMatrix small_allocation() {
  const auto layout = default_layout(0.5);
  const std::vector<int> ids = {1, 3, 5, 10, 13, 20, 23};
  return allocation_matrix(layout, ids);
}

RelativeState tumbling_state() {
  RelativeState s;
  s.r = Eigen::Vector3d(3.0, -10.0, 0.5);
  s.v = Eigen::Vector3d(0.01, 0.02, -0.005);
  s.q = quat_from_axis_angle(Eigen::Vector3d::UnitZ(), std::numbers::pi / 6);
  s.w = Eigen::Vector3d::Constant(std::numbers::pi / 180 / std::sqrt(3.0));
  return s;
}

// Direct evaluation of the horizon cost from a rollout.
double direct_cost(const Prediction& p, const Vector13& x0, const std::vector<Vector13>& refs,
                   const MpcWeights& w, const Eigen::VectorXd& prev_f, const Quat& q_lin,
                   const Eigen::VectorXd& u) {
  const auto xs = rollout(p, x0, u);
  const Eigen::Index n = p.inputs();
  const int nh = p.horizon();
  double j = 0.0;
  for (int i = 0; i < nh; ++i) {
    const Vector13 e = xs[static_cast<std::size_t>(i)] - refs[static_cast<std::size_t>(i)];
    j += e.dot(w.Q * e);
    const Eigen::VectorXd f = u.segment(i * n, n);
    const Eigen::VectorXd f_prev = i == 0 ? prev_f : Eigen::VectorXd(u.segment((i - 1) * n, n));
    j += f.dot(w.R * f) + (f - f_prev).dot(w.R_df * (f - f_prev));
  }
  const Vector13 e = xs.back() - refs.back();
  j += e.dot(w.P * e);
  const double lin = q_lin.squaredNorm() - 1.0 + 2.0 * q_lin.dot(xs.back().segment<4>(6) - q_lin);
  return j + w.rho * lin * lin;
}

TEST(Prediction, OneStepMatchesTruthToThirdOrder) {
  const auto alloc = small_allocation();
  const auto body = InertiaModel::cube(20.0, 0.5);
  const auto orbit = TargetOrbit::make(kEarthMu, 12'000e3, 0.1, 0.3);
  RelativeState s = tumbling_state();
  s.w = Eigen::Vector3d(0.3, -0.2, 0.25);
  Eigen::VectorXd f = Eigen::VectorXd::Constant(alloc.size(), 0.02);
  std::vector<double> err;
  for (double ts : {0.2, 0.1, 0.05}) {
    const Prediction p = build_prediction(s.stacked(), orbit, alloc, body, ts, 1);
    const Vector13 pred = rollout(p, s.stacked(), f)[1];
    const Vector13 truth =
        nonlinear_step(s, wrench_of(alloc, f), body, orbit, ts, false).stacked();
    err.push_back((pred - truth).norm());
  }
  EXPECT_LT(err[1], 1e-5);
  EXPECT_GT(err[0] / err[1], 6.0);
  EXPECT_GT(err[1] / err[2], 6.0);
}

TEST(Prediction, ShapesAndHorizon) {
  const auto alloc = small_allocation();
  const auto body = InertiaModel::cube(20.0, 0.5);
  const auto orbit = TargetOrbit::make(kEarthMu, 12'000e3, 0.1, 0.0);
  const Prediction p = build_prediction(tumbling_state().stacked(), orbit, alloc, body, 0.1, 4);
  EXPECT_EQ(p.horizon(), 4);
  EXPECT_EQ(p.inputs(), 7);
  EXPECT_EQ(rollout(p, tumbling_state().stacked(), Eigen::VectorXd::Zero(28)).size(), 5u);
  EXPECT_THROW(build_prediction(Vector13::Zero(), orbit, alloc, body, 0.1, 0), DomainError);
}

TEST(Qp, CondensedObjectiveMatchesDirectCost) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(0.0, 0.05);
  const auto alloc = small_allocation();
  const auto body = InertiaModel::cube(20.0, 0.5);
  const auto orbit = TargetOrbit::make(kEarthMu, 12'000e3, 0.1, 1.0);
  const RelativeState s = tumbling_state();
  const int nh = 5;
  const Prediction p = build_prediction(s.stacked(), orbit, alloc, body, 0.1, nh);
  const MpcWeights w = MpcWeights::from_phase(approach_weights(), alloc.size(), 100.0, 1e3);
  std::vector<Vector13> refs;
  for (int i = 0; i <= nh; ++i) {
    RelativeState r;
    r.r = Eigen::Vector3d(2.0 + 0.01 * i, 0.0, 0.0);
    refs.push_back(r.stacked());
  }
  Eigen::VectorXd prev(alloc.size());
  for (Eigen::Index k = 0; k < prev.size(); ++k) prev(k) = uni(rng);
  const Quat q_lin = s.q * 1.001;
  const MpcProblem qp = assemble_qp(p, s.stacked(), refs, w, prev, 0.0, 0.05, q_lin);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd u(nh * alloc.size());
    for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = uni(rng);
    const double ref = direct_cost(p, s.stacked(), refs, w, prev, q_lin, u);
    EXPECT_NEAR(qp.objective(u), ref, 1e-9 * std::abs(ref));
  }
  EXPECT_TRUE(qp.H.isApprox(qp.H.transpose()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qp.H);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  EXPECT_THROW(assemble_qp(p, s.stacked(), std::vector<Vector13>(3), w, prev, 0.0, 0.05, q_lin),
               DomainError);
}

TEST(Qp, SolverMatchesActiveSetEnumeration) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 6;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = normal(rng);
    MpcProblem qp;
    qp.H = m * m.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    qp.g.resize(n);
    for (int i = 0; i < n; ++i) qp.g(i) = normal(rng);
    qp.lower = Eigen::VectorXd::Zero(n);
    qp.upper = Eigen::VectorXd::Constant(n, 0.5);
    const QpResult r = solve_qp(qp, {}, 200000, 1e-12);
    const Eigen::VectorXd ref = oracle::box_qp_by_enumeration(qp.H, qp.g, qp.lower, qp.upper);
    EXPECT_TRUE(r.converged) << "trial " << trial;
    EXPECT_NEAR(qp.objective(r.u), qp.objective(ref), 1e-9) << "trial " << trial;
    EXPECT_LT((r.u - ref).norm(), 1e-5) << "trial " << trial;
    EXPECT_LT(projected_gradient_norm(qp, r.u), 1e-9 * (1.0 + qp.g.norm()));
  }
}

TEST(Qp, ScalarProblemClipsAtUpperBound) {
  MpcProblem qp;
  qp.H = Eigen::MatrixXd::Identity(1, 1);
  qp.g = Eigen::VectorXd::Constant(1, -1.0);
  qp.lower = Eigen::VectorXd::Zero(1);
  qp.upper = Eigen::VectorXd::Constant(1, 0.05);
  const QpResult r = solve_qp(qp);
  EXPECT_TRUE(r.converged);
  EXPECT_DOUBLE_EQ(r.u(0), 0.05);
  qp.g(0) = 1.0;
  EXPECT_DOUBLE_EQ(solve_qp(qp).u(0), 0.0);
  qp.H.setZero();
  EXPECT_THROW(solve_qp(qp), DomainError);
}

TEST(Weights, ValidationAndTerminalScaling) {
  const MpcWeights w = MpcWeights::from_phase(docking_weights(), 4, 10.0, 0.0);
  EXPECT_TRUE(w.P.isApprox(10.0 * w.Q));
  EXPECT_EQ(w.R.rows(), 4);
  PhaseWeights bad = approach_weights();
  bad.r = 0.0;
  EXPECT_THROW(MpcWeights::from_phase(bad, 4, 10.0, 0.0), DomainError);
  EXPECT_THROW(MpcWeights::from_phase(approach_weights(), 4, -1.0, 0.0), DomainError);
  MpcConfig c;
  c.f_max = -1.0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(TerminalSetTest, Membership) {
  const TerminalSet t;
  RelativeState s;
  EXPECT_TRUE(t.contains(s));
  s.r = Eigen::Vector3d(0.04, 0.0, 0.0);
  EXPECT_TRUE(t.contains(s));
  s.r.x() = 0.06;
  EXPECT_FALSE(t.contains(s));
  s.r.setZero();
  s.v = Eigen::Vector3d(0.0, 0.011, 0.0);
  EXPECT_FALSE(t.contains(s));
  s.v.setZero();
  s.q = quat_from_axis_angle(Eigen::Vector3d::UnitX(), 1.9 * std::numbers::pi / 180);
  EXPECT_TRUE(t.contains(s));
  s.q = quat_from_axis_angle(Eigen::Vector3d::UnitX(), 2.1 * std::numbers::pi / 180);
  EXPECT_FALSE(t.contains(s));
}

MpcController make_controller(PhaseSchedule schedule = {}) {
  schedule.waypoint = default_waypoint();
  return MpcController(small_allocation(), InertiaModel::cube(20.0, 0.5), MpcConfig{}, schedule,
                       TerminalSet{});
}

TEST(Controller, ReferencesGlideAndSlewAtBoundedRates) {
  const MpcController c = make_controller();
  const RelativeState s = tumbling_state();
  const auto refs = c.horizon_references(s);
  ASSERT_EQ(refs.size(), 11u);
  EXPECT_TRUE(refs[0].head<3>().isApprox(s.r));
  for (std::size_t i = 1; i < refs.size(); ++i) {
    EXPECT_NEAR((refs[i].head<3>() - refs[i - 1].head<3>()).norm(), 0.05 * 0.1, 1e-12);
    EXPECT_NEAR(quat_angle(refs[i].segment<4>(6), refs[i - 1].segment<4>(6)),
                0.5 * std::numbers::pi / 180 * 0.1, 1e-9);
  }
  // Reference heads toward the waypoint and back toward identity attitude.
  EXPECT_LT((refs.back().head<3>() - default_waypoint().r).norm(),
            (s.r - default_waypoint().r).norm());
  EXPECT_LT(quat_angle(refs.back().segment<4>(6), quat_identity()),
            quat_angle(s.q, quat_identity()));
}

TEST(Controller, StepReferencesWhenRatesAreZero) {
  PhaseSchedule sched;
  sched.approach_glide_speed = 0.0;
  sched.attitude_slew_rate = 0.0;
  const MpcController c = make_controller(sched);
  for (const auto& r : c.horizon_references(tumbling_state())) {
    EXPECT_TRUE(r.isApprox(default_waypoint().stacked()));
  }
}

TEST(Controller, AtRestOnTargetGivesZeroThrustAndSwitchesPhase) {
  MpcController c = make_controller();
  const auto orbit = TargetOrbit::make(kEarthMu, 12'000e3, 0.0, 0.0);
  ControlDiagnostics d;
  const Eigen::VectorXd f = c.control_step(default_waypoint(), orbit, &d);
  EXPECT_TRUE(d.switched);
  EXPECT_EQ(c.phase(), 2);
  EXPECT_GE(f.minCoeff(), 0.0);
  EXPECT_LE(f.maxCoeff(), 0.05);
  MpcController docked(small_allocation(), InertiaModel::cube(20.0, 0.5), MpcConfig{},
                       PhaseSchedule{}, TerminalSet{});
  const Eigen::VectorXd g = docked.control_step(RelativeState{}, orbit, &d);
  EXPECT_EQ(docked.phase(), 2);
  EXPECT_LT(g.norm(), 1e-6);
}

TEST(Controller, ThrustStaysInBounds) {
  MpcController c = make_controller();
  const auto orbit = TargetOrbit::make(kEarthMu, 12'000e3, 0.1, 0.0);
  const Eigen::VectorXd f = c.control_step(tumbling_state(), orbit);
  EXPECT_EQ(f.size(), 7);
  EXPECT_GE(f.minCoeff(), 0.0);
  EXPECT_LE(f.maxCoeff(), 0.05);
  EXPECT_GT(f.maxCoeff(), 0.0);
}

}  // namespace
}  // namespace thrustopt
