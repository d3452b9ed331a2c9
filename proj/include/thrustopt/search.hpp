#pragma once

// Exhaustive thruster-subset search.
//
// A subset is viable when its allocation matrix has rank 6 and every one of
// the twelve +/- unit force and torque commands is reproduced by
// non-negative thrusts with squared residual <= eps. Viable subsets are
// ranked by the summed thrust over the twelve solutions; the minimisers for
// each subset size are the optimal configurations.

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "thrustopt/errors.hpp"
#include "thrustopt/geometry.hpp"
#include "thrustopt/nnls.hpp"

namespace thrustopt {

inline constexpr int kNumUnitCommands = 12;

/// +f_x, +f_y, +f_z, +tau_x, +tau_y, +tau_z, then the same six negated.
using UnitCommandSet = std::array<Vector6, kNumUnitCommands>;

inline UnitCommandSet unit_commands() {
  UnitCommandSet cmds;
  for (int k = 0; k < kNumUnitCommands; ++k) {
    cmds[static_cast<std::size_t>(k)] = Vector6::Zero();
    cmds[static_cast<std::size_t>(k)](k % 6) = k < 6 ? 1.0 : -1.0;
  }
  return cmds;
}

struct SearchOptions {
  double eps = 1e-8;          // squared-residual threshold for each unit command
  double rank_tol = 1e-9;     // singular values above sigma_max * rank_tol count
  double tie_tol = 1e-6;      // [N] width of the optimal band above f_min
  double nnls_tol = 1e-10;
  int threads = 1;
  bool keep_all_solutions = true;  // store unit solutions on every optimal record
};

struct ConfigurationRecord {
  std::vector<int> thruster_ids;
  bool viable = false;
  /// Column q holds the thrusts for unit command q; empty unless viable.
  Eigen::MatrixXd unit_solutions;
  double total_thrust = std::numeric_limits<double>::infinity();
  double max_residual = std::numeric_limits<double>::infinity();
  bool solver_failed = false;
};

struct SizeSummary {
  int n = 0;
  std::uint64_t combinations = 0;
  std::uint64_t viable = 0;
  std::uint64_t optimal = 0;
  std::optional<double> f_min;
};

struct SizeResult {
  SizeSummary summary;
  std::vector<ConfigurationRecord> optimal;  // lexicographic id order
};

struct SearchResult {
  std::vector<SizeResult> sizes;

  [[nodiscard]] const SizeResult* find(int n) const {
    for (const auto& s : sizes) {
      if (s.summary.n == n) return &s;
    }
    return nullptr;
  }
};

/// Binomial coefficient, exact for the sizes used here.
inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  }
  return r;
}

/// Lexicographic k-combinations of {1..n}.
class SubsetEnumerator {
 public:
  SubsetEnumerator(int n, int k) : n_(n), k_(k) {
    if (n < 1 || k < 1 || k > n) {
      throw DomainError("enumerate_subsets: need 1 <= k <= n");
    }
    current_.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) current_[static_cast<std::size_t>(i)] = i + 1;
  }

  /// Starts at `prefix` followed by the smallest completion; `next` then
  /// stays inside that prefix.
  SubsetEnumerator(int n, int k, std::span<const int> prefix) : SubsetEnumerator(n, k) {
    if (prefix.size() > static_cast<std::size_t>(k)) {
      throw DomainError("enumerate_subsets: prefix longer than k");
    }
    fixed_ = static_cast<int>(prefix.size());
    for (std::size_t i = 0; i < prefix.size(); ++i) current_[i] = prefix[i];
    for (int i = fixed_; i < k; ++i) {
      current_[static_cast<std::size_t>(i)] =
          (i == 0 ? 0 : current_[static_cast<std::size_t>(i - 1)]) + 1;
    }
    done_ = k > 0 && current_.back() > n;
  }

  [[nodiscard]] bool done() const { return done_; }
  [[nodiscard]] std::span<const int> current() const { return current_; }

  void next() {
    int i = k_ - 1;
    while (i >= fixed_ && current_[static_cast<std::size_t>(i)] == n_ - k_ + i + 1) --i;
    if (i < fixed_) {
      done_ = true;
      return;
    }
    ++current_[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k_; ++j) {
      current_[static_cast<std::size_t>(j)] = current_[static_cast<std::size_t>(j - 1)] + 1;
    }
  }

 private:
  int n_;
  int k_;
  int fixed_ = 0;
  bool done_ = false;
  std::vector<int> current_;
};

/// Materialises every k-subset of {1..n}; for tests and small n only.
inline std::vector<std::vector<int>> enumerate_subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  for (SubsetEnumerator e(n, k); !e.done(); e.next()) {
    out.emplace_back(e.current().begin(), e.current().end());
  }
  return out;
}

template <typename Derived>
int rank_of(const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-9) {
  if (m.size() == 0) return 0;
  using Mat = Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime,
                            Eigen::ColMajor, Derived::MaxRowsAtCompileTime,
                            Derived::MaxColsAtCompileTime>;
  Eigen::JacobiSVD<Mat> svd(m.derived());
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > sv(0) * rel_tol) ++r;
  }
  return r;
}

namespace detail {

// Runs the twelve unit-command solves. Stops at the first failing command
// unless `full` is set.
inline ConfigurationRecord test_columns(const AllocMatrix& h, std::span<const int> ids,
                                        const UnitCommandSet& cmds, const SearchOptions& opts,
                                        bool store_solutions) {
  ConfigurationRecord rec;
  rec.thruster_ids.assign(ids.begin(), ids.end());
  if (h.cols() < 6 || rank_of(h, opts.rank_tol) < 6) return rec;

  std::array<NnlsSolution<kMaxThrusters>, kNumUnitCommands> sols;
  double worst = 0.0;
  double total = 0.0;
  NnlsOptions nopts;
  nopts.tol = opts.nnls_tol;
  for (std::size_t q = 0; q < cmds.size(); ++q) {
    try {
      sols[q] = nnls_solve(h, cmds[q], nopts);
    } catch (const NnlsConvergenceError&) {
      rec.solver_failed = true;
      return rec;
    }
    worst = std::max(worst, sols[q].residual_norm_sq);
    if (sols[q].residual_norm_sq > opts.eps) {
      rec.max_residual = worst;
      return rec;
    }
    total += sols[q].x.sum();
  }
  rec.viable = true;
  rec.max_residual = worst;
  rec.total_thrust = total;
  if (store_solutions) {
    rec.unit_solutions.resize(h.cols(), kNumUnitCommands);
    for (std::size_t q = 0; q < cmds.size(); ++q) {
      rec.unit_solutions.col(static_cast<Eigen::Index>(q)) = sols[q].x;
    }
  }
  return rec;
}

}  // namespace detail

inline ConfigurationRecord viability_test(const AllocationMatrix& alloc,
                                          const UnitCommandSet& cmds = unit_commands(),
                                          const SearchOptions& opts = {}) {
  if (alloc.columns.cols() < 1) throw DomainError("viability_test: empty allocation matrix");
  return detail::test_columns(alloc.columns, alloc.thruster_ids, cmds, opts, true);
}

/// Fills in the unit solutions of a viable record that was stored without them.
inline void attach_unit_solutions(ConfigurationRecord& rec, std::span<const Thruster> layout,
                                  const SearchOptions& opts = {}) {
  if (!rec.viable || rec.unit_solutions.size() != 0) return;
  const AllocationMatrix h = allocation_matrix(layout, rec.thruster_ids);
  rec = viability_test(h, unit_commands(), opts);
}

namespace detail {

struct ChunkResult {
  std::uint64_t viable = 0;
  double f_min = std::numeric_limits<double>::infinity();
  std::vector<ConfigurationRecord> best;  // within tie_tol of this chunk's f_min
};

inline void offer(ChunkResult& acc, ConfigurationRecord&& rec, double tie_tol) {
  if (rec.total_thrust < acc.f_min) {
    acc.f_min = rec.total_thrust;
    std::erase_if(acc.best, [&](const ConfigurationRecord& r) {
      return r.total_thrust > acc.f_min + tie_tol;
    });
  }
  if (rec.total_thrust <= acc.f_min + tie_tol) acc.best.push_back(std::move(rec));
}

}  // namespace detail

/// Evaluates every size-n subset of the layout. Subsets are split into
/// chunks by their first two ids; chunk results are merged in chunk order so
/// the outcome does not depend on the thread count.
inline SizeResult search_size(std::span<const Thruster> layout, int n, const SearchOptions& opts) {
  const int total = static_cast<int>(layout.size());
  if (n < 1 || n > total) throw DomainError("search_size: subset size out of range");

  const AllocationMatrix full = allocation_matrix(layout);
  const UnitCommandSet cmds = unit_commands();

  std::vector<std::vector<int>> prefixes =
      enumerate_subsets(total, std::min(2, n));
  if (n >= 2) {
    // A prefix (a, b) must leave room for n - 2 larger ids.
    std::erase_if(prefixes, [&](const std::vector<int>& p) { return p[1] > total - (n - 2); });
  }
  std::vector<detail::ChunkResult> chunks(prefixes.size());

  auto work = [&](std::size_t c) {
    detail::ChunkResult acc;
    AllocMatrix h(6, n);
    for (SubsetEnumerator e(total, n, prefixes[c]); !e.done(); e.next()) {
      const auto ids = e.current();
      for (int j = 0; j < n; ++j) {
        h.col(j) = full.columns.col(ids[static_cast<std::size_t>(j)] - 1);
      }
      auto rec = detail::test_columns(h, ids, cmds, opts, false);
      if (!rec.viable) continue;
      ++acc.viable;
      detail::offer(acc, std::move(rec), opts.tie_tol);
    }
    chunks[c] = std::move(acc);
  };

  const int threads = std::max(1, opts.threads);
  if (threads == 1 || chunks.size() < 2) {
    for (std::size_t c = 0; c < chunks.size(); ++c) work(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks.size(); c = next++) work(c);
      });
    }
  }

  SizeResult out;
  out.summary.n = n;
  out.summary.combinations = binomial(total, n);
  double f_min = std::numeric_limits<double>::infinity();
  for (const auto& c : chunks) {
    out.summary.viable += c.viable;
    f_min = std::min(f_min, c.f_min);
  }
  if (out.summary.viable > 0) {
    out.summary.f_min = f_min;
    for (auto& c : chunks) {
      for (auto& rec : c.best) {
        if (rec.total_thrust <= f_min + opts.tie_tol) out.optimal.push_back(std::move(rec));
      }
    }
  }
  out.summary.optimal = out.optimal.size();

  for (std::size_t i = 0; i < out.optimal.size(); ++i) {
    if (opts.keep_all_solutions || i == 0) attach_unit_solutions(out.optimal[i], layout, opts);
  }
  return out;
}

inline SearchResult sweep(std::span<const Thruster> layout, int n_min, int n_max,
                          const SearchOptions& opts = {}) {
  if (n_min < 1 || n_max > static_cast<int>(layout.size()) || n_min > n_max) {
    throw DomainError("sweep: invalid subset size range");
  }
  SearchResult out;
  for (int n = n_min; n <= n_max; ++n) out.sizes.push_back(search_size(layout, n, opts));
  return out;
}

inline SearchResult sweep(const CubeGeometry& geom, const FaceAngles& angles, int n_min,
                          int n_max, const SearchOptions& opts = {}) {
  const auto layout = build_layout(geom, angles);
  return sweep(layout, n_min, n_max, opts);
}

/// Viable-count scan over a global (theta, phi) grid for one subset size.
struct OrientationPoint {
  FaceAngles angles;
  SizeSummary summary;
};

inline std::vector<OrientationPoint> orientation_sweep(const CubeGeometry& geom,
                                                       std::span<const double> thetas,
                                                       std::span<const double> phis, int n,
                                                       const SearchOptions& opts = {}) {
  std::vector<OrientationPoint> out;
  for (double th : thetas) {
    for (double ph : phis) {
      FaceAngles a{th, ph};
      auto layout = build_layout(geom, a);
      SearchOptions o = opts;
      o.keep_all_solutions = false;
      out.push_back({a, search_size(layout, n, o).summary});
    }
  }
  return out;
}

}  // namespace thrustopt
