#pragma once

// Cubic-satellite thruster layout and the 6xN control allocation matrix.
//
// Numbering convention:
//   faces 1..6 have outward normals +X, -X, +Y, -Y, +Z, -Z;
//   each face frame has z = outward normal, x = first body axis (X, Y, Z
//   order) perpendicular to the normal, y = z cross x;
//   corners 1..4 are the face-local quadrants (+,+), (-,+), (-,-), (+,-);
//   thruster id = (face - 1) * 4 + corner.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "thrustopt/errors.hpp"

namespace thrustopt {

inline constexpr int kNumFaces = 6;
inline constexpr int kCornersPerFace = 4;
inline constexpr int kMaxThrusters = kNumFaces * kCornersPerFace;

/// Six-row allocation matrix with at most 24 columns; lives on the stack.
using AllocMatrix = Eigen::Matrix<double, 6, Eigen::Dynamic, Eigen::ColMajor, 6, kMaxThrusters>;
using Vector6 = Eigen::Matrix<double, 6, 1>;

/// Face-local thrust orientation shared by every thruster.
struct FaceAngles {
  double theta = 0.0;                   // face azimuth [rad], in [0, 2pi)
  double phi = std::numbers::pi / 2.0;  // face elevation [rad], in [0, pi/2]

  [[nodiscard]] bool valid() const {
    return std::isfinite(theta) && std::isfinite(phi) && theta >= 0.0 &&
           theta < 2.0 * std::numbers::pi && phi >= 0.0 && phi <= std::numbers::pi / 2.0;
  }
};

struct Thruster {
  int id = 0;
  int face = 0;
  int corner = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();   // body frame [m]
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();  // unit, body frame
  FaceAngles angles;
};

struct Wrench {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();   // [N]
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // [N m]

  [[nodiscard]] Vector6 stacked() const {
    Vector6 w;
    w << force, torque;
    return w;
  }
};

struct CubeGeometry {
  double side_length = 0.5;
  std::array<Eigen::Matrix3d, kNumFaces> face_rotations;      // face frame -> body frame
  std::array<Eigen::Vector2d, kCornersPerFace> corner_offsets;  // face-local [m]

  [[nodiscard]] Eigen::Vector3d outward_normal(int face) const {
    return face_rotations.at(static_cast<std::size_t>(face - 1)).col(2);
  }
};

/// Thrust unit vector in the face frame.
inline Eigen::Vector3d thrust_direction(const FaceAngles& angles) {
  const double cp = std::cos(angles.phi);
  const double sp = std::sin(angles.phi);
  return {-cp * std::cos(angles.theta), -cp * std::sin(angles.theta), -sp};
}

inline int thruster_id(int face, int corner) {
  if (face < 1 || face > kNumFaces || corner < 1 || corner > kCornersPerFace) {
    throw DomainError("thruster_id: face must be 1..6 and corner 1..4, got face=" +
                      std::to_string(face) + " corner=" + std::to_string(corner));
  }
  return (face - 1) * kCornersPerFace + corner;
}

inline std::pair<int, int> id_to_face_corner(int id) {
  if (id < 1 || id > kMaxThrusters) {
    throw DomainError("id_to_face_corner: id must be 1..24, got " + std::to_string(id));
  }
  return {(id - 1) / kCornersPerFace + 1, (id - 1) % kCornersPerFace + 1};
}

inline CubeGeometry make_cube_geometry(double side_length) {
  if (!(side_length > 0.0) || !std::isfinite(side_length)) {
    throw DomainError("make_cube_geometry: side length must be positive");
  }
  CubeGeometry geom;
  geom.side_length = side_length;

  const std::array<Eigen::Vector3d, kNumFaces> normals = {
      Eigen::Vector3d::UnitX(), -Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
      -Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ(), -Eigen::Vector3d::UnitZ()};
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const Eigen::Vector3d& z = normals[i];
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    for (int axis = 0; axis < 3; ++axis) {
      if (z[axis] == 0.0) {
        x[axis] = 1.0;
        break;
      }
    }
    const Eigen::Vector3d y = z.cross(x);
    geom.face_rotations[i].col(0) = x;
    geom.face_rotations[i].col(1) = y;
    geom.face_rotations[i].col(2) = z;
  }

  const double h = side_length / 2.0;
  geom.corner_offsets = {Eigen::Vector2d(h, h), Eigen::Vector2d(-h, h), Eigen::Vector2d(-h, -h),
                         Eigen::Vector2d(h, -h)};
  return geom;
}

/// All 24 thrusters, ids ascending.
inline std::vector<Thruster> build_layout(const CubeGeometry& geom, const FaceAngles& angles) {
  if (!angles.valid()) {
    throw DomainError("build_layout: angles out of range");
  }
  const Eigen::Vector3d local_dir = thrust_direction(angles);
  const double h = geom.side_length / 2.0;

  std::vector<Thruster> layout;
  layout.reserve(kMaxThrusters);
  for (int face = 1; face <= kNumFaces; ++face) {
    const Eigen::Matrix3d& rot = geom.face_rotations[static_cast<std::size_t>(face - 1)];
    for (int corner = 1; corner <= kCornersPerFace; ++corner) {
      const Eigen::Vector2d& off = geom.corner_offsets[static_cast<std::size_t>(corner - 1)];
      Thruster t;
      t.id = thruster_id(face, corner);
      t.face = face;
      t.corner = corner;
      t.position = rot * Eigen::Vector3d(off.x(), off.y(), h);
      t.direction = (rot * local_dir).normalized();
      t.angles = angles;
      layout.push_back(t);
    }
  }
  return layout;
}

inline std::vector<Thruster> default_layout(double side_length = 0.5) {
  return build_layout(make_cube_geometry(side_length), FaceAngles{});
}

/// Column of the allocation matrix: [direction; position x direction].
inline Vector6 allocation_column(const Thruster& t) {
  Vector6 col;
  col << t.direction, t.position.cross(t.direction);
  return col;
}

/// Allocation matrix together with the ids of its columns.
struct AllocationMatrix {
  AllocMatrix columns;
  std::vector<int> thruster_ids;

  [[nodiscard]] int size() const { return static_cast<int>(thruster_ids.size()); }
};

inline AllocationMatrix allocation_matrix(std::span<const Thruster> thrusters) {
  if (thrusters.empty()) {
    throw DomainError("allocation_matrix: empty thruster subset");
  }
  if (thrusters.size() > static_cast<std::size_t>(kMaxThrusters)) {
    throw DomainError("allocation_matrix: more than 24 thrusters");
  }
  std::vector<const Thruster*> sorted;
  sorted.reserve(thrusters.size());
  for (const auto& t : thrusters) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(),
            [](const Thruster* a, const Thruster* b) { return a->id < b->id; });
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    if (sorted[k]->id == sorted[k - 1]->id) {
      throw DomainError("allocation_matrix: duplicate thruster id " +
                        std::to_string(sorted[k]->id));
    }
  }

  AllocationMatrix out;
  out.columns.resize(6, static_cast<Eigen::Index>(sorted.size()));
  out.thruster_ids.reserve(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    out.columns.col(static_cast<Eigen::Index>(k)) = allocation_column(*sorted[k]);
    out.thruster_ids.push_back(sorted[k]->id);
  }
  return out;
}

/// Picks thrusters out of a full 24-entry layout by id.
inline std::vector<Thruster> select_thrusters(std::span<const Thruster> layout,
                                              std::span<const int> ids) {
  std::vector<Thruster> out;
  out.reserve(ids.size());
  for (int id : ids) {
    auto it = std::find_if(layout.begin(), layout.end(),
                           [id](const Thruster& t) { return t.id == id; });
    if (it == layout.end()) {
      throw DomainError("select_thrusters: unknown thruster id " + std::to_string(id));
    }
    out.push_back(*it);
  }
  return out;
}

inline AllocationMatrix allocation_matrix(std::span<const Thruster> layout,
                                          std::span<const int> ids) {
  return allocation_matrix(select_thrusters(layout, ids));
}

template <typename Derived>
Wrench wrench_of(const AllocationMatrix& alloc, const Eigen::MatrixBase<Derived>& magnitudes) {
  if (magnitudes.size() != alloc.columns.cols()) {
    throw DomainError("wrench_of: magnitude count does not match thruster count");
  }
  for (Eigen::Index k = 0; k < magnitudes.size(); ++k) {
    if (!(magnitudes(k) >= 0.0)) {
      throw DomainError("wrench_of: thrust magnitudes must be non-negative");
    }
  }
  const Vector6 w = alloc.columns * magnitudes;
  return {w.head<3>(), w.tail<3>()};
}

template <typename Derived>
Wrench wrench_of(std::span<const Thruster> thrusters,
                 const Eigen::MatrixBase<Derived>& magnitudes) {
  if (static_cast<std::size_t>(magnitudes.size()) != thrusters.size()) {
    throw DomainError("wrench_of: magnitude count does not match thruster count");
  }
  // Magnitudes follow the caller's thruster order, not sorted id order.
  Wrench w;
  for (std::size_t k = 0; k < thrusters.size(); ++k) {
    const double f = magnitudes(static_cast<Eigen::Index>(k));
    if (!(f >= 0.0)) {
      throw DomainError("wrench_of: thrust magnitudes must be non-negative");
    }
    w.force += thrusters[k].direction * f;
    w.torque += thrusters[k].position.cross(thrusters[k].direction) * f;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Cube symmetries

/// The 48 signed permutation matrices (rotations and reflections of the cube).
inline std::vector<Eigen::Matrix3d> cube_symmetries() {
  std::vector<Eigen::Matrix3d> out;
  out.reserve(48);
  std::array<int, 3> perm = {0, 1, 2};
  do {
    for (int signs = 0; signs < 8; ++signs) {
      Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
      for (int r = 0; r < 3; ++r) {
        s(r, perm[static_cast<std::size_t>(r)]) = (signs >> r & 1) ? -1.0 : 1.0;
      }
      out.push_back(s);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

/// Maps each thruster id to the id of the thruster occupying its image
/// (position and direction) under `sym`. Entry 0 is unused. Throws if the
/// layout is not closed under the symmetry (e.g. non-default angles).
inline std::array<int, kMaxThrusters + 1> symmetry_id_map(std::span<const Thruster> layout,
                                                          const Eigen::Matrix3d& sym,
                                                          double tol = 1e-9) {
  std::array<int, kMaxThrusters + 1> map{};
  for (const auto& t : layout) {
    const Eigen::Vector3d p = sym * t.position;
    const Eigen::Vector3d d = sym * t.direction;
    auto it = std::find_if(layout.begin(), layout.end(), [&](const Thruster& u) {
      return (u.position - p).norm() < tol && (u.direction - d).norm() < tol;
    });
    if (it == layout.end()) {
      throw DomainError("symmetry_id_map: layout not closed under symmetry");
    }
    map[static_cast<std::size_t>(t.id)] = it->id;
  }
  return map;
}

/// Wrench-space action of a point symmetry: forces transform as vectors,
/// torques as pseudovectors.
inline Eigen::Matrix<double, 6, 6> wrench_transform(const Eigen::Matrix3d& sym) {
  Eigen::Matrix<double, 6, 6> t = Eigen::Matrix<double, 6, 6>::Zero();
  t.topLeftCorner<3, 3>() = sym;
  t.bottomRightCorner<3, 3>() = sym.determinant() * sym;
  return t;
}

}  // namespace thrustopt
