#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <span>
#include <vector>

#include "motionkit/common.hpp"

namespace motionkit::geom {

using Vec3 = Eigen::Vector3d;
using RotationMatrix = Eigen::Matrix3d;

/// First two columns of a rotation matrix, stored column after column:
/// (c0.x, c0.y, c0.z, c1.x, c1.y, c1.z).
struct Rotation6D {
  std::array<double, 6> v{};

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  friend bool operator==(const Rotation6D&, const Rotation6D&) = default;
};

struct AxisAngle {
  Vec3 axis = Vec3::UnitX();
  double angle = 0.0;  // radians, in [0, pi]
};

inline constexpr double kOrthonormalTolerance = 1e-6;

/// True when R Rᵀ = I and det R = +1 within `tolerance`.
bool is_rotation(const RotationMatrix& r, double tolerance = kOrthonormalTolerance);

/// Throws kInvalidRotation unless `r` passes is_rotation.
void require_rotation(const RotationMatrix& r, std::string_view what = "rotation");

AxisAngle matrix_to_axis_angle(const RotationMatrix& r);
RotationMatrix axis_angle_to_matrix(const AxisAngle& aa);

/// Angle of R_curr · R_prev⁻¹, in [0, pi].
double geodesic_delta(const RotationMatrix& prev, const RotationMatrix& curr);

Rotation6D rot6d_encode(const RotationMatrix& r);
/// Gram-Schmidt orthonormalization of the two stored columns.
RotationMatrix rot6d_decode(const Rotation6D& r);

RotationMatrix rot_x(double angle);
RotationMatrix rot_y(double angle);
RotationMatrix rot_z(double angle);

/// Kinematic tree. Joint 0 is the root; every other joint's parent has a
/// smaller index, so a single forward pass visits parents before children.
class Skeleton {
 public:
  static constexpr int kNoParent = -1;

  Skeleton(std::vector<int> parents, std::vector<Vec3> offsets);

  /// 22-joint body (pelvis + 21), Y-up, meters.
  static Skeleton default_body();

  std::size_t joint_count() const { return parents_.size(); }
  int parent(std::size_t joint) const { return parents_[joint]; }
  const Vec3& offset(std::size_t joint) const { return offsets_[joint]; }
  const std::vector<int>& parents() const { return parents_; }
  const std::vector<Vec3>& offsets() const { return offsets_; }

 private:
  std::vector<int> parents_;
  std::vector<Vec3> offsets_;
};

/// World joint positions. The root sits at `root_translation` with world
/// rotation root_orientation · local_rotations[0]; each child is placed at
/// parent position + parent world rotation · rest offset.
std::vector<Vec3> forward_kinematics(const Skeleton& skeleton, const Vec3& root_translation,
                                     const RotationMatrix& root_orientation,
                                     std::span<const RotationMatrix> local_rotations);

}  // namespace motionkit::geom
