#include "motionkit/geom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace motionkit::geom {

bool is_rotation(const RotationMatrix& r, double tolerance) {
  if (!r.allFinite()) return false;
  const double ortho = (r * r.transpose() - RotationMatrix::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(r.determinant() - 1.0) <= tolerance;
}

void require_rotation(const RotationMatrix& r, std::string_view what) {
  if (!is_rotation(r)) {
    std::ostringstream msg;
    msg << what << " is not a proper rotation (orthonormality or determinant off by more than "
        << kOrthonormalTolerance << ")";
    throw Error(ErrorKind::kInvalidRotation, msg.str());
  }
}

AxisAngle matrix_to_axis_angle(const RotationMatrix& r) {
  require_rotation(r);
  const double cos_angle = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double sin_angle = 0.5 * skew.norm();

  AxisAngle out;
  // atan2 keeps full precision at both ends where arccos loses half the digits.
  out.angle = std::atan2(sin_angle, cos_angle);
  if (out.angle < 1e-15) {
    out.angle = 0.0;
    out.axis = Vec3::UnitX();
    return out;
  }
  if (cos_angle > -0.9) {
    out.axis = skew.normalized();
    return out;
  }
  // Near a half turn the skew part vanishes; recover the axis from the
  // symmetric part (R + Rᵀ)/2 = cos I + (1 - cos) a aᵀ.
  const RotationMatrix outer =
      (0.5 * (r + r.transpose()) - cos_angle * RotationMatrix::Identity()) / (1.0 - cos_angle);
  Eigen::Index col = 0;
  outer.diagonal().maxCoeff(&col);
  Vec3 axis = outer.col(col).normalized();
  if (axis.dot(skew) < 0.0) axis = -axis;
  out.axis = axis;
  return out;
}

RotationMatrix axis_angle_to_matrix(const AxisAngle& aa) {
  if (aa.angle == 0.0) return RotationMatrix::Identity();
  return Eigen::AngleAxisd(aa.angle, aa.axis.normalized()).toRotationMatrix();
}

double geodesic_delta(const RotationMatrix& prev, const RotationMatrix& curr) {
  require_rotation(prev, "previous rotation");
  require_rotation(curr, "current rotation");
  const RotationMatrix delta = curr * prev.transpose();
  const double cos_angle = std::clamp((delta.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 skew(delta(2, 1) - delta(1, 2), delta(0, 2) - delta(2, 0), delta(1, 0) - delta(0, 1));
  return std::atan2(0.5 * skew.norm(), cos_angle);
}

Rotation6D rot6d_encode(const RotationMatrix& r) {
  require_rotation(r);
  Rotation6D out;
  for (int i = 0; i < 3; ++i) {
    out[i] = r(i, 0);
    out[3 + i] = r(i, 1);
  }
  return out;
}

RotationMatrix rot6d_decode(const Rotation6D& r) {
  Vec3 a(r[0], r[1], r[2]);
  Vec3 b(r[3], r[4], r[5]);
  if (!a.allFinite() || !b.allFinite()) {
    throw Error(ErrorKind::kDegenerate6D, "non-finite 6D rotation");
  }
  const double a_norm = a.norm();
  if (a_norm < 1e-8) throw Error(ErrorKind::kDegenerate6D, "first column has near-zero norm");
  a /= a_norm;
  const double b_norm = b.norm();
  b -= a.dot(b) * a;
  const double residual = b.norm();
  if (residual < 1e-8 || residual < 1e-8 * b_norm) {
    throw Error(ErrorKind::kDegenerate6D, "columns are near-parallel");
  }
  b /= residual;
  RotationMatrix out;
  out.col(0) = a;
  out.col(1) = b;
  out.col(2) = a.cross(b);
  return out;
}

RotationMatrix rot_x(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }
RotationMatrix rot_y(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix(); }
RotationMatrix rot_z(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix(); }

Skeleton::Skeleton(std::vector<int> parents, std::vector<Vec3> offsets)
    : parents_(std::move(parents)), offsets_(std::move(offsets)) {
  if (parents_.empty()) throw Error(ErrorKind::kShape, "skeleton needs at least one joint");
  if (parents_.size() != offsets_.size()) {
    throw Error(ErrorKind::kShape, "skeleton parent and offset counts differ");
  }
  if (parents_[0] != kNoParent) throw Error(ErrorKind::kShape, "joint 0 must be the root");
  for (std::size_t j = 1; j < parents_.size(); ++j) {
    if (parents_[j] < 0 || static_cast<std::size_t>(parents_[j]) >= j) {
      throw Error(ErrorKind::kShape,
                  "joint " + std::to_string(j) + " must have a parent with a smaller index");
    }
  }
  for (const auto& o : offsets_) {
    if (!o.allFinite()) throw Error(ErrorKind::kShape, "non-finite bone offset");
  }
}

Skeleton Skeleton::default_body() {
  // pelvis, hips, spine, knees, spine2, ankles, spine3, feet, neck, collars,
  // head, shoulders, elbows, wrists.
  std::vector<int> parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
  std::vector<Vec3> offsets = {
      {0.0, 0.0, 0.0},      {0.06, -0.09, 0.0},  {-0.06, -0.09, 0.0}, {0.0, 0.11, 0.0},
      {0.0, -0.38, 0.0},    {0.0, -0.38, 0.0},   {0.0, 0.14, 0.0},    {0.0, -0.40, 0.0},
      {0.0, -0.40, 0.0},    {0.0, 0.05, 0.0},    {0.0, -0.05, 0.12},  {0.0, -0.05, 0.12},
      {0.0, 0.21, 0.0},     {0.08, 0.12, 0.0},   {-0.08, 0.12, 0.0},  {0.0, 0.09, 0.03},
      {0.12, 0.03, 0.0},    {-0.12, 0.03, 0.0},  {0.26, 0.0, 0.0},    {-0.26, 0.0, 0.0},
      {0.25, 0.0, 0.0},     {-0.25, 0.0, 0.0},
  };
  return Skeleton(std::move(parents), std::move(offsets));
}

std::vector<Vec3> forward_kinematics(const Skeleton& skeleton, const Vec3& root_translation,
                                     const RotationMatrix& root_orientation,
                                     std::span<const RotationMatrix> local_rotations) {
  const std::size_t n = skeleton.joint_count();
  if (local_rotations.size() != n) {
    throw Error(ErrorKind::kShape, "expected " + std::to_string(n) + " local rotations, got " +
                                       std::to_string(local_rotations.size()));
  }
  std::vector<Vec3> positions(n);
  std::vector<RotationMatrix> world(n);
  positions[0] = root_translation;
  world[0] = root_orientation * local_rotations[0];
  for (std::size_t j = 1; j < n; ++j) {
    const auto p = static_cast<std::size_t>(skeleton.parent(j));
    positions[j] = positions[p] + world[p] * skeleton.offset(j);
    world[j] = world[p] * local_rotations[j];
  }
  return positions;
}

}  // namespace motionkit::geom
