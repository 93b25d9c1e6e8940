#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "motionkit/geom.hpp"

namespace motionkit::repr {

using geom::RotationMatrix;
using geom::Vec3;

/// Per-frame world joint positions, [frame][joint].
using PositionTrack = std::vector<std::vector<Vec3>>;

/// Raw skeletal motion. World frame is Y-up.
///
/// local_rotations[f][0] is applied on top of root_orientation[f]; sequences
/// produced by decode_features keep it at identity.
struct MotionSequence {
  double fps = 30.0;
  std::vector<Vec3> root_translation;
  std::vector<RotationMatrix> root_orientation;
  std::vector<std::vector<RotationMatrix>> local_rotations;
  std::vector<double> shape;  // carried, never interpreted

  std::size_t frame_count() const { return root_translation.size(); }
  std::size_t joint_count() const { return local_rotations.empty() ? 0 : local_rotations[0].size(); }

  /// Throws on inconsistent lengths, fewer than two frames, fps <= 0 or
  /// invalid rotations.
  void validate() const;
};

PositionTrack world_positions(const MotionSequence& motion, const geom::Skeleton& skeleton);

/// Column offsets of the flattened pose-feature vector.
struct FeatureLayout {
  std::size_t joints = 0;

  static constexpr std::size_t kRootVelX = 0;
  static constexpr std::size_t kRootVelZ = 1;
  static constexpr std::size_t kRootAngVel = 2;  // 6 values
  std::size_t positions() const { return 8; }
  std::size_t velocities() const { return 8 + 3 * joints; }
  std::size_t rotations() const { return 8 + 6 * joints; }
  std::size_t width() const { return 8 + 12 * joints; }
};

inline std::size_t feature_width(std::size_t joints) { return FeatureLayout{joints}.width(); }

/// One frame of the pose representation. Everything is expressed in the
/// heading frame: yaw-only root rotation about +Y, origin at the root's
/// ground projection.
struct PoseFeature {
  double root_vel_x = 0.0;  // meters/frame
  double root_vel_z = 0.0;
  geom::Rotation6D root_angular_velocity;  // per-frame heading delta
  std::vector<double> positions;           // 3N
  std::vector<double> velocities;          // 3N, meters/frame
  std::vector<double> rotations;           // 6N

  std::vector<double> to_vector() const;
  static PoseFeature from_vector(std::span<const double> values, std::size_t joints);
};

/// frames x feature_width(N)
using FeatureMatrix = Eigen::MatrixXd;

FeatureMatrix to_matrix(const std::vector<PoseFeature>& features);
std::vector<PoseFeature> from_matrix(const FeatureMatrix& matrix, std::size_t joints);

/// Yaw angle of the heading (rotation about +Y) contained in `r`.
double heading_yaw(const RotationMatrix& r);
inline RotationMatrix heading_of(const RotationMatrix& r) { return geom::rot_y(heading_yaw(r)); }

std::vector<PoseFeature> encode_features(const MotionSequence& motion, const geom::Skeleton& skeleton);

/// Integrates root velocities from the initial state and rebuilds rotations.
/// The root's rotation relative to its heading is returned in
/// root_orientation; local_rotations[f][0] is identity.
MotionSequence decode_features(const std::vector<PoseFeature>& features, const Vec3& initial_translation,
                               const RotationMatrix& initial_heading, const geom::Skeleton& skeleton,
                               double fps = 30.0);

/// Starting state to hand to decode_features for a lossless roundtrip.
struct InitialState {
  Vec3 translation;
  RotationMatrix heading;
};
InitialState initial_state(const MotionSequence& motion);

/// Linear interpolation for translations, shortest-arc slerp for rotations.
MotionSequence resample_fps(const MotionSequence& motion, double target_fps);

inline constexpr double kStdFloor = 1e-4;

struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  std::size_t width() const { return static_cast<std::size_t>(mean.size()); }
  FeatureMatrix normalize(const FeatureMatrix& x) const;
  FeatureMatrix denormalize(const FeatureMatrix& x) const;
};

/// Population mean/std per column over every row of every matrix.
NormStats fit_norm_stats(const std::vector<FeatureMatrix>& corpus, double std_floor = kStdFloor);

}  // namespace motionkit::repr
