#include "motionkit/repr.hpp"

#include <cmath>
#include <string>

namespace motionkit::repr {

namespace {

void put3(std::vector<double>& out, std::size_t joint, const Vec3& v) {
  out[3 * joint + 0] = v.x();
  out[3 * joint + 1] = v.y();
  out[3 * joint + 2] = v.z();
}

Vec3 get3(const std::vector<double>& in, std::size_t joint) {
  return {in[3 * joint + 0], in[3 * joint + 1], in[3 * joint + 2]};
}

void put6(std::vector<double>& out, std::size_t joint, const geom::Rotation6D& r) {
  for (std::size_t k = 0; k < 6; ++k) out[6 * joint + k] = r[k];
}

geom::Rotation6D get6(const std::vector<double>& in, std::size_t joint) {
  geom::Rotation6D r;
  for (std::size_t k = 0; k < 6; ++k) r[k] = in[6 * joint + k];
  return r;
}

Vec3 ground(const Vec3& t) { return {t.x(), 0.0, t.z()}; }

geom::Rotation6D encode_unchecked(const RotationMatrix& r) {
  geom::Rotation6D out;
  for (int i = 0; i < 3; ++i) {
    out[i] = r(i, 0);
    out[3 + i] = r(i, 1);
  }
  return out;
}

RotationMatrix decode_at(const geom::Rotation6D& r, std::size_t frame, const std::string& what) {
  try {
    return geom::rot6d_decode(r);
  } catch (const Error& e) {
    throw Error(ErrorKind::kDegenerate6D, what + " at frame " + std::to_string(frame) + ": " + e.what());
  }
}

}  // namespace

void MotionSequence::validate() const {
  const std::size_t frames = frame_count();
  if (!(fps > 0.0) || !std::isfinite(fps)) throw Error(ErrorKind::kData, "fps must be positive");
  if (frames < 2) throw Error(ErrorKind::kTooShort, "motion needs at least 2 frames");
  if (root_orientation.size() != frames || local_rotations.size() != frames) {
    throw Error(ErrorKind::kShape, "per-frame arrays have inconsistent lengths");
  }
  const std::size_t joints = joint_count();
  if (joints == 0) throw Error(ErrorKind::kShape, "motion has no joints");
  for (std::size_t f = 0; f < frames; ++f) {
    if (!root_translation[f].allFinite()) {
      throw Error(ErrorKind::kData, "non-finite translation at frame " + std::to_string(f));
    }
    geom::require_rotation(root_orientation[f], "root orientation at frame " + std::to_string(f));
    if (local_rotations[f].size() != joints) {
      throw Error(ErrorKind::kShape, "joint count changes at frame " + std::to_string(f));
    }
    for (std::size_t j = 0; j < joints; ++j) {
      geom::require_rotation(local_rotations[f][j], "local rotation at frame " + std::to_string(f) +
                                                        ", joint " + std::to_string(j));
    }
  }
}

PositionTrack world_positions(const MotionSequence& motion, const geom::Skeleton& skeleton) {
  PositionTrack out;
  out.reserve(motion.frame_count());
  for (std::size_t f = 0; f < motion.frame_count(); ++f) {
    out.push_back(geom::forward_kinematics(skeleton, motion.root_translation[f], motion.root_orientation[f],
                                           motion.local_rotations[f]));
  }
  return out;
}

std::vector<double> PoseFeature::to_vector() const {
  std::vector<double> out;
  out.reserve(8 + positions.size() + velocities.size() + rotations.size());
  out.push_back(root_vel_x);
  out.push_back(root_vel_z);
  out.insert(out.end(), root_angular_velocity.v.begin(), root_angular_velocity.v.end());
  out.insert(out.end(), positions.begin(), positions.end());
  out.insert(out.end(), velocities.begin(), velocities.end());
  out.insert(out.end(), rotations.begin(), rotations.end());
  return out;
}

PoseFeature PoseFeature::from_vector(std::span<const double> values, std::size_t joints) {
  const FeatureLayout layout{joints};
  if (values.size() != layout.width()) {
    throw Error(ErrorKind::kShape, "feature vector has width " + std::to_string(values.size()) +
                                       ", expected " + std::to_string(layout.width()));
  }
  PoseFeature f;
  f.root_vel_x = values[FeatureLayout::kRootVelX];
  f.root_vel_z = values[FeatureLayout::kRootVelZ];
  for (std::size_t k = 0; k < 6; ++k) f.root_angular_velocity[k] = values[FeatureLayout::kRootAngVel + k];
  f.positions.assign(values.begin() + layout.positions(), values.begin() + layout.velocities());
  f.velocities.assign(values.begin() + layout.velocities(), values.begin() + layout.rotations());
  f.rotations.assign(values.begin() + layout.rotations(), values.end());
  return f;
}

FeatureMatrix to_matrix(const std::vector<PoseFeature>& features) {
  if (features.empty()) return FeatureMatrix(0, 0);
  const auto first = features[0].to_vector();
  FeatureMatrix m(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(first.size()));
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto row = features[f].to_vector();
    if (row.size() != first.size()) throw Error(ErrorKind::kShape, "ragged feature sequence");
    for (std::size_t c = 0; c < row.size(); ++c) m(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

std::vector<PoseFeature> from_matrix(const FeatureMatrix& matrix, std::size_t joints) {
  std::vector<PoseFeature> out;
  out.reserve(static_cast<std::size_t>(matrix.rows()));
  std::vector<double> row(static_cast<std::size_t>(matrix.cols()));
  for (Eigen::Index f = 0; f < matrix.rows(); ++f) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) row[static_cast<std::size_t>(c)] = matrix(f, c);
    out.push_back(PoseFeature::from_vector(row, joints));
  }
  return out;
}

double heading_yaw(const RotationMatrix& r) {
  const Vec3 forward = r * Vec3::UnitZ();
  if (forward.x() * forward.x() + forward.z() * forward.z() > 1e-12) {
    return std::atan2(forward.x(), forward.z());
  }
  // Facing straight up or down: fall back to the lateral axis.
  const Vec3 lateral = r * Vec3::UnitX();
  return std::atan2(-lateral.z(), lateral.x());
}

std::vector<PoseFeature> encode_features(const MotionSequence& motion, const geom::Skeleton& skeleton) {
  if (motion.frame_count() < 2) throw Error(ErrorKind::kTooShort, "feature encoding needs at least 2 frames");
  motion.validate();
  const std::size_t frames = motion.frame_count();
  const std::size_t joints = skeleton.joint_count();
  if (motion.joint_count() != joints) {
    throw Error(ErrorKind::kShape, "motion has " + std::to_string(motion.joint_count()) +
                                       " joints, skeleton has " + std::to_string(joints));
  }

  const PositionTrack world = world_positions(motion, skeleton);
  std::vector<RotationMatrix> heading(frames);
  for (std::size_t f = 0; f < frames; ++f) heading[f] = heading_of(motion.root_orientation[f]);

  std::vector<PoseFeature> out(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    PoseFeature& x = out[f];
    const RotationMatrix to_local = heading[f].transpose();
    x.positions.assign(3 * joints, 0.0);
    x.velocities.assign(3 * joints, 0.0);
    x.rotations.assign(6 * joints, 0.0);
    const Vec3 origin = ground(motion.root_translation[f]);
    for (std::size_t j = 0; j < joints; ++j) {
      put3(x.positions, j, to_local * (world[f][j] - origin));
    }
    put6(x.rotations, 0, encode_unchecked(to_local * motion.root_orientation[f] * motion.local_rotations[f][0]));
    for (std::size_t j = 1; j < joints; ++j) put6(x.rotations, j, encode_unchecked(motion.local_rotations[f][j]));

    if (f == 0) continue;
    const Vec3 step = heading[f - 1].transpose() * (motion.root_translation[f] - motion.root_translation[f - 1]);
    x.root_vel_x = step.x();
    x.root_vel_z = step.z();
    x.root_angular_velocity = encode_unchecked(heading[f] * heading[f - 1].transpose());
    for (std::size_t j = 0; j < joints; ++j) put3(x.velocities, j, to_local * (world[f][j] - world[f - 1][j]));
  }
  out[0].root_vel_x = out[1].root_vel_x;
  out[0].root_vel_z = out[1].root_vel_z;
  out[0].root_angular_velocity = out[1].root_angular_velocity;
  out[0].velocities = out[1].velocities;
  return out;
}

MotionSequence decode_features(const std::vector<PoseFeature>& features, const Vec3& initial_translation,
                               const RotationMatrix& initial_heading, const geom::Skeleton& skeleton,
                               double fps) {
  if (features.empty()) throw Error(ErrorKind::kEmptyInput, "no features to decode");
  geom::require_rotation(initial_heading, "initial heading");
  const std::size_t joints = skeleton.joint_count();
  const std::size_t frames = features.size();
  for (std::size_t f = 0; f < frames; ++f) {
    const auto& x = features[f];
    if (x.positions.size() != 3 * joints || x.velocities.size() != 3 * joints || x.rotations.size() != 6 * joints) {
      throw Error(ErrorKind::kShape, "feature frame " + std::to_string(f) + " does not match a " +
                                         std::to_string(joints) + "-joint skeleton");
    }
  }

  MotionSequence out;
  out.fps = fps;
  out.root_translation.resize(frames);
  out.root_orientation.resize(frames);
  out.local_rotations.assign(frames, std::vector<RotationMatrix>(joints, RotationMatrix::Identity()));

  const double base_height = get3(features[0].positions, 0).y();
  RotationMatrix heading = initial_heading;
  Vec3 translation = initial_translation;
  for (std::size_t f = 0; f < frames; ++f) {
    const PoseFeature& x = features[f];
    if (f > 0) {
      // Deltas are yaw-only by construction; projecting keeps noisy
      // (generated) features on the heading manifold.
      const RotationMatrix delta = decode_at(x.root_angular_velocity, f, "root angular velocity");
      const Vec3 step = heading * Vec3(x.root_vel_x, 0.0, x.root_vel_z);
      translation.x() += step.x();
      translation.z() += step.z();
      heading = geom::rot_y(heading_yaw(delta)) * heading;
    }
    translation.y() = initial_translation.y() + (get3(x.positions, 0).y() - base_height);
    out.root_translation[f] = translation;
    out.root_orientation[f] = heading * decode_at(get6(x.rotations, 0), f, "root rotation");
    for (std::size_t j = 1; j < joints; ++j) {
      out.local_rotations[f][j] = decode_at(get6(x.rotations, j), f, "joint " + std::to_string(j));
    }
  }
  return out;
}

InitialState initial_state(const MotionSequence& motion) {
  if (motion.frame_count() == 0) throw Error(ErrorKind::kEmptyInput, "empty motion");
  return {motion.root_translation[0], heading_of(motion.root_orientation[0])};
}

MotionSequence resample_fps(const MotionSequence& motion, double target_fps) {
  if (!(target_fps > 0.0) || !(motion.fps > 0.0)) throw Error(ErrorKind::kData, "fps must be positive");
  motion.validate();
  const std::size_t frames = motion.frame_count();
  const double duration = static_cast<double>(frames - 1) / motion.fps;
  const auto out_frames = static_cast<std::size_t>(std::floor(duration * target_fps + 1e-9)) + 1;
  if (out_frames < 2) {
    throw Error(ErrorKind::kTooShort, "resampling to " + std::to_string(target_fps) + " fps leaves fewer than 2 frames");
  }

  auto slerp = [](const RotationMatrix& a, const RotationMatrix& b, double w) -> RotationMatrix {
    const Eigen::Quaterniond qa(a), qb(b);
    return qa.slerp(w, qb).normalized().toRotationMatrix();
  };

  MotionSequence out;
  out.fps = target_fps;
  out.shape = motion.shape;
  out.root_translation.resize(out_frames);
  out.root_orientation.resize(out_frames);
  out.local_rotations.resize(out_frames);
  const double ratio = motion.fps / target_fps;
  for (std::size_t k = 0; k < out_frames; ++k) {
    const double src = static_cast<double>(k) * ratio;
    auto i0 = static_cast<std::size_t>(std::floor(src + 1e-9));
    if (i0 >= frames - 1) i0 = frames - 1;
    double w = src - static_cast<double>(i0);
    if (std::abs(w) < 1e-9 || i0 == frames - 1) w = 0.0;
    if (w == 0.0) {
      out.root_translation[k] = motion.root_translation[i0];
      out.root_orientation[k] = motion.root_orientation[i0];
      out.local_rotations[k] = motion.local_rotations[i0];
      continue;
    }
    const std::size_t i1 = i0 + 1;
    out.root_translation[k] = (1.0 - w) * motion.root_translation[i0] + w * motion.root_translation[i1];
    out.root_orientation[k] = slerp(motion.root_orientation[i0], motion.root_orientation[i1], w);
    out.local_rotations[k].resize(motion.joint_count());
    for (std::size_t j = 0; j < motion.joint_count(); ++j) {
      out.local_rotations[k][j] = slerp(motion.local_rotations[i0][j], motion.local_rotations[i1][j], w);
    }
  }
  return out;
}

FeatureMatrix NormStats::normalize(const FeatureMatrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != width()) {
    throw Error(ErrorKind::kShape, "feature width " + std::to_string(x.cols()) + " does not match statistics width " +
                                       std::to_string(width()));
  }
  return (x.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
}

FeatureMatrix NormStats::denormalize(const FeatureMatrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != width()) {
    throw Error(ErrorKind::kShape, "feature width " + std::to_string(x.cols()) + " does not match statistics width " +
                                       std::to_string(width()));
  }
  FeatureMatrix out = x.array().rowwise() * stddev.transpose().array();
  return out.rowwise() + mean.transpose();
}

NormStats fit_norm_stats(const std::vector<FeatureMatrix>& corpus, double std_floor) {
  Eigen::Index width = -1;
  for (const auto& m : corpus) {
    if (m.rows() == 0) continue;
    if (width >= 0 && m.cols() != width) throw Error(ErrorKind::kShape, "corpus matrices differ in width");
    width = m.cols();
  }
  if (width < 0) throw Error(ErrorKind::kEmptyInput, "cannot fit normalization statistics on an empty corpus");

  // Welford accumulation, row by row in corpus order.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(width);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(width);
  double count = 0.0;
  for (const auto& m : corpus) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      count += 1.0;
      const Eigen::VectorXd row = m.row(r).transpose();
      const Eigen::VectorXd delta = row - mean;
      mean += delta / count;
      m2 += delta.cwiseProduct(row - mean);
    }
  }
  NormStats stats;
  stats.mean = mean;
  stats.stddev = (m2 / count).cwiseSqrt().cwiseMax(std_floor);
  return stats;
}

}  // namespace motionkit::repr
