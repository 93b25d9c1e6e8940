#include "motionkit/synth.hpp"

#include <cmath>
#include <numbers>

namespace motionkit::synth {

namespace {

geom::RotationMatrix small_rotation(const geom::Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

geom::Vec3 random_axis(Rng& rng) {
  geom::Vec3 v(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-6) v = {rng.normal(), rng.normal(), rng.normal()};
  return v.normalized();
}

}  // namespace

repr::MotionSequence random_motion(const geom::Skeleton& skeleton, const MotionParams& params, Rng& rng) {
  const std::size_t joints = skeleton.joint_count();
  const double two_pi = 2.0 * std::numbers::pi;

  struct Swing {
    geom::Vec3 axis;
    double amplitude, frequency, phase;
  };
  std::vector<Swing> swings(joints);
  for (auto& s : swings) {
    s.axis = random_axis(rng);
    s.amplitude = rng.uniform(0.1, 1.0) * params.max_joint_amplitude;
    s.frequency = rng.uniform(params.min_frequency, params.max_frequency);
    s.phase = rng.uniform(0.0, two_pi);
  }
  const double speed = rng.uniform(0.0, params.max_speed);
  const double turn_rate = rng.uniform(-params.max_turn_rate, params.max_turn_rate);
  const double yaw0 = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double bob_freq = rng.uniform(params.min_frequency, params.max_frequency);
  const double tilt_freq = rng.uniform(params.min_frequency, params.max_frequency);
  const geom::Vec3 tilt_axis = geom::Vec3(rng.normal(), 0.0, rng.normal()).normalized();
  const geom::Vec3 start(rng.uniform(-2.0, 2.0), 0.9 + rng.uniform(-0.05, 0.05), rng.uniform(-2.0, 2.0));

  repr::MotionSequence m;
  m.fps = params.fps;
  m.shape.assign(10, 0.0);
  geom::Vec3 position = start;
  for (std::size_t f = 0; f < params.frames; ++f) {
    const double t = static_cast<double>(f) / params.fps;
    const double yaw = yaw0 + turn_rate * t;
    if (f > 0) {
      const double dt = 1.0 / params.fps;
      position += geom::rot_y(yaw) * geom::Vec3(0.0, 0.0, speed * dt);
    }
    geom::Vec3 root = position;
    root.y() = start.y() + 0.03 * std::sin(two_pi * bob_freq * t);
    m.root_translation.push_back(root);
    m.root_orientation.push_back(geom::rot_y(yaw) * small_rotation(tilt_axis, 0.1 * std::sin(two_pi * tilt_freq * t)));
    std::vector<geom::RotationMatrix> locals(joints, geom::RotationMatrix::Identity());
    for (std::size_t j = 1; j < joints; ++j) {
      const Swing& s = swings[j];
      locals[j] = small_rotation(s.axis, s.amplitude * std::sin(two_pi * s.frequency * t + s.phase));
    }
    m.local_rotations.push_back(std::move(locals));
  }
  return m;
}

void plant_orientation_flip(repr::MotionSequence& motion, std::size_t frame) {
  const geom::RotationMatrix flip = geom::rot_y(std::numbers::pi);
  for (std::size_t f = frame; f < motion.frame_count(); ++f) {
    motion.root_orientation[f] = flip * motion.root_orientation[f];
  }
}

void plant_jitter(repr::MotionSequence& motion, std::size_t start, std::size_t length, double magnitude, Rng& rng) {
  const std::size_t end = std::min(motion.frame_count(), start + length);
  for (std::size_t f = start; f < end; ++f) {
    for (std::size_t j = 1; j < motion.joint_count(); ++j) {
      motion.local_rotations[f][j] = small_rotation(random_axis(rng), magnitude) * motion.local_rotations[f][j];
    }
    motion.root_translation[f] += 0.1 * magnitude * random_axis(rng);
  }
}

void add_rotation_noise(repr::MotionSequence& motion, double stddev, Rng& rng) {
  for (auto& frame : motion.local_rotations) {
    for (std::size_t j = 1; j < frame.size(); ++j) {
      frame[j] = small_rotation(random_axis(rng), rng.normal(0.0, stddev)) * frame[j];
    }
  }
}

}  // namespace motionkit::synth
