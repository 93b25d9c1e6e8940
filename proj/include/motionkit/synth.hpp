#pragma once

#include <cstddef>
#include <vector>

#include "motionkit/common.hpp"
#include "motionkit/repr.hpp"

namespace motionkit::synth {

/// Smooth procedural motion: the root walks along a gently curving path with
/// a bobbing height and a small tilt, and every joint swings sinusoidally
/// with its own random axis, amplitude and phase.
struct MotionParams {
  std::size_t frames = 120;
  double fps = 30.0;
  double max_speed = 1.5;     // m/s
  double max_turn_rate = 0.6; // rad/s
  double max_joint_amplitude = 0.5;  // rad
  double min_frequency = 0.3;  // Hz
  double max_frequency = 1.5;
};

repr::MotionSequence random_motion(const geom::Skeleton& skeleton, const MotionParams& params, Rng& rng);

/// Turns the root by pi about +Y from `frame` onwards (a single orientation
/// discontinuity between frame-1 and frame).
void plant_orientation_flip(repr::MotionSequence& motion, std::size_t frame);

/// Adds independent random rotations of `magnitude` radians to every joint
/// and `magnitude * 0.1` meters of root displacement for frames
/// [start, start + length).
void plant_jitter(repr::MotionSequence& motion, std::size_t start, std::size_t length, double magnitude, Rng& rng);

/// Small per-frame white noise on all joint rotations (radians).
void add_rotation_noise(repr::MotionSequence& motion, double stddev, Rng& rng);

}  // namespace motionkit::synth
