#pragma once

#include <filesystem>

#include "motionkit/repr.hpp"

namespace motionkit::repr {

/// Binary motion file ("MKMO" framing, see binary_io.hpp). Header fields:
///   format "motionkit.motion", version 1, fps, joints, frames,
///   layout [{name, components}...], endianness "little", dtype "float32",
///   shape [beta...]
/// Payload: per frame, root_translation (3), root_orientation (9, row-major),
/// local_rotations (9 per joint, row-major), as little-endian float32.
void write_motion(const std::filesystem::path& path, const MotionSequence& motion);

/// Validates the header against the payload length. Rotations are
/// re-orthonormalized after the float32 round trip.
MotionSequence read_motion(const std::filesystem::path& path);

}  // namespace motionkit::repr
