#include "motionkit/motion_io.hpp"

#include "motionkit/binary_io.hpp"

namespace motionkit::repr {

namespace {

constexpr std::string_view kMagic = "MKMO";

void append_matrix(std::vector<std::uint8_t>& out, const RotationMatrix& r) {
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) io::append_f32(out, static_cast<float>(r(i, k)));
}

RotationMatrix load_rotation(std::span<const std::uint8_t> bytes, std::size_t offset) {
  RotationMatrix r;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r(i, k) = io::load_f32(bytes, offset + 4 * static_cast<std::size_t>(3 * i + k));
  geom::Rotation6D six;
  for (int i = 0; i < 3; ++i) {
    six[static_cast<std::size_t>(i)] = r(i, 0);
    six[static_cast<std::size_t>(3 + i)] = r(i, 1);
  }
  return geom::rot6d_decode(six);
}

}  // namespace

void write_motion(const std::filesystem::path& path, const MotionSequence& motion) {
  motion.validate();
  const std::size_t joints = motion.joint_count();
  nlohmann::json header = {
      {"format", "motionkit.motion"},
      {"version", 1},
      {"fps", motion.fps},
      {"joints", joints},
      {"frames", motion.frame_count()},
      {"layout",
       nlohmann::json::array({{{"name", "root_translation"}, {"components", 3}},
                              {{"name", "root_orientation"}, {"components", 9}},
                              {{"name", "local_rotations"}, {"components", 9 * joints}}})},
      {"endianness", "little"},
      {"dtype", "float32"},
      {"shape", motion.shape},
  };
  std::vector<std::uint8_t> payload;
  payload.reserve(motion.frame_count() * (12 + 9 * joints) * 4);
  for (std::size_t f = 0; f < motion.frame_count(); ++f) {
    for (int k = 0; k < 3; ++k) io::append_f32(payload, static_cast<float>(motion.root_translation[f][k]));
    append_matrix(payload, motion.root_orientation[f]);
    for (const auto& r : motion.local_rotations[f]) append_matrix(payload, r);
  }
  io::write_framed(path, kMagic, header, payload);
}

MotionSequence read_motion(const std::filesystem::path& path) {
  const io::FramedFile file = io::read_framed(path, kMagic);
  const auto& h = file.header;
  MotionSequence out;
  std::size_t joints = 0;
  std::size_t frames = 0;
  try {
    if (h.at("format") != "motionkit.motion") throw Error(ErrorKind::kData, "unexpected format tag");
    if (h.at("endianness") != "little" || h.at("dtype") != "float32") {
      throw Error(ErrorKind::kData, "only little-endian float32 payloads are supported");
    }
    out.fps = h.at("fps").get<double>();
    joints = h.at("joints").get<std::size_t>();
    frames = h.at("frames").get<std::size_t>();
    out.shape = h.value("shape", std::vector<double>{});
    const auto& layout = h.at("layout");
    if (layout.size() != 3 || layout[0].at("components") != 3 || layout[1].at("components") != 9 ||
        layout[2].at("components") != 9 * joints) {
      throw Error(ErrorKind::kData, "layout does not match the joint count");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, path.string() + ": bad motion header: " + e.what());
  }
  const std::size_t per_frame = (12 + 9 * joints) * 4;
  if (file.payload.size() != frames * per_frame) {
    throw Error(ErrorKind::kData, path.string() + ": payload holds " + std::to_string(file.payload.size()) +
                                      " bytes, header implies " + std::to_string(frames * per_frame));
  }
  out.root_translation.resize(frames);
  out.root_orientation.resize(frames);
  out.local_rotations.assign(frames, std::vector<RotationMatrix>(joints));
  for (std::size_t f = 0; f < frames; ++f) {
    std::size_t at = f * per_frame;
    for (int k = 0; k < 3; ++k) out.root_translation[f][k] = io::load_f32(file.payload, at + 4 * static_cast<std::size_t>(k));
    at += 12;
    out.root_orientation[f] = load_rotation(file.payload, at);
    at += 36;
    for (std::size_t j = 0; j < joints; ++j, at += 36) out.local_rotations[f][j] = load_rotation(file.payload, at);
  }
  out.validate();
  return out;
}

}  // namespace motionkit::repr
