#include "motionkit/common.hpp"

#include <cstdio>

namespace motionkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidRotation: return "invalid-rotation";
    case ErrorKind::kDegenerate6D: return "degenerate-6d";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kTooShort: return "too-short";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kInvalidBox: return "invalid-box";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace motionkit
