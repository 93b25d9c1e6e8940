#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace motionkit::io {

/// Every binary artifact shares one framing:
///   4-byte magic | u64 little-endian header length | UTF-8 JSON header | payload
/// Payload values are little-endian regardless of host order.
struct FramedFile {
  nlohmann::json header;
  std::vector<std::uint8_t> payload;
};

void write_framed(const std::filesystem::path& path, std::string_view magic, const nlohmann::json& header,
                  std::span<const std::uint8_t> payload);
FramedFile read_framed(const std::filesystem::path& path, std::string_view magic);

void append_f32(std::vector<std::uint8_t>& out, float value);
void append_u32(std::vector<std::uint8_t>& out, std::uint32_t value);
float load_f32(std::span<const std::uint8_t> bytes, std::size_t offset);
std::uint32_t load_u32(std::span<const std::uint8_t> bytes, std::size_t offset);

/// Writes to a sibling temporary and renames, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256 of a byte range / a file.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace motionkit::io
