#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace motionkit::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Output directory of one subcommand run. Every file written through it is
/// listed with its SHA-256 in manifest.json; the resolved config is echoed to
/// config.json.
class RunContext {
 public:
  RunContext(std::filesystem::path out_dir, std::string command, nlohmann::json resolved_config,
             std::uint64_t seed);

  const std::filesystem::path& out_dir() const { return out_dir_; }
  std::filesystem::path path(const std::string& relative) const { return out_dir_ / relative; }

  void add_input(const std::filesystem::path& path);
  /// Registers a file already written under out_dir.
  void add_output(const std::string& relative);
  void write_text(const std::string& relative, const std::string& text);
  void write_json(const std::string& relative, const nlohmann::json& j);

  /// Writes manifest.json. Returns the combined digest of all outputs.
  std::string finish();

 private:
  std::filesystem::path out_dir_;
  std::string command_;
  nlohmann::json config_;
  std::uint64_t seed_;
  std::string started_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> outputs_;
};

std::string utc_timestamp();

}  // namespace motionkit::cli
