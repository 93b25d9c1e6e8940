#include "run_context.hpp"

#include <algorithm>
#include <ctime>

#include "motionkit/binary_io.hpp"
#include "motionkit/diffcore.hpp"

namespace motionkit::cli {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunContext::RunContext(std::filesystem::path out_dir, std::string command, nlohmann::json resolved_config,
                       std::uint64_t seed)
    : out_dir_(std::move(out_dir)),
      command_(std::move(command)),
      config_(std::move(resolved_config)),
      seed_(seed),
      started_(utc_timestamp()) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir_, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + out_dir_.string() + ": " + ec.message());
  write_json("config.json", config_);
}

void RunContext::add_input(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) inputs_.emplace_back(f.string(), io::sha256_file(f));
  } else {
    inputs_.emplace_back(path.string(), io::sha256_file(path));
  }
}

void RunContext::add_output(const std::string& relative) {
  if (std::find(outputs_.begin(), outputs_.end(), relative) == outputs_.end()) outputs_.push_back(relative);
}

void RunContext::write_text(const std::string& relative, const std::string& text) {
  const auto p = path(relative);
  std::filesystem::create_directories(p.parent_path());
  io::write_text_atomic(p, text);
  add_output(relative);
}

void RunContext::write_json(const std::string& relative, const nlohmann::json& j) {
  write_text(relative, j.dump(2) + "\n");
}

std::string RunContext::finish() {
  std::sort(outputs_.begin(), outputs_.end());
  nlohmann::json outputs = nlohmann::json::array();
  std::string listing;
  for (const auto& rel : outputs_) {
    const auto p = path(rel);
    const std::string digest = io::sha256_file(p);
    outputs.push_back({{"path", rel}, {"sha256", digest}, {"bytes", std::filesystem::file_size(p)}});
    listing += rel + " " + digest + "\n";
  }
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [p, d] : inputs_) inputs.push_back({{"path", p}, {"sha256", d}});
  const std::string combined = io::sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(listing.data()), listing.size()));
  const nlohmann::json manifest{{"command", command_},
                                {"tool_version", kToolVersion},
                                {"config_hash", nn::config_hash(config_)},
                                {"seed", seed_},
                                {"inputs", inputs},
                                {"outputs", outputs},
                                {"outputs_digest", combined},
                                {"started_at", started_},
                                {"finished_at", utc_timestamp()}};
  io::write_text_atomic(path("manifest.json"), manifest.dump(2) + "\n");
  return combined;
}

}  // namespace motionkit::cli
