#include <cmath>

#include "motionkit/binary_io.hpp"
#include "motionkit/diffcore.hpp"

namespace motionkit::nn::inline MOTIONKIT_PRECISION {

namespace {

constexpr std::string_view kCheckpointMagic = "MKCP";
constexpr int kCheckpointVersion = 1;

}  // namespace

Tensor& ParameterStore::add(const std::string& name, Shape shape, Scalar stddev, Rng& rng) {
  std::vector<Scalar> values(shape_size(shape));
  if (stddev != Scalar{0}) {
    for (auto& v : values) v = static_cast<Scalar>(rng.normal() * static_cast<double>(stddev));
  }
  for (const auto& e : entries_) {
    if (e.name == name) throw Error(ErrorKind::kConfig, "duplicate parameter '" + name + "'");
  }
  entries_.push_back({name, Tensor::from(std::move(shape), std::move(values), true)});
  return entries_.back().tensor;
}

Tensor& ParameterStore::add_constant(const std::string& name, Shape shape, Scalar value) {
  for (const auto& e : entries_) {
    if (e.name == name) throw Error(ErrorKind::kConfig, "duplicate parameter '" + name + "'");
  }
  entries_.push_back({name, Tensor::full(std::move(shape), value, true)});
  return entries_.back().tensor;
}

Tensor& ParameterStore::get(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw Error(ErrorKind::kConfig, "no parameter named '" + name + "'");
}

const Tensor& ParameterStore::get(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

double adam_step(ParameterStore& params, AdamState& state, const AdamConfig& config) {
  auto& entries = params.entries();
  if (state.m.empty()) {
    for (const auto& e : entries) {
      state.m.emplace_back(e.tensor.size(), 0.0);
      state.v.emplace_back(e.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != entries.size()) {
    throw Error(ErrorKind::kShape, "optimizer state holds " + std::to_string(state.m.size()) + " tensors, model has " +
                                       std::to_string(entries.size()));
  }
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (state.m[i].size() != entries[i].tensor.size()) {
      throw Error(ErrorKind::kShape, "optimizer state for '" + entries[i].name + "' has the wrong size");
    }
    if (!entries[i].tensor.has_grad()) continue;
    for (Scalar g : entries[i].tensor.grad()) norm_sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(norm_sq);
  if (!std::isfinite(norm)) throw Error(ErrorKind::kNumerical, "non-finite gradient norm");
  const double clip = (config.clip_norm > 0.0 && norm > config.clip_norm) ? config.clip_norm / norm : 1.0;

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor& p = entries[i].tensor;
    const bool has = p.has_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto& w = p.values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = has ? static_cast<double>(p.grad()[j]) * clip : 0.0;
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
      const double update = config.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.epsilon);
      w[j] = static_cast<Scalar>(static_cast<double>(w[j]) - update);
    }
  }
  return norm;
}

std::string config_hash(const nlohmann::json& config) {
  const std::string text = config.dump();
  return io::sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const ParameterStore& params,
                     const nlohmann::json& config, std::uint64_t seed, std::size_t step) {
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& e : params.entries()) {
    tensors.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"offset", payload.size()},
                       {"count", e.tensor.size()}});
    for (Scalar v : e.tensor.values()) io::append_f32(payload, static_cast<float>(v));
  }
  const nlohmann::json header{{"format", "motionkit.checkpoint"},
                              {"version", kCheckpointVersion},
                              {"kind", kind},
                              {"dtype", "float32"},
                              {"endianness", "little"},
                              {"seed", seed},
                              {"step", step},
                              {"config", config},
                              {"config_hash", config_hash(config)},
                              {"tensors", tensors}};
  io::write_framed(path, kCheckpointMagic, header, payload);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const io::FramedFile file = io::read_framed(path, kCheckpointMagic);
  const auto& h = file.header;
  Checkpoint out;
  try {
    if (h.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorKind::kData, "unsupported checkpoint version " + h.at("version").dump());
    }
    out.kind = h.at("kind").get<std::string>();
    out.config = h.at("config");
    out.config_hash = h.at("config_hash").get<std::string>();
    out.seed = h.at("seed").get<std::uint64_t>();
    out.step = h.at("step").get<std::size_t>();
    for (const auto& t : h.at("tensors")) {
      const auto offset = t.at("offset").get<std::size_t>();
      const auto count = t.at("count").get<std::size_t>();
      auto shape = t.at("shape").get<Shape>();
      if (shape_size(shape) != count || offset + 4 * count > file.payload.size()) {
        throw Error(ErrorKind::kData, "tensor '" + t.at("name").get<std::string>() + "' does not fit the payload");
      }
      std::vector<float> values(count);
      for (std::size_t i = 0; i < count; ++i) values[i] = io::load_f32(file.payload, offset + 4 * i);
      out.names.push_back(t.at("name").get<std::string>());
      out.shapes.push_back(std::move(shape));
      out.values.push_back(std::move(values));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, path.string() + ": malformed checkpoint header: " + e.what());
  }
  if (config_hash(out.config) != out.config_hash) {
    throw Error(ErrorKind::kData, path.string() + ": config hash does not match the stored config");
  }
  return out;
}

void restore_parameters(const Checkpoint& checkpoint, ParameterStore& params) {
  auto& entries = params.entries();
  if (entries.size() != checkpoint.names.size()) {
    throw Error(ErrorKind::kData, "checkpoint holds " + std::to_string(checkpoint.names.size()) +
                                      " tensors, model expects " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name != checkpoint.names[i] || entries[i].tensor.shape() != checkpoint.shapes[i]) {
      throw Error(ErrorKind::kData, "checkpoint tensor " + checkpoint.names[i] + " " +
                                        shape_string(checkpoint.shapes[i]) + " does not match model tensor " +
                                        entries[i].name + " " + shape_string(entries[i].tensor.shape()));
    }
    auto& w = entries[i].tensor.values();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = static_cast<Scalar>(checkpoint.values[i][j]);
  }
}

}  // namespace motionkit::nn::inline MOTIONKIT_PRECISION
