#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "motionkit/curation.hpp"
#include "motionkit/fsq.hpp"
#include "motionkit/generator.hpp"

namespace motionkit::cli {

struct TokenizerTraining {
  std::size_t steps = 500;
  std::size_t batch = 8;
  std::size_t window = 64;
  double learning_rate = 1e-3;
  double clip_norm = 1.0;
};

struct GeneratorTraining {
  std::size_t steps = 2000;
  std::size_t batch = 4;
  double learning_rate = 3e-4;
  double clip_norm = 1.0;
};

struct Sampling {
  std::string strategy = "greedy";
  double temperature = 1.0;
  std::size_t top_k = 0;
  std::size_t max_tokens = 0;
};

struct EvalOptions {
  std::size_t retrieval_batch = 32;
  std::size_t histogram_bins = 50;
};

struct SynthOptions {
  std::size_t clips = 40;
  std::size_t frames = 120;
  double fps = 30.0;
  double flip_fraction = 0.0;    // clips with a planted orientation flip
  double jitter_fraction = 0.0;  // clips with a planted jitter burst
  double jitter_magnitude = 0.6;
  double rotation_noise = 0.0;
};

/// Every tunable of every subcommand, one section per module. Missing keys
/// keep their defaults; unknown keys are errors.
struct PipelineConfig {
  std::uint64_t seed = 0;
  curation::CurationConfig curation;
  fsq::FsqConfig tokenizer;
  TokenizerTraining tokenizer_training;
  gen::GenConfig generator;  // vocabulary and tokenizer hash come from the tokenizer
  GeneratorTraining generator_training;
  Sampling sampling;
  EvalOptions eval;
  SynthOptions synth;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  /// Defaults when `path` is empty.
  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace motionkit::cli
