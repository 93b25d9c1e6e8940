#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "motionkit/diffcore.hpp"
#include "motionkit/fsq.hpp"

/// Text-conditioned autoregressive motion generator.
///
/// Input sequence: w text tokens followed by n motion positions
/// [BOS, m_1, ..., m_{n-1}]. Text rows attend all text columns; motion row i
/// attends all text columns and motion columns <= i. Logits are produced at
/// motion positions only and predict [m_1, ..., m_{n-1}, EOS].
namespace motionkit::gen::inline MOTIONKIT_PRECISION {

using nn::Scalar;
using nn::Tensor;

constexpr int kPad = 0;
constexpr int kBos = 1;
constexpr int kEos = 2;
constexpr int kCodeOffset = 3;

struct GenConfig {
  std::size_t layers = 4;
  std::size_t width = 256;
  std::size_t heads = 4;
  std::size_t ffn_expansion = 4;
  std::size_t code_vocabulary = 64000;  // tokenizer codes, specials excluded
  std::size_t text_vocabulary = 256;    // bytes
  std::size_t max_text_length = 64;
  std::size_t max_motion_length = 128;  // motion positions, BOS included
  std::string tokenizer_hash;           // config hash of the paired tokenizer

  std::size_t vocabulary() const { return code_vocabulary + kCodeOffset; }
  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected.
  static GenConfig from_json(const nlohmann::json& j);
};

// ---- text ----------------------------------------------------------------

struct Prompt {
  std::string text;
  std::vector<int> ids;
};

/// UTF-8 bytes as ids, truncated to `max_length`.
Prompt tokenize_text(const std::string& text, std::size_t max_length);

// ---- mask ----------------------------------------------------------------

/// attend[r][c] for the (w + n) x (w + n) sequence.
using HybridMask = std::vector<std::vector<bool>>;
HybridMask build_hybrid_mask(std::size_t w, std::size_t n);

// ---- model ---------------------------------------------------------------

class GeneratorModel {
 public:
  GeneratorModel(GenConfig config, std::uint64_t seed);

  const GenConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return params_; }
  const nn::ParameterStore& parameters() const { return params_; }

  /// [n, vocabulary] logits for motion positions.
  Tensor forward_logits(std::span<const int> text, std::span<const int> motion) const;

  void save(const std::filesystem::path& path, std::uint64_t seed, std::size_t step) const;
  static GeneratorModel load(const std::filesystem::path& path);

 private:
  struct Layer {
    Tensor norm1, wq, wk, wv, wo, bo, norm2, w1, b1, w2, b2;
  };
  GenConfig config_;
  nn::ParameterStore params_;
  Tensor text_embed_, text_pos_, motion_embed_, motion_pos_, final_norm_, head_w_, head_b_;
  std::vector<Layer> layers_;
};

/// Mean next-token cross entropy over positions whose target is not PAD.
Tensor ce_loss(const Tensor& logits, std::span<const int> targets);

/// [BOS, codes + 3 ...] inputs and [codes + 3 ..., EOS] targets.
struct TrainingExample {
  std::vector<int> text;
  std::vector<int> inputs;
  std::vector<int> targets;
};
TrainingExample make_example(const Prompt& prompt, std::span<const std::uint32_t> codes, const GenConfig& config);

struct PairedExample {
  std::string clip_id;
  Prompt prompt;
  fsq::TokenSequence tokens;
};

struct GenTrainConfig {
  std::size_t steps = 2000;
  std::size_t batch = 4;
  nn::AdamConfig adam{3e-4, 0.9, 0.999, 1e-8, 1.0};
  std::uint64_t seed = 0;
};

struct GenTrainResult {
  std::vector<double> losses;
};

/// Every step draws `batch` examples uniformly with replacement.
GenTrainResult train_generator(GeneratorModel& model, const std::vector<PairedExample>& corpus,
                               const GenTrainConfig& config,
                               const std::function<void(std::size_t, double)>& progress = {});

// ---- sampling ------------------------------------------------------------

struct SamplingConfig {
  enum class Strategy { kGreedy, kTemperature, kTopK };
  Strategy strategy = Strategy::kGreedy;
  double temperature = 1.0;
  std::size_t top_k = 0;
  std::size_t max_tokens = 0;  // 0: up to max_motion_length - 1
  std::uint64_t seed = 0;
};

SamplingConfig::Strategy parse_strategy(const std::string& name);

struct SampleResult {
  std::vector<std::uint32_t> codes;  // specials removed
  bool truncated = false;            // EOS never produced
};

/// PAD and BOS are never emitted; EOS is not allowed as the first token.
SampleResult sample_autoregressive(const GeneratorModel& model, const Prompt& prompt, const SamplingConfig& config);

/// Text to motion through the paired tokenizer. Frame count is tokens times
/// the downsample factor; the root starts at the origin facing +Z.
repr::MotionSequence generate(const GeneratorModel& model, const fsq::TokenizerModel& tokenizer,
                              const geom::Skeleton& skeleton, const std::string& text,
                              const SamplingConfig& sampling, SampleResult* sample = nullptr);

/// Reads JSON lines of {"clip", "text", "tokens"} where "tokens" names a
/// token file relative to the manifest. All token files must share one
/// tokenizer hash, returned through `tokenizer_hash`.
std::vector<PairedExample> read_paired_corpus(const std::filesystem::path& manifest, std::size_t max_text_length,
                                              std::string* tokenizer_hash = nullptr);

}  // namespace motionkit::gen::inline MOTIONKIT_PRECISION
