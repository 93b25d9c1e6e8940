#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "motionkit/diffcore.hpp"
#include "motionkit/repr.hpp"
#include "motionkit/wavelet.hpp"

/// Finite-scalar-quantized motion tokenizer.
///
/// A clip of T normalized feature frames (width D) is edge-padded to Tp, a
/// multiple of the downsample factor, and laid out as S = Tp / 2^L slots of
/// C = 2^L D channels, where L is the wavelet level count:
///   wavelet on:  periodic DWT per channel; slot s holds a_L[s], d_L[s], the
///                2 detail coefficients of d_{L-1} covering it, ... , the
///                2^(L-1) coefficients of d_1.
///   wavelet off: slot s holds frames s 2^L .. s 2^L + 2^L - 1 side by side.
/// Both variants feed the same network, so toggling the wavelet changes only
/// the basis the model sees. The encoder maps slots to Tp / downsample latent
/// vectors of width d; each latent dimension j is quantized to
///   code = round(sigmoid(z_j) (L_j - 1)),  z_q = code / (L_j - 1)
/// and the decoder maps z_q back to slots, which the inverse layout turns into
/// frames.
namespace motionkit::fsq::inline MOTIONKIT_PRECISION {

using nn::Scalar;
using nn::Tensor;

struct FsqConfig {
  std::vector<int> levels{8, 8, 8, 5, 5, 5};
  std::size_t downsample = 4;
  std::size_t width = 128;
  std::size_t depth = 2;
  std::uint64_t vocabulary_cap = 1u << 20;
  bool use_wavelet = true;
  wavelet::Family wavelet_family = wavelet::Family::kDb2;
  int wavelet_levels = 1;

  std::size_t latent_width() const { return levels.size(); }
  std::uint64_t vocabulary_size() const;
  /// Slot grouping 2^L.
  std::size_t slot_frames() const { return std::size_t{1} << wavelet_levels; }
  void validate() const;

  nlohmann::json to_json() const;
  /// Unknown keys are rejected.
  static FsqConfig from_json(const nlohmann::json& j);
};

// ---- quantization --------------------------------------------------------

struct Quantized {
  std::vector<int> codes;
  std::vector<double> values;  // code / (L - 1)
};

/// Scalar reference path.
Quantized fsq_quantize(std::span<const double> z, std::span<const int> levels);
/// Differentiable path on a [rows, d] latent; rounding uses round_ste.
Tensor fsq_quantize(const Tensor& z, std::span<const int> levels);
/// Codes of a [rows, d] latent (no gradient).
std::vector<std::vector<int>> fsq_codes(const Tensor& z, std::span<const int> levels);

/// Mixed radix, most significant dimension first.
std::uint32_t codes_to_index(std::span<const int> codes, std::span<const int> levels);
std::vector<int> index_to_codes(std::uint32_t index, std::span<const int> levels);

// ---- model ---------------------------------------------------------------

struct TokenSequence {
  std::string clip_id;
  std::vector<std::uint32_t> indices;
  std::size_t frame_count = 0;
  double fps = 30.0;
};

std::size_t token_count(std::size_t frames, std::size_t downsample);

class TokenizerModel {
 public:
  TokenizerModel(FsqConfig config, std::size_t feature_width, std::uint64_t seed);

  const FsqConfig& config() const { return config_; }
  std::size_t feature_width() const { return feature_width_; }
  nn::ParameterStore& parameters() { return params_; }
  const nn::ParameterStore& parameters() const { return params_; }
  const repr::NormStats& norm() const { return norm_; }
  void set_norm(repr::NormStats norm);

  /// Padded length and slot layout of a normalized clip, and the inverse.
  Eigen::MatrixXd to_layout(const Eigen::MatrixXd& normalized) const;
  Eigen::MatrixXd from_layout(const Eigen::MatrixXd& layout, std::size_t frames) const;

  Tensor encode_latent(const Tensor& layout) const;  // [S, C] -> [n, d]
  Tensor decode_latent(const Tensor& quantized) const;  // [n, d] -> [S, C]

  /// Mean squared error between a normalized clip's layout and its
  /// reconstruction. By orthogonality of the periodic transform this equals
  /// the error over the padded feature frames.
  Tensor reconstruction_loss(const Eigen::MatrixXd& normalized) const;

  /// Raw (unnormalized) features in, tokens out; and back.
  TokenSequence encode(const repr::FeatureMatrix& features, const std::string& clip_id, double fps) const;
  repr::FeatureMatrix decode(const TokenSequence& tokens) const;
  repr::FeatureMatrix reconstruct(const repr::FeatureMatrix& features) const;

  /// Everything needed to rebuild the model: tokenizer config, feature width,
  /// normalization statistics.
  nlohmann::json model_json() const;
  void save(const std::filesystem::path& path, std::uint64_t seed, std::size_t step) const;
  static TokenizerModel load(const std::filesystem::path& path);

 private:
  struct Linear {
    Tensor weight, bias;
    Tensor operator()(const Tensor& x) const { return nn::linear(x, weight, bias); }
  };
  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, double gain, Rng& rng);
  Tensor residual_stack(const Tensor& x, const std::vector<std::pair<Linear, Linear>>& blocks) const;

  FsqConfig config_;
  std::size_t feature_width_;
  std::size_t channels_;
  std::size_t group_;  // slots per latent vector
  repr::NormStats norm_;
  nn::ParameterStore params_;
  Linear enc_in_, enc_out_, dec_in_, dec_out_;
  std::vector<std::pair<Linear, Linear>> enc_blocks_, dec_blocks_;
};

// ---- training and evaluation ---------------------------------------------

struct TrainConfig {
  std::size_t steps = 500;
  std::size_t batch = 8;
  std::size_t window = 64;  // frames per training crop (clips shorter are used whole)
  nn::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 1.0};
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> losses;  // one per step
};

/// Fits normalization statistics on the corpus, then minimizes the
/// reconstruction loss over random crops. `progress` (optional) sees
/// (step, loss).
TrainResult train_reconstruction(TokenizerModel& model, const std::vector<repr::FeatureMatrix>& corpus,
                                 const TrainConfig& config,
                                 const std::function<void(std::size_t, double)>& progress = {});

struct ReconstructionReport {
  double mpjpe_mm = 0.0;
  double mean_acceleration = 0.0;  // reconstructed motion, m/s^2
  double max_acceleration = 0.0;
  double gt_mean_acceleration = 0.0;
  double gt_max_acceleration = 0.0;
  std::size_t clips = 0;
  std::size_t frames = 0;
};

ReconstructionReport eval_reconstruction(const TokenizerModel& model, const std::vector<repr::MotionSequence>& corpus,
                                         const geom::Skeleton& skeleton);

// ---- token files ---------------------------------------------------------

struct TokenFile {
  std::string config_hash;
  std::uint64_t vocabulary_size = 0;
  std::size_t downsample = 4;
  std::vector<TokenSequence> sequences;
};

void write_tokens(const std::filesystem::path& path, const TokenFile& tokens);
TokenFile read_tokens(const std::filesystem::path& path);

}  // namespace motionkit::fsq::inline MOTIONKIT_PRECISION
