#include "motionkit/fsq.hpp"

#include <cmath>
#include <set>

#include "motionkit/binary_io.hpp"
#include "motionkit/metrics.hpp"

namespace motionkit::fsq::inline MOTIONKIT_PRECISION {

namespace {

constexpr std::string_view kTokenMagic = "MKTK";
constexpr int kTokenVersion = 1;

Tensor to_tensor(const Eigen::MatrixXd& m) {
  std::vector<Scalar> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<Scalar>(m(r, c));
  return Tensor::from({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(t.values()[static_cast<std::size_t>(r * m.cols() + c)]);
  return m;
}

void require_levels(std::span<const int> levels) {
  if (levels.empty()) throw Error(ErrorKind::kConfig, "FSQ needs at least one latent dimension");
  for (int l : levels)
    if (l < 2) throw Error(ErrorKind::kConfig, "FSQ levels must be at least 2, got " + std::to_string(l));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd edge_pad(const Eigen::MatrixXd& x, std::size_t rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), x.cols());
  out.topRows(x.rows()) = x;
  for (auto r = x.rows(); r < out.rows(); ++r) out.row(r) = x.row(x.rows() - 1);
  return out;
}

}  // namespace

// ---- config --------------------------------------------------------------

std::uint64_t FsqConfig::vocabulary_size() const {
  std::uint64_t v = 1;
  for (int l : levels) v *= static_cast<std::uint64_t>(l);
  return v;
}

void FsqConfig::validate() const {
  require_levels(levels);
  if (vocabulary_size() > vocabulary_cap || vocabulary_size() > (std::uint64_t{1} << 32)) {
    throw Error(ErrorKind::kConfig, "FSQ vocabulary " + std::to_string(vocabulary_size()) + " exceeds the cap " +
                                        std::to_string(vocabulary_cap));
  }
  if (width == 0) throw Error(ErrorKind::kConfig, "FSQ width must be positive");
  if (wavelet_levels < 1) throw Error(ErrorKind::kConfig, "wavelet levels must be at least 1");
  if (downsample == 0 || downsample % slot_frames() != 0) {
    throw Error(ErrorKind::kConfig, "downsample " + std::to_string(downsample) + " must be a multiple of 2^levels = " +
                                        std::to_string(slot_frames()));
  }
}

nlohmann::json FsqConfig::to_json() const {
  return {{"levels", levels},
          {"downsample", downsample},
          {"width", width},
          {"depth", depth},
          {"vocabulary_cap", vocabulary_cap},
          {"use_wavelet", use_wavelet},
          {"wavelet_family", wavelet::to_string(wavelet_family)},
          {"wavelet_levels", wavelet_levels},
          {"wavelet_boundary", "periodic"}};
}

FsqConfig FsqConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"levels",         "downsample",     "width",         "depth",
                                           "vocabulary_cap", "use_wavelet",    "wavelet_family", "wavelet_levels",
                                           "wavelet_boundary"};
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "tokenizer config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::kConfig, "unknown tokenizer config key '" + key + "'");
  }
  FsqConfig c;
  try {
    if (j.contains("levels")) c.levels = j["levels"].get<std::vector<int>>();
    if (j.contains("downsample")) c.downsample = j["downsample"].get<std::size_t>();
    if (j.contains("width")) c.width = j["width"].get<std::size_t>();
    if (j.contains("depth")) c.depth = j["depth"].get<std::size_t>();
    if (j.contains("vocabulary_cap")) c.vocabulary_cap = j["vocabulary_cap"].get<std::uint64_t>();
    if (j.contains("use_wavelet")) c.use_wavelet = j["use_wavelet"].get<bool>();
    if (j.contains("wavelet_family")) c.wavelet_family = wavelet::parse_family(j["wavelet_family"].get<std::string>());
    if (j.contains("wavelet_levels")) c.wavelet_levels = j["wavelet_levels"].get<int>();
    if (j.contains("wavelet_boundary") && j["wavelet_boundary"].get<std::string>() != "periodic") {
      throw Error(ErrorKind::kConfig, "the tokenizer needs the periodic wavelet boundary (got " +
                                          j["wavelet_boundary"].get<std::string>() + ")");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("tokenizer config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- quantization --------------------------------------------------------

Quantized fsq_quantize(std::span<const double> z, std::span<const int> levels) {
  require_levels(levels);
  if (z.size() != levels.size()) {
    throw Error(ErrorKind::kShape, "latent of width " + std::to_string(z.size()) + " for " +
                                       std::to_string(levels.size()) + " levels");
  }
  Quantized q;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double top = levels[j] - 1;
    const int code = static_cast<int>(std::clamp(std::round(sigmoid(z[j]) * top), 0.0, top));
    q.codes.push_back(code);
    q.values.push_back(code / top);
  }
  return q;
}

Tensor fsq_quantize(const Tensor& z, std::span<const int> levels) {
  require_levels(levels);
  if (z.cols() != levels.size()) {
    throw Error(ErrorKind::kShape, "latent " + nn::shape_string(z.shape()) + " for " + std::to_string(levels.size()) +
                                       " levels");
  }
  std::vector<Scalar> up(z.size()), down(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto top = static_cast<Scalar>(levels[i % levels.size()] - 1);
    up[i] = top;
    down[i] = Scalar{1} / top;
  }
  const Tensor scaled = nn::mul(nn::sigmoid(z), Tensor::from(z.shape(), std::move(up)));
  return nn::mul(nn::round_ste(scaled), Tensor::from(z.shape(), std::move(down)));
}

std::vector<std::vector<int>> fsq_codes(const Tensor& z, std::span<const int> levels) {
  require_levels(levels);
  if (z.cols() != levels.size()) throw Error(ErrorKind::kShape, "latent width does not match the levels");
  std::vector<std::vector<int>> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const auto top = static_cast<Scalar>(levels[j] - 1);
      const Scalar v = z.at(r, j);
      const Scalar s = v >= 0 ? Scalar{1} / (Scalar{1} + std::exp(-v)) : std::exp(v) / (Scalar{1} + std::exp(v));
      out[r].push_back(static_cast<int>(std::clamp(std::round(s * top), Scalar{0}, top)));
    }
  }
  return out;
}

std::uint32_t codes_to_index(std::span<const int> codes, std::span<const int> levels) {
  require_levels(levels);
  if (codes.size() != levels.size()) throw Error(ErrorKind::kShape, "code width does not match the levels");
  std::uint64_t index = 0;
  for (std::size_t j = 0; j < codes.size(); ++j) {
    if (codes[j] < 0 || codes[j] >= levels[j]) {
      throw Error(ErrorKind::kOutOfRange, "code " + std::to_string(codes[j]) + " outside [0, " +
                                              std::to_string(levels[j]) + ") in dimension " + std::to_string(j));
    }
    index = index * static_cast<std::uint64_t>(levels[j]) + static_cast<std::uint64_t>(codes[j]);
  }
  return static_cast<std::uint32_t>(index);
}

std::vector<int> index_to_codes(std::uint32_t index, std::span<const int> levels) {
  require_levels(levels);
  std::uint64_t vocab = 1;
  for (int l : levels) vocab *= static_cast<std::uint64_t>(l);
  if (index >= vocab) {
    throw Error(ErrorKind::kOutOfRange, "index " + std::to_string(index) + " outside vocabulary of " + std::to_string(vocab));
  }
  std::vector<int> codes(levels.size());
  std::uint64_t rest = index;
  for (std::size_t j = levels.size(); j-- > 0;) {
    codes[j] = static_cast<int>(rest % static_cast<std::uint64_t>(levels[j]));
    rest /= static_cast<std::uint64_t>(levels[j]);
  }
  return codes;
}

std::size_t token_count(std::size_t frames, std::size_t downsample) { return (frames + downsample - 1) / downsample; }

// ---- model ---------------------------------------------------------------

TokenizerModel::Linear TokenizerModel::make_linear(const std::string& name, std::size_t in, std::size_t out,
                                                   double gain, Rng& rng) {
  Linear l;
  l.weight = params_.add(name + ".weight", {in, out}, static_cast<Scalar>(gain / std::sqrt(static_cast<double>(in))), rng);
  l.bias = params_.add(name + ".bias", {out}, Scalar{0}, rng);
  return l;
}

TokenizerModel::TokenizerModel(FsqConfig config, std::size_t feature_width, std::uint64_t seed)
    : config_(std::move(config)), feature_width_(feature_width) {
  config_.validate();
  if (feature_width_ == 0) throw Error(ErrorKind::kConfig, "feature width must be positive");
  channels_ = config_.slot_frames() * feature_width_;
  group_ = config_.downsample / config_.slot_frames();
  const std::size_t w = config_.width;
  const std::size_t d = config_.latent_width();
  Rng rng(seed);
  enc_in_ = make_linear("encoder.in", 3 * channels_, w, 1.0, rng);
  for (std::size_t i = 0; i < config_.depth; ++i) {
    const std::string n = "encoder.block" + std::to_string(i);
    enc_blocks_.emplace_back(make_linear(n + ".a", 3 * w, w, 1.0, rng), make_linear(n + ".b", w, w, 0.5, rng));
  }
  enc_out_ = make_linear("encoder.out", group_ * w, d, 1.0, rng);
  dec_in_ = make_linear("decoder.in", d, group_ * w, 1.0, rng);
  for (std::size_t i = 0; i < config_.depth; ++i) {
    const std::string n = "decoder.block" + std::to_string(i);
    dec_blocks_.emplace_back(make_linear(n + ".a", 3 * w, w, 1.0, rng), make_linear(n + ".b", w, w, 0.5, rng));
  }
  dec_out_ = make_linear("decoder.out", 3 * w, channels_, 1.0, rng);
  norm_.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(feature_width_));
  norm_.stddev = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(feature_width_));
}

void TokenizerModel::set_norm(repr::NormStats norm) {
  if (norm.width() != feature_width_) {
    throw Error(ErrorKind::kShape, "normalization width " + std::to_string(norm.width()) + " does not match feature width " +
                                       std::to_string(feature_width_));
  }
  norm_ = std::move(norm);
}

Eigen::MatrixXd TokenizerModel::to_layout(const Eigen::MatrixXd& normalized) const {
  const auto frames = static_cast<std::size_t>(normalized.rows());
  if (static_cast<std::size_t>(normalized.cols()) != feature_width_) {
    throw Error(ErrorKind::kShape, "features of width " + std::to_string(normalized.cols()) + ", tokenizer expects " +
                                       std::to_string(feature_width_));
  }
  if (frames < config_.downsample) {
    throw Error(ErrorKind::kTooShort, "clip of " + std::to_string(frames) + " frames is shorter than the downsample factor " +
                                          std::to_string(config_.downsample));
  }
  const std::size_t padded = token_count(frames, config_.downsample) * config_.downsample;
  const Eigen::MatrixXd x = edge_pad(normalized, padded);
  const std::size_t k = config_.slot_frames();
  const std::size_t slots = padded / k;
  const auto d = static_cast<Eigen::Index>(feature_width_);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(slots), static_cast<Eigen::Index>(channels_));
  if (!config_.use_wavelet) {
    for (std::size_t s = 0; s < slots; ++s)
      for (std::size_t i = 0; i < k; ++i)
        out.block(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i) * d, 1, d) = x.row(static_cast<Eigen::Index>(s * k + i));
    return out;
  }
  const wavelet::WaveletConfig wc{config_.wavelet_family, config_.wavelet_levels, wavelet::Boundary::kPeriodic};
  const auto bands = wavelet::dwt_multichannel(x, wc);
  Eigen::Index col = 0;
  std::size_t row = 0;
  for (std::size_t len : bands.band_lengths) {
    const std::size_t per_slot = len / slots;
    for (std::size_t s = 0; s < slots; ++s)
      for (std::size_t i = 0; i < per_slot; ++i)
        out.block(static_cast<Eigen::Index>(s), col + static_cast<Eigen::Index>(i) * d, 1, d) =
            bands.coefficients.row(static_cast<Eigen::Index>(row + s * per_slot + i));
    col += static_cast<Eigen::Index>(per_slot) * d;
    row += len;
  }
  return out;
}

Eigen::MatrixXd TokenizerModel::from_layout(const Eigen::MatrixXd& layout, std::size_t frames) const {
  const auto slots = static_cast<std::size_t>(layout.rows());
  const std::size_t k = config_.slot_frames();
  const std::size_t padded = slots * k;
  if (static_cast<std::size_t>(layout.cols()) != channels_ || frames > padded) {
    throw Error(ErrorKind::kShape, "slot layout does not match the tokenizer");
  }
  const auto d = static_cast<Eigen::Index>(feature_width_);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(padded), d);
  if (!config_.use_wavelet) {
    for (std::size_t s = 0; s < slots; ++s)
      for (std::size_t i = 0; i < k; ++i)
        x.row(static_cast<Eigen::Index>(s * k + i)) = layout.block(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i) * d, 1, d);
  } else {
    const wavelet::WaveletConfig wc{config_.wavelet_family, config_.wavelet_levels, wavelet::Boundary::kPeriodic};
    wavelet::MultichannelBands bands;
    bands.band_lengths.push_back(padded >> config_.wavelet_levels);
    for (int l = config_.wavelet_levels; l >= 1; --l) bands.band_lengths.push_back(padded >> l);
    for (int l = 0; l < config_.wavelet_levels; ++l) bands.level_lengths.push_back(padded >> l);
    bands.coefficients.resize(static_cast<Eigen::Index>(padded), d);
    Eigen::Index col = 0;
    std::size_t row = 0;
    for (std::size_t len : bands.band_lengths) {
      const std::size_t per_slot = len / slots;
      for (std::size_t s = 0; s < slots; ++s)
        for (std::size_t i = 0; i < per_slot; ++i)
          bands.coefficients.row(static_cast<Eigen::Index>(row + s * per_slot + i)) =
              layout.block(static_cast<Eigen::Index>(s), col + static_cast<Eigen::Index>(i) * d, 1, d);
      col += static_cast<Eigen::Index>(per_slot) * d;
      row += len;
    }
    x = wavelet::dwt_multichannel_inverse(bands, wc);
  }
  return x.topRows(static_cast<Eigen::Index>(frames));
}

Tensor TokenizerModel::residual_stack(const Tensor& x, const std::vector<std::pair<Linear, Linear>>& blocks) const {
  Tensor h = x;
  for (const auto& [a, b] : blocks) h = nn::add(h, b(nn::gelu(a(nn::unfold_rows(h, 1)))));
  return h;
}

Tensor TokenizerModel::encode_latent(const Tensor& layout) const {
  if (layout.cols() != channels_ || layout.rows() % group_ != 0) {
    throw Error(ErrorKind::kShape, "slot layout " + nn::shape_string(layout.shape()) + " does not fit the encoder");
  }
  Tensor h = nn::gelu(enc_in_(nn::unfold_rows(layout, 1)));
  h = residual_stack(h, enc_blocks_);
  h = nn::reshape(h, {layout.rows() / group_, group_ * config_.width});
  return enc_out_(h);
}

Tensor TokenizerModel::decode_latent(const Tensor& quantized) const {
  if (quantized.cols() != config_.latent_width()) {
    throw Error(ErrorKind::kShape, "latent " + nn::shape_string(quantized.shape()) + " does not fit the decoder");
  }
  Tensor h = nn::gelu(nn::reshape(dec_in_(quantized), {quantized.rows() * group_, config_.width}));
  h = residual_stack(h, dec_blocks_);
  return dec_out_(nn::unfold_rows(h, 1));
}

Tensor TokenizerModel::reconstruction_loss(const Eigen::MatrixXd& normalized) const {
  const Tensor target = to_tensor(to_layout(normalized));
  const Tensor z = encode_latent(target);
  return nn::mse(decode_latent(fsq_quantize(z, config_.levels)), target);
}

TokenSequence TokenizerModel::encode(const repr::FeatureMatrix& features, const std::string& clip_id, double fps) const {
  if (static_cast<std::size_t>(features.cols()) != norm_.width()) {
    throw Error(ErrorKind::kShape, "features of width " + std::to_string(features.cols()) +
                                       " do not match the normalization width " + std::to_string(norm_.width()));
  }
  const Tensor z = encode_latent(to_tensor(to_layout(norm_.normalize(features))));
  TokenSequence out{clip_id, {}, static_cast<std::size_t>(features.rows()), fps};
  for (const auto& codes : fsq_codes(z, config_.levels)) out.indices.push_back(codes_to_index(codes, config_.levels));
  return out;
}

repr::FeatureMatrix TokenizerModel::decode(const TokenSequence& tokens) const {
  if (tokens.indices.empty()) throw Error(ErrorKind::kEmptyInput, "no tokens to decode");
  const std::size_t d = config_.latent_width();
  const std::size_t padded = tokens.indices.size() * config_.downsample;
  if (tokens.frame_count > padded || tokens.frame_count + config_.downsample <= padded) {
    throw Error(ErrorKind::kShape, std::to_string(tokens.indices.size()) + " tokens cannot describe " +
                                       std::to_string(tokens.frame_count) + " frames");
  }
  std::vector<Scalar> zq;
  for (std::uint32_t index : tokens.indices) {
    const auto codes = index_to_codes(index, config_.levels);
    for (std::size_t j = 0; j < d; ++j) zq.push_back(static_cast<Scalar>(codes[j]) / static_cast<Scalar>(config_.levels[j] - 1));
  }
  const Tensor out = decode_latent(Tensor::from({tokens.indices.size(), d}, std::move(zq)));
  return norm_.denormalize(from_layout(to_matrix(out), tokens.frame_count));
}

repr::FeatureMatrix TokenizerModel::reconstruct(const repr::FeatureMatrix& features) const {
  return decode(encode(features, "", 30.0));
}

nlohmann::json TokenizerModel::model_json() const {
  return {{"fsq", config_.to_json()},
          {"feature_width", feature_width_},
          {"norm",
           {{"mean", std::vector<double>(norm_.mean.data(), norm_.mean.data() + norm_.mean.size())},
            {"stddev", std::vector<double>(norm_.stddev.data(), norm_.stddev.data() + norm_.stddev.size())}}}};
}

void TokenizerModel::save(const std::filesystem::path& path, std::uint64_t seed, std::size_t step) const {
  nn::save_checkpoint(path, "fsq", params_, model_json(), seed, step);
}

TokenizerModel TokenizerModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "fsq") throw Error(ErrorKind::kData, path.string() + " is a " + ck.kind + " checkpoint, not a tokenizer");
  try {
    TokenizerModel model(FsqConfig::from_json(ck.config.at("fsq")), ck.config.at("feature_width").get<std::size_t>(),
                         ck.seed);
    const auto mean = ck.config.at("norm").at("mean").get<std::vector<double>>();
    const auto stddev = ck.config.at("norm").at("stddev").get<std::vector<double>>();
    repr::NormStats norm;
    norm.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    norm.stddev = Eigen::Map<const Eigen::VectorXd>(stddev.data(), static_cast<Eigen::Index>(stddev.size()));
    model.set_norm(std::move(norm));
    nn::restore_parameters(ck, model.params_);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, path.string() + ": malformed tokenizer config: " + e.what());
  }
}

// ---- training and evaluation ---------------------------------------------

TrainResult train_reconstruction(TokenizerModel& model, const std::vector<repr::FeatureMatrix>& corpus,
                                 const TrainConfig& config, const std::function<void(std::size_t, double)>& progress) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyInput, "tokenizer training corpus is empty");
  if (config.batch == 0) throw Error(ErrorKind::kConfig, "batch size must be positive");
  const std::size_t ds = model.config().downsample;
  const std::size_t window = std::max(ds, config.window / ds * ds);
  for (const auto& clip : corpus) {
    if (static_cast<std::size_t>(clip.rows()) < ds) {
      throw Error(ErrorKind::kTooShort, "training clip of " + std::to_string(clip.rows()) + " frames");
    }
  }
  model.set_norm(repr::fit_norm_stats(corpus));
  std::vector<Eigen::MatrixXd> normalized;
  for (const auto& clip : corpus) normalized.push_back(model.norm().normalize(clip));

  Rng rng(config.seed);
  nn::AdamState state;
  TrainResult result;
  for (std::size_t step = 0; step < config.steps; ++step) {
    model.parameters().zero_grad();
    std::vector<Tensor> losses;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const Eigen::MatrixXd& clip = normalized[rng.below(normalized.size())];
      const auto rows = static_cast<std::size_t>(clip.rows());
      if (rows <= window) {
        losses.push_back(model.reconstruction_loss(clip));
      } else {
        const auto start = static_cast<Eigen::Index>(rng.below(rows - window + 1));
        losses.push_back(model.reconstruction_loss(clip.middleRows(start, static_cast<Eigen::Index>(window))));
      }
    }
    const Tensor loss = nn::scale(nn::sum(nn::concat_rows(losses)), Scalar{1} / static_cast<Scalar>(config.batch));
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::kNumerical, "tokenizer loss is not finite at step " + std::to_string(step));
    }
    nn::backward(loss);
    nn::adam_step(model.parameters(), state, config.adam);
    result.losses.push_back(value);
    if (progress) progress(step, value);
  }
  return result;
}

ReconstructionReport eval_reconstruction(const TokenizerModel& model, const std::vector<repr::MotionSequence>& corpus,
                                         const geom::Skeleton& skeleton) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyInput, "evaluation corpus is empty");
  ReconstructionReport report;
  double mpjpe_weighted = 0.0, acc_weighted = 0.0, gt_acc_weighted = 0.0;
  std::size_t acc_frames = 0;
  for (const auto& motion : corpus) {
    const auto feats = repr::encode_features(motion, skeleton);
    const auto rec = model.reconstruct(repr::to_matrix(feats));
    const auto init = repr::initial_state(motion);
    const auto decoded = repr::decode_features(repr::from_matrix(rec, skeleton.joint_count()), init.translation,
                                               init.heading, skeleton, motion.fps);
    const auto gt = repr::world_positions(motion, skeleton);
    const auto got = repr::world_positions(decoded, skeleton);
    const auto n = static_cast<double>(motion.frame_count());
    mpjpe_weighted += metrics::mpjpe(gt, got) * n;
    const auto a = metrics::acceleration_stats(got, motion.fps);
    const auto g = metrics::acceleration_stats(gt, motion.fps);
    const auto inner = static_cast<double>(motion.frame_count() - 2);
    acc_weighted += a.mean * inner;
    gt_acc_weighted += g.mean * inner;
    report.max_acceleration = std::max(report.max_acceleration, a.max);
    report.gt_max_acceleration = std::max(report.gt_max_acceleration, g.max);
    acc_frames += motion.frame_count() - 2;
    report.frames += motion.frame_count();
    ++report.clips;
  }
  report.mpjpe_mm = mpjpe_weighted / static_cast<double>(report.frames);
  report.mean_acceleration = acc_weighted / static_cast<double>(acc_frames);
  report.gt_mean_acceleration = gt_acc_weighted / static_cast<double>(acc_frames);
  return report;
}

// ---- token files ---------------------------------------------------------

void write_tokens(const std::filesystem::path& path, const TokenFile& tokens) {
  nlohmann::json clips = nlohmann::json::array();
  std::vector<std::uint8_t> payload;
  std::size_t offset = 0;
  for (const auto& s : tokens.sequences) {
    clips.push_back({{"id", s.clip_id}, {"frames", s.frame_count}, {"fps", s.fps}, {"offset", offset},
                     {"count", s.indices.size()}});
    for (auto v : s.indices) {
      if (v >= tokens.vocabulary_size) throw Error(ErrorKind::kOutOfRange, "token " + std::to_string(v) + " outside vocabulary");
      io::append_u32(payload, v);
    }
    offset += s.indices.size();
  }
  const nlohmann::json header{{"format", "motionkit.tokens"},
                              {"version", kTokenVersion},
                              {"config_hash", tokens.config_hash},
                              {"vocabulary_size", tokens.vocabulary_size},
                              {"downsample", tokens.downsample},
                              {"dtype", "uint32"},
                              {"endianness", "little"},
                              {"clips", clips}};
  io::write_framed(path, kTokenMagic, header, payload);
}

TokenFile read_tokens(const std::filesystem::path& path) {
  const io::FramedFile file = io::read_framed(path, kTokenMagic);
  TokenFile out;
  try {
    const auto& h = file.header;
    if (h.at("version").get<int>() != kTokenVersion) throw Error(ErrorKind::kData, "unsupported token file version");
    out.config_hash = h.at("config_hash").get<std::string>();
    out.vocabulary_size = h.at("vocabulary_size").get<std::uint64_t>();
    out.downsample = h.at("downsample").get<std::size_t>();
    for (const auto& c : h.at("clips")) {
      TokenSequence s;
      s.clip_id = c.at("id").get<std::string>();
      s.frame_count = c.at("frames").get<std::size_t>();
      s.fps = c.at("fps").get<double>();
      const auto offset = c.at("offset").get<std::size_t>();
      const auto count = c.at("count").get<std::size_t>();
      if (4 * (offset + count) > file.payload.size()) {
        throw Error(ErrorKind::kData, "clip " + s.clip_id + " runs past the token payload");
      }
      for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t v = io::load_u32(file.payload, 4 * (offset + i));
        if (v >= out.vocabulary_size) {
          throw Error(ErrorKind::kData, "clip " + s.clip_id + " token " + std::to_string(i) + " = " + std::to_string(v) +
                                            " outside vocabulary");
        }
        s.indices.push_back(v);
      }
      out.sequences.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, path.string() + ": malformed token header: " + e.what());
  }
  return out;
}

}  // namespace motionkit::fsq::inline MOTIONKIT_PRECISION
