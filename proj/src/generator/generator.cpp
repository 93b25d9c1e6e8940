#include "motionkit/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

namespace motionkit::gen::inline MOTIONKIT_PRECISION {

namespace {

constexpr Scalar kBlocked = Scalar(-1e9);

Tensor mask_bias(std::size_t w, std::size_t n) {
  const HybridMask mask = build_hybrid_mask(w, n);
  const std::size_t l = w + n;
  std::vector<Scalar> v(l * l);
  for (std::size_t r = 0; r < l; ++r)
    for (std::size_t c = 0; c < l; ++c) v[r * l + c] = mask[r][c] ? Scalar{0} : kBlocked;
  return Tensor::from({l, l}, std::move(v));
}

void check_ids(std::span<const int> ids, std::size_t vocabulary, const char* what) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocabulary) {
      throw Error(ErrorKind::kOutOfRange, std::string(what) + " token " + std::to_string(i) + " = " +
                                              std::to_string(ids[i]) + " outside vocabulary of " +
                                              std::to_string(vocabulary));
    }
  }
}

}  // namespace

// ---- config --------------------------------------------------------------

void GenConfig::validate() const {
  if (layers == 0 || width == 0 || heads == 0 || ffn_expansion == 0) {
    throw Error(ErrorKind::kConfig, "generator layers, width, heads and ffn_expansion must be positive");
  }
  if (width % heads != 0) {
    throw Error(ErrorKind::kConfig, "generator width " + std::to_string(width) + " is not divisible by " +
                                        std::to_string(heads) + " heads");
  }
  if (code_vocabulary == 0 || text_vocabulary == 0) throw Error(ErrorKind::kConfig, "empty generator vocabulary");
  if (vocabulary() > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
    throw Error(ErrorKind::kConfig, "generator vocabulary too large");
  }
  if (max_motion_length < 2) throw Error(ErrorKind::kConfig, "max_motion_length must be at least 2");
}

nlohmann::json GenConfig::to_json() const {
  return {{"layers", layers},
          {"width", width},
          {"heads", heads},
          {"ffn_expansion", ffn_expansion},
          {"code_vocabulary", code_vocabulary},
          {"text_vocabulary", text_vocabulary},
          {"max_text_length", max_text_length},
          {"max_motion_length", max_motion_length},
          {"tokenizer_hash", tokenizer_hash}};
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"layers",          "width",           "heads",
                                           "ffn_expansion",   "code_vocabulary", "text_vocabulary",
                                           "max_text_length", "max_motion_length", "tokenizer_hash"};
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "generator config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::kConfig, "unknown generator config key '" + key + "'");
  }
  GenConfig c;
  try {
    if (j.contains("layers")) c.layers = j["layers"].get<std::size_t>();
    if (j.contains("width")) c.width = j["width"].get<std::size_t>();
    if (j.contains("heads")) c.heads = j["heads"].get<std::size_t>();
    if (j.contains("ffn_expansion")) c.ffn_expansion = j["ffn_expansion"].get<std::size_t>();
    if (j.contains("code_vocabulary")) c.code_vocabulary = j["code_vocabulary"].get<std::size_t>();
    if (j.contains("text_vocabulary")) c.text_vocabulary = j["text_vocabulary"].get<std::size_t>();
    if (j.contains("max_text_length")) c.max_text_length = j["max_text_length"].get<std::size_t>();
    if (j.contains("max_motion_length")) c.max_motion_length = j["max_motion_length"].get<std::size_t>();
    if (j.contains("tokenizer_hash")) c.tokenizer_hash = j["tokenizer_hash"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("generator config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- text and mask -------------------------------------------------------

Prompt tokenize_text(const std::string& text, std::size_t max_length) {
  Prompt p{text, {}};
  for (unsigned char ch : text) {
    if (p.ids.size() == max_length) break;
    p.ids.push_back(ch);
  }
  return p;
}

HybridMask build_hybrid_mask(std::size_t w, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::kOutOfRange, "hybrid mask needs at least one motion position");
  const std::size_t l = w + n;
  HybridMask mask(l, std::vector<bool>(l, false));
  for (std::size_t r = 0; r < l; ++r) {
    for (std::size_t c = 0; c < w; ++c) mask[r][c] = true;
    if (r >= w)
      for (std::size_t c = w; c <= r; ++c) mask[r][c] = true;
  }
  return mask;
}

// ---- model ---------------------------------------------------------------

GeneratorModel::GeneratorModel(GenConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const std::size_t w = config_.width;
  const std::size_t f = w * config_.ffn_expansion;
  const auto inv_sqrt = [](std::size_t n) { return static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(n))); };
  const Scalar residual = inv_sqrt(w) / static_cast<Scalar>(std::sqrt(2.0 * static_cast<double>(config_.layers)));
  Rng rng(seed);
  text_embed_ = params_.add("text.embed", {config_.text_vocabulary, w}, Scalar(0.02), rng);
  text_pos_ = params_.add("text.position", {std::max<std::size_t>(config_.max_text_length, 1), w}, Scalar(0.02), rng);
  motion_embed_ = params_.add("motion.embed", {config_.vocabulary(), w}, Scalar(0.02), rng);
  motion_pos_ = params_.add("motion.position", {config_.max_motion_length, w}, Scalar(0.02), rng);
  for (std::size_t i = 0; i < config_.layers; ++i) {
    const std::string n = "block" + std::to_string(i) + ".";
    Layer l;
    l.norm1 = params_.add_constant(n + "norm1", {w}, 1);
    l.wq = params_.add(n + "attn.q", {w, w}, inv_sqrt(w), rng);
    l.wk = params_.add(n + "attn.k", {w, w}, inv_sqrt(w), rng);
    l.wv = params_.add(n + "attn.v", {w, w}, inv_sqrt(w), rng);
    l.wo = params_.add(n + "attn.out.weight", {w, w}, residual, rng);
    l.bo = params_.add(n + "attn.out.bias", {w}, 0, rng);
    l.norm2 = params_.add_constant(n + "norm2", {w}, 1);
    l.w1 = params_.add(n + "ffn.in.weight", {w, f}, inv_sqrt(w), rng);
    l.b1 = params_.add(n + "ffn.in.bias", {f}, 0, rng);
    l.w2 = params_.add(n + "ffn.out.weight", {f, w}, residual * inv_sqrt(config_.ffn_expansion), rng);
    l.b2 = params_.add(n + "ffn.out.bias", {w}, 0, rng);
    layers_.push_back(l);
  }
  final_norm_ = params_.add_constant("final.norm", {w}, 1);
  head_w_ = params_.add("head.weight", {w, config_.vocabulary()}, Scalar(0.1) * inv_sqrt(w), rng);
  head_b_ = params_.add("head.bias", {config_.vocabulary()}, 0, rng);
}

Tensor GeneratorModel::forward_logits(std::span<const int> text, std::span<const int> motion) const {
  if (motion.empty()) throw Error(ErrorKind::kShape, "no motion positions");
  if (text.size() > config_.max_text_length) {
    throw Error(ErrorKind::kShape, "text of " + std::to_string(text.size()) + " tokens exceeds " +
                                       std::to_string(config_.max_text_length));
  }
  if (motion.size() > config_.max_motion_length) {
    throw Error(ErrorKind::kShape, "motion of " + std::to_string(motion.size()) + " positions exceeds " +
                                       std::to_string(config_.max_motion_length));
  }
  check_ids(text, config_.text_vocabulary, "text");
  check_ids(motion, config_.vocabulary(), "motion");

  const std::size_t wt = text.size(), n = motion.size();
  std::vector<int> motion_positions(n);
  for (std::size_t i = 0; i < n; ++i) motion_positions[i] = static_cast<int>(i);
  Tensor m = nn::add(nn::embedding(motion_embed_, motion), nn::embedding(motion_pos_, motion_positions));
  Tensor x = m;
  if (wt > 0) {
    std::vector<int> text_positions(wt);
    for (std::size_t i = 0; i < wt; ++i) text_positions[i] = static_cast<int>(i);
    const Tensor t = nn::add(nn::embedding(text_embed_, text), nn::embedding(text_pos_, text_positions));
    x = nn::concat_rows({t, m});
  }

  const Tensor bias = mask_bias(wt, n);
  const std::size_t dh = config_.width / config_.heads;
  const auto score_scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dh)));
  for (const Layer& l : layers_) {
    const Tensor h = nn::rms_norm(x, l.norm1);
    const Tensor q = nn::matmul(h, l.wq), k = nn::matmul(h, l.wk), v = nn::matmul(h, l.wv);
    std::vector<Tensor> heads;
    for (std::size_t i = 0; i < config_.heads; ++i) {
      const Tensor qh = nn::slice_cols(q, i * dh, (i + 1) * dh);
      const Tensor kh = nn::slice_cols(k, i * dh, (i + 1) * dh);
      const Tensor vh = nn::slice_cols(v, i * dh, (i + 1) * dh);
      const Tensor scores = nn::add(nn::scale(nn::matmul(qh, nn::transpose(kh)), score_scale), bias);
      heads.push_back(nn::matmul(nn::softmax(scores), vh));
    }
    const Tensor attn = heads.size() == 1 ? heads[0] : nn::concat_cols(heads);
    x = nn::add(x, nn::linear(attn, l.wo, l.bo));
    const Tensor g = nn::rms_norm(x, l.norm2);
    x = nn::add(x, nn::linear(nn::gelu(nn::linear(g, l.w1, l.b1)), l.w2, l.b2));
  }
  const Tensor out = nn::rms_norm(wt > 0 ? nn::slice_rows(x, wt, wt + n) : x, final_norm_);
  return nn::linear(out, head_w_, head_b_);
}

void GeneratorModel::save(const std::filesystem::path& path, std::uint64_t seed, std::size_t step) const {
  nn::save_checkpoint(path, "generator", params_, config_.to_json(), seed, step);
}

GeneratorModel GeneratorModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "generator") {
    throw Error(ErrorKind::kData, path.string() + " is a " + ck.kind + " checkpoint, not a generator");
  }
  GeneratorModel model(GenConfig::from_json(ck.config), ck.seed);
  nn::restore_parameters(ck, model.params_);
  return model;
}

// ---- training ------------------------------------------------------------

Tensor ce_loss(const Tensor& logits, std::span<const int> targets) {
  if (targets.size() != logits.rows()) {
    throw Error(ErrorKind::kShape, std::to_string(targets.size()) + " targets for " + std::to_string(logits.rows()) +
                                       " logit rows");
  }
  std::vector<int> t(targets.begin(), targets.end());
  bool any = false;
  for (int& v : t) {
    if (v == kPad) {
      v = nn::kIgnoreIndex;
    } else {
      any = true;
    }
  }
  if (!any) throw Error(ErrorKind::kEmptyInput, "every target position is PAD");
  return nn::cross_entropy(logits, t);
}

TrainingExample make_example(const Prompt& prompt, std::span<const std::uint32_t> codes, const GenConfig& config) {
  if (codes.empty()) throw Error(ErrorKind::kEmptyInput, "motion with no tokens");
  if (codes.size() + 1 > config.max_motion_length) {
    throw Error(ErrorKind::kShape, std::to_string(codes.size()) + " motion tokens exceed the generator limit of " +
                                       std::to_string(config.max_motion_length - 1));
  }
  TrainingExample ex;
  ex.text.assign(prompt.ids.begin(), prompt.ids.begin() + static_cast<long>(std::min(prompt.ids.size(), config.max_text_length)));
  ex.inputs.push_back(kBos);
  for (auto c : codes) {
    if (c >= config.code_vocabulary) {
      throw Error(ErrorKind::kOutOfRange, "motion code " + std::to_string(c) + " outside the generator vocabulary");
    }
    ex.inputs.push_back(static_cast<int>(c) + kCodeOffset);
    ex.targets.push_back(static_cast<int>(c) + kCodeOffset);
  }
  ex.targets.push_back(kEos);
  return ex;
}

GenTrainResult train_generator(GeneratorModel& model, const std::vector<PairedExample>& corpus,
                               const GenTrainConfig& config, const std::function<void(std::size_t, double)>& progress) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyInput, "generator training corpus is empty");
  if (config.batch == 0) throw Error(ErrorKind::kConfig, "batch size must be positive");
  std::vector<TrainingExample> examples;
  for (const auto& p : corpus) examples.push_back(make_example(p.prompt, p.tokens.indices, model.config()));

  Rng rng(config.seed);
  nn::AdamState state;
  GenTrainResult result;
  for (std::size_t step = 0; step < config.steps; ++step) {
    model.parameters().zero_grad();
    std::vector<Tensor> losses;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const auto& ex = examples[rng.below(examples.size())];
      losses.push_back(ce_loss(model.forward_logits(ex.text, ex.inputs), ex.targets));
    }
    const Tensor loss = nn::scale(nn::sum(nn::concat_rows(losses)), Scalar{1} / static_cast<Scalar>(config.batch));
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::kNumerical, "generator loss is not finite at step " + std::to_string(step));
    }
    nn::backward(loss);
    nn::adam_step(model.parameters(), state, config.adam);
    result.losses.push_back(value);
    if (progress) progress(step, value);
  }
  return result;
}

// ---- sampling ------------------------------------------------------------

SamplingConfig::Strategy parse_strategy(const std::string& name) {
  if (name == "greedy") return SamplingConfig::Strategy::kGreedy;
  if (name == "temperature") return SamplingConfig::Strategy::kTemperature;
  if (name == "top-k" || name == "topk") return SamplingConfig::Strategy::kTopK;
  throw Error(ErrorKind::kConfig, "unknown sampling strategy '" + name + "' (expected greedy, temperature, top-k)");
}

SampleResult sample_autoregressive(const GeneratorModel& model, const Prompt& prompt, const SamplingConfig& config) {
  const GenConfig& gc = model.config();
  if (config.strategy != SamplingConfig::Strategy::kGreedy && !(config.temperature > 0)) {
    throw Error(ErrorKind::kConfig, "temperature must be positive");
  }
  if (config.strategy == SamplingConfig::Strategy::kTopK && config.top_k == 0) {
    throw Error(ErrorKind::kConfig, "top-k needs k >= 1");
  }
  const std::size_t limit = std::min(config.max_tokens == 0 ? gc.max_motion_length - 1 : config.max_tokens,
                                     gc.max_motion_length - 1);
  std::vector<int> text(prompt.ids.begin(),
                        prompt.ids.begin() + static_cast<long>(std::min(prompt.ids.size(), gc.max_text_length)));
  std::vector<int> motion{kBos};
  Rng rng(config.seed);
  SampleResult out;
  const std::size_t v = gc.vocabulary();
  while (true) {
    const Tensor logits = model.forward_logits(text, motion);
    const std::size_t last = logits.rows() - 1;
    std::vector<double> row(v);
    for (std::size_t c = 0; c < v; ++c) row[c] = static_cast<double>(logits.at(last, c));
    std::vector<bool> allowed(v, true);
    allowed[kPad] = allowed[kBos] = false;
    if (out.codes.empty()) allowed[kEos] = false;

    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < v; ++c)
      if (allowed[c]) candidates.push_back(c);
    // highest logit first, lower id on ties
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    std::size_t choice = candidates.front();
    if (config.strategy != SamplingConfig::Strategy::kGreedy) {
      if (config.strategy == SamplingConfig::Strategy::kTopK && config.top_k < candidates.size()) {
        candidates.resize(config.top_k);
      }
      const double top = row[candidates.front()];
      std::vector<double> weights;
      double total = 0.0;
      for (std::size_t c : candidates) {
        weights.push_back(std::exp((row[c] - top) / config.temperature));
        total += weights.back();
      }
      double u = rng.uniform() * total;
      choice = candidates.back();
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (u < weights[i]) {
          choice = candidates[i];
          break;
        }
        u -= weights[i];
      }
    }
    if (choice == static_cast<std::size_t>(kEos)) break;
    out.codes.push_back(static_cast<std::uint32_t>(choice - kCodeOffset));
    if (out.codes.size() == limit) {
      out.truncated = true;
      break;
    }
    motion.push_back(static_cast<int>(choice));
  }
  return out;
}

repr::MotionSequence generate(const GeneratorModel& model, const fsq::TokenizerModel& tokenizer,
                              const geom::Skeleton& skeleton, const std::string& text,
                              const SamplingConfig& sampling, SampleResult* sample) {
  const std::string hash = nn::config_hash(tokenizer.model_json());
  if (model.config().tokenizer_hash != hash) {
    throw Error(ErrorKind::kConfig, "generator was trained against tokenizer " + model.config().tokenizer_hash +
                                        " but the given tokenizer is " + hash);
  }
  if (model.config().code_vocabulary != tokenizer.config().vocabulary_size()) {
    throw Error(ErrorKind::kConfig, "generator and tokenizer vocabularies differ");
  }
  if (tokenizer.feature_width() != repr::feature_width(skeleton.joint_count())) {
    throw Error(ErrorKind::kConfig, "tokenizer feature width does not match the skeleton");
  }
  const SampleResult s = sample_autoregressive(model, tokenize_text(text, model.config().max_text_length), sampling);
  const std::size_t frames = s.codes.size() * tokenizer.config().downsample;
  const fsq::TokenSequence tokens{"", s.codes, frames, 30.0};
  const auto features = repr::from_matrix(tokenizer.decode(tokens), skeleton.joint_count());
  if (sample) *sample = s;
  return repr::decode_features(features, geom::Vec3::Zero(), geom::RotationMatrix::Identity(), skeleton, 30.0);
}

std::vector<PairedExample> read_paired_corpus(const std::filesystem::path& manifest, std::size_t max_text_length,
                                              std::string* tokenizer_hash) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + manifest.string());
  std::map<std::filesystem::path, fsq::TokenFile> files;
  std::vector<PairedExample> out;
  std::string hash;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      const auto clip = j.at("clip").get<std::string>();
      const auto text = j.at("text").get<std::string>();
      const auto path = manifest.parent_path() / j.at("tokens").get<std::string>();
      auto it = files.find(path);
      if (it == files.end()) it = files.emplace(path, fsq::read_tokens(path)).first;
      if (hash.empty()) hash = it->second.config_hash;
      if (it->second.config_hash != hash) throw Error(ErrorKind::kData, "token files come from different tokenizers");
      const auto& seqs = it->second.sequences;
      const auto found = std::find_if(seqs.begin(), seqs.end(), [&](const auto& s) { return s.clip_id == clip; });
      if (found == seqs.end()) throw Error(ErrorKind::kData, "clip '" + clip + "' not in " + path.string());
      out.push_back({clip, tokenize_text(text, max_text_length), *found});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kData, where + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorKind::kEmptyInput, manifest.string() + " lists no pairs");
  if (tokenizer_hash) *tokenizer_hash = hash;
  return out;
}

}  // namespace motionkit::gen::inline MOTIONKIT_PRECISION
