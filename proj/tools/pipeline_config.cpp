#include "pipeline_config.hpp"

#include <fstream>
#include <set>

namespace motionkit::cli {

namespace {

// Reads the listed keys of a section into `fields` and rejects any other key.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(ErrorKind::kConfig, "config section '" + name_ + "' must be an object");
  }

  template <typename T>
  Section& read(const std::string& key, T& field) {
    seen_.insert(key);
    if (j_.contains(key)) {
      try {
        field = j_.at(key).get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kConfig, name_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw Error(ErrorKind::kConfig, "unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

nlohmann::json curation_json(const curation::CurationConfig& c) {
  return {{"iou_threshold", c.iou_threshold},   {"confidence_threshold", c.confidence_threshold},
          {"jump_threshold", c.jump_threshold}, {"jump_relative", c.jump_relative},
          {"tree_count", c.tree_count},         {"subsample_size", c.subsample_size},
          {"score_threshold", c.score_threshold}, {"min_span", c.min_span},
          {"max_span", c.max_span},             {"jitter_margin", c.jitter_margin},
          {"target_fps", c.target_fps}};
}

}  // namespace

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json gen = generator.to_json();
  gen.erase("code_vocabulary");
  gen.erase("tokenizer_hash");
  return {{"seed", seed},
          {"curation", curation_json(curation)},
          {"tokenizer", tokenizer.to_json()},
          {"tokenizer_training",
           {{"steps", tokenizer_training.steps},
            {"batch", tokenizer_training.batch},
            {"window", tokenizer_training.window},
            {"learning_rate", tokenizer_training.learning_rate},
            {"clip_norm", tokenizer_training.clip_norm}}},
          {"generator", gen},
          {"generator_training",
           {{"steps", generator_training.steps},
            {"batch", generator_training.batch},
            {"learning_rate", generator_training.learning_rate},
            {"clip_norm", generator_training.clip_norm}}},
          {"sampling",
           {{"strategy", sampling.strategy},
            {"temperature", sampling.temperature},
            {"top_k", sampling.top_k},
            {"max_tokens", sampling.max_tokens}}},
          {"eval", {{"retrieval_batch", eval.retrieval_batch}, {"histogram_bins", eval.histogram_bins}}},
          {"synth",
           {{"clips", synth.clips},
            {"frames", synth.frames},
            {"fps", synth.fps},
            {"flip_fraction", synth.flip_fraction},
            {"jitter_fraction", synth.jitter_fraction},
            {"jitter_magnitude", synth.jitter_magnitude},
            {"rotation_noise", synth.rotation_noise}}}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  Section top(j, "config");
  top.read("seed", c.seed);
  nlohmann::json curation = nlohmann::json::object(), tokenizer = nlohmann::json::object(),
                 tok_train = nlohmann::json::object(), generator = nlohmann::json::object(),
                 gen_train = nlohmann::json::object(), sampling = nlohmann::json::object(),
                 eval = nlohmann::json::object(), synth = nlohmann::json::object();
  top.read("curation", curation)
      .read("tokenizer", tokenizer)
      .read("tokenizer_training", tok_train)
      .read("generator", generator)
      .read("generator_training", gen_train)
      .read("sampling", sampling)
      .read("eval", eval)
      .read("synth", synth)
      .finish();

  auto& cu = c.curation;
  Section(curation, "curation")
      .read("iou_threshold", cu.iou_threshold)
      .read("confidence_threshold", cu.confidence_threshold)
      .read("jump_threshold", cu.jump_threshold)
      .read("jump_relative", cu.jump_relative)
      .read("tree_count", cu.tree_count)
      .read("subsample_size", cu.subsample_size)
      .read("score_threshold", cu.score_threshold)
      .read("min_span", cu.min_span)
      .read("max_span", cu.max_span)
      .read("jitter_margin", cu.jitter_margin)
      .read("target_fps", cu.target_fps)
      .finish();

  c.tokenizer = fsq::FsqConfig::from_json(tokenizer);

  Section(tok_train, "tokenizer_training")
      .read("steps", c.tokenizer_training.steps)
      .read("batch", c.tokenizer_training.batch)
      .read("window", c.tokenizer_training.window)
      .read("learning_rate", c.tokenizer_training.learning_rate)
      .read("clip_norm", c.tokenizer_training.clip_norm)
      .finish();

  if (generator.contains("code_vocabulary") || generator.contains("tokenizer_hash")) {
    throw Error(ErrorKind::kConfig, "generator.code_vocabulary and generator.tokenizer_hash come from the tokenizer checkpoint");
  }
  nlohmann::json gen = generator;
  gen["code_vocabulary"] = c.tokenizer.vocabulary_size();
  c.generator = gen::GenConfig::from_json(gen);

  Section(gen_train, "generator_training")
      .read("steps", c.generator_training.steps)
      .read("batch", c.generator_training.batch)
      .read("learning_rate", c.generator_training.learning_rate)
      .read("clip_norm", c.generator_training.clip_norm)
      .finish();

  Section(sampling, "sampling")
      .read("strategy", c.sampling.strategy)
      .read("temperature", c.sampling.temperature)
      .read("top_k", c.sampling.top_k)
      .read("max_tokens", c.sampling.max_tokens)
      .finish();
  gen::parse_strategy(c.sampling.strategy);

  Section(eval, "eval")
      .read("retrieval_batch", c.eval.retrieval_batch)
      .read("histogram_bins", c.eval.histogram_bins)
      .finish();
  if (c.eval.retrieval_batch == 0 || c.eval.histogram_bins == 0) {
    throw Error(ErrorKind::kConfig, "eval.retrieval_batch and eval.histogram_bins must be positive");
  }

  Section(synth, "synth")
      .read("clips", c.synth.clips)
      .read("frames", c.synth.frames)
      .read("fps", c.synth.fps)
      .read("flip_fraction", c.synth.flip_fraction)
      .read("jitter_fraction", c.synth.jitter_fraction)
      .read("jitter_magnitude", c.synth.jitter_magnitude)
      .read("rotation_noise", c.synth.rotation_noise)
      .finish();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  if (path.empty()) return PipelineConfig{};
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace motionkit::cli
