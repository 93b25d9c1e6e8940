// motionkit command-line front end.
//
// Subcommands: synth, curate, train-fsq, tokenize, train-gen, generate, eval,
// stats. Each writes into --out-dir, echoes the resolved config and records
// input and output digests in manifest.json.
//
// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical
// failure.

#include <cmath>
#include <cstdio>
#include <functional>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "motionkit/curation.hpp"
#include "motionkit/fsq.hpp"
#include "motionkit/generator.hpp"
#include "motionkit/metrics.hpp"
#include "motionkit/motion_io.hpp"
#include "motionkit/synth.hpp"
#include "parallel.hpp"
#include "pipeline_config.hpp"
#include "run_context.hpp"

namespace mk = motionkit;
using mk::Error;
using mk::ErrorKind;
using mk::cli::PipelineConfig;
using mk::cli::RunContext;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string out_dir;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Overrides the config seed");
  cmd->add_option("--workers", c.workers, "Worker threads for per-clip work")->check(CLI::PositiveNumber);
  cmd->add_option("--out-dir", c.out_dir, "Output directory")->required();
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig config = PipelineConfig::load(c.config_path);
  if (c.seed) config.seed = *c.seed;
  config.curation.seed = config.seed;
  return config;
}

struct NamedMotion {
  std::string id;
  mk::repr::MotionSequence motion;
};

std::vector<NamedMotion> load_motions(const std::filesystem::path& dir, const mk::geom::Skeleton& skeleton) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::kIo, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".motion") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<NamedMotion> out;
  for (const auto& f : files) {
    auto m = mk::repr::read_motion(f);
    if (m.joint_count() != skeleton.joint_count()) {
      throw Error(ErrorKind::kData, f.string() + " has " + std::to_string(m.joint_count()) + " joints, expected " +
                                        std::to_string(skeleton.joint_count()));
    }
    out.push_back({f.stem().string(), std::move(m)});
  }
  return out;
}

std::string motion_name(const std::string& id) { return "motions/" + id + ".motion"; }

std::string loss_csv(const std::vector<double>& losses) {
  std::ostringstream out;
  out << "step,loss\n" << std::setprecision(9);
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
  return out.str();
}

std::function<void(std::size_t, double)> progress_printer(const char* what, std::size_t steps) {
  return [what, steps](std::size_t step, double loss) {
    if (step % 50 == 0 || step + 1 == steps) std::fprintf(stderr, "%s step %zu/%zu loss %.6f\n", what, step + 1, steps, loss);
  };
}

double heading_yaw(const mk::geom::RotationMatrix& r) { return std::atan2(r(0, 2), r(2, 2)); }

// Short description of the root trajectory, used as the synthetic caption.
std::string describe(const mk::repr::MotionSequence& m) {
  double path = 0.0;
  for (std::size_t f = 1; f < m.frame_count(); ++f) {
    const auto d = m.root_translation[f] - m.root_translation[f - 1];
    path += std::hypot(d.x(), d.z());
  }
  const double speed = path * m.fps / static_cast<double>(std::max<std::size_t>(m.frame_count() - 1, 1));
  double turn = heading_yaw(m.root_orientation.back()) - heading_yaw(m.root_orientation.front());
  turn = std::remainder(turn, 2 * std::numbers::pi);
  const char* pace = speed < 0.5 ? "slowly" : speed < 1.0 ? "steadily" : "briskly";
  const char* way = turn > 0.3 ? "turning left" : turn < -0.3 ? "turning right" : "straight ahead";
  return std::string("a person walks ") + pace + " " + way;
}

mk::curation::DetectionTrack synth_detections(const std::string& id, const mk::repr::MotionSequence& m) {
  mk::curation::DetectionTrack t;
  t.clip_id = id;
  for (const auto& p : m.root_translation) {
    const double cx = 640.0 + 120.0 * p.x(), cy = 360.0 - 40.0 * p.z() * 0.1;
    mk::curation::BoundingBox box{cx - 40, cy - 100, cx + 40, cy + 100, 1.0};
    mk::curation::BoundingBox seen = box;
    seen.x_min += 1;
    seen.x_max += 1;
    seen.confidence = 0.95;
    mk::curation::BoundingBox other{cx + 300, cy - 90, cx + 370, cy + 90, 0.9};
    t.tracked.push_back(box);
    t.candidates.push_back({seen, other});
  }
  return t;
}

// ---- subcommands -----------------------------------------------------------

void run_synth(const Common& c) {
  const PipelineConfig config = resolve(c);
  RunContext run(c.out_dir, "synth", config.to_json(), config.seed);
  const auto body = mk::geom::Skeleton::default_body();
  const auto& s = config.synth;
  mk::synth::MotionParams params;
  params.frames = s.frames;
  params.fps = s.fps;
  mk::Rng rng(config.seed);
  std::vector<mk::curation::DetectionTrack> tracks;
  std::string captions;
  nlohmann::json anomalies = nlohmann::json::object();
  for (std::size_t i = 0; i < s.clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "clip_%04zu", i);
    auto m = mk::synth::random_motion(body, params, rng);
    const std::string text = describe(m);
    nlohmann::json planted = nlohmann::json::object();
    if (rng.uniform() < s.flip_fraction && s.frames > 20) {
      const std::size_t frame = 10 + rng.below(s.frames - 20);
      mk::synth::plant_orientation_flip(m, frame);
      planted["flip"] = frame;
    }
    if (rng.uniform() < s.jitter_fraction && s.frames > 20) {
      const std::size_t start = 10 + rng.below(s.frames - 20);
      mk::synth::plant_jitter(m, start, 1, s.jitter_magnitude, rng);
      planted["jitter"] = start;
    }
    if (s.rotation_noise > 0) mk::synth::add_rotation_noise(m, s.rotation_noise, rng);
    if (!planted.empty()) anomalies[id] = planted;
    mk::repr::write_motion(run.path(motion_name(id)), m);
    run.add_output(motion_name(id));
    tracks.push_back(synth_detections(id, m));
    captions += nlohmann::json{{"clip", id}, {"text", text}}.dump() + "\n";
  }
  mk::curation::write_detection_stream(run.path("detections.jsonl"), tracks);
  run.add_output("detections.jsonl");
  run.write_text("captions.jsonl", captions);
  run.write_json("anomalies.json", anomalies);
  std::cout << run.finish() << "\n";
}

void run_curate(const Common& c, const std::string& motions_dir, const std::string& detections) {
  const PipelineConfig config = resolve(c);
  RunContext run(c.out_dir, "curate", config.to_json(), config.seed);
  run.add_input(motions_dir);
  run.add_input(detections);
  const auto body = mk::geom::Skeleton::default_body();
  const auto motions = load_motions(motions_dir, body);
  const auto tracks = mk::curation::read_detection_stream(detections);
  std::map<std::string, const mk::curation::DetectionTrack*> by_id;
  for (const auto& t : tracks) by_id[t.clip_id] = &t;

  std::vector<mk::curation::ClipVerdict> verdicts(motions.size());
  std::vector<std::vector<std::string>> written(motions.size());
  if (!motions.empty()) {
    std::vector<mk::repr::MotionSequence> corpus;
    for (const auto& m : motions) corpus.push_back(m.motion);
    const auto detectors = mk::curation::fit_corpus_detectors(corpus, body, config.curation);
    mk::cli::parallel_for(motions.size(), c.workers, [&](std::size_t i) {
      const auto& [id, motion] = motions[i];
      const auto it = by_id.find(id);
      mk::curation::DetectionTrack empty;
      empty.clip_id = id;
      verdicts[i] = mk::curation::curate_clip(it == by_id.end() ? empty : *it->second, motion, body, detectors,
                                              config.curation);
      for (std::size_t k = 0; k < verdicts[i].spans.size(); ++k) {
        const auto& span = verdicts[i].spans[k];
        auto piece = mk::curation::slice_motion(motion, span.start, span.end);
        if (std::abs(piece.fps - config.curation.target_fps) > 1e-9) {
          piece = mk::repr::resample_fps(piece, config.curation.target_fps);
        }
        const std::string name = "curated/" + id + "_" + std::to_string(k) + ".motion";
        std::filesystem::create_directories(run.path(name).parent_path());
        mk::repr::write_motion(run.path(name), piece);
        written[i].push_back(name);
      }
    });
  }
  for (const auto& names : written)
    for (const auto& n : names) run.add_output(n);

  std::string lines;
  std::map<std::string, std::size_t> reasons;
  std::size_t skipped = 0, spans = 0, accepted = 0, total = 0;
  for (const auto& v : verdicts) {
    lines += mk::curation::to_json(v).dump() + "\n";
    skipped += v.skipped ? 1 : 0;
    spans += v.spans.size();
    accepted += v.accepted_frames();
    total += v.frame_count;
    for (const auto& e : v.events) ++reasons[mk::curation::to_string(e.reason)];
  }
  // detection tracks with no matching motion are reported, not dropped
  std::set<std::string> motion_ids;
  for (const auto& m : motions) motion_ids.insert(m.id);
  std::vector<std::string> orphans;
  for (const auto& t : tracks)
    if (!motion_ids.contains(t.clip_id)) orphans.push_back(t.clip_id);

  run.write_text("verdicts.jsonl", lines);
  run.write_json("summary.json", {{"clips", motions.size()},
                                  {"skipped_clips", skipped},
                                  {"accepted_spans", spans},
                                  {"accepted_frames", accepted},
                                  {"total_frames", total},
                                  {"events_by_reason", reasons},
                                  {"detections_without_motion", orphans}});
  std::cout << run.finish() << "\n";
}

void run_train_fsq(const Common& c, const std::string& motions_dir) {
  const PipelineConfig config = resolve(c);
  RunContext run(c.out_dir, "train-fsq", config.to_json(), config.seed);
  run.add_input(motions_dir);
  const auto body = mk::geom::Skeleton::default_body();
  const auto motions = load_motions(motions_dir, body);
  if (motions.empty()) throw Error(ErrorKind::kEmptyInput, "no .motion files in " + motions_dir);
  std::vector<mk::repr::FeatureMatrix> features(motions.size());
  mk::cli::parallel_for(motions.size(), c.workers, [&](std::size_t i) {
    features[i] = mk::repr::to_matrix(mk::repr::encode_features(motions[i].motion, body));
  });
  mk::fsq::TokenizerModel model(config.tokenizer, mk::repr::feature_width(body.joint_count()), config.seed);
  mk::fsq::TrainConfig tc;
  const auto& t = config.tokenizer_training;
  tc.steps = t.steps;
  tc.batch = t.batch;
  tc.window = t.window;
  tc.adam.learning_rate = t.learning_rate;
  tc.adam.clip_norm = t.clip_norm;
  tc.seed = config.seed;
  const auto result = mk::fsq::train_reconstruction(model, features, tc, progress_printer("tokenizer", t.steps));
  model.save(run.path("tokenizer.ckpt"), config.seed, t.steps);
  run.add_output("tokenizer.ckpt");
  run.write_text("loss.csv", loss_csv(result.losses));
  run.write_json("summary.json", {{"clips", motions.size()},
                                  {"parameters", model.parameters().parameter_count()},
                                  {"vocabulary_size", model.config().vocabulary_size()},
                                  {"initial_loss", result.losses.empty() ? 0.0 : result.losses.front()},
                                  {"final_loss", result.losses.empty() ? 0.0 : result.losses.back()},
                                  {"tokenizer_hash", mk::nn::config_hash(model.model_json())}});
  std::cout << run.finish() << "\n";
}

std::string source_id(const std::string& id, const std::map<std::string, std::string>& captions) {
  if (captions.contains(id)) return id;
  const auto cut = id.rfind('_');
  if (cut != std::string::npos && cut + 1 < id.size() &&
      id.find_first_not_of("0123456789", cut + 1) == std::string::npos) {
    return id.substr(0, cut);
  }
  return id;
}

void run_tokenize(const Common& c, const std::string& tokenizer_path, const std::string& motions_dir,
                  const std::string& captions_path) {
  const PipelineConfig config = resolve(c);
  RunContext run(c.out_dir, "tokenize", config.to_json(), config.seed);
  run.add_input(tokenizer_path);
  run.add_input(motions_dir);
  const auto body = mk::geom::Skeleton::default_body();
  const auto model = mk::fsq::TokenizerModel::load(tokenizer_path);
  const auto motions = load_motions(motions_dir, body);
  mk::fsq::TokenFile file;
  file.config_hash = mk::nn::config_hash(model.model_json());
  file.vocabulary_size = model.config().vocabulary_size();
  file.downsample = model.config().downsample;
  file.sequences.resize(motions.size());
  mk::cli::parallel_for(motions.size(), c.workers, [&](std::size_t i) {
    const auto& m = motions[i];
    file.sequences[i] = model.encode(mk::repr::to_matrix(mk::repr::encode_features(m.motion, body)), m.id, m.motion.fps);
  });
  mk::fsq::write_tokens(run.path("tokens.bin"), file);
  run.add_output("tokens.bin");

  std::size_t paired = 0;
  if (!captions_path.empty()) {
    run.add_input(captions_path);
    std::map<std::string, std::string> captions;
    std::ifstream in(captions_path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + captions_path);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        captions[j.at("clip").get<std::string>()] = j.at("text").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kData, captions_path + ":" + std::to_string(n) + ": " + e.what());
      }
    }
    std::string pairs;
    for (const auto& s : file.sequences) {
      const auto it = captions.find(source_id(s.clip_id, captions));
      if (it == captions.end()) {
        std::fprintf(stderr, "warning: no caption for %s\n", s.clip_id.c_str());
        continue;
      }
      pairs += nlohmann::json{{"clip", s.clip_id}, {"text", it->second}, {"tokens", "tokens.bin"}}.dump() + "\n";
      ++paired;
    }
    run.write_text("pairs.jsonl", pairs);
  }
  std::size_t tokens = 0;
  for (const auto& s : file.sequences) tokens += s.indices.size();
  run.write_json("summary.json", {{"clips", motions.size()}, {"tokens", tokens}, {"paired", paired},
                                  {"tokenizer_hash", file.config_hash}});
  std::cout << run.finish() << "\n";
}

void run_train_gen(const Common& c, const std::string& pairs_path, const std::string& tokenizer_path) {
  const PipelineConfig config = resolve(c);
  RunContext run(c.out_dir, "train-gen", config.to_json(), config.seed);
  run.add_input(pairs_path);
  run.add_input(tokenizer_path);
  const auto tokenizer = mk::fsq::TokenizerModel::load(tokenizer_path);
  const std::string hash = mk::nn::config_hash(tokenizer.model_json());
  mk::gen::GenConfig gc = config.generator;
  gc.code_vocabulary = tokenizer.config().vocabulary_size();
  gc.tokenizer_hash = hash;
  std::string corpus_hash;
  const auto corpus = mk::gen::read_paired_corpus(pairs_path, gc.max_text_length, &corpus_hash);
  if (corpus_hash != hash) {
    throw Error(ErrorKind::kConfig, "tokens in " + pairs_path + " come from tokenizer " + corpus_hash + ", not " + hash);
  }
  mk::gen::GeneratorModel model(gc, config.seed);
  mk::gen::GenTrainConfig tc;
  const auto& t = config.generator_training;
  tc.steps = t.steps;
  tc.batch = t.batch;
  tc.adam.learning_rate = t.learning_rate;
  tc.adam.clip_norm = t.clip_norm;
  tc.seed = config.seed;
  const auto result = mk::gen::train_generator(model, corpus, tc, progress_printer("generator", t.steps));
  model.save(run.path("generator.ckpt"), config.seed, t.steps);
  run.add_output("generator.ckpt");
  run.write_text("loss.csv", loss_csv(result.losses));
  run.write_json("summary.json", {{"pairs", corpus.size()},
                                  {"parameters", model.parameters().parameter_count()},
                                  {"vocabulary", gc.vocabulary()},
                                  {"initial_loss", result.losses.empty() ? 0.0 : result.losses.front()},
                                  {"final_loss", result.losses.empty() ? 0.0 : result.losses.back()},
                                  {"ln_vocabulary", std::log(static_cast<double>(gc.vocabulary()))}});
  std::cout << run.finish() << "\n";
}

void run_generate(const Common& c, const std::string& generator_path, const std::string& tokenizer_path,
                  std::vector<std::string> texts, const std::string& texts_file) {
  const PipelineConfig config = resolve(c);
  RunContext run(c.out_dir, "generate", config.to_json(), config.seed);
  run.add_input(generator_path);
  run.add_input(tokenizer_path);
  if (!texts_file.empty()) {
    run.add_input(texts_file);
    std::ifstream in(texts_file);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + texts_file);
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) texts.push_back(line);
  }
  if (texts.empty()) throw Error(ErrorKind::kConfig, "nothing to generate: pass --text or --texts-file");
  const auto tokenizer = mk::fsq::TokenizerModel::load(tokenizer_path);
  const auto model = mk::gen::GeneratorModel::load(generator_path);
  if (model.config().tokenizer_hash != mk::nn::config_hash(tokenizer.model_json())) {
    throw Error(ErrorKind::kConfig, "generator " + generator_path + " was trained against a different tokenizer than " +
                                        tokenizer_path);
  }
  const auto body = mk::geom::Skeleton::default_body();
  mk::gen::SamplingConfig base;
  base.strategy = mk::gen::parse_strategy(config.sampling.strategy);
  base.temperature = config.sampling.temperature;
  base.top_k = config.sampling.top_k;
  base.max_tokens = config.sampling.max_tokens;

  std::vector<mk::gen::SampleResult> samples(texts.size());
  std::vector<std::string> names(texts.size());
  mk::cli::parallel_for(texts.size(), c.workers, [&](std::size_t i) {
    mk::gen::SamplingConfig sc = base;
    sc.seed = config.seed + i;
    const auto motion = mk::gen::generate(model, tokenizer, body, texts[i], sc, &samples[i]);
    char id[32];
    std::snprintf(id, sizeof id, "gen_%04zu", i);
    names[i] = motion_name(id);
    std::filesystem::create_directories(run.path(names[i]).parent_path());
    mk::repr::write_motion(run.path(names[i]), motion);
  });
  std::string lines;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    run.add_output(names[i]);
    lines += nlohmann::json{{"motion", names[i]},
                            {"text", texts[i]},
                            {"tokens", samples[i].codes},
                            {"truncated", samples[i].truncated},
                            {"frames", samples[i].codes.size() * tokenizer.config().downsample}}
                 .dump() +
             "\n";
  }
  run.write_text("generations.jsonl", lines);
  std::cout << run.finish() << "\n";
}

nlohmann::json jerk_json(const mk::metrics::JerkStats& j) {
  return {{"mean", j.mean}, {"p50", j.p50}, {"p90", j.p90}, {"p99", j.p99}, {"max", j.max}, {"samples", j.samples}};
}

// Motion-to-motion retrieval: candidate i should rank reference i first.
// Similarity is the negative Euclidean distance between handcrafted features
// standardized by the reference statistics.
nlohmann::json retrieval(const std::vector<Eigen::VectorXd>& cand, const std::vector<Eigen::VectorXd>& ref,
                         const mk::metrics::FeatureStats& ref_stats, std::size_t batch) {
  const std::size_t n = cand.size();
  if (n < 2) return nullptr;
  const Eigen::VectorXd scale = ref_stats.covariance.diagonal().cwiseSqrt().cwiseMax(1e-8);
  const std::size_t size = std::min(batch, n);
  const std::size_t batches = n / size;
  std::vector<std::size_t> ks{1, 2, 3};
  std::vector<double> totals(ks.size(), 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t col = 0; col < size; ++col)
        s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) =
            -((cand[b * size + r] - ref[b * size + col]).cwiseQuotient(scale)).norm();
    for (std::size_t k = 0; k < ks.size(); ++k) totals[k] += mk::metrics::r_precision(s, std::min(ks[k], size));
  }
  nlohmann::json out{{"batch_size", size}, {"batches", batches}};
  for (std::size_t k = 0; k < ks.size(); ++k) out["R@" + std::to_string(ks[k])] = totals[k] / static_cast<double>(batches);
  return out;
}

void run_eval(const Common& c, const std::string& reference_dir, const std::string& candidate_dir,
              const std::string& tokenizer_path) {
  const PipelineConfig config = resolve(c);
  RunContext run(c.out_dir, "eval", config.to_json(), config.seed);
  run.add_input(reference_dir);
  const auto body = mk::geom::Skeleton::default_body();
  const auto reference = load_motions(reference_dir, body);
  if (reference.empty()) throw Error(ErrorKind::kEmptyInput, "no .motion files in " + reference_dir);
  std::vector<mk::repr::MotionSequence> ref_motions;
  for (const auto& m : reference) ref_motions.push_back(m.motion);

  nlohmann::json report;
  const auto ref_jerk = mk::metrics::jerk_stats(ref_motions, body, config.eval.histogram_bins);
  report["reference"] = {{"clips", reference.size()}, {"jerk", jerk_json(ref_jerk)}};
  run.write_text("reference_jerk_histogram.csv", ref_jerk.histogram.to_csv());

  if (!candidate_dir.empty()) {
    run.add_input(candidate_dir);
    const auto candidate = load_motions(candidate_dir, body);
    if (candidate.empty()) throw Error(ErrorKind::kEmptyInput, "no .motion files in " + candidate_dir);
    std::vector<mk::repr::MotionSequence> cand_motions;
    for (const auto& m : candidate) cand_motions.push_back(m.motion);
    const auto ref_stats = mk::metrics::handcrafted_stats(ref_motions, body);
    const auto cand_stats = mk::metrics::handcrafted_stats(cand_motions, body);
    const auto cand_jerk = mk::metrics::jerk_stats(cand_motions, body, config.eval.histogram_bins);
    run.write_text("candidate_jerk_histogram.csv", cand_jerk.histogram.to_csv());

    std::map<std::string, const mk::repr::MotionSequence*> ref_by_id;
    for (const auto& m : reference) ref_by_id[m.id] = &m.motion;
    double mpjpe = 0.0;
    std::size_t frames = 0;
    std::vector<Eigen::VectorXd> cand_feats, ref_feats;
    for (const auto& m : candidate) {
      const auto it = ref_by_id.find(m.id);
      if (it == ref_by_id.end()) continue;
      cand_feats.push_back(mk::metrics::handcrafted_features(m.motion, body));
      ref_feats.push_back(mk::metrics::handcrafted_features(*it->second, body));
      if (it->second->frame_count() == m.motion.frame_count()) {
        mpjpe += mk::metrics::mpjpe(mk::repr::world_positions(*it->second, body),
                                    mk::repr::world_positions(m.motion, body)) *
                 static_cast<double>(m.motion.frame_count());
        frames += m.motion.frame_count();
      }
    }
    report["candidate"] = {{"clips", candidate.size()}, {"jerk", jerk_json(cand_jerk)}};
    report["fid_handcrafted"] = mk::metrics::frechet_distance(ref_stats, cand_stats);
    report["paired_clips"] = cand_feats.size();
    report["mpjpe_mm"] = frames > 0 ? nlohmann::json(mpjpe / static_cast<double>(frames)) : nlohmann::json(nullptr);
    report["retrieval"] = retrieval(cand_feats, ref_feats, ref_stats, config.eval.retrieval_batch);
  }

  if (!tokenizer_path.empty()) {
    run.add_input(tokenizer_path);
    const auto tokenizer = mk::fsq::TokenizerModel::load(tokenizer_path);
    const auto r = mk::fsq::eval_reconstruction(tokenizer, ref_motions, body);
    report["reconstruction"] = {{"mpjpe_mm", r.mpjpe_mm},
                                {"mean_acceleration", r.mean_acceleration},
                                {"max_acceleration", r.max_acceleration},
                                {"gt_mean_acceleration", r.gt_mean_acceleration},
                                {"gt_max_acceleration", r.gt_max_acceleration},
                                {"mean_acceleration_deviation", std::abs(r.mean_acceleration - r.gt_mean_acceleration)},
                                {"clips", r.clips},
                                {"frames", r.frames}};
  }
  run.write_json("metrics.json", report);
  std::cout << run.finish() << "\n";
}

mk::metrics::Histogram histogram(const std::vector<double>& values, std::size_t bins) {
  mk::metrics::Histogram h;
  h.lo = 0.0;
  h.hi = values.empty() ? 1.0 : std::max(*std::max_element(values.begin(), values.end()), 1e-12);
  h.counts.assign(bins, 0);
  for (double v : values) ++h.counts[std::min(static_cast<std::size_t>(v / h.hi * static_cast<double>(bins)), bins - 1)];
  return h;
}

void run_stats(const Common& c, const std::string& motions_dir) {
  const PipelineConfig config = resolve(c);
  RunContext run(c.out_dir, "stats", config.to_json(), config.seed);
  run.add_input(motions_dir);
  const auto body = mk::geom::Skeleton::default_body();
  const auto motions = load_motions(motions_dir, body);
  if (motions.empty()) throw Error(ErrorKind::kEmptyInput, "no .motion files in " + motions_dir);
  std::vector<mk::repr::MotionSequence> corpus;
  std::vector<double> lengths, speeds;
  for (const auto& m : motions) {
    corpus.push_back(m.motion);
    lengths.push_back(static_cast<double>(m.motion.frame_count()) / m.motion.fps);
    for (std::size_t f = 1; f < m.motion.frame_count(); ++f) {
      speeds.push_back((m.motion.root_translation[f] - m.motion.root_translation[f - 1]).norm() * m.motion.fps);
    }
  }
  const std::size_t bins = config.eval.histogram_bins;
  const auto jerk = mk::metrics::jerk_stats(corpus, body, bins);
  run.write_text("jerk_histogram.csv", jerk.histogram.to_csv());
  run.write_text("length_histogram.csv", histogram(lengths, bins).to_csv());
  run.write_text("root_speed_histogram.csv", histogram(speeds, bins).to_csv());
  double total_seconds = 0.0;
  for (double l : lengths) total_seconds += l;
  run.write_json("stats.json", {{"clips", motions.size()},
                                {"total_seconds", total_seconds},
                                {"jerk", jerk_json(jerk)},
                                {"mean_root_speed", speeds.empty() ? 0.0 : mk::metrics::quantile(speeds, 0.5)}});
  std::cout << run.finish() << "\n";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 1;
    case ErrorKind::kNumerical:
      return 3;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motionkit: motion data curation, tokenization and generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mk::cli::kToolVersion);
  Common common;
  std::string motions, detections, tokenizer, captions, pairs, generator, reference, candidate, texts_file;
  std::vector<std::string> texts;

  auto* synth = app.add_subcommand("synth", "Write a synthetic motion corpus with detections and captions");
  add_common(synth, common);

  auto* curate = app.add_subcommand("curate", "Filter motions against detections and smoothness detectors");
  add_common(curate, common);
  curate->add_option("--motions", motions, "Directory of .motion files")->required()->check(CLI::ExistingDirectory);
  curate->add_option("--detections", detections, "Detection stream (JSON lines)")->required()->check(CLI::ExistingFile);

  auto* train_fsq = app.add_subcommand("train-fsq", "Train the motion tokenizer");
  add_common(train_fsq, common);
  train_fsq->add_option("--motions", motions, "Directory of .motion files")->required()->check(CLI::ExistingDirectory);

  auto* tokenize = app.add_subcommand("tokenize", "Encode motions to tokens");
  add_common(tokenize, common);
  tokenize->add_option("--tokenizer", tokenizer, "Tokenizer checkpoint")->required()->check(CLI::ExistingFile);
  tokenize->add_option("--motions", motions, "Directory of .motion files")->required()->check(CLI::ExistingDirectory);
  tokenize->add_option("--captions", captions, "Captions (JSON lines {clip, text}); writes pairs.jsonl")
      ->check(CLI::ExistingFile);

  auto* train_gen = app.add_subcommand("train-gen", "Train the text-to-motion generator");
  add_common(train_gen, common);
  train_gen->add_option("--pairs", pairs, "Paired corpus (JSON lines {clip, text, tokens})")->required()->check(CLI::ExistingFile);
  train_gen->add_option("--tokenizer", tokenizer, "Tokenizer checkpoint")->required()->check(CLI::ExistingFile);

  auto* generate = app.add_subcommand("generate", "Generate motions from text");
  add_common(generate, common);
  generate->add_option("--generator", generator, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  generate->add_option("--tokenizer", tokenizer, "Tokenizer checkpoint")->required()->check(CLI::ExistingFile);
  generate->add_option("--text", texts, "Prompt (repeatable)");
  generate->add_option("--texts-file", texts_file, "One prompt per line")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Reconstruction and generation metrics");
  add_common(eval, common);
  eval->add_option("--reference", reference, "Reference motions")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--candidate", candidate, "Candidate motions, paired by file name")->check(CLI::ExistingDirectory);
  eval->add_option("--tokenizer", tokenizer, "Tokenizer to evaluate on the reference")->check(CLI::ExistingFile);

  auto* stats = app.add_subcommand("stats", "Jerk, length and speed distributions of a corpus");
  add_common(stats, common);
  stats->add_option("--motions", motions, "Directory of .motion files")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) run_synth(common);
    if (*curate) run_curate(common, motions, detections);
    if (*train_fsq) run_train_fsq(common, motions);
    if (*tokenize) run_tokenize(common, tokenizer, motions, captions);
    if (*train_gen) run_train_gen(common, pairs, tokenizer);
    if (*generate) run_generate(common, generator, tokenizer, texts, texts_file);
    if (*eval) run_eval(common, reference, candidate, tokenizer);
    if (*stats) run_stats(common, motions);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
