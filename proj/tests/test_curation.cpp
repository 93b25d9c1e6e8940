#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "motionkit/curation.hpp"
#include "motionkit/synth.hpp"

using namespace motionkit;
using namespace motionkit::curation;

namespace {

BoundingBox box(double x0, double y0, double x1, double y1, double conf = 1.0) { return {x0, y0, x1, y1, conf}; }

repr::MotionSequence still_motion(const geom::Skeleton& skel, std::size_t frames) {
  repr::MotionSequence m;
  m.fps = 30.0;
  for (std::size_t f = 0; f < frames; ++f) {
    m.root_translation.emplace_back(0.0, 0.9, 0.0);
    m.root_orientation.push_back(geom::RotationMatrix::Identity());
    m.local_rotations.emplace_back(skel.joint_count(), geom::RotationMatrix::Identity());
  }
  return m;
}

std::vector<repr::MotionSequence> clean_corpus(const geom::Skeleton& skel, std::size_t clips, std::uint64_t seed) {
  Rng rng(seed);
  synth::MotionParams p;
  p.frames = 150;
  std::vector<repr::MotionSequence> out;
  for (std::size_t i = 0; i < clips; ++i) out.push_back(synth::random_motion(skel, p, rng));
  return out;
}

}  // namespace

TEST_CASE("iou reference values") {
  CHECK(iou(box(0, 0, 2, 2), box(0, 0, 2, 2)) == doctest::Approx(1.0));
  CHECK(iou(box(0, 0, 1, 1), box(2, 2, 3, 3)) == 0.0);
  CHECK(iou(box(0, 0, 1, 1), box(1, 0, 2, 1)) == 0.0);
  CHECK(iou(box(0, 0, 2, 2), box(1, 1, 3, 3)) == doctest::Approx(1.0 / 7.0));
  CHECK_THROWS_AS(iou(box(0, 0, 0, 1), box(0, 0, 1, 1)), Error);
}

TEST_CASE("matching accepts only above both thresholds") {
  const BoundingBox tracked = box(0, 0, 10, 10);
  std::vector<BoundingBox> cands{box(0, 0, 10, 9.9, 0.9)};
  CHECK(match_track_frame(tracked, cands, 0.85, 0.85).matched());

  cands = {box(0, 0, 10, 9.9, 0.85)};
  auto r = match_track_frame(tracked, cands, 0.85, 0.85);
  CHECK_FALSE(r.matched());
  CHECK(r.reason == Reason::kLowConfidence);

  cands = {box(0, 0, 10, 8.5, 0.99)};  // IoU exactly 0.85
  r = match_track_frame(tracked, cands, 0.85, 0.85);
  CHECK(r.reason == Reason::kLowIou);

  r = match_track_frame(tracked, {}, 0.85, 0.85);
  CHECK(r.reason == Reason::kNoCandidate);
}

TEST_CASE("matching picks the closest area among overlapping candidates") {
  const BoundingBox tracked = box(0, 0, 10, 10);
  std::vector<BoundingBox> cands{box(0, 0, 10, 9.0, 0.99), box(0, 0, 10, 9.8, 0.99), box(0, 0, 10.5, 10, 0.99)};
  auto r = match_track_frame(tracked, cands, 0.85, 0.85);
  REQUIRE(r.matched());
  CHECK(*r.candidate == 1);

  // equal deviation (area 98 and 102): the smaller one wins
  cands = {box(0, 0, 10.2, 10, 0.99), box(0, 0, 10, 9.8, 0.99)};
  r = match_track_frame(tracked, cands, 0.85, 0.85);
  REQUIRE(r.matched());
  CHECK(*r.candidate == 1);
}

TEST_CASE("center jump splitting") {
  std::vector<BoundingBox> boxes;
  for (int f = 0; f < 10; ++f) boxes.push_back(box(f * 0.1, 0, 10 + f * 0.1, 10));
  CHECK(split_on_center_jump(boxes, 0.5, true, 1).size() == 1);

  for (int f = 5; f < 10; ++f) boxes[f] = box(100, 100, 110, 110);
  const auto spans = split_on_center_jump(boxes, 0.5, true, 1);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].start == 0);
  CHECK(spans[0].end == 5);
  CHECK(spans[1].start == 5);
  REQUIRE(spans[1].events.size() == 1);
  CHECK(spans[1].events[0] == SpanEvent{Reason::kCenterJump, 5});

  CHECK(split_on_center_jump(boxes, 0.5, true, 6).empty());
}

TEST_CASE("orientation delta series") {
  const auto body = geom::Skeleton::default_body();
  auto m = still_motion(body, 8);
  for (double d : orientation_delta_series(m)) CHECK(d == doctest::Approx(0.0).epsilon(1e-12));

  for (std::size_t f = 0; f < 8; ++f) m.root_orientation[f] = geom::rot_y(0.1 * static_cast<double>(f));
  for (double d : orientation_delta_series(m)) CHECK(d == doctest::Approx(0.1));

  auto flip = still_motion(body, 8);
  synth::plant_orientation_flip(flip, 4);
  const auto deltas = orientation_delta_series(flip);
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    CHECK(deltas[k] == doctest::Approx(k == 3 ? std::numbers::pi : 0.0).epsilon(1e-9));
  }
}

TEST_CASE("jerk series") {
  auto track = [](auto fn, std::size_t frames) {
    repr::PositionTrack t(frames, std::vector<geom::Vec3>(2));
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t j = 0; j < 2; ++j) t[f][j] = fn(static_cast<double>(f));
    return t;
  };
  for (double v : jerk_series(track([](double t) { return geom::Vec3(2 * t, 1, -t); }, 10), 30.0)) {
    CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  }
  for (double v : jerk_series(track([](double t) { return geom::Vec3(t * t * t, 0, 0); }, 10), 1.0)) {
    CHECK(v == doctest::Approx(6.0));
  }
  // third derivative of A sin(w t) has amplitude A w^3
  const double fps = 240.0, w = 2.0, amp = 0.3;
  const auto jerks = jerk_series(track([&](double f) { return geom::Vec3(amp * std::sin(w * f / fps), 0, 0); }, 2000), fps);
  CHECK(*std::max_element(jerks.begin(), jerks.end()) == doctest::Approx(amp * w * w * w).epsilon(1e-2));
  CHECK_THROWS_AS(jerk_series(track([](double) { return geom::Vec3::Zero(); }, 3), 30.0), Error);
}

TEST_CASE("average path length") {
  CHECK(average_path_length(0) == 0.0);
  CHECK(average_path_length(1) == 0.0);
  CHECK(average_path_length(2) == doctest::Approx(1.0));
  // c(256) = 2 (ln 255 + gamma) - 2 * 255 / 256
  const double expected = 2.0 * (std::log(255.0) + 0.5772156649015329) - 2.0 * 255.0 / 256.0;
  CHECK(average_path_length(256) == doctest::Approx(expected));
}

TEST_CASE("isolation forest ranks an outlier highest") {
  Rng rng(3);
  std::vector<double> values;
  for (int i = 0; i < 1000; ++i) values.push_back(rng.normal());
  values.push_back(12.0);
  const auto forest = IsolationForest::fit_scalar(values, 100, 256, 9);
  CHECK(forest.height_limit() == 8);
  for (const auto& t : forest.trees()) CHECK(t.height() <= 8);
  const double outlier = forest.score(12.0);
  CHECK(outlier > 0.6);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) CHECK(forest.score(values[i]) < outlier);
}

TEST_CASE("isolation forest scores uniform data near one half") {
  Rng rng(4);
  std::vector<double> values;
  for (int i = 0; i < 2000; ++i) values.push_back(rng.uniform());
  const auto forest = IsolationForest::fit_scalar(values, 100, 256, 1);
  std::vector<double> scores;
  for (double v : values) scores.push_back(forest.score(v));
  std::nth_element(scores.begin(), scores.begin() + scores.size() / 2, scores.end());
  CHECK(scores[scores.size() / 2] == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("isolation forest is deterministic and keeps thresholds in range") {
  Rng rng(5);
  std::vector<std::vector<double>> samples;
  for (int i = 0; i < 300; ++i) samples.push_back({rng.normal(), rng.uniform(-2, 2)});
  const auto a = IsolationForest::fit(samples, 20, 128, 77);
  const auto b = IsolationForest::fit(samples, 20, 128, 77);
  for (const auto& s : samples) CHECK(a.score(s) == b.score(s));
  for (const auto& t : a.trees()) {
    for (const auto& n : t.nodes) {
      if (n.feature < 0) continue;
      CHECK(n.threshold >= n.min);
      CHECK(n.threshold <= n.max);
    }
  }
  CHECK_THROWS_AS(IsolationForest::fit(samples, 10, 301, 0), Error);
  CHECK_THROWS_AS(IsolationForest::fit({{1.0}}, 10, 1, 0), Error);
}

TEST_CASE("upper-tail detector ignores low values") {
  std::vector<double> values;
  Rng rng(6);
  for (int i = 0; i < 500; ++i) values.push_back(1.0 + 0.01 * rng.normal());
  const auto det = UpperTailDetector::fit(values, 50, 256, 2);
  CHECK(det.is_anomalous(5.0, 0.6));
  CHECK_FALSE(det.is_anomalous(-5.0, 0.6));
  CHECK_FALSE(det.is_anomalous(1.0, 0.6));
}

TEST_CASE("filter_clip on clean, flipped and jittered motion") {
  const auto body = geom::Skeleton::default_body();
  CurationConfig config;
  config.seed = 11;
  const auto corpus = clean_corpus(body, 12, 21);
  const auto det = fit_corpus_detectors(corpus, body, config);
  const FilterOptions options;

  Rng rng(99);
  synth::MotionParams p;
  p.frames = 150;
  const auto clean = synth::random_motion(body, p, rng);
  auto spans = filter_clip(clean, body, det.orientation, det.jerk, options);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].start == 0);
  CHECK(spans[0].end == 150);

  auto flipped = clean;
  synth::plant_orientation_flip(flipped, 70);
  std::vector<SpanEvent> events;
  spans = filter_clip(flipped, body, det.orientation, det.jerk, options, &events);
  // turning the root also moves every joint, so the jerk detector removes the
  // frames around the flip as well
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].end <= 70);
  CHECK(spans[1].start >= 70);
  CHECK(std::count(events.begin(), events.end(), SpanEvent{Reason::kOrientationSpike, 70}) == 1);

  auto jittered = clean;
  synth::plant_jitter(jittered, 60, 3, 0.5, rng);
  spans = filter_clip(jittered, body, det.orientation, det.jerk, options);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].end <= 60);
  CHECK(spans[1].start >= 63);

  FilterOptions lenient = options;
  lenient.score_threshold = 1.0;
  spans = filter_clip(jittered, body, det.orientation, det.jerk, lenient);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].length() == 150);
}

TEST_CASE("length cap splits into equal pieces") {
  ClipSpan s;
  s.start = 10;
  s.end = 460;
  const auto pieces = cap_span_length(s, 200);
  REQUIRE(pieces.size() == 3);
  for (const auto& p : pieces) CHECK(p.length() == 150);
  CHECK(pieces[2].end == 460);
  CHECK(cap_span_length(s, 450).size() == 1);

  s.end = s.start + 401;
  const auto uneven = cap_span_length(s, 200);
  REQUIRE(uneven.size() == 3);
  CHECK(uneven[0].length() == 134);
  CHECK(uneven[2].length() == 133);
}

TEST_CASE("curate_clip records rejected frames") {
  const auto body = geom::Skeleton::default_body();
  CurationConfig config;
  config.score_threshold = 1.0;
  const auto corpus = clean_corpus(body, 8, 5);
  const auto det = fit_corpus_detectors(corpus, body, config);
  const auto& motion = corpus[0];

  DetectionTrack track;
  track.clip_id = "c0";
  for (std::size_t f = 0; f < motion.frame_count(); ++f) {
    track.tracked.push_back(box(0, 0, 10, 20));
    track.candidates.push_back({box(0, 0, 10, 20, 0.95)});
  }
  track.candidates[75] = {box(0, 0, 10, 20, 0.5)};
  const auto verdict = curate_clip(track, motion, body, det, config);
  REQUIRE(verdict.spans.size() == 2);
  CHECK(verdict.spans[0].end == 75);
  CHECK(verdict.spans[1].start == 76);
  CHECK(std::count(verdict.events.begin(), verdict.events.end(), SpanEvent{Reason::kLowConfidence, 75}) == 1);

  const auto j = to_json(verdict);
  CHECK(j["accepted_frames"] == 149);

  track.tracked.pop_back();
  CHECK(curate_clip(track, motion, body, det, config).skipped);
}

TEST_CASE("detection stream round trip and errors") {
  const auto dir = std::filesystem::temp_directory_path() / "motionkit_test_curation";
  std::filesystem::create_directories(dir);
  DetectionTrack t{"clip-a", {box(0, 0, 1, 1), box(1, 1, 2, 2)}, {{box(0, 0, 1, 1, 0.9)}, {}}};
  write_detection_stream(dir / "d.jsonl", {t});
  const auto back = read_detection_stream(dir / "d.jsonl");
  REQUIRE(back.size() == 1);
  CHECK(back[0].clip_id == "clip-a");
  CHECK(back[0].frame_count() == 2);
  CHECK(back[0].candidates[0][0].confidence == doctest::Approx(0.9));
  CHECK(back[0].candidates[1].empty());

  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"clip":"x","frame":0,"tracked":[0,0,1,1],"candidates":[]})" << '\n';
    out << R"({"clip":"x","frame":2,"tracked":[0,0,1,1],"candidates":[]})" << '\n';
  }
  CHECK_THROWS_WITH_AS(read_detection_stream(dir / "bad.jsonl"), doctest::Contains("missing frame 1"), Error);
  {
    std::ofstream out(dir / "bad2.jsonl");
    out << R"({"clip":"x","frame":0,"tracked":[0,0,1],"candidates":[]})" << '\n';
  }
  CHECK_THROWS_WITH_AS(read_detection_stream(dir / "bad2.jsonl"), doctest::Contains("bad2.jsonl:1"), Error);
  std::filesystem::remove_all(dir);
}
