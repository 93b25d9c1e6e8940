#include "motionkit/curation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace motionkit::curation {

namespace {

void require_valid(const BoundingBox& b, const char* what) {
  if (!b.valid()) {
    std::ostringstream msg;
    msg << what << " box (" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max
        << ") is degenerate";
    throw Error(ErrorKind::kInvalidBox, msg.str());
  }
}

void sort_events(std::vector<SpanEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const SpanEvent& a, const SpanEvent& b) { return a.frame < b.frame; });
}

}  // namespace

double BoundingBox::diagonal() const { return std::hypot(width(), height()); }

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max) &&
         x_min < x_max && y_min < y_max;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  require_valid(a, "first");
  require_valid(b, "second");
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

std::string to_string(Reason reason) {
  switch (reason) {
    case Reason::kNoCandidate: return "no-candidate";
    case Reason::kLowIou: return "low-iou";
    case Reason::kLowConfidence: return "low-confidence";
    case Reason::kCenterJump: return "center-jump";
    case Reason::kOrientationSpike: return "orientation-spike";
    case Reason::kJitter: return "jitter";
    case Reason::kTooShort: return "too-short";
    case Reason::kLengthCap: return "length-cap";
    case Reason::kInconsistentLength: return "inconsistent-length";
  }
  return "unknown";
}

MatchResult match_track_frame(const BoundingBox& tracked, std::span<const BoundingBox> candidates,
                              double iou_threshold, double confidence_threshold) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0 || confidence_threshold < 0.0 || confidence_threshold > 1.0) {
    throw Error(ErrorKind::kOutOfRange, "matching thresholds must lie in [0, 1]");
  }
  MatchResult result;
  if (candidates.empty()) {
    result.reason = Reason::kNoCandidate;
    return result;
  }
  std::optional<std::size_t> best;
  double best_dev = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (iou(tracked, candidates[i]) <= iou_threshold) continue;
    const double dev = std::abs(candidates[i].area() - tracked.area());
    if (!best || dev < best_dev || (dev == best_dev && candidates[i].area() < candidates[*best].area())) {
      best = i;
      best_dev = dev;
    }
  }
  if (!best) {
    result.reason = Reason::kLowIou;
    return result;
  }
  if (!(candidates[*best].confidence > confidence_threshold)) {
    result.reason = Reason::kLowConfidence;
    result.candidate = best;
    return result;
  }
  result.box = candidates[*best];
  result.candidate = best;
  return result;
}

std::vector<ClipSpan> split_on_center_jump(std::span<const BoundingBox> boxes, double jump_threshold, bool relative,
                                           std::size_t min_length) {
  std::vector<ClipSpan> spans;
  if (boxes.empty()) return spans;
  ClipSpan current;
  current.start = 0;
  for (std::size_t f = 1; f < boxes.size(); ++f) {
    const BoundingBox& a = boxes[f - 1];
    const BoundingBox& b = boxes[f];
    const double distance = std::hypot(b.center_x() - a.center_x(), b.center_y() - a.center_y());
    const double limit = relative ? jump_threshold * a.diagonal() : jump_threshold;
    if (distance > limit) {
      current.end = f;
      spans.push_back(current);
      current = ClipSpan{};
      current.start = f;
      current.events.push_back({Reason::kCenterJump, f});
    }
  }
  current.end = boxes.size();
  spans.push_back(current);
  std::erase_if(spans, [&](const ClipSpan& s) { return s.length() < min_length; });
  for (auto& s : spans) s.passed.push_back("center-jump");
  return spans;
}

std::vector<double> orientation_delta_series(const repr::MotionSequence& motion) {
  if (motion.frame_count() < 2) throw Error(ErrorKind::kTooShort, "orientation deltas need at least 2 frames");
  std::vector<double> out(motion.frame_count() - 1);
  for (std::size_t f = 1; f < motion.frame_count(); ++f) {
    out[f - 1] = geom::geodesic_delta(motion.root_orientation[f - 1], motion.root_orientation[f]);
  }
  return out;
}

std::vector<double> jerk_series(const repr::PositionTrack& positions, double fps) {
  if (positions.size() < 4) throw Error(ErrorKind::kTooShort, "jerk needs at least 4 frames");
  if (!(fps > 0.0)) throw Error(ErrorKind::kData, "fps must be positive");
  const double scale = fps * fps * fps;
  const std::size_t joints = positions[0].size();
  std::vector<double> out(positions.size() - 3);
  for (std::size_t k = 0; k + 3 < positions.size(); ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < joints; ++j) {
      const geom::Vec3 d = positions[k + 3][j] - 3.0 * positions[k + 2][j] + 3.0 * positions[k + 1][j] - positions[k][j];
      total += d.norm() * scale;
    }
    out[k] = total / static_cast<double>(joints);
  }
  return out;
}

AnomalyFlags detect_anomalies(const repr::MotionSequence& motion, const geom::Skeleton& skeleton,
                              const UpperTailDetector& orientation, const UpperTailDetector& jerk,
                              double score_threshold) {
  AnomalyFlags flags;
  const std::vector<double> deltas = orientation_delta_series(motion);
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (orientation.is_anomalous(deltas[k], score_threshold)) flags.orientation.push_back(k + 1);
  }
  if (motion.frame_count() >= 4) {
    const std::vector<double> jerks = jerk_series(repr::world_positions(motion, skeleton), motion.fps);
    for (std::size_t k = 0; k < jerks.size(); ++k) {
      if (jerk.is_anomalous(jerks[k], score_threshold)) flags.jitter.push_back(jerk_frame(k));
    }
  }
  return flags;
}

std::vector<ClipSpan> filter_clip(const repr::MotionSequence& motion, const geom::Skeleton& skeleton,
                                  const UpperTailDetector& orientation, const UpperTailDetector& jerk,
                                  const FilterOptions& options, std::vector<SpanEvent>* events) {
  const std::size_t frames = motion.frame_count();
  const AnomalyFlags flags = detect_anomalies(motion, skeleton, orientation, jerk, options.score_threshold);

  std::vector<SpanEvent> local_events;
  std::vector<bool> removed(frames, false);
  std::vector<std::size_t> removal_cause(frames, 0);
  for (std::size_t g : flags.jitter) {
    local_events.push_back({Reason::kJitter, g});
    const std::size_t lo = g >= options.jitter_margin ? g - options.jitter_margin : 0;
    const std::size_t hi = std::min(frames - 1, g + options.jitter_margin);
    for (std::size_t f = lo; f <= hi; ++f) {
      if (!removed[f]) removal_cause[f] = g;
      removed[f] = true;
    }
  }
  std::vector<bool> split_before(frames, false);
  for (std::size_t f : flags.orientation) {
    local_events.push_back({Reason::kOrientationSpike, f});
    split_before[f] = true;
  }

  std::vector<ClipSpan> spans;
  std::optional<ClipSpan> open;
  auto close = [&](std::size_t end, std::optional<SpanEvent> why) {
    if (!open) return;
    open->end = end;
    if (why) open->events.push_back(*why);
    spans.push_back(*open);
    open.reset();
  };
  for (std::size_t f = 0; f < frames; ++f) {
    if (removed[f]) {
      close(f, SpanEvent{Reason::kJitter, removal_cause[f]});
      continue;
    }
    if (split_before[f] && open) close(f, SpanEvent{Reason::kOrientationSpike, f});
    if (!open) {
      open = ClipSpan{};
      open->start = f;
      if (f > 0 && removed[f - 1]) open->events.push_back({Reason::kJitter, removal_cause[f - 1]});
      if (split_before[f]) open->events.push_back({Reason::kOrientationSpike, f});
    }
  }
  close(frames, std::nullopt);

  std::vector<ClipSpan> kept;
  for (auto& s : spans) {
    if (s.length() < options.min_span) {
      local_events.push_back({Reason::kTooShort, s.start});
      continue;
    }
    s.passed.push_back("orientation");
    s.passed.push_back("jitter");
    kept.push_back(std::move(s));
  }
  if (events) {
    sort_events(local_events);
    events->insert(events->end(), local_events.begin(), local_events.end());
  }
  return kept;
}

std::vector<ClipSpan> cap_span_length(const ClipSpan& span, std::size_t max_length) {
  if (max_length == 0) throw Error(ErrorKind::kOutOfRange, "maximum span length must be positive");
  const std::size_t length = span.length();
  if (length <= max_length) return {span};
  const std::size_t pieces = (length + max_length - 1) / max_length;
  const std::size_t base = length / pieces;
  const std::size_t extra = length % pieces;
  std::vector<ClipSpan> out;
  std::size_t at = span.start;
  for (std::size_t i = 0; i < pieces; ++i) {
    ClipSpan piece;
    piece.start = at;
    piece.end = at + base + (i < extra ? 1 : 0);
    piece.passed = span.passed;
    if (i == 0) {
      piece.events = span.events;
    } else {
      piece.events.push_back({Reason::kLengthCap, piece.start});
    }
    at = piece.end;
    out.push_back(std::move(piece));
  }
  return out;
}

repr::MotionSequence slice_motion(const repr::MotionSequence& motion, std::size_t start, std::size_t end) {
  if (start >= end || end > motion.frame_count()) {
    throw Error(ErrorKind::kOutOfRange, "slice [" + std::to_string(start) + ", " + std::to_string(end) +
                                            ") is outside a " + std::to_string(motion.frame_count()) + "-frame motion");
  }
  repr::MotionSequence out;
  out.fps = motion.fps;
  out.shape = motion.shape;
  const auto b = static_cast<std::ptrdiff_t>(start);
  const auto e = static_cast<std::ptrdiff_t>(end);
  out.root_translation.assign(motion.root_translation.begin() + b, motion.root_translation.begin() + e);
  out.root_orientation.assign(motion.root_orientation.begin() + b, motion.root_orientation.begin() + e);
  out.local_rotations.assign(motion.local_rotations.begin() + b, motion.local_rotations.begin() + e);
  return out;
}

CorpusDetectors fit_corpus_detectors(const std::vector<repr::MotionSequence>& corpus, const geom::Skeleton& skeleton,
                                     const CurationConfig& config) {
  std::vector<double> deltas;
  std::vector<double> jerks;
  for (const auto& m : corpus) {
    if (m.frame_count() < 2) continue;
    const auto d = orientation_delta_series(m);
    deltas.insert(deltas.end(), d.begin(), d.end());
    if (m.frame_count() >= 4) {
      const auto j = jerk_series(repr::world_positions(m, skeleton), m.fps);
      jerks.insert(jerks.end(), j.begin(), j.end());
    }
  }
  if (deltas.size() < 2 || jerks.size() < 2) {
    throw Error(ErrorKind::kEmptyInput, "corpus is too small to fit the orientation and jerk detectors");
  }
  CorpusDetectors out;
  out.orientation = UpperTailDetector::fit(deltas, config.tree_count, std::min(config.subsample_size, deltas.size()),
                                           config.seed);
  out.jerk = UpperTailDetector::fit(jerks, config.tree_count, std::min(config.subsample_size, jerks.size()),
                                    config.seed + 1);
  return out;
}

std::size_t ClipVerdict::accepted_frames() const {
  std::size_t total = 0;
  for (const auto& s : spans) total += s.length();
  return total;
}

ClipVerdict curate_clip(const DetectionTrack& track, const repr::MotionSequence& motion,
                        const geom::Skeleton& skeleton, const CorpusDetectors& detectors,
                        const CurationConfig& config) {
  ClipVerdict verdict;
  verdict.clip_id = track.clip_id;
  verdict.frame_count = motion.frame_count();
  if (track.tracked.size() != motion.frame_count() || track.candidates.size() != track.tracked.size()) {
    verdict.skipped = true;
    verdict.events.push_back({Reason::kInconsistentLength, 0});
    return verdict;
  }
  const std::size_t frames = motion.frame_count();

  std::vector<BoundingBox> matched(frames);
  std::vector<bool> ok(frames, false);
  for (std::size_t f = 0; f < frames; ++f) {
    const MatchResult r =
        match_track_frame(track.tracked[f], track.candidates[f], config.iou_threshold, config.confidence_threshold);
    if (r.matched()) {
      matched[f] = *r.box;
      ok[f] = true;
    } else {
      verdict.events.push_back({r.reason, f});
    }
  }

  const FilterOptions filter{config.score_threshold, config.min_span, config.jitter_margin};
  std::size_t f = 0;
  while (f < frames) {
    if (!ok[f]) {
      ++f;
      continue;
    }
    const std::size_t run_start = f;
    while (f < frames && ok[f]) ++f;
    const std::size_t run_end = f;

    const auto run_boxes = std::span<const BoundingBox>(matched).subspan(run_start, run_end - run_start);
    for (ClipSpan jump_span : split_on_center_jump(run_boxes, config.jump_threshold, config.jump_relative, 1)) {
      const std::size_t a = run_start + jump_span.start;
      const std::size_t b = run_start + jump_span.end;
      for (auto& e : jump_span.events) verdict.events.push_back({e.reason, e.frame + run_start});
      if (b - a < std::max<std::size_t>(config.min_span, 2)) {
        verdict.events.push_back({Reason::kTooShort, a});
        continue;
      }
      std::vector<SpanEvent> filter_events;
      const auto sub = slice_motion(motion, a, b);
      const auto filtered = filter_clip(sub, skeleton, detectors.orientation, detectors.jerk, filter, &filter_events);
      for (auto& e : filter_events) verdict.events.push_back({e.reason, e.frame + a});
      for (ClipSpan s : filtered) {
        s.start += a;
        s.end += a;
        for (auto& e : s.events) e.frame += a;
        if (s.start == a) {
          for (auto& e : jump_span.events) s.events.insert(s.events.begin(), {e.reason, e.frame + run_start});
        }
        s.passed.insert(s.passed.begin(), {"detection-match", "confidence", "center-jump"});
        for (ClipSpan piece : cap_span_length(s, config.max_span)) {
          piece.passed.push_back("length-cap");
          if (piece.start != s.start) verdict.events.push_back({Reason::kLengthCap, piece.start});
          verdict.spans.push_back(std::move(piece));
        }
      }
    }
  }
  sort_events(verdict.events);
  return verdict;
}

nlohmann::json to_json(const ClipVerdict& verdict) {
  auto events_json = [](const std::vector<SpanEvent>& events) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : events) arr.push_back({{"reason", to_string(e.reason)}, {"frame", e.frame}});
    return arr;
  };
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : verdict.spans) {
    spans.push_back({{"start", s.start}, {"end", s.end}, {"passed", s.passed}, {"events", events_json(s.events)}});
  }
  return {{"clip", verdict.clip_id},
          {"frames", verdict.frame_count},
          {"skipped", verdict.skipped},
          {"accepted_frames", verdict.accepted_frames()},
          {"spans", spans},
          {"events", events_json(verdict.events)}};
}

namespace {

BoundingBox parse_box(const nlohmann::json& j, double confidence) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::kData, "box must be [x_min, y_min, x_max, y_max]");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), confidence};
  if (!b.valid()) throw Error(ErrorKind::kInvalidBox, "degenerate box");
  return b;
}

nlohmann::json box_json(const BoundingBox& b) { return nlohmann::json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

}  // namespace

std::vector<DetectionTrack> read_detection_stream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<DetectionTrack> tracks;
  std::map<std::string, std::size_t> index;
  std::vector<std::map<std::size_t, std::pair<BoundingBox, std::vector<BoundingBox>>>> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      const auto clip = j.at("clip").get<std::string>();
      const auto frame = j.at("frame").get<std::size_t>();
      BoundingBox tracked = parse_box(j.at("tracked"), j.value("tracked_confidence", 1.0));
      std::vector<BoundingBox> candidates;
      for (const auto& c : j.at("candidates")) {
        const double conf = c.at("confidence").get<double>();
        if (conf < 0.0 || conf > 1.0) throw Error(ErrorKind::kData, "confidence outside [0, 1]");
        candidates.push_back(parse_box(c.at("box"), conf));
      }
      auto [it, inserted] = index.try_emplace(clip, tracks.size());
      if (inserted) {
        tracks.push_back(DetectionTrack{clip, {}, {}});
        frames.emplace_back();
      }
      auto& per_clip = frames[it->second];
      if (!per_clip.try_emplace(frame, tracked, std::move(candidates)).second) {
        throw Error(ErrorKind::kData, "duplicate frame " + std::to_string(frame) + " for clip " + clip);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kData, where + ": malformed detection record: " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.what());
    }
  }
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    std::size_t expected = 0;
    for (auto& [frame, record] : frames[t]) {
      if (frame != expected) {
        throw Error(ErrorKind::kData, path.string() + ": clip " + tracks[t].clip_id + " is missing frame " +
                                          std::to_string(expected));
      }
      tracks[t].tracked.push_back(record.first);
      tracks[t].candidates.push_back(std::move(record.second));
      ++expected;
    }
  }
  return tracks;
}

void write_detection_stream(const std::filesystem::path& path, const std::vector<DetectionTrack>& tracks) {
  std::ostringstream out;
  for (const auto& t : tracks) {
    for (std::size_t f = 0; f < t.frame_count(); ++f) {
      nlohmann::json cands = nlohmann::json::array();
      for (const auto& c : t.candidates[f]) cands.push_back({{"box", box_json(c)}, {"confidence", c.confidence}});
      out << nlohmann::json{{"clip", t.clip_id}, {"frame", f}, {"tracked", box_json(t.tracked[f])}, {"candidates", cands}}
                 .dump()
          << '\n';
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  file << out.str();
}

}  // namespace motionkit::curation
