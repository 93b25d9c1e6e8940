#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "motionkit/isolation_forest.hpp"
#include "motionkit/repr.hpp"

namespace motionkit::curation {

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double confidence = 1.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double diagonal() const;
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool valid() const;
};

double iou(const BoundingBox& a, const BoundingBox& b);

enum class Reason {
  kNoCandidate,
  kLowIou,
  kLowConfidence,
  kCenterJump,
  kOrientationSpike,
  kJitter,
  kTooShort,
  kLengthCap,
  kInconsistentLength,
};

std::string to_string(Reason reason);

struct MatchResult {
  std::optional<BoundingBox> box;  // set on success
  std::optional<std::size_t> candidate;
  Reason reason = Reason::kNoCandidate;  // meaningful only when !matched()
  bool matched() const { return box.has_value(); }
};

/// Among candidates with IoU > iou_threshold, keeps the one whose area is
/// closest to the tracked box (ties go to the smaller box, then the earlier
/// index) and accepts it iff its confidence > confidence_threshold.
MatchResult match_track_frame(const BoundingBox& tracked, std::span<const BoundingBox> candidates,
                              double iou_threshold, double confidence_threshold);

struct SpanEvent {
  Reason reason;
  std::size_t frame;  // frame index in the source clip
  friend bool operator==(const SpanEvent&, const SpanEvent&) = default;
};

/// Half-open frame interval [start, end) of a source clip.
struct ClipSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<std::string> passed;  // filters this span went through
  std::vector<SpanEvent> events;    // splits that bound it

  std::size_t length() const { return end - start; }
};

/// Splits wherever the box center moves farther than the threshold between
/// consecutive frames. With `relative`, the threshold is a multiple of the
/// previous frame's box diagonal. Spans shorter than `min_length` are dropped.
std::vector<ClipSpan> split_on_center_jump(std::span<const BoundingBox> boxes, double jump_threshold, bool relative,
                                           std::size_t min_length);

/// Geodesic angle between consecutive root orientations; length frames - 1.
std::vector<double> orientation_delta_series(const repr::MotionSequence& motion);

/// Mean joint jerk magnitude (m/s^3) from third-order forward differences;
/// entry k covers frames k..k+3. Length frames - 3.
std::vector<double> jerk_series(const repr::PositionTrack& positions, double fps);

struct FilterOptions {
  double score_threshold = 0.6;
  std::size_t min_span = 30;
  std::size_t jitter_margin = 2;
};

/// Frame that a jerk entry is attributed to (k -> k + 2).
inline std::size_t jerk_frame(std::size_t index) { return index + 2; }

/// Per-frame anomaly flags produced by the two detectors.
struct AnomalyFlags {
  std::vector<std::size_t> orientation;  // frames starting after a spike
  std::vector<std::size_t> jitter;       // frames carrying a jerk spike
};

AnomalyFlags detect_anomalies(const repr::MotionSequence& motion, const geom::Skeleton& skeleton,
                              const UpperTailDetector& orientation, const UpperTailDetector& jerk,
                              double score_threshold);

/// Splits at orientation spikes and removes jerk spikes with a margin of
/// `jitter_margin` frames on each side. Surviving spans shorter than
/// `min_span` are dropped. Every split, removal and drop is appended to
/// `events` with frames relative to `motion`.
std::vector<ClipSpan> filter_clip(const repr::MotionSequence& motion, const geom::Skeleton& skeleton,
                                  const UpperTailDetector& orientation, const UpperTailDetector& jerk,
                                  const FilterOptions& options, std::vector<SpanEvent>* events = nullptr);

/// Detector output for one clip, as delivered by the external tracker and
/// detector.
struct DetectionTrack {
  std::string clip_id;
  std::vector<BoundingBox> tracked;
  std::vector<std::vector<BoundingBox>> candidates;

  std::size_t frame_count() const { return tracked.size(); }
};

/// Reads the newline-delimited detection stream. One record per line:
///   {"clip": str, "frame": int, "tracked": [x0,y0,x1,y1],
///    "candidates": [{"box": [x0,y0,x1,y1], "confidence": c}, ...]}
/// Frames of a clip must appear as 0..n-1. Errors carry file:line.
std::vector<DetectionTrack> read_detection_stream(const std::filesystem::path& path);
void write_detection_stream(const std::filesystem::path& path, const std::vector<DetectionTrack>& tracks);

struct CurationConfig {
  double iou_threshold = 0.85;
  double confidence_threshold = 0.85;
  double jump_threshold = 0.5;
  bool jump_relative = true;
  std::size_t tree_count = 100;
  std::size_t subsample_size = 256;
  double score_threshold = 0.6;
  std::size_t min_span = 30;
  std::size_t max_span = 200;
  std::size_t jitter_margin = 2;
  double target_fps = 30.0;
  std::uint64_t seed = 0;
};

struct CorpusDetectors {
  UpperTailDetector orientation;
  UpperTailDetector jerk;
};

/// Fits both detectors on the pooled per-frame metrics of every clip.
/// The subsample size is clamped to the number of pooled values.
CorpusDetectors fit_corpus_detectors(const std::vector<repr::MotionSequence>& corpus, const geom::Skeleton& skeleton,
                                     const CurationConfig& config);

struct ClipVerdict {
  std::string clip_id;
  std::size_t frame_count = 0;
  std::vector<ClipSpan> spans;
  std::vector<SpanEvent> events;  // every rejection or split, in frame order
  bool skipped = false;           // inconsistent inputs; nothing accepted

  std::size_t accepted_frames() const;
};

/// Full per-clip pass: detection matching and confidence gating, center-jump
/// splitting, orientation/jitter filtering, then equal splitting of spans
/// longer than max_span.
ClipVerdict curate_clip(const DetectionTrack& track, const repr::MotionSequence& motion,
                        const geom::Skeleton& skeleton, const CorpusDetectors& detectors,
                        const CurationConfig& config);

/// Splits a span longer than max_length into ceil(len / max_length) nearly
/// equal pieces.
std::vector<ClipSpan> cap_span_length(const ClipSpan& span, std::size_t max_length);

repr::MotionSequence slice_motion(const repr::MotionSequence& motion, std::size_t start, std::size_t end);

nlohmann::json to_json(const ClipVerdict& verdict);

}  // namespace motionkit::curation
