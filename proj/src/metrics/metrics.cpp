#include "motionkit/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "motionkit/curation.hpp"

namespace motionkit::metrics {

namespace {

void require_same_shape(const repr::PositionTrack& a, const repr::PositionTrack& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kShape, "position tracks differ in length: " + std::to_string(a.size()) + " vs " +
                                       std::to_string(b.size()));
  }
  for (std::size_t f = 0; f < a.size(); ++f) {
    if (a[f].size() != b[f].size()) {
      throw Error(ErrorKind::kShape, "frame " + std::to_string(f) + " has " + std::to_string(a[f].size()) + " vs " +
                                         std::to_string(b[f].size()) + " joints");
    }
  }
}

// Symmetric square root with eigenvalues clamped at 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (m + m.transpose()));
  Eigen::VectorXd values = solver.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  if (values.minCoeff() < -1e-6 * scale) {
    throw Error(ErrorKind::kNumerical,
                std::string(what) + " is not positive semidefinite (eigenvalue " + std::to_string(values.minCoeff()) + ")");
  }
  values = values.cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * values.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

double mpjpe(const repr::PositionTrack& reference, const repr::PositionTrack& candidate) {
  require_same_shape(reference, candidate);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < reference.size(); ++f) {
    for (std::size_t j = 0; j < reference[f].size(); ++j) {
      total += (reference[f][j] - candidate[f][j]).norm();
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorKind::kEmptyInput, "mpjpe of empty tracks");
  return 1000.0 * total / static_cast<double>(count);
}

AccelerationStats acceleration_stats(const repr::PositionTrack& positions, double fps) {
  if (positions.size() < 3) throw Error(ErrorKind::kTooShort, "acceleration needs at least 3 frames");
  const double scale = fps * fps;
  AccelerationStats out;
  for (std::size_t f = 1; f + 1 < positions.size(); ++f) {
    double frame = 0.0;
    for (std::size_t j = 0; j < positions[f].size(); ++j) {
      frame += (positions[f + 1][j] - 2.0 * positions[f][j] + positions[f - 1][j]).norm() * scale;
    }
    frame /= static_cast<double>(positions[f].size());
    out.mean += frame;
    out.max = std::max(out.max, frame);
  }
  out.mean /= static_cast<double>(positions.size() - 2);
  return out;
}

std::string Histogram::to_csv() const {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  const double width = counts.empty() ? 0.0 : (hi - lo) / static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out << lo + width * static_cast<double>(i) << ',' << lo + width * static_cast<double>(i + 1) << ',' << counts[i]
        << '\n';
  }
  return out.str();
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "quantile of nothing");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

JerkStats jerk_stats(const std::vector<repr::MotionSequence>& corpus, const geom::Skeleton& skeleton,
                     std::size_t bins) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyInput, "jerk statistics of an empty corpus");
  if (bins == 0) throw Error(ErrorKind::kOutOfRange, "histogram needs at least one bin");
  std::vector<double> pooled;
  for (const auto& m : corpus) {
    const auto series = curation::jerk_series(repr::world_positions(m, skeleton), m.fps);
    pooled.insert(pooled.end(), series.begin(), series.end());
  }
  JerkStats out;
  out.samples = pooled.size();
  for (double v : pooled) out.mean += v;
  out.mean /= static_cast<double>(pooled.size());
  out.p50 = quantile(pooled, 0.5);
  out.p90 = quantile(pooled, 0.9);
  out.p99 = quantile(pooled, 0.99);
  out.max = *std::max_element(pooled.begin(), pooled.end());
  out.histogram.lo = 0.0;
  out.histogram.hi = out.max > 0.0 ? out.max : 1.0;
  out.histogram.counts.assign(bins, 0);
  for (double v : pooled) {
    auto bin = static_cast<std::size_t>(v / out.histogram.hi * static_cast<double>(bins));
    ++out.histogram.counts[std::min(bin, bins - 1)];
  }
  return out;
}

FeatureStats feature_stats(const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0) throw Error(ErrorKind::kEmptyInput, "feature statistics of no samples");
  FeatureStats out;
  out.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();
  out.covariance = centered.transpose() * centered / static_cast<double>(samples.rows());
  return out;
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows() ||
      a.covariance.rows() != a.mean.size()) {
    throw Error(ErrorKind::kShape, "feature statistics differ in dimension: " + std::to_string(a.mean.size()) +
                                       " vs " + std::to_string(b.mean.size()));
  }
  const Eigen::MatrixXd root_a = psd_sqrt(a.covariance, "first covariance");
  psd_sqrt(b.covariance, "second covariance");
  const Eigen::MatrixXd inner = root_a * b.covariance * root_a;
  const double cross = psd_sqrt(inner, "covariance product").trace();
  const double d = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
  return std::max(d, 0.0);
}

double r_precision(const Eigen::MatrixXd& scores, std::size_t k) {
  const auto n = static_cast<std::size_t>(scores.rows());
  if (scores.rows() != scores.cols() || n == 0) throw Error(ErrorKind::kShape, "similarity matrix must be square");
  if (k < 1 || k > n) throw Error(ErrorKind::kOutOfRange, "k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double own = scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const double s = scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (s > own || (s == own && c < r)) ++ahead;
    }
    if (ahead < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

Eigen::VectorXd handcrafted_features(const repr::MotionSequence& motion, const geom::Skeleton& skeleton) {
  if (motion.frame_count() < 3) throw Error(ErrorKind::kTooShort, "handcrafted features need at least 3 frames");
  const auto pos = repr::world_positions(motion, skeleton);
  const std::size_t joints = skeleton.joint_count();
  Eigen::VectorXd out(4 * static_cast<Eigen::Index>(joints));
  for (std::size_t j = 0; j < joints; ++j) {
    std::vector<double> speed, accel;
    for (std::size_t f = 1; f < pos.size(); ++f) speed.push_back((pos[f][j] - pos[f - 1][j]).norm() * motion.fps);
    for (std::size_t f = 1; f + 1 < pos.size(); ++f) {
      accel.push_back((pos[f + 1][j] - 2.0 * pos[f][j] + pos[f - 1][j]).norm() * motion.fps * motion.fps);
    }
    auto moments = [](const std::vector<double>& v) {
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      return std::pair{m, std::sqrt(s / static_cast<double>(v.size()))};
    };
    const auto [sm, ss] = moments(speed);
    const auto [am, as] = moments(accel);
    const auto base = 4 * static_cast<Eigen::Index>(j);
    out(base) = sm;
    out(base + 1) = ss;
    out(base + 2) = am;
    out(base + 3) = as;
  }
  return out;
}

FeatureStats handcrafted_stats(const std::vector<repr::MotionSequence>& corpus, const geom::Skeleton& skeleton) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyInput, "feature statistics of an empty corpus");
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(corpus.size()), 4 * static_cast<Eigen::Index>(skeleton.joint_count()));
  for (std::size_t i = 0; i < corpus.size(); ++i) samples.row(static_cast<Eigen::Index>(i)) = handcrafted_features(corpus[i], skeleton);
  return feature_stats(samples);
}

}  // namespace motionkit::metrics
