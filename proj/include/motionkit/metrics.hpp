#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "motionkit/repr.hpp"

namespace motionkit::metrics {

/// Mean per-joint Euclidean distance in millimeters (positions in meters).
double mpjpe(const repr::PositionTrack& reference, const repr::PositionTrack& candidate);

struct AccelerationStats {
  double mean = 0.0;
  double max = 0.0;
};

/// Central second differences times fps^2; per frame the mean joint
/// magnitude, then mean and max over frames 1..T-2.
AccelerationStats acceleration_stats(const repr::PositionTrack& positions, double fps);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
  std::string to_csv() const;  // bin_lo,bin_hi,count
};

struct JerkStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
  Histogram histogram;
};

/// Pools the per-frame jerk series of every motion. The histogram spans
/// [0, max] in `bins` equal bins.
JerkStats jerk_stats(const std::vector<repr::MotionSequence>& corpus, const geom::Skeleton& skeleton,
                     std::size_t bins = 50);

/// Linear-interpolated quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // population (divide by n)
};

/// Mean and covariance of row vectors.
FeatureStats feature_stats(const Eigen::MatrixXd& samples);

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The square root is
/// taken as that of S_a^(1/2) S_b S_a^(1/2) (same trace), with both
/// eigendecompositions clamped at 0. Eigenvalues below -1e-6 relative to the
/// largest are rejected.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

/// Fraction of rows whose diagonal entry ranks within the top k of its row.
/// Equal scores rank the lower column index first.
double r_precision(const Eigen::MatrixXd& scores, std::size_t k);

/// Handcrafted clip descriptor: for every joint, mean and standard deviation
/// of its speed and of its acceleration magnitude (4 N values).
Eigen::VectorXd handcrafted_features(const repr::MotionSequence& motion, const geom::Skeleton& skeleton);

FeatureStats handcrafted_stats(const std::vector<repr::MotionSequence>& corpus, const geom::Skeleton& skeleton);

}  // namespace motionkit::metrics
