#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace motionkit::curation {

/// Expected path length of an unsuccessful binary-search-tree lookup over n
/// points, c(n) = 2 H(n-1) - 2 (n-1) / n. Normalizes isolation depths.
double average_path_length(std::size_t n);

struct IsolationNode {
  int feature = -1;  // -1 marks an external node
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t size = 0;  // points routed here during fitting
  double min = 0.0;      // range of `feature` over those points (internal nodes)
  double max = 0.0;
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // nodes[0] is the root
  int height() const;
};

class IsolationForest {
 public:
  /// Each tree is grown on `subsample_size` points drawn without replacement,
  /// splitting on a random feature at a uniform threshold inside the routed
  /// range, up to height ceil(log2(subsample_size)).
  static IsolationForest fit(const std::vector<std::vector<double>>& samples, std::size_t tree_count,
                             std::size_t subsample_size, std::uint64_t seed);
  /// Convenience for one-dimensional data.
  static IsolationForest fit_scalar(std::span<const double> values, std::size_t tree_count,
                                    std::size_t subsample_size, std::uint64_t seed);

  /// Mean isolation depth over trees, including the c(size) correction at
  /// external nodes.
  double mean_path_length(std::span<const double> sample) const;
  /// 2^(-E[h] / c(subsample_size)), strictly inside (0, 1).
  double score(std::span<const double> sample) const;
  double score(double value) const { return score(std::span<const double>(&value, 1)); }

  std::size_t tree_count() const { return trees_.size(); }
  std::size_t subsample_size() const { return subsample_size_; }
  std::size_t dimensions() const { return dimensions_; }
  int height_limit() const { return height_limit_; }
  const std::vector<IsolationTree>& trees() const { return trees_; }

 private:
  std::vector<IsolationTree> trees_;
  std::size_t subsample_size_ = 0;
  std::size_t dimensions_ = 0;
  int height_limit_ = 0;
};

/// A one-dimensional isolation forest paired with the median of its training
/// values. Only the upper tail counts as anomalous: a frame is flagged when
/// its score exceeds the threshold and its value lies above the median.
struct UpperTailDetector {
  IsolationForest forest;
  double median = 0.0;

  static UpperTailDetector fit(std::span<const double> values, std::size_t tree_count, std::size_t subsample_size,
                               std::uint64_t seed);
  bool is_anomalous(double value, double score_threshold) const {
    return value > median && forest.score(value) > score_threshold;
  }
};

}  // namespace motionkit::curation
