#include "motionkit/isolation_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "motionkit/common.hpp"

namespace motionkit::curation {

namespace {

constexpr double kEulerGamma = 0.5772156649015329;

struct Builder {
  const std::vector<std::vector<double>>& samples;
  std::size_t dims;
  int height_limit;
  Rng& rng;
  IsolationTree tree;

  int grow(std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[static_cast<std::size_t>(id)].size = end - begin;
    if (depth >= height_limit || end - begin <= 1) return id;

    // Pick a random feature that still has spread; give up after trying all.
    std::vector<std::size_t> features(dims);
    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t remaining = dims; remaining > 0; --remaining) {
      const std::size_t pick = rng.below(remaining);
      const std::size_t feature = features[pick];
      std::swap(features[pick], features[remaining - 1]);
      double lo = samples[idx[begin]][feature];
      double hi = lo;
      for (std::size_t i = begin; i < end; ++i) {
        lo = std::min(lo, samples[idx[i]][feature]);
        hi = std::max(hi, samples[idx[i]][feature]);
      }
      if (!(hi > lo)) continue;
      double threshold = rng.uniform(lo, hi);
      if (threshold <= lo) threshold = 0.5 * (lo + hi);
      const auto mid = static_cast<std::size_t>(
          std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin), idx.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](std::size_t i) { return samples[i][feature] < threshold; }) -
          idx.begin());
      IsolationNode& node = tree.nodes[static_cast<std::size_t>(id)];
      node.feature = static_cast<int>(feature);
      node.threshold = threshold;
      node.min = lo;
      node.max = hi;
      const int left = grow(idx, begin, mid, depth + 1);
      const int right = grow(idx, mid, end, depth + 1);
      tree.nodes[static_cast<std::size_t>(id)].left = left;
      tree.nodes[static_cast<std::size_t>(id)].right = right;
      return id;
    }
    return id;
  }
};

int subtree_height(const IsolationTree& tree, int id) {
  const IsolationNode& n = tree.nodes[static_cast<std::size_t>(id)];
  if (n.feature < 0) return 0;
  return 1 + std::max(subtree_height(tree, n.left), subtree_height(tree, n.right));
}

}  // namespace

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n - 1);
  return 2.0 * (std::log(m) + kEulerGamma) - 2.0 * m / static_cast<double>(n);
}

int IsolationTree::height() const { return nodes.empty() ? 0 : subtree_height(*this, 0); }

IsolationForest IsolationForest::fit(const std::vector<std::vector<double>>& samples, std::size_t tree_count,
                                     std::size_t subsample_size, std::uint64_t seed) {
  if (samples.size() < 2) throw Error(ErrorKind::kEmptyInput, "isolation forest needs at least 2 samples");
  if (subsample_size < 2) throw Error(ErrorKind::kOutOfRange, "subsample size must be at least 2");
  if (subsample_size > samples.size()) {
    throw Error(ErrorKind::kOutOfRange, "subsample size " + std::to_string(subsample_size) + " exceeds the " +
                                            std::to_string(samples.size()) + " available samples");
  }
  if (tree_count == 0) throw Error(ErrorKind::kOutOfRange, "tree count must be positive");
  const std::size_t dims = samples[0].size();
  if (dims == 0) throw Error(ErrorKind::kShape, "samples have no features");
  for (const auto& s : samples) {
    if (s.size() != dims) throw Error(ErrorKind::kShape, "samples differ in dimension");
    for (double v : s)
      if (!std::isfinite(v)) throw Error(ErrorKind::kData, "non-finite sample value");
  }

  IsolationForest forest;
  forest.subsample_size_ = subsample_size;
  forest.dimensions_ = dims;
  forest.height_limit_ = static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample_size))));
  Rng rng(seed);
  std::vector<std::size_t> all(samples.size());
  for (std::size_t t = 0; t < tree_count; ++t) {
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `subsample_size` entries become the draw.
    for (std::size_t i = 0; i < subsample_size; ++i) {
      std::swap(all[i], all[i + rng.below(all.size() - i)]);
    }
    std::vector<std::size_t> idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(subsample_size));
    Builder builder{samples, dims, forest.height_limit_, rng, {}};
    builder.grow(idx, 0, idx.size(), 0);
    forest.trees_.push_back(std::move(builder.tree));
  }
  return forest;
}

IsolationForest IsolationForest::fit_scalar(std::span<const double> values, std::size_t tree_count,
                                            std::size_t subsample_size, std::uint64_t seed) {
  std::vector<std::vector<double>> samples;
  samples.reserve(values.size());
  for (double v : values) samples.push_back({v});
  return fit(samples, tree_count, subsample_size, seed);
}

double IsolationForest::mean_path_length(std::span<const double> sample) const {
  if (sample.size() != dimensions_) throw Error(ErrorKind::kShape, "sample dimension does not match the forest");
  double total = 0.0;
  for (const auto& tree : trees_) {
    int id = 0;
    int depth = 0;
    while (tree.nodes[static_cast<std::size_t>(id)].feature >= 0) {
      const IsolationNode& n = tree.nodes[static_cast<std::size_t>(id)];
      id = sample[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
      ++depth;
    }
    total += depth + average_path_length(tree.nodes[static_cast<std::size_t>(id)].size);
  }
  return total / static_cast<double>(trees_.size());
}

double IsolationForest::score(std::span<const double> sample) const {
  return std::exp2(-mean_path_length(sample) / average_path_length(subsample_size_));
}

UpperTailDetector UpperTailDetector::fit(std::span<const double> values, std::size_t tree_count,
                                         std::size_t subsample_size, std::uint64_t seed) {
  UpperTailDetector d;
  d.forest = IsolationForest::fit_scalar(values, tree_count, subsample_size, seed);
  std::vector<double> sorted(values.begin(), values.end());
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  d.median = *mid;
  return d;
}

}  // namespace motionkit::curation
