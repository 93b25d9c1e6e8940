#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "motionkit/common.hpp"

/// Orthogonal discrete wavelet transforms over time series.
///
/// Band layout: `bands[0]` is the coarsest approximation, followed by the
/// detail bands from coarsest to finest: [a_L, d_L, d_{L-1}, ..., d_1].
///
/// Coefficient counts for an input of length n with a filter of length F:
///   symmetric, zero: floor((n + F - 1) / 2)  (full convolution, then keep odd
///                    samples; the extension covers every filter overlap so
///                    reconstruction is exact for any n)
///   periodic:        ceil(n / 2)  (circular convolution; odd n is first
///                    extended by repeating its last sample)
/// A multi-level transform recurses on the approximation band, so its band
/// lengths follow from applying the rule level by level. The inverse needs
/// the per-level input lengths, which are recorded next to the bands.
namespace motionkit::wavelet {

enum class Family { kHaar, kDb2, kDb4 };
enum class Boundary { kSymmetric, kPeriodic, kZero };

std::string to_string(Family family);
std::string to_string(Boundary boundary);
Family parse_family(const std::string& name);
Boundary parse_boundary(const std::string& name);

struct WaveletConfig {
  Family family = Family::kDb2;
  int levels = 1;
  Boundary boundary = Boundary::kSymmetric;
};

struct FilterBank {
  std::vector<double> dec_lo;
  std::vector<double> dec_hi;
  std::size_t length() const { return dec_lo.size(); }
};

const FilterBank& filter_bank(Family family);

/// Number of coefficients per band produced by one analysis step.
std::size_t band_length(std::size_t signal_length, Family family, Boundary boundary);

/// Largest admissible level count for a signal: floor(log2(n)).
int max_levels(std::size_t signal_length);

struct Bands {
  std::vector<std::vector<double>> bands;  // [a_L, d_L, ..., d_1]
  std::vector<std::size_t> level_lengths;  // input length at level 1..L (level 1 = signal length)

  std::size_t signal_length() const { return level_lengths.empty() ? 0 : level_lengths.front(); }
  std::size_t coefficient_count() const;
};

Bands dwt_forward(std::span<const double> signal, const WaveletConfig& config);
std::vector<double> dwt_inverse(const Bands& bands, const WaveletConfig& config);

/// Per-channel transform of a frames x channels matrix. Column c of
/// `coefficients` holds channel c's bands concatenated in the layout above;
/// `band_lengths` is the shared band-length table.
struct MultichannelBands {
  Eigen::MatrixXd coefficients;
  std::vector<std::size_t> band_lengths;
  std::vector<std::size_t> level_lengths;
};

MultichannelBands dwt_multichannel(const Eigen::MatrixXd& frames, const WaveletConfig& config);
Eigen::MatrixXd dwt_multichannel_inverse(const MultichannelBands& bands, const WaveletConfig& config);

}  // namespace motionkit::wavelet
