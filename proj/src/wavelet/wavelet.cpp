#include "motionkit/wavelet.hpp"

#include <cmath>

namespace motionkit::wavelet {

namespace {

FilterBank make_bank(std::vector<double> dec_lo) {
  FilterBank bank;
  const std::size_t f = dec_lo.size();
  bank.dec_hi.resize(f);
  for (std::size_t j = 0; j < f; ++j) {
    const double sign = (j % 2 == 0) ? -1.0 : 1.0;
    bank.dec_hi[j] = sign * dec_lo[f - 1 - j];
  }
  bank.dec_lo = std::move(dec_lo);
  return bank;
}

// Half-sample symmetric reflection: x[-1] = x[0], x[n] = x[n-1], repeated as
// often as the index requires.
double extended(std::span<const double> x, long m, Boundary boundary) {
  const long n = static_cast<long>(x.size());
  if (m >= 0 && m < n) return x[static_cast<std::size_t>(m)];
  if (boundary == Boundary::kZero) return 0.0;
  const long period = 2 * n;
  long r = m % period;
  if (r < 0) r += period;
  return x[static_cast<std::size_t>(r < n ? r : period - 1 - r)];
}

void analyze(std::span<const double> x, const FilterBank& bank, Boundary boundary, std::vector<double>& approx,
             std::vector<double>& detail) {
  const std::size_t f = bank.length();
  if (boundary == Boundary::kPeriodic) {
    std::vector<double> even(x.begin(), x.end());
    if (even.size() % 2 == 1) even.push_back(even.back());
    const long n = static_cast<long>(even.size());
    const std::size_t k_count = even.size() / 2;
    approx.assign(k_count, 0.0);
    detail.assign(k_count, 0.0);
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t j = 0; j < f; ++j) {
        long m = (2 * static_cast<long>(k) + 1 - static_cast<long>(j)) % n;
        if (m < 0) m += n;
        approx[k] += bank.dec_lo[j] * even[static_cast<std::size_t>(m)];
        detail[k] += bank.dec_hi[j] * even[static_cast<std::size_t>(m)];
      }
    }
    return;
  }
  const std::size_t k_count = (x.size() + f - 1) / 2;
  approx.assign(k_count, 0.0);
  detail.assign(k_count, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t j = 0; j < f; ++j) {
      const double v = extended(x, 2 * static_cast<long>(k) + 1 - static_cast<long>(j), boundary);
      approx[k] += bank.dec_lo[j] * v;
      detail[k] += bank.dec_hi[j] * v;
    }
  }
}

// Transpose of `analyze`; exact because the analysis rows are orthonormal.
std::vector<double> synthesize(std::span<const double> approx, std::span<const double> detail, std::size_t length,
                               const FilterBank& bank, Boundary boundary) {
  const long f = static_cast<long>(bank.length());
  const long k_count = static_cast<long>(approx.size());
  if (boundary == Boundary::kPeriodic) {
    const long n = static_cast<long>(length + (length % 2));
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (long k = 0; k < k_count; ++k) {
      for (long j = 0; j < f; ++j) {
        long m = (2 * k + 1 - j) % n;
        if (m < 0) m += n;
        out[static_cast<std::size_t>(m)] += bank.dec_lo[static_cast<std::size_t>(j)] * approx[static_cast<std::size_t>(k)] +
                                            bank.dec_hi[static_cast<std::size_t>(j)] * detail[static_cast<std::size_t>(k)];
      }
    }
    out.resize(length);
    return out;
  }
  std::vector<double> out(length, 0.0);
  for (long m = 0; m < static_cast<long>(length); ++m) {
    double acc = 0.0;
    // 0 <= 2k + 1 - m < f
    const long k_lo = std::max(0L, (m - 1 + 1) / 2);
    const long k_hi = std::min(k_count - 1, (m + f - 2) / 2);
    for (long k = k_lo; k <= k_hi; ++k) {
      const long j = 2 * k + 1 - m;
      if (j < 0 || j >= f) continue;
      acc += bank.dec_lo[static_cast<std::size_t>(j)] * approx[static_cast<std::size_t>(k)] +
             bank.dec_hi[static_cast<std::size_t>(j)] * detail[static_cast<std::size_t>(k)];
    }
    out[static_cast<std::size_t>(m)] = acc;
  }
  return out;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::kHaar: return "haar";
    case Family::kDb2: return "db2";
    case Family::kDb4: return "db4";
  }
  return "?";
}

std::string to_string(Boundary boundary) {
  switch (boundary) {
    case Boundary::kSymmetric: return "symmetric";
    case Boundary::kPeriodic: return "periodic";
    case Boundary::kZero: return "zero";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  if (name == "haar") return Family::kHaar;
  if (name == "db2") return Family::kDb2;
  if (name == "db4") return Family::kDb4;
  throw Error(ErrorKind::kConfig, "unknown wavelet family '" + name + "' (expected haar, db2 or db4)");
}

Boundary parse_boundary(const std::string& name) {
  if (name == "symmetric") return Boundary::kSymmetric;
  if (name == "periodic") return Boundary::kPeriodic;
  if (name == "zero") return Boundary::kZero;
  throw Error(ErrorKind::kConfig, "unknown boundary mode '" + name + "' (expected symmetric, periodic or zero)");
}

const FilterBank& filter_bank(Family family) {
  static const FilterBank haar = make_bank({0.7071067811865476, 0.7071067811865476});
  static const FilterBank db2 =
      make_bank({-0.12940952255126037, 0.2241438680420134, 0.8365163037378079, 0.48296291314453416});
  static const FilterBank db4 = make_bank({-0.010597401785069032, 0.0328830116668852, 0.030841381835560764,
                                           -0.18703481171909309, -0.027983769416859854, 0.6308807679298589,
                                           0.7148465705529157, 0.2303778133088965});
  switch (family) {
    case Family::kHaar: return haar;
    case Family::kDb2: return db2;
    case Family::kDb4: return db4;
  }
  return db2;
}

std::size_t band_length(std::size_t signal_length, Family family, Boundary boundary) {
  if (boundary == Boundary::kPeriodic) return (signal_length + 1) / 2;
  return (signal_length + filter_bank(family).length() - 1) / 2;
}

int max_levels(std::size_t signal_length) {
  int levels = 0;
  while ((std::size_t{2} << levels) <= signal_length) ++levels;
  return levels;
}

std::size_t Bands::coefficient_count() const {
  std::size_t total = 0;
  for (const auto& b : bands) total += b.size();
  return total;
}

Bands dwt_forward(std::span<const double> signal, const WaveletConfig& config) {
  const FilterBank& bank = filter_bank(config.family);
  if (signal.size() < bank.length()) {
    throw Error(ErrorKind::kTooShort, "signal of length " + std::to_string(signal.size()) +
                                          " is shorter than the " + to_string(config.family) + " filter");
  }
  if (config.levels < 1 || config.levels > max_levels(signal.size())) {
    throw Error(ErrorKind::kOutOfRange, std::to_string(config.levels) + " levels exceed floor(log2(" +
                                            std::to_string(signal.size()) + "))");
  }
  Bands out;
  std::vector<std::vector<double>> details;
  std::vector<double> current(signal.begin(), signal.end());
  for (int level = 0; level < config.levels; ++level) {
    out.level_lengths.push_back(current.size());
    std::vector<double> approx, detail;
    analyze(current, bank, config.boundary, approx, detail);
    details.push_back(std::move(detail));
    current = std::move(approx);
  }
  out.bands.push_back(std::move(current));
  for (auto it = details.rbegin(); it != details.rend(); ++it) out.bands.push_back(std::move(*it));
  return out;
}

std::vector<double> dwt_inverse(const Bands& bands, const WaveletConfig& config) {
  const FilterBank& bank = filter_bank(config.family);
  const auto levels = static_cast<std::size_t>(config.levels);
  if (bands.bands.size() != levels + 1 || bands.level_lengths.size() != levels) {
    throw Error(ErrorKind::kShape, "band set does not match a " + std::to_string(levels) + "-level transform");
  }
  std::vector<double> current = bands.bands[0];
  for (std::size_t l = levels; l-- > 0;) {
    const std::vector<double>& detail = bands.bands[levels - l];
    const std::size_t length = bands.level_lengths[l];
    const std::size_t expected = band_length(length, config.family, config.boundary);
    if (current.size() != expected || detail.size() != expected) {
      throw Error(ErrorKind::kShape, "level " + std::to_string(l + 1) + " bands have lengths " +
                                         std::to_string(current.size()) + "/" + std::to_string(detail.size()) +
                                         ", expected " + std::to_string(expected));
    }
    current = synthesize(current, detail, length, bank, config.boundary);
  }
  return current;
}

MultichannelBands dwt_multichannel(const Eigen::MatrixXd& frames, const WaveletConfig& config) {
  if (frames.rows() == 0 || frames.cols() == 0) throw Error(ErrorKind::kEmptyInput, "empty multichannel input");
  MultichannelBands out;
  std::vector<double> column(static_cast<std::size_t>(frames.rows()));
  for (Eigen::Index c = 0; c < frames.cols(); ++c) {
    for (Eigen::Index t = 0; t < frames.rows(); ++t) column[static_cast<std::size_t>(t)] = frames(t, c);
    const Bands bands = dwt_forward(column, config);
    if (c == 0) {
      for (const auto& b : bands.bands) out.band_lengths.push_back(b.size());
      out.level_lengths = bands.level_lengths;
      out.coefficients.resize(static_cast<Eigen::Index>(bands.coefficient_count()), frames.cols());
    }
    Eigen::Index row = 0;
    for (const auto& b : bands.bands)
      for (double v : b) out.coefficients(row++, c) = v;
  }
  return out;
}

Eigen::MatrixXd dwt_multichannel_inverse(const MultichannelBands& bands, const WaveletConfig& config) {
  if (bands.coefficients.cols() == 0 || bands.level_lengths.empty()) {
    throw Error(ErrorKind::kEmptyInput, "empty multichannel bands");
  }
  std::size_t total = 0;
  for (auto n : bands.band_lengths) total += n;
  if (total != static_cast<std::size_t>(bands.coefficients.rows())) {
    throw Error(ErrorKind::kShape, "band-length table does not match the coefficient rows");
  }
  const auto length = static_cast<Eigen::Index>(bands.level_lengths.front());
  Eigen::MatrixXd out(length, bands.coefficients.cols());
  Bands single;
  single.level_lengths = bands.level_lengths;
  for (Eigen::Index c = 0; c < bands.coefficients.cols(); ++c) {
    single.bands.clear();
    Eigen::Index row = 0;
    for (auto n : bands.band_lengths) {
      std::vector<double> b(n);
      for (auto& v : b) v = bands.coefficients(row++, c);
      single.bands.push_back(std::move(b));
    }
    const std::vector<double> signal = dwt_inverse(single, config);
    for (Eigen::Index t = 0; t < length; ++t) out(t, c) = signal[static_cast<std::size_t>(t)];
  }
  return out;
}

}  // namespace motionkit::wavelet
