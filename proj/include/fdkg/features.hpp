#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "fdkg/channel_sim.hpp"

namespace fdkg::features {

/// Feature matrices hold one sample per column.
using Matrix = Eigen::MatrixXd;

inline constexpr double kEpsGuard = 1e-12;

/// concat(Re(h), Im(h)); length 2L.
std::vector<double> complex_to_features(std::span<const channel::Complex> h);

/// Inverse of complex_to_features. Requires an even length.
channel::ComplexVector features_to_complex(std::span<const double> x);

/// Per-dimension min-max statistics of a training set.
///
/// Values outside the training range are not clamped. Dimensions whose range is
/// below eps_guard are degenerate and always map to 0.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> col_min, std::vector<double> col_max, double eps_guard = kEpsGuard);

  std::size_t dim() const { return col_min_.size(); }
  std::span<const double> col_min() const { return col_min_; }
  std::span<const double> col_max() const { return col_max_; }
  double eps_guard() const { return eps_guard_; }
  bool is_degenerate(std::size_t d) const { return col_max_[d] - col_min_[d] < eps_guard_; }
  std::size_t degenerate_count() const;

  std::vector<double> normalize(std::span<const double> x_raw) const;
  Matrix normalize(const Matrix& raw) const;

  bool operator==(const Normalizer&) const = default;

 private:
  std::vector<double> col_min_;
  std::vector<double> col_max_;
  double eps_guard_ = kEpsGuard;
};

/// Fits on the columns of `train`. Throws ConfigError on an empty set.
Normalizer fit_normalizer(const Matrix& train);

inline std::vector<double> normalize(const Normalizer& norm, std::span<const double> x_raw) {
  return norm.normalize(x_raw);
}

/// Raw (unnormalized) features of both parties for selected samples.
struct RawFeatures {
  Matrix uplink;    // Alice, x'_A
  Matrix downlink;  // Bob, x'_B
};

RawFeatures extract_features(const channel::EnvironmentDataset& ds);
RawFeatures extract_features(const channel::EnvironmentDataset& ds, std::span<const std::size_t> rows);

}  // namespace fdkg::features
