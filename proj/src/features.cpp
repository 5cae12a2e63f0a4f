#include "fdkg/features.hpp"

#include <algorithm>
#include <numeric>

#include "fdkg/error.hpp"

namespace fdkg::features {

std::vector<double> complex_to_features(std::span<const channel::Complex> h) {
  const std::size_t L = h.size();
  std::vector<double> x(2 * L);
  for (std::size_t l = 0; l < L; ++l) {
    x[l] = h[l].real();
    x[L + l] = h[l].imag();
  }
  return x;
}

channel::ComplexVector features_to_complex(std::span<const double> x) {
  if (x.size() % 2 != 0) throw DimensionError("feature vector length must be even");
  const std::size_t L = x.size() / 2;
  channel::ComplexVector h(L);
  for (std::size_t l = 0; l < L; ++l) h[l] = {x[l], x[L + l]};
  return h;
}

Normalizer::Normalizer(std::vector<double> col_min, std::vector<double> col_max, double eps_guard)
    : col_min_(std::move(col_min)), col_max_(std::move(col_max)), eps_guard_(eps_guard) {
  if (col_min_.size() != col_max_.size()) throw DimensionError("col_min/col_max length mismatch");
  for (std::size_t d = 0; d < col_min_.size(); ++d) {
    if (!(col_max_[d] >= col_min_[d])) throw ConfigError("normalizer col_max < col_min");
  }
}

std::size_t Normalizer::degenerate_count() const {
  std::size_t count = 0;
  for (std::size_t d = 0; d < dim(); ++d) count += is_degenerate(d) ? 1 : 0;
  return count;
}

std::vector<double> Normalizer::normalize(std::span<const double> x_raw) const {
  if (x_raw.size() != dim()) throw DimensionError("normalize: dimension mismatch");
  std::vector<double> x(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    x[d] = is_degenerate(d) ? 0.0 : (x_raw[d] - col_min_[d]) / (col_max_[d] - col_min_[d]);
  }
  return x;
}

Matrix Normalizer::normalize(const Matrix& raw) const {
  if (static_cast<std::size_t>(raw.rows()) != dim()) throw DimensionError("normalize: dimension mismatch");
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index d = 0; d < raw.rows(); ++d) {
    const auto du = static_cast<std::size_t>(d);
    if (is_degenerate(du)) {
      out.row(d).setZero();
    } else {
      out.row(d) = (raw.row(d).array() - col_min_[du]) / (col_max_[du] - col_min_[du]);
    }
  }
  return out;
}

Normalizer fit_normalizer(const Matrix& train) {
  if (train.cols() == 0 || train.rows() == 0) throw ConfigError("fit_normalizer: empty training set");
  std::vector<double> lo(static_cast<std::size_t>(train.rows()));
  std::vector<double> hi(lo.size());
  for (Eigen::Index d = 0; d < train.rows(); ++d) {
    lo[static_cast<std::size_t>(d)] = train.row(d).minCoeff();
    hi[static_cast<std::size_t>(d)] = train.row(d).maxCoeff();
  }
  return Normalizer(std::move(lo), std::move(hi));
}

RawFeatures extract_features(const channel::EnvironmentDataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return extract_features(ds, rows);
}

RawFeatures extract_features(const channel::EnvironmentDataset& ds, std::span<const std::size_t> rows) {
  const auto dim = static_cast<Eigen::Index>(2 * ds.ofdm.n_subcarriers);
  RawFeatures out{Matrix(dim, static_cast<Eigen::Index>(rows.size())),
                  Matrix(dim, static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const channel::ChannelPair& pair = ds.samples.at(rows[c]);
    const std::vector<double> ul = complex_to_features(pair.h_ul);
    const std::vector<double> dl = complex_to_features(pair.h_dl);
    if (static_cast<Eigen::Index>(ul.size()) != dim || static_cast<Eigen::Index>(dl.size()) != dim) {
      throw DimensionError("sample length differs from n_subcarriers");
    }
    const auto col = static_cast<Eigen::Index>(c);
    out.uplink.col(col) = Eigen::Map<const Eigen::VectorXd>(ul.data(), dim);
    out.downlink.col(col) = Eigen::Map<const Eigen::VectorXd>(dl.data(), dim);
  }
  return out;
}

}  // namespace fdkg::features
