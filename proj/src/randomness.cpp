#include "fdkg/randomness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <unsupported/Eigen/FFT>

#include "fdkg/error.hpp"
#include "fdkg/special.hpp"

namespace fdkg::randomness {

namespace {

using special::erfc;
using special::igamc;
using special::normal_cdf;

double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

TestResult make_result(std::string name, std::string params, std::vector<double> p_values,
                       bool applicable = true) {
  TestResult r{std::move(name), std::move(params), std::move(p_values), applicable, false};
  for (double& p : r.p_values) p = clamp_probability(p);
  r.pass = applicable && std::all_of(r.p_values.begin(), r.p_values.end(),
                                     [](double p) { return p >= kSignificance; });
  return r;
}

double cusum_p_value(double n, double z) {
  // Two-sided series for the maximal excursion of a +-1 random walk.
  const double sqrt_n = std::sqrt(n);
  double sum1 = 0.0;
  for (auto k = static_cast<long>((-n / z + 1.0) / 4.0); k <= static_cast<long>((n / z - 1.0) / 4.0); ++k) {
    const double kk = static_cast<double>(k);
    sum1 += normal_cdf((4.0 * kk + 1.0) * z / sqrt_n) - normal_cdf((4.0 * kk - 1.0) * z / sqrt_n);
  }
  double sum2 = 0.0;
  for (auto k = static_cast<long>((-n / z - 3.0) / 4.0); k <= static_cast<long>((n / z - 1.0) / 4.0); ++k) {
    const double kk = static_cast<double>(k);
    sum2 += normal_cdf((4.0 * kk + 3.0) * z / sqrt_n) - normal_cdf((4.0 * kk + 1.0) * z / sqrt_n);
  }
  return 1.0 - sum1 + sum2;
}

// Counts of every overlapping m-bit window with wrap-around, indexed by the
// window read most-significant bit first.
std::vector<std::size_t> window_counts(const BitStream& s, std::size_t m) {
  std::vector<std::size_t> counts(std::size_t{1} << m, 0);
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t index = 0;
    for (std::size_t j = 0; j < m; ++j) index = (index << 1) | s[(i + j) % n];
    ++counts[index];
  }
  return counts;
}

double apen_phi(const BitStream& s, std::size_t m) {
  if (m == 0) return 0.0;
  const auto n = static_cast<double>(s.size());
  double phi = 0.0;
  for (std::size_t c : window_counts(s, m)) {
    if (c == 0) continue;
    const double pi = static_cast<double>(c) / n;
    phi += pi * std::log(pi);
  }
  return phi;
}

std::string join_p_values(const std::vector<double>& p_values) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", p_values[i]);
    if (i > 0) out += ';';
    out += buf;
  }
  return out;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

BitStream::BitStream(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  if (bits_.empty()) throw ConfigError("BitStream must contain at least one bit");
  for (std::uint8_t b : bits_) {
    if (b > 1) throw ConfigError("BitStream entries must be 0 or 1");
  }
}

BitStream BitStream::from_string(std::string_view text) {
  std::vector<std::uint8_t> bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') throw ConfigError("bit string may contain only '0' and '1'");
    bits.push_back(c == '1' ? 1 : 0);
  }
  return BitStream(std::move(bits));
}

BitStream BitStream::complement() const {
  std::vector<std::uint8_t> flipped(bits_.size());
  std::transform(bits_.begin(), bits_.end(), flipped.begin(), [](std::uint8_t b) -> std::uint8_t { return b ^ 1U; });
  return BitStream(std::move(flipped));
}

TestResult frequency_test(const BitStream& s) {
  long sum = 0;
  for (std::uint8_t b : s.bits()) sum += b ? 1 : -1;
  const double s_obs = std::abs(static_cast<double>(sum)) / std::sqrt(static_cast<double>(s.size()));
  return make_result("frequency", "", {erfc(s_obs / std::numbers::sqrt2)});
}

TestResult block_frequency_test(const BitStream& s, std::size_t block_len) {
  if (block_len == 0 || block_len > s.size()) {
    throw ConfigError("block frequency: block length must be in [1, n]");
  }
  const std::size_t n_blocks = s.size() / block_len;
  double chi2 = 0.0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < block_len; ++j) ones += s[b * block_len + j];
    const double pi = static_cast<double>(ones) / static_cast<double>(block_len);
    chi2 += (pi - 0.5) * (pi - 0.5);
  }
  chi2 *= 4.0 * static_cast<double>(block_len);
  return make_result("block_frequency", "M=" + std::to_string(block_len),
                     {igamc(static_cast<double>(n_blocks) / 2.0, chi2 / 2.0)});
}

TestResult runs_test(const BitStream& s) {
  const auto n = static_cast<double>(s.size());
  std::size_t ones = 0;
  for (std::uint8_t b : s.bits()) ones += b;
  const double pi = static_cast<double>(ones) / n;
  if (std::abs(pi - 0.5) >= 2.0 / std::sqrt(n)) return make_result("runs", "", {0.0}, false);
  std::size_t runs = 1;
  for (std::size_t i = 1; i < s.size(); ++i) runs += s[i] != s[i - 1] ? 1 : 0;
  const double v = static_cast<double>(runs);
  const double spread = pi * (1.0 - pi);
  const double p = erfc(std::abs(v - 2.0 * n * spread) / (2.0 * std::sqrt(2.0 * n) * spread));
  return make_result("runs", "", {p});
}

TestResult cumulative_sums_test(const BitStream& s, CusumMode mode) {
  const std::size_t n = s.size();
  long partial = 0;
  long z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t b = mode == CusumMode::Forward ? s[i] : s[n - 1 - i];
    partial += b ? 1 : -1;
    z = std::max(z, std::abs(partial));
  }
  const char* params = mode == CusumMode::Forward ? "mode=forward" : "mode=backward";
  return make_result("cumulative_sums", params, {cusum_p_value(static_cast<double>(n), static_cast<double>(z))});
}

TestResult cumulative_sums_test(const BitStream& s) {
  const TestResult fwd = cumulative_sums_test(s, CusumMode::Forward);
  const TestResult bwd = cumulative_sums_test(s, CusumMode::Backward);
  return make_result("cumulative_sums", "mode=both", {fwd.p_values[0], bwd.p_values[0]});
}

TestResult dft_test(const BitStream& s) {
  const std::size_t n = s.size() - s.size() % 2;
  if (n < 2) return make_result("dft", "", {0.0}, false);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = s[i] ? 1.0 : -1.0;
  std::vector<std::complex<double>> spectrum;
  Eigen::FFT<double> fft;
  fft.fwd(spectrum, x);

  const auto nd = static_cast<double>(n);
  const double threshold = std::sqrt(std::log(1.0 / 0.05) * nd);
  std::size_t below = 0;
  for (std::size_t k = 0; k < n / 2; ++k) below += std::abs(spectrum[k]) < threshold ? 1 : 0;
  const double expected = 0.95 * nd / 2.0;
  const double d = (static_cast<double>(below) - expected) / std::sqrt(nd * 0.95 * 0.05 / 4.0);
  return make_result("dft", "", {erfc(std::abs(d) / std::numbers::sqrt2)});
}

std::size_t gf2_rank(std::span<const std::uint8_t> matrix, std::size_t rows, std::size_t cols) {
  if (matrix.size() != rows * cols) throw DimensionError("gf2_rank: matrix size mismatch");
  std::vector<std::uint8_t> m(matrix.begin(), matrix.end());
  std::size_t rank = 0;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t pivot = rank;
    while (pivot < rows && m[pivot * cols + c] == 0) ++pivot;
    if (pivot == rows) continue;
    if (pivot != rank) {
      std::swap_ranges(m.begin() + static_cast<std::ptrdiff_t>(pivot * cols),
                       m.begin() + static_cast<std::ptrdiff_t>((pivot + 1) * cols),
                       m.begin() + static_cast<std::ptrdiff_t>(rank * cols));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      if (r != rank && m[r * cols + c] != 0) {
        for (std::size_t k = c; k < cols; ++k) m[r * cols + k] ^= m[rank * cols + k];
      }
    }
    ++rank;
  }
  return rank;
}

std::vector<double> rank_category_probabilities() {
  // P(rank = r) = 2^{r(Q+M-r)-MQ} prod_{i<r} (1-2^{i-Q})(1-2^{i-M}) / (1-2^{i-r}).
  const auto dim = static_cast<int>(kRankMatrixDim);
  auto prob = [dim](int r) {
    double product = 1.0;
    for (int i = 0; i < r; ++i) {
      const double a = 1.0 - std::ldexp(1.0, i - dim);
      product *= a * a / (1.0 - std::ldexp(1.0, i - r));
    }
    return std::ldexp(product, r * (2 * dim - r) - dim * dim);
  };
  const double full = prob(dim);
  const double minus_one = prob(dim - 1);
  return {full, minus_one, 1.0 - full - minus_one};
}

TestResult rank_test(const BitStream& s) {
  constexpr std::size_t dim = kRankMatrixDim;
  const std::size_t n_matrices = s.size() / (dim * dim);
  if (n_matrices < kRankMinMatrices) return make_result("rank", "32x32", {0.0}, false);
  std::array<double, 3> observed{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < n_matrices; ++k) {
    const std::size_t rank = gf2_rank(s.bits().subspan(k * dim * dim, dim * dim), dim, dim);
    observed[rank == dim ? 0 : rank == dim - 1 ? 1 : 2] += 1.0;
  }
  const std::vector<double> probs = rank_category_probabilities();
  const auto total = static_cast<double>(n_matrices);
  double chi2 = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double expected = total * probs[c];
    chi2 += (observed[c] - expected) * (observed[c] - expected) / expected;
  }
  return make_result("rank", "32x32", {std::exp(-chi2 / 2.0)});
}

TestResult approximate_entropy_test(const BitStream& s, std::size_t m) {
  if (m < 1 || m > 24) throw ConfigError("approximate entropy: m must be in [1, 24]");
  const auto n = static_cast<double>(s.size());
  const double apen = apen_phi(s, m) - apen_phi(s, m + 1);
  const double chi2 = 2.0 * n * (std::numbers::ln2 - apen);
  const double p = igamc(std::ldexp(1.0, static_cast<int>(m) - 1), chi2 / 2.0);
  const bool applicable = (std::size_t{1} << (m + 1)) <= s.size();
  return make_result("approximate_entropy", "m=" + std::to_string(m), {p}, applicable);
}

double psi_squared(const BitStream& s, std::size_t m) {
  if (m == 0) return 0.0;
  const auto n = static_cast<double>(s.size());
  double sum = 0.0;
  for (std::size_t c : window_counts(s, m)) sum += static_cast<double>(c) * static_cast<double>(c);
  return std::ldexp(1.0, static_cast<int>(m)) / n * sum - n;
}

TestResult serial_test(const BitStream& s, std::size_t m) {
  if (m < 2 || m > 24) throw ConfigError("serial: m must be in [2, 24]");
  const double psi_m = psi_squared(s, m);
  const double psi_m1 = psi_squared(s, m - 1);
  const double psi_m2 = psi_squared(s, m - 2);
  const double del1 = psi_m - psi_m1;
  const double del2 = psi_m - 2.0 * psi_m1 + psi_m2;
  const int mi = static_cast<int>(m);
  return make_result("serial", "m=" + std::to_string(m),
                     {igamc(std::ldexp(1.0, mi - 2), del1 / 2.0), igamc(std::ldexp(1.0, mi - 3), del2 / 2.0)});
}

const std::vector<std::string>& test_names() {
  static const std::vector<std::string> names{"frequency", "block_frequency",    "runs", "cumulative_sums",
                                              "dft",       "rank", "approximate_entropy", "serial"};
  return names;
}

double TestSummary::pass_ratio() const { return randomness::pass_ratio(results); }

std::size_t TestSummary::applicable_count() const {
  return static_cast<std::size_t>(
      std::count_if(results.begin(), results.end(), [](const TestResult& r) { return r.applicable; }));
}

double pass_ratio(std::span<const TestResult> results) {
  if (results.empty()) throw ConfigError("pass_ratio: no results");
  const auto passed = std::count_if(results.begin(), results.end(), [](const TestResult& r) { return r.pass; });
  return static_cast<double>(passed) / static_cast<double>(results.size());
}

std::vector<BitStream> concatenate_chunks(std::span<const BitStream> keys, std::size_t min_bits) {
  if (min_bits == 0) throw ConfigError("concatenate_chunks: min_bits must be > 0");
  std::vector<std::uint8_t> all;
  for (const BitStream& k : keys) all.insert(all.end(), k.bits().begin(), k.bits().end());
  std::vector<BitStream> chunks;
  const std::size_t n_chunks = all.size() / min_bits;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const auto begin = all.begin() + static_cast<std::ptrdiff_t>(c * min_bits);
    const auto end = c + 1 == n_chunks ? all.end() : begin + static_cast<std::ptrdiff_t>(min_bits);
    chunks.emplace_back(std::vector<std::uint8_t>(begin, end));
  }
  return chunks;
}

std::vector<BitStream> rechunk(std::span<const BitStream> keys, std::size_t key_bits) {
  if (key_bits == 0) throw ConfigError("rechunk: key_bits must be > 0");
  std::vector<std::uint8_t> all;
  for (const BitStream& k : keys) all.insert(all.end(), k.bits().begin(), k.bits().end());
  std::vector<BitStream> out;
  for (std::size_t start = 0; start + key_bits <= all.size(); start += key_bits) {
    const auto begin = all.begin() + static_cast<std::ptrdiff_t>(start);
    out.emplace_back(std::vector<std::uint8_t>(begin, begin + static_cast<std::ptrdiff_t>(key_bits)));
  }
  return out;
}

std::vector<TestSummary> run_suite(std::span<const BitStream> keys, const SuiteParams& params) {
  if (keys.empty()) throw ConfigError("run_suite: no keys");
  std::vector<TestSummary> suite;
  auto per_key = [&](std::string name, std::string p, auto&& test) {
    TestSummary summary{std::move(name), std::move(p), {}, false};
    summary.results.reserve(keys.size());
    for (const BitStream& key : keys) summary.results.push_back(test(key));
    suite.push_back(std::move(summary));
  };
  auto concatenated = [&](std::string name, std::string p, std::size_t min_bits, auto&& test) {
    TestSummary summary{std::move(name), std::move(p), {}, true};
    const std::vector<BitStream> chunks = concatenate_chunks(keys, min_bits);
    for (const BitStream& chunk : chunks) summary.results.push_back(test(chunk));
    if (chunks.empty()) {
      // Too few bits in total: one not-applicable entry keeps the test visible.
      TestResult r{summary.test_name, summary.params, {0.0}, false, false};
      summary.results.push_back(r);
    }
    suite.push_back(std::move(summary));
  };

  const std::string block = "M=" + std::to_string(params.block_len);
  per_key("frequency", "", [](const BitStream& k) { return frequency_test(k); });
  per_key("block_frequency", block, [&](const BitStream& k) {
    if (params.block_len > k.size()) return make_result("block_frequency", block, {0.0}, false);
    return block_frequency_test(k, params.block_len);
  });
  per_key("runs", "", [](const BitStream& k) { return runs_test(k); });
  per_key("cumulative_sums", "mode=both", [](const BitStream& k) { return cumulative_sums_test(k); });
  concatenated("dft", "concat>=" + std::to_string(params.dft_min_bits), params.dft_min_bits,
               [](const BitStream& k) { return dft_test(k); });
  concatenated("rank", "32x32;concat>=" + std::to_string(kRankMinBits), kRankMinBits,
               [](const BitStream& k) { return rank_test(k); });
  per_key("approximate_entropy", "m=" + std::to_string(params.apen_m),
          [&](const BitStream& k) { return approximate_entropy_test(k, params.apen_m); });
  per_key("serial", "m=" + std::to_string(params.serial_m),
          [&](const BitStream& k) { return serial_test(k, params.serial_m); });
  return suite;
}

void write_results_csv(std::ostream& out, std::span<const TestSummary> suite) {
  out << "test,params,p_values,pass\n";
  for (const TestSummary& summary : suite) {
    for (const TestResult& r : summary.results) {
      out << r.test_name << ',' << csv_field(r.params) << ',' << join_p_values(r.p_values) << ','
          << (r.applicable ? (r.pass ? "1" : "0") : "na") << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, std::span<const TestSummary> suite) {
  out << "test,params,n_sets,applicable,pass_ratio\n";
  char buf[32];
  for (const TestSummary& summary : suite) {
    std::snprintf(buf, sizeof buf, "%.9g", summary.pass_ratio());
    out << summary.test_name << ',' << csv_field(summary.params) << ',' << summary.results.size() << ','
        << summary.applicable_count() << ',' << buf << '\n';
  }
}

}  // namespace fdkg::randomness
