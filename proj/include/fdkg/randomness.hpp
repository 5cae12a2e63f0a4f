#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

// Statistical randomness tests over key bitstreams, after NIST SP 800-22.
namespace fdkg::randomness {

constexpr double kSignificance = 0.01;

/// Non-empty sequence of bits, each 0 or 1.
class BitStream {
 public:
  explicit BitStream(std::vector<std::uint8_t> bits);
  /// Parses '0'/'1' characters.
  static BitStream from_string(std::string_view text);

  std::size_t size() const { return bits_.size(); }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  /// Every bit flipped.
  BitStream complement() const;

 private:
  std::vector<std::uint8_t> bits_;
};

struct TestResult {
  std::string test_name;
  std::string params;            // e.g. "M=8"; empty when the test has none
  std::vector<double> p_values;  // serial and cusum-both report two
  bool applicable = true;        // false when a prerequisite or length guard fails
  bool pass = false;             // every P >= kSignificance and applicable
};

TestResult frequency_test(const BitStream& s);
/// Throws ConfigError when M is 0 or exceeds the stream length.
TestResult block_frequency_test(const BitStream& s, std::size_t block_len);
TestResult runs_test(const BitStream& s);

enum class CusumMode : std::uint8_t { Forward, Backward };
TestResult cumulative_sums_test(const BitStream& s, CusumMode mode);
/// Both modes; passes only when both do.
TestResult cumulative_sums_test(const BitStream& s);

/// Uses the even-length prefix of s.
TestResult dft_test(const BitStream& s);

constexpr std::size_t kRankMatrixDim = 32;
constexpr std::size_t kRankMinMatrices = 38;
constexpr std::size_t kRankMinBits = kRankMinMatrices * kRankMatrixDim * kRankMatrixDim;
/// Not applicable below kRankMinBits.
TestResult rank_test(const BitStream& s);

/// Rank over GF(2) of a rows x cols matrix stored row-major.
std::size_t gf2_rank(std::span<const std::uint8_t> matrix, std::size_t rows, std::size_t cols);
/// Probability that a random 32x32 GF(2) matrix has rank 32, 31 and <= 30.
std::vector<double> rank_category_probabilities();

/// Applicable iff 2^(m+1) <= n; the P-value is reported either way.
TestResult approximate_entropy_test(const BitStream& s, std::size_t m);

/// psi^2_m from overlapping wrap-around m-bit window counts; 0 for m == 0.
double psi_squared(const BitStream& s, std::size_t m);
/// Requires m >= 2.
TestResult serial_test(const BitStream& s, std::size_t m);

struct SuiteParams {
  std::size_t block_len = 8;   // block frequency M
  std::size_t apen_m = 2;
  std::size_t serial_m = 2;
  std::size_t dft_min_bits = 1024;  // concatenation chunk size for the DFT test
};

/// Names of the eight tests, in report order.
const std::vector<std::string>& test_names();

/// Test results for one test over a list of key sets.
struct TestSummary {
  std::string test_name;
  std::string params;
  std::vector<TestResult> results;
  bool concatenated = false;  // run on concatenated chunks rather than per key

  /// Fraction of results that pass; not-applicable counts as fail.
  double pass_ratio() const;
  std::size_t applicable_count() const;
};

/// Fraction of results passing at kSignificance. Throws ConfigError when empty.
double pass_ratio(std::span<const TestResult> results);

/// Concatenates keys and cuts the stream into chunks of at least min_bits;
/// the remainder joins the last chunk. Empty when the total is below min_bits.
std::vector<BitStream> concatenate_chunks(std::span<const BitStream> keys, std::size_t min_bits);

/// Concatenates keys and cuts the stream into exactly key_bits-long keys,
/// discarding the tail.
std::vector<BitStream> rechunk(std::span<const BitStream> keys, std::size_t key_bits);

/// All eight tests. Rank and DFT run on concatenated chunks, the rest per key.
std::vector<TestSummary> run_suite(std::span<const BitStream> keys, const SuiteParams& params = {});

/// CSV with header test,params,p_values,pass; one row per result. p_values are
/// ';'-separated; pass is 1, 0 or "na" for not applicable.
void write_results_csv(std::ostream& out, std::span<const TestSummary> suite);
/// CSV with header test,params,n_sets,applicable,pass_ratio.
void write_summary_csv(std::ostream& out, std::span<const TestSummary> suite);

}  // namespace fdkg::randomness
