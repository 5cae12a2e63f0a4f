#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace fdkg::keygen {

using Bits = std::vector<std::uint8_t>;  // entries 0 or 1

struct QuantizerConfig {
  double epsilon = 0.1;  // quantization factor, 0 <= epsilon < 0.5

  void validate() const;
};

enum class Party : std::uint8_t { Alice, Bob };

/// Initial key of one party: bits over retained positions plus the mask of
/// retained feature indices.
struct KeyMaterial {
  Bits bits;
  std::vector<std::uint8_t> retained_mask;  // one flag per feature
  Party party = Party::Alice;
  bool degenerate = false;  // sigma too small; everything dropped

  std::size_t retained_count() const { return bits.size(); }
};

/// Standard normal quantile (see special::inverse_normal_cdf).
double inverse_normal_cdf(double p);

struct GuardBand {
  double mean = 0.0;
  double sd = 0.0;  // population (1/n) standard deviation
  double lower = 0.0;
  double upper = 0.0;
};

/// mean +- sd * z(0.5 +- epsilon) for the vector x.
GuardBand guard_band(std::span<const double> x, const QuantizerConfig& cfg);

/// Gaussian guard-band quantizer: x <= lower -> 0, x >= upper -> 1, otherwise
/// the position is dropped. Requires at least two values.
KeyMaterial quantize_guardband(std::span<const double> x, const QuantizerConfig& cfg,
                               Party party = Party::Alice);

struct AlignedKeys {
  Bits bits_a;
  Bits bits_b;
  std::vector<std::size_t> indices;  // common retained feature positions

  std::size_t size() const { return indices.size(); }
};

/// Restricts both keys to positions retained by both parties, in index order.
AlignedKeys align_keys(const KeyMaterial& a, const KeyMaterial& b);

struct KeyErrorRate {
  double ratio = 1.0;
  std::size_t errors = 0;
  std::size_t length = 0;
  bool usable = false;  // false for empty keys, where ratio is reported as 1
};

/// Hamming distance over length. Throws DimensionError on unequal lengths.
KeyErrorRate key_error_rate(std::span<const std::uint8_t> bits_a, std::span<const std::uint8_t> bits_b);

/// Key bits per subcarrier (at most 2 with 2L features).
double key_generation_ratio(std::size_t aligned_length, std::size_t n_subcarriers);

/// Key dump: one ASCII line of '0'/'1' per key.
void write_key_dump(std::ostream& out, std::span<const Bits> keys);
std::vector<Bits> read_key_dump(std::istream& in);

}  // namespace fdkg::keygen
