#include "fdkg/keygen.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "fdkg/error.hpp"
#include "fdkg/special.hpp"

namespace fdkg::keygen {

namespace {

constexpr double kMinSigma = 1e-12;

}  // namespace

void QuantizerConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ConfigError("quantization factor must be in [0, 0.5)");
}

double inverse_normal_cdf(double p) { return special::inverse_normal_cdf(p); }

GuardBand guard_band(std::span<const double> x, const QuantizerConfig& cfg) {
  cfg.validate();
  if (x.size() < 2) throw DimensionError("guard-band quantizer needs at least two values");
  GuardBand band;
  double sum = 0.0;
  for (double v : x) sum += v;
  band.mean = sum / static_cast<double>(x.size());
  double sq = 0.0;
  for (double v : x) sq += (v - band.mean) * (v - band.mean);
  band.sd = std::sqrt(sq / static_cast<double>(x.size()));
  const double z = cfg.epsilon == 0.0 ? 0.0 : inverse_normal_cdf(0.5 + cfg.epsilon);
  band.lower = band.mean - band.sd * z;
  band.upper = band.mean + band.sd * z;
  return band;
}

KeyMaterial quantize_guardband(std::span<const double> x, const QuantizerConfig& cfg, Party party) {
  const GuardBand band = guard_band(x, cfg);
  KeyMaterial key;
  key.party = party;
  key.retained_mask.assign(x.size(), 0);
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("quantize_guardband: non-finite feature");
  }
  if (band.sd < kMinSigma) {
    key.degenerate = true;
    return key;
  }
  // Comparisons in standardized units make the result invariant under a*x + b.
  const double z = cfg.epsilon == 0.0 ? 0.0 : inverse_normal_cdf(0.5 + cfg.epsilon);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = (x[i] - band.mean) / band.sd;
    if (s <= -z) {
      key.bits.push_back(0);
      key.retained_mask[i] = 1;
    } else if (s >= z) {
      key.bits.push_back(1);
      key.retained_mask[i] = 1;
    }
  }
  return key;
}

AlignedKeys align_keys(const KeyMaterial& a, const KeyMaterial& b) {
  if (a.retained_mask.size() != b.retained_mask.size()) throw DimensionError("align_keys: mask length mismatch");
  AlignedKeys out;
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < a.retained_mask.size(); ++i) {
    const bool ra = a.retained_mask[i] != 0;
    const bool rb = b.retained_mask[i] != 0;
    if (ra && rb) {
      out.indices.push_back(i);
      out.bits_a.push_back(a.bits.at(ia));
      out.bits_b.push_back(b.bits.at(ib));
    }
    ia += ra ? 1 : 0;
    ib += rb ? 1 : 0;
  }
  return out;
}

KeyErrorRate key_error_rate(std::span<const std::uint8_t> bits_a, std::span<const std::uint8_t> bits_b) {
  if (bits_a.size() != bits_b.size()) throw DimensionError("key_error_rate: length mismatch");
  KeyErrorRate ker;
  ker.length = bits_a.size();
  if (ker.length == 0) return ker;
  for (std::size_t i = 0; i < bits_a.size(); ++i) ker.errors += bits_a[i] != bits_b[i] ? 1 : 0;
  ker.ratio = static_cast<double>(ker.errors) / static_cast<double>(ker.length);
  ker.usable = true;
  return ker;
}

double key_generation_ratio(std::size_t aligned_length, std::size_t n_subcarriers) {
  if (n_subcarriers == 0) throw ConfigError("key_generation_ratio: n_subcarriers must be > 0");
  return static_cast<double>(aligned_length) / static_cast<double>(n_subcarriers);
}

void write_key_dump(std::ostream& out, std::span<const Bits> keys) {
  std::string line;
  for (const Bits& key : keys) {
    line.clear();
    for (std::uint8_t b : key) line.push_back(b ? '1' : '0');
    out << line << '\n';
  }
}

std::vector<Bits> read_key_dump(std::istream& in) {
  std::vector<Bits> keys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Bits key;
    key.reserve(line.size());
    for (char c : line) {
      if (c != '0' && c != '1') throw FormatError("key dump line " + std::to_string(line_no) + ": invalid character");
      key.push_back(c == '1' ? 1 : 0);
    }
    keys.push_back(std::move(key));
  }
  return keys;
}

}  // namespace fdkg::keygen
