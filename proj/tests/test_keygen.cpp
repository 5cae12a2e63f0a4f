#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fdkg/error.hpp"
#include "fdkg/keygen.hpp"
#include "fdkg/rng.hpp"

using namespace fdkg;
using namespace fdkg::keygen;

namespace {

std::vector<double> normal_vector(std::size_t n, CounterRng& rng) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  return x;
}

Bits bits_of(std::string_view s) {
  Bits b;
  for (char c : s) b.push_back(c == '1' ? 1 : 0);
  return b;
}

KeyMaterial with_mask(std::initializer_list<std::uint8_t> mask) {
  KeyMaterial k;
  k.retained_mask = mask;
  for (std::uint8_t m : mask) {
    if (m) k.bits.push_back(static_cast<std::uint8_t>(k.bits.size() % 2));
  }
  return k;
}

}  // namespace

TEST_CASE("guard-band thresholds for a standardized vector") {
  // mean 0 and population sd 1 by construction: 0.18 + 2 a^2 = 5.
  const double a = std::sqrt(2.41);
  const std::vector<double> x{0.30, 0.0, -0.30, a, -a};
  const GuardBand band = guard_band(x, QuantizerConfig{0.1});
  CHECK(std::abs(band.mean) <= 1e-15);
  CHECK(band.sd == doctest::Approx(1.0).epsilon(1e-14));
  // Frozen from the bisection oracle: z(0.6) = 0.253347103136.
  CHECK(std::abs(band.upper - 0.253347103136) <= 1e-9);
  CHECK(std::abs(band.lower + 0.253347103136) <= 1e-9);

  const KeyMaterial key = quantize_guardband(x, QuantizerConfig{0.1});
  CHECK(key.retained_mask == std::vector<std::uint8_t>{1, 0, 1, 1, 1});
  CHECK(key.bits == Bits{1, 0, 1, 0});
  CHECK(key.retained_count() == 4);
}

TEST_CASE("zero guard band keeps everything and splits at the mean") {
  const std::vector<double> x{1.0, 5.0, 2.0, 8.0, 4.0};
  const KeyMaterial key = quantize_guardband(x, QuantizerConfig{0.0});
  CHECK(key.retained_count() == 5);
  CHECK(key.bits == Bits{0, 1, 0, 1, 0});
}

TEST_CASE("quantizer configuration and input checks") {
  CHECK_THROWS_AS(QuantizerConfig{0.5}.validate(), ConfigError);
  CHECK_THROWS_AS(QuantizerConfig{-0.1}.validate(), ConfigError);
  CHECK_THROWS_AS(quantize_guardband(std::vector<double>{1.0}, QuantizerConfig{}), DimensionError);
  CHECK_THROWS_AS(quantize_guardband(std::vector<double>{1.0, NAN}, QuantizerConfig{}), NumericError);
  const KeyMaterial flat = quantize_guardband(std::vector<double>(8, 3.0), QuantizerConfig{});
  CHECK(flat.degenerate);
  CHECK(flat.retained_count() == 0);
  CHECK(flat.retained_mask == std::vector<std::uint8_t>(8, 0));
}

TEST_CASE("about a fifth of standard-normal features fall in the guard band") {
  CounterRng rng(2024);
  std::size_t dropped = 0;
  std::size_t total = 0;
  for (int v = 0; v < 100; ++v) {
    const std::vector<double> x = normal_vector(1000, rng);
    dropped += x.size() - quantize_guardband(x, QuantizerConfig{0.1}).retained_count();
    total += x.size();
  }
  const double fraction = static_cast<double>(dropped) / static_cast<double>(total);
  CHECK(total == 100000);
  CHECK(std::abs(fraction - 0.2) <= 0.01);
}

TEST_CASE("quantization is invariant under positive affine maps") {
  CounterRng rng(7);
  for (int v = 0; v < 50; ++v) {
    const std::vector<double> x = normal_vector(128, rng);
    for (auto [a, b] : {std::pair{2.0, 0.0}, {0.5, -3.0}, {1000.0, 17.0}, {1e-3, 0.25}}) {
      std::vector<double> y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
      for (double eps : {0.0, 0.1, 0.3}) {
        const KeyMaterial kx = quantize_guardband(x, QuantizerConfig{eps});
        const KeyMaterial ky = quantize_guardband(y, QuantizerConfig{eps});
        CHECK(kx.bits == ky.bits);
        CHECK(kx.retained_mask == ky.retained_mask);
      }
    }
  }
}

TEST_CASE("retained count and KGR do not increase with epsilon") {
  CounterRng rng(8);
  const std::vector<double> eps{0.0, 0.05, 0.1, 0.2, 0.4};
  for (int v = 0; v < 100; ++v) {
    const std::vector<double> a = normal_vector(128, rng);
    const std::vector<double> b = normal_vector(128, rng);
    std::size_t prev_count = SIZE_MAX;
    double prev_kgr = INFINITY;
    for (double e : eps) {
      const KeyMaterial ka = quantize_guardband(a, QuantizerConfig{e});
      const KeyMaterial kb = quantize_guardband(b, QuantizerConfig{e}, Party::Bob);
      CHECK(ka.retained_count() <= prev_count);
      const double kgr = key_generation_ratio(align_keys(ka, kb).size(), 64);
      CHECK(kgr <= prev_kgr);
      prev_count = ka.retained_count();
      prev_kgr = kgr;
    }
  }
}

TEST_CASE("independent parties keep about 0.8 squared of the positions") {
  CounterRng rng(9);
  double sum = 0.0;
  const int n = 2000;
  for (int v = 0; v < n; ++v) {
    const KeyMaterial ka = quantize_guardband(normal_vector(128, rng), QuantizerConfig{0.1});
    const KeyMaterial kb = quantize_guardband(normal_vector(128, rng), QuantizerConfig{0.1}, Party::Bob);
    sum += key_generation_ratio(align_keys(ka, kb).size(), 64);
  }
  CHECK(std::abs(sum / n - 1.28) <= 0.02);
}

TEST_CASE("identical observations give zero key errors") {
  CounterRng rng(10);
  for (double e : {0.0, 0.1, 0.25, 0.45}) {
    const std::vector<double> x = normal_vector(128, rng);
    const KeyMaterial ka = quantize_guardband(x, QuantizerConfig{e});
    const KeyMaterial kb = quantize_guardband(x, QuantizerConfig{e}, Party::Bob);
    const AlignedKeys aligned = align_keys(ka, kb);
    CHECK(aligned.size() == ka.retained_count());
    CHECK(key_error_rate(aligned.bits_a, aligned.bits_b).ratio == 0.0);
  }
}

TEST_CASE("alignment keeps the common retained positions") {
  const AlignedKeys same = align_keys(with_mask({1, 1, 0, 1}), with_mask({1, 1, 0, 1}));
  CHECK(same.size() == 3);
  CHECK(align_keys(with_mask({1, 0, 1, 0}), with_mask({0, 1, 0, 1})).size() == 0);

  KeyMaterial a = with_mask({1, 1, 0, 1});
  a.bits = {1, 0, 1};
  KeyMaterial b = with_mask({1, 0, 1, 1});
  b.bits = {0, 1, 1};
  const AlignedKeys k = align_keys(a, b);
  CHECK(k.indices == std::vector<std::size_t>{0, 3});
  CHECK(k.bits_a == Bits{1, 1});
  CHECK(k.bits_b == Bits{0, 1});
  CHECK_THROWS_AS(align_keys(with_mask({1, 1}), with_mask({1, 1, 1})), DimensionError);
}

TEST_CASE("key error rate") {
  const Bits key = bits_of(std::string(64, '1') + std::string(64, '0'));
  CHECK(key_error_rate(key, key).ratio == 0.0);
  Bits flipped = key;
  for (auto& b : flipped) b ^= 1;
  CHECK(key_error_rate(key, flipped).ratio == 1.0);
  Bits x(100, 0), y(100, 0);
  y[3] = y[50] = 1;
  const KeyErrorRate ker = key_error_rate(x, y);
  CHECK(ker.ratio == 0.02);
  CHECK(ker.errors == 2);
  CHECK(ker.usable);
  const KeyErrorRate empty = key_error_rate(Bits{}, Bits{});
  CHECK(empty.ratio == 1.0);
  CHECK_FALSE(empty.usable);
  CHECK_THROWS_AS(key_error_rate(Bits{1}, Bits{1, 0}), DimensionError);
}

TEST_CASE("key generation ratio") {
  CHECK(key_generation_ratio(128, 64) == 2.0);
  CHECK(key_generation_ratio(0, 64) == 0.0);
  CHECK_THROWS_AS(key_generation_ratio(3, 0), ConfigError);
}

TEST_CASE("key dumps round-trip") {
  const std::vector<Bits> keys{bits_of("0110"), bits_of("1"), bits_of("000111000")};
  std::stringstream io;
  write_key_dump(io, keys);
  CHECK(io.str() == "0110\n1\n000111000\n");
  CHECK(read_key_dump(io) == keys);
  std::istringstream crlf("01\r\n\r\n10\r\n");
  CHECK(read_key_dump(crlf) == std::vector<Bits>{bits_of("01"), bits_of("10")});
  std::istringstream bad("0102\n");
  CHECK_THROWS_AS(read_key_dump(bad), FormatError);
}
