#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "fdkg/channel_sim.hpp"
#include "fdkg/error.hpp"
#include "fdkg/serialization.hpp"

using namespace fdkg;
using namespace fdkg::channel;

namespace {

EnvironmentSpec room(std::uint64_t seed) {
  EnvironmentSpec spec;
  spec.env_id = 1;
  spec.min_paths = 4;
  spec.max_paths = 12;
  spec.delay_spread_s = 200e-9;
  spec.gain_decay = 1.0;
  spec.delay_jitter_s = 0.5e-9;
  spec.seed = seed;
  return spec;
}

OfdmConfig paper_ofdm() { return OfdmConfig{}; }

double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("environment construction is deterministic") {
  const Environment a = build_environment(room(7));
  const Environment b = build_environment(room(7));
  CHECK(a == b);
  CHECK(std::is_sorted(a.base_delays().begin(), a.base_delays().end()));
  for (std::uint64_t u = 0; u < 20; ++u) CHECK(sample_user_channel(a, u) == sample_user_channel(b, u));
}

TEST_CASE("invalid environment specs are rejected") {
  EnvironmentSpec spec = room(1);
  spec.min_paths = 5;
  spec.max_paths = 3;
  CHECK_THROWS_AS(build_environment(spec), ConfigError);
  spec = room(1);
  spec.min_paths = 0;
  CHECK_THROWS_AS(build_environment(spec), ConfigError);
  spec = room(1);
  spec.delay_spread_s = 0.0;
  CHECK_THROWS_AS(build_environment(spec), ConfigError);
  spec = room(1);
  spec.gain_decay = -1.0;
  CHECK_THROWS_AS(build_environment(spec), ConfigError);
}

TEST_CASE("a forced path count is honoured") {
  EnvironmentSpec spec = room(3);
  spec.min_paths = spec.max_paths = 3;
  const Environment env = build_environment(spec);
  for (std::uint64_t u = 0; u < 200; ++u) CHECK(sample_user_channel(env, u).size() == 3);
}

TEST_CASE("different seeds give different path layouts") {
  const Environment a = build_environment(room(1));
  const Environment b = build_environment(room(2));
  bool any_gain_differs = false;
  for (std::uint64_t u = 0; u < 100; ++u) {
    const PathParams pa = sample_user_channel(a, u);
    const PathParams pb = sample_user_channel(b, u);
    if (pa.gains != pb.gains) any_gain_differs = true;
  }
  CHECK(any_gain_differs);
}

TEST_CASE("sampled paths satisfy their invariants") {
  const EnvironmentSpec spec = room(11);
  const Environment env = build_environment(spec);
  double max_delay = 0.0;
  for (std::uint64_t u = 0; u < 10000; ++u) {
    const PathParams p = sample_user_channel(env, u);
    REQUIRE(p.delays.size() == p.size());
    REQUIRE(p.phases.size() == p.size());
    CHECK(std::is_sorted(p.delays.begin(), p.delays.end()));
    for (std::size_t n = 0; n < p.size(); ++n) {
      CHECK(p.gains[n] > 0.0);
      CHECK(p.delays[n] >= 0.0);
      CHECK(p.phases[n] >= 0.0);
      CHECK(p.phases[n] < 2.0 * std::numbers::pi);
      max_delay = std::max(max_delay, p.delays[n]);
    }
  }
  CHECK(max_delay <= spec.delay_spread_s);
}

TEST_CASE("infinite decay with unit gain floor gives unit gains") {
  EnvironmentSpec spec = room(5);
  spec.gain_decay = 1e300;
  spec.gain_floor = 1.0;
  const Environment env = build_environment(spec);
  for (std::uint64_t u = 0; u < 50; ++u) {
    for (double g : sample_user_channel(env, u).gains) CHECK(g == 1.0);
  }
}

TEST_CASE("cfr of single paths") {
  const OfdmConfig cfg = paper_ofdm();
  const ComplexVector flat = cfr(PathParams{{1.0}, {0.0}, {0.0}}, 2.4e9, cfg);
  REQUIRE(flat.size() == 64);
  for (const Complex& v : flat) CHECK(v == Complex{1.0, 0.0});

  const ComplexVector rotated = cfr(PathParams{{1.0}, {0.0}, {std::numbers::pi / 2}}, 2.4e9, cfg);
  for (const Complex& v : rotated) {
    CHECK(std::abs(v.real()) <= 1e-15);
    CHECK(v.imag() == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("cfr of two paths with an integer number of carrier cycles") {
  // f * tau_1 = 2.4e9 * 50e-9 = 120 cycles, so only the tap twiddle remains.
  const OfdmConfig cfg = paper_ofdm();
  const ComplexVector h = cfr(PathParams{{1.0, 0.5}, {0.0, 50e-9}, {0.0, 0.0}}, 2.4e9, cfg);
  CHECK(std::abs(h[0] - Complex{1.5, 0.0}) <= 1e-12);
  const Complex expected_1 = Complex{1.0, 0.0} + 0.5 * std::polar(1.0, -std::numbers::pi / 32.0);
  CHECK(std::abs(h[1] - expected_1) <= 1e-12);
  // Scalar evaluation of the defining sum for every subcarrier.
  for (std::size_t l = 0; l < 64; ++l) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(l) / 64.0;
    CHECK(std::abs(h[l] - (1.0 + 0.5 * std::polar(1.0, angle))) <= 1e-12);
  }
}

TEST_CASE("cfr is linear in the path gains") {
  const Environment env = build_environment(room(9));
  for (std::uint64_t u = 0; u < 20; ++u) {
    PathParams p = sample_user_channel(env, u);
    const ComplexVector h = cfr(p, 2.5e9, paper_ofdm());
    for (double& g : p.gains) g *= 2.0;
    const ComplexVector h2 = cfr(p, 2.5e9, paper_ofdm());
    for (std::size_t l = 0; l < h.size(); ++l) CHECK(h2[l] == 2.0 * h[l]);
  }
}

TEST_CASE("noise variance follows the SNR definition") {
  const ComplexVector unit(64, Complex{1.0, 0.0});
  CHECK(noise_variance(unit, 0.0) == 1.0);
  CHECK(noise_variance(unit, 20.0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(noise_variance(unit, kNoiseDisabled) == 0.0);

  CounterRng rng(42);
  CHECK(add_estimation_noise(unit, kNoiseDisabled, rng) == unit);
}

TEST_CASE("empirical estimation noise variance at 20 dB") {
  const ComplexVector unit(1000, Complex{1.0, 0.0});
  double sum = 0.0;
  std::size_t count = 0;
  for (std::uint64_t draw = 0; draw < 100; ++draw) {
    CounterRng rng = CounterRng::for_stream(2024, {draw});
    const ComplexVector noisy = add_estimation_noise(unit, 20.0, rng);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      sum += std::norm(noisy[i] - unit[i]);
      ++count;
    }
  }
  const double empirical = sum / static_cast<double>(count);
  CHECK(std::abs(empirical - 0.01) <= 0.02 * 0.01);
}

TEST_CASE("uplink and downlink noise streams are independent") {
  OfdmConfig cfg = paper_ofdm();
  cfg.f_dl_hz = cfg.f_ul_hz;
  const Environment env = build_environment(room(4));
  const ChannelPair pair = generate_sample(env, 3, 10.0, cfg);
  CHECK(pair.h_ul != pair.h_dl);
}

TEST_CASE("reciprocal system without noise has identical bands") {
  OfdmConfig cfg = paper_ofdm();
  cfg.f_dl_hz = cfg.f_ul_hz;
  const Environment env = build_environment(room(8));
  const EnvironmentDataset ds = generate_env_dataset(env, 200, kNoiseDisabled, cfg);
  for (const ChannelPair& p : ds.samples) CHECK(p.h_ul == p.h_dl);
}

TEST_CASE("paper-sized dataset shape") {
  const Environment env = build_environment(room(12));
  const EnvironmentDataset ds = generate_env_dataset(env, 40000, 20.0, paper_ofdm());
  REQUIRE(ds.size() == 40000);
  for (const ChannelPair& p : ds.samples) {
    REQUIRE(p.h_ul.size() == 64);
    REQUIRE(p.h_dl.size() == 64);
  }
}

TEST_CASE("dataset generation is deterministic and order independent") {
  const Environment env = build_environment(room(13));
  const EnvironmentDataset a = generate_env_dataset(env, 50, 10.0, paper_ofdm());
  const EnvironmentDataset b = generate_env_dataset(env, 50, 10.0, paper_ofdm());
  CHECK(a.samples == b.samples);
  const EnvironmentDataset tail = generate_env_dataset(env, 10, 10.0, paper_ofdm(), 40);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(tail.samples[i] == a.samples[40 + i]);
    CHECK(generate_sample(env, 40 + i, 10.0, paper_ofdm()) == a.samples[40 + i]);
  }
}

TEST_CASE("the two bands are related through the shared paths") {
  // Rotating each tap by the carrier offset maps the uplink CFR onto the
  // downlink CFR exactly when noise is off.
  const OfdmConfig cfg = paper_ofdm();
  const Environment env = build_environment(room(14));
  for (std::uint64_t u = 0; u < 10; ++u) {
    const PathParams p = sample_user_channel(env, u);
    PathParams shifted = p;
    for (std::size_t n = 0; n < p.size(); ++n) {
      const double turn = std::fmod((cfg.f_dl_hz - cfg.f_ul_hz) * p.delays[n], 1.0);
      shifted.phases[n] = std::fmod(p.phases[n] - 2.0 * std::numbers::pi * turn + 4.0 * std::numbers::pi,
                                    2.0 * std::numbers::pi);
    }
    CHECK(max_abs_diff(cfr(shifted, cfg.f_ul_hz, cfg), cfr(p, cfg.f_dl_hz, cfg)) <= 1e-9);
  }
}

TEST_CASE("dataset files round-trip") {
  const Environment env = build_environment(room(15));
  const EnvironmentDataset ds = generate_env_dataset(env, 25, 20.0, paper_ofdm(), 7);
  const auto path = std::filesystem::temp_directory_path() / "fdkg_test_dataset.bin";
  save_dataset(ds, path);
  const EnvironmentDataset back = load_dataset(path);
  CHECK(back.spec == ds.spec);
  CHECK(back.ofdm == ds.ofdm);
  CHECK(back.snr_db == ds.snr_db);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.samples[i].h_ul == ds.samples[i].h_ul);
    CHECK(back.samples[i].h_dl == ds.samples[i].h_dl);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}

TEST_CASE("environment specs round-trip through JSON") {
  const EnvironmentSpec spec = room(99);
  const nlohmann::json j = spec;
  CHECK(j.at("n_paths_range") == nlohmann::json::array({4, 12}));
  CHECK(j.get<EnvironmentSpec>() == spec);
  CHECK(snr_from_json(snr_to_json(kNoiseDisabled)) == kNoiseDisabled);
  CHECK(snr_to_json(kNoiseDisabled).is_null());
}
