#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "fdkg/rng.hpp"

namespace fdkg::channel {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Passing this as the SNR disables estimation noise.
inline constexpr double kNoiseDisabled = std::numeric_limits<double>::infinity();

/// Parametric description of one propagation environment (one room).
///
/// Every user in the environment sees the first N paths of a fixed per-environment
/// delay layout, perturbed by a small per-user delay jitter. Path gains follow
/// alpha_n = exp(-tau_n / (gain_decay * delay_spread_s)) * u_n with
/// u_n ~ U[gain_floor, 1]; phases are uniform per user.
struct EnvironmentSpec {
  int env_id = 0;
  int min_paths = 1;  // n_paths_range
  int max_paths = 1;
  double delay_spread_s = 100e-9;
  double gain_decay = 1.0;        // relative to delay_spread_s, unitless
  double delay_jitter_s = 0.0;    // std-dev of per-user delay perturbation
  double gain_floor = 0.5;        // lower bound of u_n; 1 forces u_n = 1
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const EnvironmentSpec&) const = default;
};

struct PathParams {
  std::vector<double> gains;   // alpha_n, unitless
  std::vector<double> delays;  // tau_n, seconds
  std::vector<double> phases;  // phi_n, radians in [0, 2pi)

  std::size_t size() const { return gains.size(); }
  bool operator==(const PathParams&) const = default;
};

struct OfdmConfig {
  double f_ul_hz = 2.4e9;
  double f_dl_hz = 2.5e9;
  std::size_t n_subcarriers = 64;
  double bandwidth_hz = 20e6;

  /// Requires L > 0 and positive carriers; f_ul == f_dl is allowed only when
  /// `allow_tdd` is set (reciprocity checks use it).
  void validate(bool allow_tdd = false) const;
  bool operator==(const OfdmConfig&) const = default;
};

/// Estimated uplink CFR at Alice and downlink CFR at Bob for one user.
struct ChannelPair {
  ComplexVector h_ul;
  ComplexVector h_dl;
  double snr_db = kNoiseDisabled;

  bool operator==(const ChannelPair&) const = default;
};

struct EnvironmentDataset {
  EnvironmentSpec spec;
  OfdmConfig ofdm;
  double snr_db = kNoiseDisabled;
  std::uint64_t first_user = 0;
  std::vector<ChannelPair> samples;

  std::size_t size() const { return samples.size(); }
};

/// Immutable environment: the spec plus its sampled base delay layout.
class Environment {
 public:
  explicit Environment(EnvironmentSpec spec);

  const EnvironmentSpec& spec() const { return spec_; }
  /// Ascending base delays of the max_paths path slots.
  std::span<const double> base_delays() const { return base_delays_; }

  bool operator==(const Environment&) const = default;

 private:
  EnvironmentSpec spec_;
  std::vector<double> base_delays_;
};

/// Stream tags for the counter-based generator.
enum class Stream : std::uint64_t { Layout = 1, Paths = 2, UplinkNoise = 3, DownlinkNoise = 4 };

Environment build_environment(const EnvironmentSpec& spec);

/// Paths for one user, a pure function of (env seed, user_index).
/// Paths are ordered by ascending delay.
PathParams sample_user_channel(const Environment& env, std::uint64_t user_index);

/// H(f, l) = sum_n alpha_n exp(-j 2 pi f tau_n + j phi_n) exp(-j 2 pi n l / L).
ComplexVector cfr(const PathParams& paths, double f_hz, const OfdmConfig& cfg);

/// Adds circularly-symmetric Gaussian noise with per-element variance
/// mean(|h|^2) / 10^(snr_db / 10). An infinite SNR returns h unchanged.
ComplexVector add_estimation_noise(std::span<const Complex> h, double snr_db, CounterRng& rng);

/// Noise variance used by add_estimation_noise.
double noise_variance(std::span<const Complex> h, double snr_db);

ChannelPair generate_sample(const Environment& env, std::uint64_t user_index, double snr_db,
                            const OfdmConfig& cfg);

/// Samples users first_user .. first_user + n_samples - 1.
EnvironmentDataset generate_env_dataset(const Environment& env, std::size_t n_samples,
                                        double snr_db, const OfdmConfig& cfg,
                                        std::uint64_t first_user = 0);

// Binary dataset file: "FDKG-DS", u32 version, u32 L, u64 n, then per sample
// L (re, im) f64 pairs uplink followed by L pairs downlink, little-endian.
// A JSON sidecar at <path>.json carries the spec, OFDM config and SNR.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void save_dataset(const EnvironmentDataset& dataset, const std::filesystem::path& path);
EnvironmentDataset load_dataset(const std::filesystem::path& path);

}  // namespace fdkg::channel
