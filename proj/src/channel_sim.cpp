#include "fdkg/channel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "binary_io.hpp"
#include "fdkg/error.hpp"
#include "fdkg/serialization.hpp"

namespace fdkg::channel {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::string_view kDatasetMagic = "FDKG-DS";

std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

// exp(-j 2 pi f tau) with the cycle count reduced before scaling by 2 pi, which
// keeps integer-cycle products (f tau = 120) exact.
double carrier_phase(double f_hz, double tau_s) {
  const double cycles = f_hz * tau_s;
  return -kTwoPi * (cycles - std::floor(cycles));
}

}  // namespace

void EnvironmentSpec::validate() const {
  if (min_paths < 1) throw ConfigError("n_paths_range minimum must be >= 1");
  if (min_paths > max_paths) throw ConfigError("n_paths_range minimum exceeds maximum");
  if (!(delay_spread_s > 0.0)) throw ConfigError("delay_spread_s must be > 0");
  if (!(gain_decay > 0.0)) throw ConfigError("gain_decay must be > 0");
  if (!(delay_jitter_s >= 0.0)) throw ConfigError("delay_jitter_s must be >= 0");
  if (!(gain_floor > 0.0 && gain_floor <= 1.0)) throw ConfigError("gain_floor must be in (0, 1]");
}

void OfdmConfig::validate(bool allow_tdd) const {
  if (n_subcarriers == 0) throw ConfigError("n_subcarriers must be > 0");
  if (!(f_ul_hz > 0.0) || !(f_dl_hz > 0.0)) throw ConfigError("carrier frequencies must be > 0");
  if (!allow_tdd && f_ul_hz == f_dl_hz) {
    throw ConfigError("FDD operation requires f_ul != f_dl");
  }
}

Environment::Environment(EnvironmentSpec spec) : spec_(spec) {
  spec_.validate();
  CounterRng rng = CounterRng::for_stream(spec_.seed, {tag(Stream::Layout)});
  base_delays_.resize(static_cast<std::size_t>(spec_.max_paths));
  for (double& d : base_delays_) d = rng.uniform(0.0, spec_.delay_spread_s);
  std::sort(base_delays_.begin(), base_delays_.end());
}

Environment build_environment(const EnvironmentSpec& spec) { return Environment(spec); }

PathParams sample_user_channel(const Environment& env, std::uint64_t user_index) {
  const EnvironmentSpec& spec = env.spec();
  CounterRng rng = CounterRng::for_stream(spec.seed, {tag(Stream::Paths), user_index});

  const auto span = static_cast<std::uint64_t>(spec.max_paths - spec.min_paths + 1);
  const std::size_t n_paths = static_cast<std::size_t>(spec.min_paths) + rng.below(span);

  struct Path {
    double gain, delay, phase;
  };
  std::vector<Path> paths(n_paths);
  const double decay_scale = spec.gain_decay * spec.delay_spread_s;
  for (std::size_t n = 0; n < n_paths; ++n) {
    const double jitter = spec.delay_jitter_s * rng.normal();
    const double delay = std::clamp(env.base_delays()[n] + jitter, 0.0, spec.delay_spread_s);
    const double phase = kTwoPi * rng.uniform();
    const double u = spec.gain_floor == 1.0 ? 1.0 : rng.uniform(spec.gain_floor, 1.0);
    paths[n] = {std::exp(-delay / decay_scale) * u, delay, phase};
  }
  std::stable_sort(paths.begin(), paths.end(),
                   [](const Path& a, const Path& b) { return a.delay < b.delay; });

  PathParams out;
  out.gains.reserve(n_paths);
  out.delays.reserve(n_paths);
  out.phases.reserve(n_paths);
  for (const Path& p : paths) {
    out.gains.push_back(p.gain);
    out.delays.push_back(p.delay);
    out.phases.push_back(p.phase);
  }
  return out;
}

ComplexVector cfr(const PathParams& paths, double f_hz, const OfdmConfig& cfg) {
  const std::size_t L = cfg.n_subcarriers;
  std::vector<Complex> coeffs(paths.size());
  for (std::size_t n = 0; n < paths.size(); ++n) {
    coeffs[n] = std::polar(paths.gains[n], carrier_phase(f_hz, paths.delays[n]) + paths.phases[n]);
  }
  ComplexVector h(L, Complex{0.0, 0.0});
  for (std::size_t l = 0; l < L; ++l) {
    Complex acc{0.0, 0.0};
    for (std::size_t n = 0; n < coeffs.size(); ++n) {
      // (n l mod L) keeps the twiddle argument small and exact.
      const double angle = -kTwoPi * static_cast<double>((n * l) % L) / static_cast<double>(L);
      acc += coeffs[n] * Complex{std::cos(angle), std::sin(angle)};
    }
    h[l] = acc;
  }
  return h;
}

double noise_variance(std::span<const Complex> h, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  if (h.empty()) return 0.0;
  double power = 0.0;
  for (const Complex& v : h) power += std::norm(v);
  power /= static_cast<double>(h.size());
  return power / std::pow(10.0, snr_db / 10.0);
}

ComplexVector add_estimation_noise(std::span<const Complex> h, double snr_db, CounterRng& rng) {
  ComplexVector out(h.begin(), h.end());
  const double variance = noise_variance(h, snr_db);
  if (variance == 0.0) return out;
  const double component_sd = std::sqrt(variance / 2.0);
  for (Complex& v : out) {
    const double re = rng.normal();
    const double im = rng.normal();
    v += Complex{component_sd * re, component_sd * im};
  }
  return out;
}

ChannelPair generate_sample(const Environment& env, std::uint64_t user_index, double snr_db,
                            const OfdmConfig& cfg) {
  const PathParams paths = sample_user_channel(env, user_index);
  const std::uint64_t seed = env.spec().seed;
  CounterRng ul_noise = CounterRng::for_stream(seed, {tag(Stream::UplinkNoise), user_index});
  CounterRng dl_noise = CounterRng::for_stream(seed, {tag(Stream::DownlinkNoise), user_index});
  ChannelPair pair;
  pair.snr_db = snr_db;
  pair.h_ul = add_estimation_noise(cfr(paths, cfg.f_ul_hz, cfg), snr_db, ul_noise);
  pair.h_dl = add_estimation_noise(cfr(paths, cfg.f_dl_hz, cfg), snr_db, dl_noise);
  return pair;
}

EnvironmentDataset generate_env_dataset(const Environment& env, std::size_t n_samples,
                                        double snr_db, const OfdmConfig& cfg,
                                        std::uint64_t first_user) {
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  cfg.validate(/*allow_tdd=*/true);
  EnvironmentDataset ds;
  ds.spec = env.spec();
  ds.ofdm = cfg;
  ds.snr_db = snr_db;
  ds.first_user = first_user;
  ds.samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    ds.samples.push_back(generate_sample(env, first_user + i, snr_db, cfg));
  }
  return ds;
}

void save_dataset(const EnvironmentDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto L = static_cast<std::uint32_t>(dataset.ofdm.n_subcarriers);
  detail::write_magic(out, kDatasetMagic);
  detail::write_le<std::uint32_t>(out, kDatasetFormatVersion);
  detail::write_le<std::uint32_t>(out, L);
  detail::write_le<std::uint64_t>(out, dataset.samples.size());
  for (const ChannelPair& pair : dataset.samples) {
    if (pair.h_ul.size() != L || pair.h_dl.size() != L) {
      throw DimensionError("sample length differs from n_subcarriers");
    }
    for (const ComplexVector* h : {&pair.h_ul, &pair.h_dl}) {
      for (const Complex& v : *h) {
        detail::write_f64(out, v.real());
        detail::write_f64(out, v.imag());
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());

  nlohmann::json sidecar;
  sidecar["environment"] = dataset.spec;
  sidecar["ofdm"] = dataset.ofdm;
  sidecar["snr_db"] = snr_to_json(dataset.snr_db);
  sidecar["first_user"] = dataset.first_user;
  std::ofstream meta(path.string() + ".json", std::ios::trunc);
  meta << sidecar.dump(2) << '\n';
  if (!meta) throw std::runtime_error("write failed: " + path.string() + ".json");
}

EnvironmentDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  detail::expect_magic(in, kDatasetMagic);
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kDatasetFormatVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  const auto L = detail::read_le<std::uint32_t>(in);
  const auto n = detail::read_le<std::uint64_t>(in);

  EnvironmentDataset ds;
  std::ifstream meta(path.string() + ".json");
  if (meta) {
    const nlohmann::json sidecar = nlohmann::json::parse(meta);
    ds.spec = sidecar.at("environment").get<EnvironmentSpec>();
    ds.ofdm = sidecar.at("ofdm").get<OfdmConfig>();
    ds.snr_db = snr_from_json(sidecar.at("snr_db"));
    ds.first_user = sidecar.value("first_user", std::uint64_t{0});
  }
  if (ds.ofdm.n_subcarriers != L) {
    if (meta) throw FormatError("sidecar n_subcarriers disagrees with dataset header");
    ds.ofdm.n_subcarriers = L;
  }
  ds.samples.resize(n);
  for (ChannelPair& pair : ds.samples) {
    pair.snr_db = ds.snr_db;
    for (ComplexVector* h : {&pair.h_ul, &pair.h_dl}) {
      h->resize(L);
      for (Complex& v : *h) {
        const double re = detail::read_f64(in);
        const double im = detail::read_f64(in);
        v = Complex{re, im};
      }
    }
  }
  return ds;
}

}  // namespace fdkg::channel
