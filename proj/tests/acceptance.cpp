// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: fdkg_acceptance [criterion numbers...]   (default: all)
// Exit status is non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "checks.hpp"
#include "fdkg/bench.hpp"
#include "fdkg/keygen.hpp"
#include "fdkg/model_io.hpp"
#include "fdkg/randomness.hpp"
#include "fdkg/strategies.hpp"

namespace {

using namespace fdkg;
using bench::Algorithm;
using bench::ExperimentConfig;
using bench::ExperimentReport;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// Seeds for the statistical criteria. The environment defaults were chosen on
// seeds 1..5, so these are held out.
const std::vector<std::uint64_t> kSeeds{11, 12, 13, 14, 15};

double mean_of(const ExperimentReport& r, const std::string& alg, double ReportRowMetric(const bench::ReportRow&)) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : r.rows) {
    if (row.algorithm == alg) {
      sum += ReportRowMetric(row);
      ++n;
    }
  }
  return n == 0 ? NAN : sum / static_cast<double>(n);
}

double ker_of(const bench::ReportRow& r) { return r.ker; }
double nmse_of(const bench::ReportRow& r) { return r.nmse; }

std::string csv_of(const ExperimentReport& r) {
  std::ostringstream out;
  bench::write_report_csv(out, r);
  return out.str();
}

/// Desk-profile runs at 20 dB shared by criteria 6, 7 and 8.
class DeskRuns {
 public:
  const std::vector<ExperimentReport>& ordering() {
    if (!ordering_) {
      ordering_.emplace();
      for (std::uint64_t seed : kSeeds) {
        ExperimentConfig cfg = base(seed);
        cfg.algorithms = {Algorithm::Direct, Algorithm::Dtl, Algorithm::Meta};
        cfg.randomness.enabled = true;
        cfg.randomness.algorithm = Algorithm::Meta;
        cfg.randomness.snr_db = 20.0;
        ordering_->push_back(bench::run_pipeline(cfg));
      }
    }
    return *ordering_;
  }

  /// Mean meta NMSE over all seeds and targets with one meta setting changed.
  double meta_nmse(const std::function<void(ExperimentConfig&)>& tweak) {
    double sum = 0.0;
    for (std::uint64_t seed : kSeeds) {
      ExperimentConfig cfg = base(seed);
      cfg.algorithms = {Algorithm::Meta};
      cfg.randomness.enabled = false;
      tweak(cfg);
      sum += mean_of(bench::run_pipeline(cfg), "meta", nmse_of);
    }
    return sum / static_cast<double>(kSeeds.size());
  }

  double default_meta_nmse() {
    double sum = 0.0;
    for (const ExperimentReport& r : ordering()) sum += mean_of(r, "meta", nmse_of);
    return sum / static_cast<double>(kSeeds.size());
  }

  static ExperimentConfig base(std::uint64_t seed) {
    ExperimentConfig cfg = bench::desk_profile();
    cfg.seed = seed;
    cfg.snr_list_db = {20.0};
    return cfg;
  }

 private:
  std::optional<std::vector<ExperimentReport>> ordering_;
};

DeskRuns desk;

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  const checks::GradientCheck g = checks::gradient_check(20, {6, 8, 8, 4}, 4, 1e-5, 2024);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {g.max_relative_error <= 1e-4 && secs < 10.0,
          fmt("max rel err %.3g over 20 nets (%zu kink resamples), %.2f s", g.max_relative_error, g.resamples,
              secs)};
}

Outcome optimizer_exactness() {
  const checks::AdamHand hand = checks::adam_hand_values();
  const checks::AdamHand lib = checks::adam_library_values();
  const double err = std::max(std::abs(hand.step1 - lib.step1), std::abs(hand.step2 - lib.step2));
  std::vector<double> theta{0.0};
  nn::sgd_step(theta, std::vector<double>{-4.0}, 0.1);
  const bool sgd_ok = theta[0] == 0.4;
  return {err <= 1e-12 && sgd_ok, fmt("adam |err| %.3g, sgd theta %.17g", err, theta[0])};
}

Outcome maml_mechanics() {
  const nn::PairedData d = checks::scalar_data({{1.0, 2.0}});
  const std::vector<std::size_t> support{0};
  const double w1 = strategies::inner_update(checks::ScalarModel{}, d, support, 0.1, 1).w[0];
  const double inner_err = std::abs(w1 - 0.4);
  const double pooled_err = checks::pooled_query_max_diff(7);

  ExperimentConfig cfg = bench::desk_profile();
  cfg.algorithms = {Algorithm::Meta};
  cfg.targets.resize(1);
  cfg.snr_list_db = {20.0};
  cfg.adapt.steps = 0;
  cfg.meta.config.max_iterations = 10;
  cfg.meta.config.plateau.enabled = false;
  cfg.randomness.enabled = false;
  bench::PipelineArtifacts art;
  bench::run_pipeline(cfg, &art);
  const auto curve = std::find_if(art.loss_curves.begin(), art.loss_curves.end(),
                                  [](const auto& c) { return c.first == "meta/source/meta_train"; });
  if (curve == art.loss_curves.end() || curve->second.size() != 10) return {false, "meta loss curve missing"};
  // Trailing moving average over 3 meta-iterations.
  const std::vector<double>& l = curve->second;
  std::vector<double> ma;
  for (std::size_t i = 2; i < l.size(); ++i) ma.push_back((l[i] + l[i - 1] + l[i - 2]) / 3.0);
  bool decreasing = true;
  for (std::size_t i = 1; i < ma.size(); ++i) decreasing = decreasing && ma[i] < ma[i - 1];
  return {inner_err <= 1e-12 && pooled_err <= 1e-12 && decreasing,
          fmt("w1 err %.3g, pooled err %.3g, L_total MA %.4g -> %.4g (%s)", inner_err, pooled_err, ma.front(),
              ma.back(), decreasing ? "strictly decreasing" : "not monotone")};
}

Outcome quantizer() {
  CounterRng rng(2024);
  std::size_t dropped = 0;
  std::size_t total = 0;
  bool equivariant = true;
  for (int v = 0; v < 100; ++v) {
    std::vector<double> x(1000);
    for (double& e : x) e = rng.normal();
    const keygen::KeyMaterial k = keygen::quantize_guardband(x, keygen::QuantizerConfig{0.1});
    dropped += x.size() - k.retained_count();
    total += x.size();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.7 * x[i] - 12.5;
    const keygen::KeyMaterial ky = keygen::quantize_guardband(y, keygen::QuantizerConfig{0.1});
    equivariant = equivariant && ky.bits == k.bits && ky.retained_mask == k.retained_mask;
  }
  const double fraction = static_cast<double>(dropped) / static_cast<double>(total);

  const std::vector<double> eps{0.0, 0.05, 0.1, 0.2, 0.4};
  std::vector<double> kgr(eps.size(), 0.0);
  for (int v = 0; v < 500; ++v) {
    std::vector<double> a(128), b(128);
    for (std::size_t i = 0; i < 128; ++i) {
      a[i] = rng.normal();
      b[i] = 0.9 * a[i] + std::sqrt(1 - 0.81) * rng.normal();
    }
    for (std::size_t e = 0; e < eps.size(); ++e) {
      const auto ka = keygen::quantize_guardband(a, keygen::QuantizerConfig{eps[e]});
      const auto kb = keygen::quantize_guardband(b, keygen::QuantizerConfig{eps[e]}, keygen::Party::Bob);
      kgr[e] += keygen::key_generation_ratio(keygen::align_keys(ka, kb).size(), 64) / 500.0;
    }
  }
  const bool monotone = std::is_sorted(kgr.rbegin(), kgr.rend());
  return {std::abs(fraction - 0.2) <= 0.01 && equivariant && monotone,
          fmt("dropped %.4f, equivariant %s, KGR %.3f %.3f %.3f %.3f %.3f", fraction, equivariant ? "yes" : "no",
              kgr[0], kgr[1], kgr[2], kgr[3], kgr[4])};
}

Outcome reciprocity() {
  ExperimentConfig cfg = bench::desk_profile();
  cfg.ofdm.f_dl_hz = cfg.ofdm.f_ul_hz;
  cfg.snr_list_db = {channel::kNoiseDisabled};
  cfg.train_snr_db = channel::kNoiseDisabled;
  cfg.algorithms = {Algorithm::Identity};
  cfg.randomness.enabled = false;
  const ExperimentReport r = bench::run_pipeline(cfg);
  double worst_ker = 0.0;
  double worst_nmse = 0.0;
  for (const auto& row : r.rows) {
    worst_ker = std::max(worst_ker, row.ker);
    worst_nmse = std::max(worst_nmse, row.nmse);
  }
  return {!r.rows.empty() && worst_ker == 0.0 && worst_nmse == 0.0,
          fmt("%zu cells, max KER %.3g, max NMSE %.3g", r.rows.size(), worst_ker, worst_nmse)};
}

Outcome algorithm_ordering() {
  std::map<std::string, double> ker, nmse;
  for (const ExperimentReport& r : desk.ordering()) {
    for (const std::string alg : {"direct", "dtl", "meta"}) {
      ker[alg] += mean_of(r, alg, ker_of) / static_cast<double>(kSeeds.size());
      nmse[alg] += mean_of(r, alg, nmse_of) / static_cast<double>(kSeeds.size());
    }
  }
  const double reduction = (ker["direct"] - ker["meta"]) / ker["direct"];
  const bool ker_order = ker["meta"] <= ker["dtl"] && ker["dtl"] < ker["direct"];
  const bool nmse_order = nmse["meta"] <= nmse["dtl"] && nmse["dtl"] < nmse["direct"];
  return {ker_order && nmse_order && reduction >= 0.25 && ker["direct"] >= 0.35,
          fmt("KER direct %.4f dtl %.4f meta %.4f (meta reduction %.1f%%); NMSE direct %.4f dtl %.4f meta %.4f",
              ker["direct"], ker["dtl"], ker["meta"], 100.0 * reduction, nmse["direct"], nmse["dtl"],
              nmse["meta"])};
}

Outcome hyperparameter_robustness() {
  const double g1 = desk.default_meta_nmse();
  const double g2 = desk.meta_nmse([](ExperimentConfig& c) { c.meta.config.inner_steps = 2; });
  const double g4 = desk.meta_nmse([](ExperimentConfig& c) { c.meta.config.inner_steps = 4; });
  const double lo = std::min({g1, g2, g4});
  const double hi = std::max({g1, g2, g4});
  const double e32 = g1;  // default E_batch is 32
  const double e4 = desk.meta_nmse([](ExperimentConfig& c) { c.meta.config.task_batch = 4; });
  const bool band = hi <= 1.2 * lo;
  return {band && e32 <= e4, fmt("NMSE G_Tr 1/2/4: %.4f %.4f %.4f (spread %.1f%%); E_batch 32 %.4f vs 4 %.4f", g1,
                                 g2, g4, 100.0 * (hi / lo - 1.0), e32, e4)};
}

Outcome randomness_suite() {
  const double freq = randomness::frequency_test(randomness::BitStream::from_string("1011010101")).p_values[0];
  const double runs = randomness::runs_test(randomness::BitStream::from_string("1001101011")).p_values[0];
  const bool goldens = std::abs(freq - 0.527089) <= 1e-4 && std::abs(runs - 0.147232) <= 1e-4;

  std::mt19937_64 g(718);
  std::vector<randomness::BitStream> keys;
  for (int k = 0; k < 718; ++k) {
    std::vector<std::uint8_t> b(128);
    for (auto& x : b) x = static_cast<std::uint8_t>(g() >> 63);
    keys.emplace_back(std::move(b));
  }
  double prng_worst = 1.0;
  for (const auto& t : randomness::run_suite(keys)) {
    if (t.applicable_count() > 0) prng_worst = std::min(prng_worst, t.pass_ratio());
  }

  double pipeline_worst = 1.0;
  std::string worst_test;
  for (const ExperimentReport& r : desk.ordering()) {
    for (const auto& row : r.randomness) {
      if (row.applicable > 0 && row.pass_ratio < pipeline_worst) {
        pipeline_worst = row.pass_ratio;
        worst_test = row.test;
      }
    }
  }
  return {goldens && prng_worst >= 0.96 && pipeline_worst >= 0.85,
          fmt("freq P %.6f, runs P %.6f, PRNG min ratio %.4f, meta-key min ratio %.4f (%s)", freq, runs, prng_worst,
              pipeline_worst, worst_test.c_str())};
}

Outcome reproducibility() {
  const ExperimentConfig cfg = bench::desk_profile();
  bench::PipelineArtifacts art;
  bench::PipelineOptions opts;
  opts.keep_models = true;
  const std::string a = csv_of(bench::run_pipeline(cfg, &art, opts));
  const std::string b = csv_of(bench::run_pipeline(cfg));
  const bool identical = a == b;

  bool round_trip = !art.models.empty();
  const auto dir = std::filesystem::temp_directory_path() / "fdkg_acceptance_models";
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < art.models.size() && round_trip; ++i) {
    const auto& m = art.models[i];
    const auto path = dir / ("model" + std::to_string(i) + ".fdkgnn");
    model_io::save_model(m.network, m.input_normalizer, path);
    const model_io::StoredModel back = model_io::load_model(path);
    const nn::Matrix x = nn::Matrix::Random(static_cast<Eigen::Index>(m.network.input_dim()), 8);
    round_trip = back.network == m.network && back.normalizer == m.input_normalizer &&
                 back.network.forward(x) == m.network.forward(x);
  }
  std::filesystem::remove_all(dir);
  const auto lines = static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n'));
  return {identical && round_trip, fmt("%zu CSV lines %s, %zu models round-trip %s", lines,
                                       identical ? "byte-identical" : "DIFFER", art.models.size(),
                                       round_trip ? "bit-exact" : "MISMATCH")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"optimizer exactness", optimizer_exactness},
      {"MAML mechanics", maml_mechanics},
      {"quantizer", quantizer},
      {"reciprocity sanity", reciprocity},
      {"algorithm ordering", algorithm_ordering},
      {"hyper-parameter robustness", hyperparameter_robustness},
      {"randomness suite", randomness_suite},
      {"reproducibility", reproducibility},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(n - 1));
  }
  if (selected.empty()) {
    selected.resize(criteria.size());
    std::iota(selected.begin(), selected.end(), std::size_t{0});
  }

  int failures = 0;
  for (std::size_t idx : selected) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[idx].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::printf("criterion %zu %-27s %s  %s  [%.1f s]\n", idx + 1, criteria[idx].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
