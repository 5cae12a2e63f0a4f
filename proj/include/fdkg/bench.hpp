#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdkg/channel_sim.hpp"
#include "fdkg/features.hpp"
#include "fdkg/keygen.hpp"
#include "fdkg/randomness.hpp"
#include "fdkg/strategies.hpp"

// Config-driven experiment runner: dataset generation, training per algorithm,
// key generation and scoring for every (algorithm, target env, SNR) cell.
namespace fdkg::bench {

enum class Algorithm : std::uint8_t {
  Identity,  // no learning: Alice's uplink features used as the prediction
  Direct,
  Joint,
  Dtl,
  Meta,
};

std::string to_string(Algorithm a);
/// Throws ConfigError for an unknown name.
Algorithm algorithm_from_string(const std::string& name);

enum class Profile : std::uint8_t { Paper, Desk };
Profile profile_from_string(const std::string& name);

struct MetaSettings {
  strategies::MetaConfig config{};
  std::size_t n_tasks = 400;
  std::size_t samples_per_task = 100;
  double support_fraction = 0.5;
};

struct RandomnessSettings {
  bool enabled = true;
  Algorithm algorithm = Algorithm::Meta;
  double snr_db = 20.0;
  std::size_t key_bits = 128;
  randomness::SuiteParams suite{};
};

struct ExperimentConfig {
  std::string profile = "paper";
  channel::OfdmConfig ofdm{};
  channel::EnvironmentSpec source{};
  std::vector<channel::EnvironmentSpec> targets;
  std::size_t n_source = 40000;  // N_S
  std::size_t n_adapt = 1000;    // N_Ad
  std::size_t n_test = 4000;     // N_Te; N_T = N_Ad + N_Te
  std::vector<double> snr_list_db{0.0, 10.0, 20.0, 30.0, 40.0};
  double train_snr_db = 20.0;  // SNR of source and adaptation data
  std::vector<Algorithm> algorithms{Algorithm::Direct, Algorithm::Joint, Algorithm::Dtl, Algorithm::Meta};
  keygen::QuantizerConfig quantizer{};
  std::vector<std::size_t> hidden{512, 1024, 1024, 512};
  strategies::TrainConfig train{};  // pre-training, direct and joint
  strategies::AdaptConfig adapt{};  // G_Ad stage of DTL and meta
  MetaSettings meta{};
  RandomnessSettings randomness{};
  std::uint64_t seed = 1;
  double scale_factor = 1.0;  // multiplies sizes and hidden widths, in (0, 1]
  bool record_wall_time = false;

  std::size_t n_target() const { return n_adapt + n_test; }
  /// Input and output width, 2L.
  std::size_t feature_dim() const { return 2 * ofdm.n_subcarriers; }
  std::vector<std::size_t> layer_dims() const;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  /// Copy with scale_factor applied to N_S, N_Ad, N_Te, task count and hidden
  /// widths; the result has scale_factor 1.
  ExperimentConfig scaled() const;
};

/// Table I defaults: 40,000 source and 5,000 target samples per environment.
ExperimentConfig paper_profile();
/// Desk-scale profile for CI: hidden (128,256,256,128), N_S = 4000 in
/// 40 tasks x 100, N_Ad = N_Te = 500, two target environments.
ExperimentConfig desk_profile();
ExperimentConfig profile_config(Profile p);

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
/// Missing fields take the values of the profile named by "profile" (paper
/// when absent).
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

struct NmseResult {
  double value = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // samples with ||x_B||^2 below 1e-12
};

/// Mean over columns of ||pred - actual||^2 / ||actual||^2. Throws
/// DimensionError on mismatched shapes and NumericError when every sample is
/// excluded.
NmseResult nmse(const nn::Matrix& predicted, const nn::Matrix& actual);

struct ReportRow {
  std::string algorithm;
  int env = 0;
  double snr_db = 0.0;  // +inf when noise is disabled
  double nmse = 0.0;
  double ker = 0.0;
  double kgr = 0.0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> sweep_value;  // set in sweep reports

  bool operator==(const ReportRow&) const = default;
};

struct RandomnessRow {
  std::string test;
  std::string params;
  std::size_t n_sets = 0;
  std::size_t applicable = 0;
  double pass_ratio = 0.0;

  bool operator==(const RandomnessRow&) const = default;
};

struct ExperimentReport {
  std::string sweep_axis;  // empty for a single run
  std::vector<ReportRow> rows;
  std::vector<RandomnessRow> randomness;

  bool operator==(const ExperimentReport&) const = default;
};

/// Keys and per-cell details that do not go into the CSV report.
struct PipelineArtifacts {
  struct CellKeys {
    Algorithm algorithm;
    int env;
    double snr_db;
    std::vector<keygen::Bits> alice;  // aligned bits per test sample
    std::vector<keygen::Bits> bob;
  };
  std::vector<CellKeys> keys;
  std::vector<randomness::TestSummary> randomness;
  /// Loss curves keyed by "<algorithm>/<env>/<stage>".
  std::vector<std::pair<std::string, std::vector<double>>> loss_curves;
  /// Final networks keyed like the loss curves, with their input normalizer.
  struct TrainedModel {
    std::string name;
    nn::Network network;
    features::Normalizer input_normalizer;
  };
  std::vector<TrainedModel> models;
};

struct PipelineOptions {
  bool keep_keys = false;
  bool keep_models = false;
  std::size_t threads = 0;  // 0: FDKG_THREADS or hardware concurrency
};

/// Runs every selected algorithm on every target environment and SNR.
/// Deterministic: the report is a pure function of cfg (wall time aside, which
/// is zero unless record_wall_time is set).
ExperimentReport run_pipeline(const ExperimentConfig& cfg, PipelineArtifacts* artifacts = nullptr,
                              const PipelineOptions& options = {});

enum class SweepAxis : std::uint8_t { Snr, NAd, GAd, GTr, EBatch };
std::string to_string(SweepAxis a);
/// Throws ConfigError for an unknown axis.
SweepAxis sweep_axis_from_string(const std::string& name);

/// One pipeline run per value (the snr axis runs once with snr_list = values);
/// all runs share cfg.seed. Rows carry the swept value.
ExperimentReport sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                       const PipelineOptions& options = {});

/// Number of worker threads: FDKG_THREADS when set and positive, otherwise
/// the hardware concurrency.
std::size_t default_thread_count();

/// Floats use 9 significant digits; infinite SNR is written as "inf".
void write_report_csv(std::ostream& out, const ExperimentReport& report);
ExperimentReport read_report_csv(std::istream& in);
void write_randomness_csv(std::ostream& out, const ExperimentReport& report);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

enum class ReportFormat : std::uint8_t { Csv, Json };
/// Throws std::runtime_error when the path cannot be written.
void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace fdkg::bench
