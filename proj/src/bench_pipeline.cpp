#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "fdkg/bench.hpp"
#include "fdkg/error.hpp"
#include "fdkg/features.hpp"

namespace fdkg::bench {

namespace {

using Clock = std::chrono::steady_clock;
using channel::EnvironmentDataset;
using features::Normalizer;
using nn::Network;
using nn::PairedData;

// Stream tags for seeds derived from the experiment seed.
enum SeedTag : std::uint64_t {
  kEnvTag = 0x454e,
  kInitTag = 0x494e,
  kTrainTag = 0x5452,
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs jobs on up to `threads` workers. The first exception in job order is
// rethrown after every worker has finished.
void run_parallel(std::vector<std::function<void()>>& jobs, std::size_t threads) {
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(std::max<std::size_t>(threads, 1), jobs.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Wraps an exception with the cell it came from, keeping its category.
template <class Fn>
void with_context(const std::string& where, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(where + ": " + e.what());
  }
}

channel::EnvironmentSpec seeded(channel::EnvironmentSpec spec, std::uint64_t seed) {
  spec.seed = stream_key(seed, {kEnvTag, spec.seed, static_cast<std::uint64_t>(spec.env_id)});
  return spec;
}

PairedData make_pairs(const features::RawFeatures& raw, const Normalizer& in, const Normalizer& out) {
  return {in.normalize(raw.uplink), out.normalize(raw.downlink)};
}

features::RawFeatures concat(const features::RawFeatures& a, const features::RawFeatures& b) {
  features::RawFeatures out;
  out.uplink.resize(a.uplink.rows(), a.uplink.cols() + b.uplink.cols());
  out.uplink << a.uplink, b.uplink;
  out.downlink.resize(a.downlink.rows(), a.downlink.cols() + b.downlink.cols());
  out.downlink << a.downlink, b.downlink;
  return out;
}

// A trained feature map together with the normalizers of its training set.
struct Mapper {
  std::optional<Network> network;  // empty: identity mapping
  Normalizer input;
  Normalizer output;
  double train_seconds = 0.0;
};

struct CellMetrics {
  double nmse = 0.0;
  double ker = 1.0;
  double kgr = 0.0;
  std::vector<keygen::Bits> alice;
  std::vector<keygen::Bits> bob;
};

CellMetrics evaluate(const Mapper& mapper, const features::RawFeatures& test, const keygen::QuantizerConfig& q,
                     std::size_t n_subcarriers, bool keep_keys) {
  const nn::Matrix target = mapper.output.normalize(test.downlink);
  const nn::Matrix predicted = mapper.network ? mapper.network->forward(mapper.input.normalize(test.uplink))
                                              : mapper.output.normalize(test.uplink);
  CellMetrics m;
  m.nmse = nmse(predicted, target).value;

  std::size_t errors = 0;
  std::size_t aligned = 0;
  const auto dim = static_cast<std::size_t>(target.rows());
  std::vector<double> xa(dim);
  std::vector<double> xb(dim);
  for (Eigen::Index c = 0; c < target.cols(); ++c) {
    Eigen::VectorXd::Map(xa.data(), target.rows()) = predicted.col(c);
    Eigen::VectorXd::Map(xb.data(), target.rows()) = target.col(c);
    const keygen::KeyMaterial ka = keygen::quantize_guardband(xa, q, keygen::Party::Alice);
    const keygen::KeyMaterial kb = keygen::quantize_guardband(xb, q, keygen::Party::Bob);
    keygen::AlignedKeys keys = keygen::align_keys(ka, kb);
    const keygen::KeyErrorRate ker = keygen::key_error_rate(keys.bits_a, keys.bits_b);
    errors += ker.errors;
    aligned += ker.length;
    if (keep_keys) {
      m.alice.push_back(std::move(keys.bits_a));
      m.bob.push_back(std::move(keys.bits_b));
    }
  }
  m.ker = aligned == 0 ? 1.0 : static_cast<double>(errors) / static_cast<double>(aligned);
  m.kgr = keygen::key_generation_ratio(aligned, n_subcarriers) / static_cast<double>(target.cols());
  return m;
}

struct TargetData {
  features::RawFeatures adapt;
  std::vector<features::RawFeatures> test;  // one per SNR in snr_list_db
};

}  // namespace

std::size_t default_thread_count() {
  if (const char* env = std::getenv("FDKG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

ExperimentReport run_pipeline(const ExperimentConfig& input, PipelineArtifacts* artifacts,
                              const PipelineOptions& options) {
  input.validate();
  const ExperimentConfig cfg = input.scaled();
  cfg.validate();
  const std::size_t threads = options.threads > 0 ? options.threads : default_thread_count();
  const std::size_t L = cfg.ofdm.n_subcarriers;
  auto has = [&](Algorithm a) { return std::find(cfg.algorithms.begin(), cfg.algorithms.end(), a) != cfg.algorithms.end(); };

  // Datasets. Test users come first, adaptation users follow; every SNR sees
  // the same users and the same noise realizations up to scale.
  const channel::Environment source_env(seeded(cfg.source, cfg.seed));
  const features::RawFeatures source =
      features::extract_features(channel::generate_env_dataset(source_env, cfg.n_source, cfg.train_snr_db, cfg.ofdm));
  std::vector<TargetData> targets(cfg.targets.size());
  {
    std::vector<std::function<void()>> jobs;
    for (std::size_t e = 0; e < cfg.targets.size(); ++e) {
      jobs.emplace_back([&, e] {
        const channel::Environment env(seeded(cfg.targets[e], cfg.seed));
        if (cfg.n_adapt > 0) {
          targets[e].adapt = features::extract_features(
              channel::generate_env_dataset(env, cfg.n_adapt, cfg.train_snr_db, cfg.ofdm, cfg.n_test));
        }
        for (double snr : cfg.snr_list_db) {
          targets[e].test.push_back(
              features::extract_features(channel::generate_env_dataset(env, cfg.n_test, snr, cfg.ofdm, 0)));
        }
      });
    }
    run_parallel(jobs, threads);
  }

  const Normalizer source_in = features::fit_normalizer(source.uplink);
  const Normalizer source_out = features::fit_normalizer(source.downlink);
  const PairedData source_pairs = make_pairs(source, source_in, source_out);
  const Network init = nn::init_network(cfg.layer_dims(), stream_key(cfg.seed, {kInitTag}));
  // Keyed by env_id rather than list position so a cell run alone reproduces
  // the same numbers.
  auto train_seed = [&](Algorithm a, int env_id, std::uint64_t stage) {
    return stream_key(cfg.seed, {kTrainTag, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(env_id), stage});
  };

  std::mutex curves_mutex;
  std::vector<std::pair<std::string, std::vector<double>>> curves;
  auto record_curve = [&](std::string name, std::vector<double> values) {
    if (!artifacts) return;
    const std::lock_guard lock(curves_mutex);
    curves.emplace_back(std::move(name), std::move(values));
  };

  // Stage 1: source-side training, independent of the target environment.
  std::optional<Network> pretrained;  // direct model and DTL initialization
  std::optional<Network> meta_init;
  double pretrain_seconds = 0.0;
  double meta_seconds = 0.0;
  std::map<std::size_t, Mapper> joint;
  {
    std::vector<std::function<void()>> jobs;
    if (has(Algorithm::Direct) || has(Algorithm::Dtl)) {
      jobs.emplace_back([&] {
        with_context("pretrain", [&] {
          const auto start = Clock::now();
          strategies::TrainConfig tc = cfg.train;
          tc.seed = train_seed(Algorithm::Direct, cfg.source.env_id, 0);
          auto result = strategies::train_supervised(init, source_pairs, tc);
          pretrained = std::move(result.model);
          pretrain_seconds = seconds_since(start);
          record_curve("direct/source/pretrain", std::move(result.loss_history));
        });
      });
    }
    if (has(Algorithm::Meta)) {
      jobs.emplace_back([&] {
        with_context("meta-train", [&] {
          const auto start = Clock::now();
          strategies::MetaConfig mc = cfg.meta.config;
          mc.seed = train_seed(Algorithm::Meta, cfg.source.env_id, 0);
          const strategies::MetaTaskSet tasks = strategies::partition_source_into_tasks(
              source_pairs.size(), cfg.meta.n_tasks, cfg.meta.samples_per_task, cfg.meta.support_fraction, mc.seed);
          auto result = strategies::meta_train(init, source_pairs, tasks, mc);
          meta_init = std::move(result.model);
          meta_seconds = seconds_since(start);
          record_curve("meta/source/meta_train", std::move(result.loss_history));
        });
      });
    }
    if (has(Algorithm::Joint)) {
      for (std::size_t e = 0; e < cfg.targets.size(); ++e) joint[e];
      for (std::size_t e = 0; e < cfg.targets.size(); ++e) {
        jobs.emplace_back([&, e] {
          with_context("joint/env " + std::to_string(cfg.targets[e].env_id), [&] {
            const auto start = Clock::now();
            const features::RawFeatures combined = concat(source, targets[e].adapt);
            Mapper& m = joint.at(e);
            m.input = features::fit_normalizer(combined.uplink);
            m.output = features::fit_normalizer(combined.downlink);
            strategies::TrainConfig tc = cfg.train;
            tc.seed = train_seed(Algorithm::Joint, cfg.targets[e].env_id, 0);
            auto result = strategies::train_supervised(init, make_pairs(combined, m.input, m.output), tc);
            m.network = std::move(result.model);
            m.train_seconds = seconds_since(start);
            record_curve("joint/" + std::to_string(cfg.targets[e].env_id) + "/train", std::move(result.loss_history));
          });
        });
      }
    }
    run_parallel(jobs, threads);
  }

  // Stage 2: per-target adaptation and assembly of every mapper.
  std::map<std::pair<Algorithm, std::size_t>, Mapper> mappers;
  {
    for (Algorithm a : cfg.algorithms) {
      for (std::size_t e = 0; e < cfg.targets.size(); ++e) mappers[{a, e}];
    }
    std::vector<std::function<void()>> jobs;
    for (Algorithm a : cfg.algorithms) {
      for (std::size_t e = 0; e < cfg.targets.size(); ++e) {
        jobs.emplace_back([&, a, e] {
          const std::string env_name = std::to_string(cfg.targets[e].env_id);
          with_context(to_string(a) + "/env " + env_name, [&] {
            Mapper& m = mappers.at({a, e});
            switch (a) {
              case Algorithm::Identity:
                m.output = source_out;
                break;
              case Algorithm::Direct:
                m = Mapper{pretrained, source_in, source_out, pretrain_seconds};
                break;
              case Algorithm::Joint:
                m = joint.at(e);
                break;
              case Algorithm::Dtl:
              case Algorithm::Meta: {
                const auto start = Clock::now();
                strategies::AdaptConfig ac = cfg.adapt;
                ac.seed = train_seed(a, cfg.targets[e].env_id, 1);
                const Network& from = a == Algorithm::Dtl ? *pretrained : *meta_init;
                auto result = strategies::adapt(from, make_pairs(targets[e].adapt, source_in, source_out), ac);
                const double before = a == Algorithm::Dtl ? pretrain_seconds : meta_seconds;
                m = Mapper{std::move(result.model), source_in, source_out, before + seconds_since(start)};
                record_curve(to_string(a) + "/" + env_name + "/adapt", std::move(result.loss_history));
                break;
              }
            }
          });
        });
      }
    }
    run_parallel(jobs, threads);
  }

  // Stage 3: scoring of every (algorithm, env, SNR) cell.
  struct Cell {
    Algorithm algorithm;
    std::size_t env;
    std::size_t snr;
  };
  std::vector<Cell> cells;
  for (Algorithm a : cfg.algorithms) {
    for (std::size_t e = 0; e < cfg.targets.size(); ++e) {
      for (std::size_t s = 0; s < cfg.snr_list_db.size(); ++s) cells.push_back({a, e, s});
    }
  }
  auto wants_keys = [&](const Cell& c) {
    if (artifacts && options.keep_keys) return true;
    return cfg.randomness.enabled && c.algorithm == cfg.randomness.algorithm &&
           cfg.snr_list_db[c.snr] == cfg.randomness.snr_db;
  };
  std::vector<CellMetrics> metrics(cells.size());
  std::vector<double> eval_seconds(cells.size(), 0.0);
  {
    std::vector<std::function<void()>> jobs;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      jobs.emplace_back([&, i] {
        const Cell& c = cells[i];
        with_context(to_string(c.algorithm) + "/env " + std::to_string(cfg.targets[c.env].env_id) + "/snr " +
                         std::to_string(cfg.snr_list_db[c.snr]),
                     [&] {
                       const auto start = Clock::now();
                       metrics[i] = evaluate(mappers.at({c.algorithm, c.env}), targets[c.env].test[c.snr],
                                             cfg.quantizer, L, wants_keys(c));
                       eval_seconds[i] = seconds_since(start);
                     });
      });
    }
    run_parallel(jobs, threads);
  }

  ExperimentReport report;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    const CellMetrics& m = metrics[i];
    if (!std::isfinite(m.nmse) || !std::isfinite(m.ker) || !std::isfinite(m.kgr)) {
      throw NumericError("non-finite metric in cell " + to_string(c.algorithm));
    }
    ReportRow row;
    row.algorithm = to_string(c.algorithm);
    row.env = cfg.targets[c.env].env_id;
    row.snr_db = cfg.snr_list_db[c.snr];
    row.nmse = m.nmse;
    row.ker = m.ker;
    row.kgr = m.kgr;
    row.wall_time_s = cfg.record_wall_time ? mappers.at({c.algorithm, c.env}).train_seconds + eval_seconds[i] : 0.0;
    row.seed = cfg.seed;
    report.rows.push_back(std::move(row));
  }

  // Randomness of Alice's aligned key bits, concatenated over target
  // environments in order and cut into key_bits-long key sets.
  std::vector<randomness::TestSummary> suite;
  if (cfg.randomness.enabled) {
    std::vector<randomness::BitStream> streams;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const Cell& c = cells[i];
      if (c.algorithm != cfg.randomness.algorithm || cfg.snr_list_db[c.snr] != cfg.randomness.snr_db) continue;
      for (const keygen::Bits& bits : metrics[i].alice) {
        if (!bits.empty()) streams.emplace_back(bits);
      }
    }
    const std::vector<randomness::BitStream> keys = randomness::rechunk(streams, cfg.randomness.key_bits);
    if (!keys.empty()) {
      suite = randomness::run_suite(keys, cfg.randomness.suite);
      for (const randomness::TestSummary& s : suite) {
        report.randomness.push_back({s.test_name, s.params, s.results.size(), s.applicable_count(), s.pass_ratio()});
      }
    }
  }

  if (artifacts) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const Cell& c = cells[i];
      if (!options.keep_keys) continue;
      artifacts->keys.push_back({c.algorithm, cfg.targets[c.env].env_id, cfg.snr_list_db[c.snr],
                                 std::move(metrics[i].alice), std::move(metrics[i].bob)});
    }
    artifacts->randomness = std::move(suite);
    std::sort(curves.begin(), curves.end());
    artifacts->loss_curves = std::move(curves);
    if (options.keep_models) {
      for (const auto& [key, m] : mappers) {
        if (!m.network) continue;
        artifacts->models.push_back(
            {to_string(key.first) + "/" + std::to_string(cfg.targets[key.second].env_id), *m.network, m.input});
      }
    }
  }
  return report;
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Snr: return "snr";
    case SweepAxis::NAd: return "n_ad";
    case SweepAxis::GAd: return "g_ad";
    case SweepAxis::GTr: return "g_tr";
    case SweepAxis::EBatch: return "e_batch";
  }
  throw ConfigError("unknown sweep axis value");
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  for (SweepAxis a : {SweepAxis::Snr, SweepAxis::NAd, SweepAxis::GAd, SweepAxis::GTr, SweepAxis::EBatch}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown sweep axis \"" + name + "\" (expected snr, n_ad, g_ad, g_tr or e_batch)");
}

ExperimentReport sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                       const PipelineOptions& options) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  ExperimentReport out;
  out.sweep_axis = to_string(axis);
  if (axis == SweepAxis::Snr) {
    ExperimentConfig c = cfg;
    c.snr_list_db = values;
    c.randomness.enabled = false;
    for (ReportRow& row : run_pipeline(c, nullptr, options).rows) {
      row.sweep_value = row.snr_db;
      out.rows.push_back(std::move(row));
    }
    return out;
  }
  for (double v : values) {
    if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError(out.sweep_axis + " values must be non-negative integers");
    const auto n = static_cast<std::size_t>(v);
    ExperimentConfig c = cfg;
    c.randomness.enabled = false;
    switch (axis) {
      case SweepAxis::NAd: c.n_adapt = n; break;
      case SweepAxis::GAd: c.adapt.steps = n; break;
      case SweepAxis::GTr: c.meta.config.inner_steps = n; break;
      case SweepAxis::EBatch: c.meta.config.task_batch = n; break;
      case SweepAxis::Snr: break;
    }
    for (ReportRow& row : run_pipeline(c, nullptr, options).rows) {
      row.sweep_value = v;
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace fdkg::bench
