#include <cmath>
#include <fstream>
#include <set>

#include "fdkg/bench.hpp"
#include "fdkg/error.hpp"
#include "fdkg/serialization.hpp"

namespace fdkg::bench {

namespace {

using nlohmann::json;

constexpr std::pair<Algorithm, const char*> kAlgorithmNames[] = {
    {Algorithm::Identity, "identity"}, {Algorithm::Direct, "direct"}, {Algorithm::Joint, "joint"},
    {Algorithm::Dtl, "dtl"},           {Algorithm::Meta, "meta"},
};

// Rejects keys outside `allowed` so that typos in config files surface.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!names.contains(item.key())) throw ConfigError("unknown field \"" + item.key() + "\" in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json plateau_to_json(const strategies::PlateauRule& p) {
  return {{"enabled", p.enabled},
          {"eval_interval", p.eval_interval},
          {"window", p.window},
          {"min_relative_improvement", p.min_relative_improvement}};
}

void plateau_from_json(const json& j, strategies::PlateauRule& p, const std::string& where) {
  check_keys(j, {"enabled", "eval_interval", "window", "min_relative_improvement"}, where);
  read(j, "enabled", p.enabled);
  read(j, "eval_interval", p.eval_interval);
  read(j, "window", p.window);
  read(j, "min_relative_improvement", p.min_relative_improvement);
}

channel::EnvironmentSpec env(int id, std::uint64_t seed) {
  channel::EnvironmentSpec spec;
  spec.env_id = id;
  spec.min_paths = 56;
  spec.max_paths = 64;
  spec.delay_spread_s = 200e-9;
  spec.gain_decay = 4.0;
  spec.delay_jitter_s = 0.1e-9;
  spec.gain_floor = 0.5;
  spec.seed = seed;
  return spec;
}

std::size_t scale_count(std::size_t n, double factor) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * factor)));
}

}  // namespace

std::string to_string(Algorithm a) {
  for (const auto& [alg, name] : kAlgorithmNames) {
    if (alg == a) return name;
  }
  throw ConfigError("unknown algorithm value");
}

Algorithm algorithm_from_string(const std::string& name) {
  for (const auto& [alg, text] : kAlgorithmNames) {
    if (name == text) return alg;
  }
  throw ConfigError("unknown algorithm \"" + name + "\"");
}

Profile profile_from_string(const std::string& name) {
  if (name == "paper") return Profile::Paper;
  if (name == "desk") return Profile::Desk;
  throw ConfigError("unknown profile \"" + name + "\" (expected paper or desk)");
}

std::vector<std::size_t> ExperimentConfig::layer_dims() const {
  std::vector<std::size_t> dims{feature_dim()};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(feature_dim());
  return dims;
}

void ExperimentConfig::validate() const {
  ofdm.validate(/*allow_tdd=*/true);
  source.validate();
  if (targets.empty()) throw ConfigError("at least one target environment is required");
  std::set<int> ids{source.env_id};
  for (const auto& t : targets) {
    t.validate();
    if (!ids.insert(t.env_id).second) throw ConfigError("environment ids must be unique");
  }
  if (n_source < 1 || n_test < 1) throw ConfigError("n_source and n_test must be >= 1");
  if (snr_list_db.empty()) throw ConfigError("snr_list_db must not be empty");
  for (double snr : snr_list_db) {
    if (std::isnan(snr) || snr == -INFINITY) throw ConfigError("snr values must be numbers or null");
  }
  if (algorithms.empty()) throw ConfigError("no algorithms selected");
  std::set<Algorithm> seen;
  bool uses_adapt = false;
  bool uses_meta = false;
  for (Algorithm a : algorithms) {
    if (!seen.insert(a).second) throw ConfigError("algorithm listed twice: " + to_string(a));
    uses_adapt = uses_adapt || a == Algorithm::Joint || a == Algorithm::Dtl || a == Algorithm::Meta;
    uses_meta = uses_meta || a == Algorithm::Meta;
  }
  if (uses_adapt && n_adapt < 1) throw ConfigError("n_adapt must be >= 1 for joint, dtl and meta");
  quantizer.validate();
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("hidden widths must be > 0");
  }
  train.validate();
  if (adapt.batch_size == 0 || !(adapt.learning_rate > 0.0)) throw ConfigError("invalid adapt settings");
  if (uses_meta) {
    meta.config.validate();
    if (meta.n_tasks * meta.samples_per_task > n_source) {
      throw ConfigError("meta tasks need " + std::to_string(meta.n_tasks * meta.samples_per_task) +
                        " source samples but n_source is " + std::to_string(n_source));
    }
    if (meta.config.task_batch > meta.n_tasks) throw ConfigError("task_batch (E_batch) exceeds n_tasks");
    if (!(meta.support_fraction > 0.0 && meta.support_fraction < 1.0)) {
      throw ConfigError("support_fraction must be in (0, 1)");
    }
  }
  if (randomness.key_bits == 0) throw ConfigError("randomness key_bits must be > 0");
  if (!(scale_factor > 0.0 && scale_factor <= 1.0)) throw ConfigError("scale_factor must be in (0, 1]");
}

ExperimentConfig ExperimentConfig::scaled() const {
  ExperimentConfig out = *this;
  if (scale_factor == 1.0) return out;
  out.n_source = scale_count(n_source, scale_factor);
  out.n_adapt = n_adapt == 0 ? 0 : scale_count(n_adapt, scale_factor);
  out.n_test = scale_count(n_test, scale_factor);
  out.meta.n_tasks = std::max(scale_count(meta.n_tasks, scale_factor), meta.config.task_batch);
  for (std::size_t& h : out.hidden) h = scale_count(h, scale_factor);
  out.scale_factor = 1.0;
  return out;
}

ExperimentConfig paper_profile() {
  ExperimentConfig cfg;
  cfg.profile = "paper";
  cfg.source = env(1, 1);
  cfg.targets = {env(2, 2), env(3, 3)};
  cfg.n_source = 40000;
  cfg.n_adapt = 1000;
  cfg.n_test = 4000;
  cfg.hidden = {512, 1024, 1024, 512};
  cfg.train.max_iterations = 20000;
  cfg.meta.n_tasks = 400;
  cfg.meta.samples_per_task = 100;
  return cfg;
}

ExperimentConfig desk_profile() {
  ExperimentConfig cfg = paper_profile();
  cfg.profile = "desk";
  cfg.n_source = 4000;
  cfg.n_adapt = 500;
  cfg.n_test = 500;
  cfg.hidden = {128, 256, 256, 128};
  cfg.train.max_iterations = 2000;
  cfg.meta.n_tasks = 40;
  cfg.meta.samples_per_task = 100;
  return cfg;
}

ExperimentConfig profile_config(Profile p) { return p == Profile::Paper ? paper_profile() : desk_profile(); }

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  json algorithms = json::array();
  for (Algorithm a : cfg.algorithms) algorithms.push_back(to_string(a));
  json snrs = json::array();
  for (double s : cfg.snr_list_db) snrs.push_back(channel::snr_to_json(s));
  json targets = json::array();
  for (const auto& t : cfg.targets) targets.push_back(t);
  j = json{
      {"profile", cfg.profile},
      {"seed", cfg.seed},
      {"scale_factor", cfg.scale_factor},
      {"record_wall_time", cfg.record_wall_time},
      {"ofdm", cfg.ofdm},
      {"environments", {{"source", cfg.source}, {"targets", targets}}},
      {"sizes", {{"n_source", cfg.n_source}, {"n_adapt", cfg.n_adapt}, {"n_test", cfg.n_test}}},
      {"snr_list_db", snrs},
      {"train_snr_db", channel::snr_to_json(cfg.train_snr_db)},
      {"algorithms", algorithms},
      {"quantizer", {{"epsilon", cfg.quantizer.epsilon}}},
      {"network", {{"hidden", cfg.hidden}}},
      {"train",
       {{"batch_size", cfg.train.batch_size},
        {"learning_rate", cfg.train.learning_rate},
        {"max_iterations", cfg.train.max_iterations},
        {"plateau", plateau_to_json(cfg.train.plateau)}}},
      {"adapt",
       {{"steps", cfg.adapt.steps}, {"learning_rate", cfg.adapt.learning_rate}, {"batch_size", cfg.adapt.batch_size}}},
      {"meta",
       {{"inner_lr", cfg.meta.config.inner_lr},
        {"outer_lr", cfg.meta.config.outer_lr},
        {"inner_steps", cfg.meta.config.inner_steps},
        {"task_batch", cfg.meta.config.task_batch},
        {"max_iterations", cfg.meta.config.max_iterations},
        {"n_tasks", cfg.meta.n_tasks},
        {"samples_per_task", cfg.meta.samples_per_task},
        {"support_fraction", cfg.meta.support_fraction},
        {"plateau", plateau_to_json(cfg.meta.config.plateau)}}},
      {"randomness",
       {{"enabled", cfg.randomness.enabled},
        {"algorithm", to_string(cfg.randomness.algorithm)},
        {"snr_db", channel::snr_to_json(cfg.randomness.snr_db)},
        {"key_bits", cfg.randomness.key_bits},
        {"block_len", cfg.randomness.suite.block_len},
        {"apen_m", cfg.randomness.suite.apen_m},
        {"serial_m", cfg.randomness.suite.serial_m},
        {"dft_min_bits", cfg.randomness.suite.dft_min_bits}}},
  };
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  check_keys(j,
             {"profile", "seed", "scale_factor", "record_wall_time", "ofdm", "environments", "sizes", "snr_list_db",
              "train_snr_db", "algorithms", "quantizer", "network", "train", "adapt", "meta", "randomness"},
             "config");
  cfg = profile_config(profile_from_string(j.value("profile", std::string("paper"))));
  read(j, "seed", cfg.seed);
  read(j, "scale_factor", cfg.scale_factor);
  read(j, "record_wall_time", cfg.record_wall_time);
  if (j.contains("ofdm")) {
    check_keys(j.at("ofdm"), {"f_ul_hz", "f_dl_hz", "n_subcarriers", "bandwidth_hz"}, "ofdm");
    channel::from_json(j.at("ofdm"), cfg.ofdm);
  }
  if (j.contains("environments")) {
    const json& e = j.at("environments");
    check_keys(e, {"source", "targets"}, "environments");
    const std::initializer_list<const char*> env_keys = {"env_id",         "n_paths_range", "delay_spread_s", "gain_decay",
                                                         "delay_jitter_s", "gain_floor",    "seed"};
    if (e.contains("source")) {
      check_keys(e.at("source"), env_keys, "environments.source");
      channel::from_json(e.at("source"), cfg.source);
    }
    if (e.contains("targets")) {
      // Each target starts from the profile's first target so that partial
      // entries only override what they name.
      const channel::EnvironmentSpec base = cfg.targets.front();
      cfg.targets.clear();
      for (const json& t : e.at("targets")) {
        check_keys(t, env_keys, "environments.targets[]");
        channel::EnvironmentSpec spec = base;
        channel::from_json(t, spec);
        cfg.targets.push_back(spec);
      }
    }
  }
  if (j.contains("sizes")) {
    const json& s = j.at("sizes");
    check_keys(s, {"n_source", "n_adapt", "n_test"}, "sizes");
    read(s, "n_source", cfg.n_source);
    read(s, "n_adapt", cfg.n_adapt);
    read(s, "n_test", cfg.n_test);
  }
  if (j.contains("snr_list_db")) {
    cfg.snr_list_db.clear();
    for (const json& v : j.at("snr_list_db")) cfg.snr_list_db.push_back(channel::snr_from_json(v));
  }
  if (j.contains("train_snr_db")) cfg.train_snr_db = channel::snr_from_json(j.at("train_snr_db"));
  if (j.contains("algorithms")) {
    cfg.algorithms.clear();
    for (const json& v : j.at("algorithms")) cfg.algorithms.push_back(algorithm_from_string(v.get<std::string>()));
  }
  if (j.contains("quantizer")) {
    check_keys(j.at("quantizer"), {"epsilon"}, "quantizer");
    read(j.at("quantizer"), "epsilon", cfg.quantizer.epsilon);
  }
  if (j.contains("network")) {
    check_keys(j.at("network"), {"hidden"}, "network");
    read(j.at("network"), "hidden", cfg.hidden);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"batch_size", "learning_rate", "max_iterations", "plateau"}, "train");
    read(t, "batch_size", cfg.train.batch_size);
    read(t, "learning_rate", cfg.train.learning_rate);
    read(t, "max_iterations", cfg.train.max_iterations);
    if (t.contains("plateau")) plateau_from_json(t.at("plateau"), cfg.train.plateau, "train.plateau");
  }
  if (j.contains("adapt")) {
    const json& a = j.at("adapt");
    check_keys(a, {"steps", "learning_rate", "batch_size"}, "adapt");
    read(a, "steps", cfg.adapt.steps);
    read(a, "learning_rate", cfg.adapt.learning_rate);
    read(a, "batch_size", cfg.adapt.batch_size);
  }
  if (j.contains("meta")) {
    const json& m = j.at("meta");
    check_keys(m,
               {"inner_lr", "outer_lr", "inner_steps", "task_batch", "max_iterations", "n_tasks", "samples_per_task",
                "support_fraction", "plateau"},
               "meta");
    read(m, "inner_lr", cfg.meta.config.inner_lr);
    read(m, "outer_lr", cfg.meta.config.outer_lr);
    read(m, "inner_steps", cfg.meta.config.inner_steps);
    read(m, "task_batch", cfg.meta.config.task_batch);
    read(m, "max_iterations", cfg.meta.config.max_iterations);
    read(m, "n_tasks", cfg.meta.n_tasks);
    read(m, "samples_per_task", cfg.meta.samples_per_task);
    read(m, "support_fraction", cfg.meta.support_fraction);
    if (m.contains("plateau")) plateau_from_json(m.at("plateau"), cfg.meta.config.plateau, "meta.plateau");
  }
  if (j.contains("randomness")) {
    const json& r = j.at("randomness");
    check_keys(r, {"enabled", "algorithm", "snr_db", "key_bits", "block_len", "apen_m", "serial_m", "dft_min_bits"},
               "randomness");
    read(r, "enabled", cfg.randomness.enabled);
    if (r.contains("algorithm")) cfg.randomness.algorithm = algorithm_from_string(r.at("algorithm").get<std::string>());
    if (r.contains("snr_db")) cfg.randomness.snr_db = channel::snr_from_json(r.at("snr_db"));
    read(r, "key_bits", cfg.randomness.key_bits);
    read(r, "block_len", cfg.randomness.suite.block_len);
    read(r, "apen_m", cfg.randomness.suite.apen_m);
    read(r, "serial_m", cfg.randomness.suite.serial_m);
    read(r, "dft_min_bits", cfg.randomness.suite.dft_min_bits);
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    const json j = json::parse(in);
    ExperimentConfig cfg = j.get<ExperimentConfig>();
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fdkg::bench
