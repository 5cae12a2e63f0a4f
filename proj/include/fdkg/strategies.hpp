#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <vector>

#include "fdkg/error.hpp"
#include "fdkg/neuralnet.hpp"
#include "fdkg/rng.hpp"

// Training regimes for the feature-mapping network: supervised (pre-)training,
// adaptation (fine-tuning) and first-order MAML meta-training.
//
// Everything is written against the TrainableModel concept so the same code
// drives the full network and the scalar models used in hand-checked tests.
namespace fdkg::strategies {

template <class M>
concept TrainableModel = std::copyable<M> &&
    requires(M m, const M cm, const nn::PairedData& d, std::span<const std::size_t> rows,
             std::span<double> g) {
      { m.parameters() } -> std::same_as<std::span<double>>;
      { cm.parameter_count() } -> std::convertible_to<std::size_t>;
      { cm.loss_and_gradient(d, rows, g) } -> std::convertible_to<double>;
    };

/// Stop when the best of the last `window` evaluations improves on the
/// evaluation `window` steps back by less than `min_relative_improvement`.
struct PlateauRule {
  bool enabled = true;
  std::size_t eval_interval = 25;  // iterations averaged into one evaluation
  std::size_t window = 20;
  double min_relative_improvement = 1e-4;
};

class PlateauDetector {
 public:
  explicit PlateauDetector(PlateauRule rule) : rule_(rule) {}

  /// Records one evaluation; returns true once the plateau condition holds.
  bool push(double value) {
    history_.push_back(value);
    if (history_.size() > rule_.window + 1) history_.pop_front();
    if (!rule_.enabled || history_.size() < rule_.window + 1) return false;
    const double reference = history_.front();
    const double best = *std::min_element(history_.begin() + 1, history_.end());
    const double scale = std::max(std::abs(reference), 1e-300);
    return (reference - best) / scale < rule_.min_relative_improvement;
  }

 private:
  PlateauRule rule_;
  std::deque<double> history_;
};

/// Epoch-wise shuffled minibatches. Batches never straddle an epoch; a dataset
/// smaller than the batch size yields the whole (shuffled) dataset each time.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
      : order_(n), batch_(std::min(batch_size, n)), seed_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::span<const std::size_t> next() {
    if (cursor_ + batch_ > order_.size()) reshuffle();
    std::span<const std::size_t> out(order_.data() + cursor_, batch_);
    cursor_ += batch_;
    return out;
  }

 private:
  void reshuffle() {
    CounterRng rng = CounterRng::for_stream(seed_, {0x5348 /* "SH" */, epoch_++});
    shuffle(std::span<std::size_t>(order_), rng);
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
};

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::size_t max_iterations = 2000;
  std::uint64_t seed = 0;
  PlateauRule plateau{};

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  }
};

/// Fine-tuning stage shared by DTL and meta-learning.
struct AdaptConfig {
  std::size_t steps = 300;  // G_Ad
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
};

struct MetaConfig {
  double inner_lr = 1e-3;        // alpha
  double outer_lr = 1e-3;        // gamma
  std::size_t inner_steps = 1;   // G_Tr
  std::size_t task_batch = 32;   // E_batch
  std::size_t max_iterations = 100;
  std::uint64_t seed = 0;
  PlateauRule plateau{true, 1, 20, 1e-4};

  void validate() const {
    if (!(inner_lr >= 0.0) || !(outer_lr > 0.0)) throw ConfigError("meta learning rates must be positive");
    if (inner_steps < 1) throw ConfigError("inner_steps (G_Tr) must be >= 1");
    if (task_batch < 1) throw ConfigError("task_batch (E_batch) must be >= 1");
  }
};

struct MetaTask {
  std::vector<std::size_t> support;
  std::vector<std::size_t> query;
};

struct MetaTaskSet {
  std::vector<MetaTask> tasks;
  std::size_t samples_per_task = 0;

  std::size_t size() const { return tasks.size(); }
};

template <class M>
struct TrainResult {
  M model;
  std::vector<double> loss_history;  // one entry per evaluation
  std::size_t iterations = 0;
  bool plateaued = false;
};

/// Disjoint partition of the first n_tasks * samples_per_task source samples
/// into tasks; each task's samples are split support-first by support_fraction.
MetaTaskSet partition_source_into_tasks(std::size_t source_size, std::size_t n_tasks,
                                        std::size_t samples_per_task, double support_fraction,
                                        std::uint64_t seed);

/// Minibatch ADAM on the batch loss until max_iterations or a loss plateau.
template <TrainableModel M>
TrainResult<M> train_supervised(M init, const nn::PairedData& data, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult<M> result{std::move(init), {}, 0, false};
  if (cfg.max_iterations == 0) return result;
  if (data.size() == 0) throw ConfigError("train_supervised: empty dataset");

  M& model = result.model;
  BatchSampler sampler(data.size(), cfg.batch_size, cfg.seed);
  nn::AdamState adam(model.parameter_count());
  nn::Gradients grads(model.parameter_count());
  PlateauDetector plateau(cfg.plateau);
  const std::size_t interval = std::max<std::size_t>(cfg.plateau.eval_interval, 1);

  double window_sum = 0.0;
  std::size_t window_count = 0;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    window_sum += model.loss_and_gradient(data, sampler.next(), grads);
    nn::adam_step(model.parameters(), grads, adam, cfg.learning_rate);
    ++result.iterations;
    if (++window_count == interval) {
      const double eval = window_sum / static_cast<double>(window_count);
      result.loss_history.push_back(eval);
      window_sum = 0.0;
      window_count = 0;
      if (plateau.push(eval)) {
        result.plateaued = true;
        break;
      }
    }
  }
  return result;
}

/// Initializes from `pretrained` and runs exactly cfg.steps ADAM updates on the
/// adaptation set. loss_history holds the minibatch loss of every step.
template <TrainableModel M>
TrainResult<M> adapt(M pretrained, const nn::PairedData& adapt_set, const AdaptConfig& cfg) {
  TrainResult<M> result{std::move(pretrained), {}, 0, false};
  if (cfg.steps == 0) return result;
  if (adapt_set.size() == 0) throw ConfigError("adapt: empty adaptation set");
  M& model = result.model;
  BatchSampler sampler(adapt_set.size(), cfg.batch_size, cfg.seed);
  nn::AdamState adam(model.parameter_count());
  nn::Gradients grads(model.parameter_count());
  result.loss_history.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    result.loss_history.push_back(model.loss_and_gradient(adapt_set, sampler.next(), grads));
    nn::adam_step(model.parameters(), grads, adam, cfg.learning_rate);
    ++result.iterations;
  }
  return result;
}

/// Intra-task update: `steps` plain gradient-descent steps with rate alpha on
/// the full support set, starting from the global parameters.
template <TrainableModel M>
M inner_update(const M& global, const nn::PairedData& data, std::span<const std::size_t> support,
               double alpha, std::size_t steps) {
  if (support.empty()) throw ConfigError("inner_update: empty support set");
  M local = global;
  nn::Gradients grads(local.parameter_count());
  for (std::size_t g = 0; g < steps; ++g) {
    local.loss_and_gradient(data, support, grads);
    nn::sgd_step(local.parameters(), grads, alpha);
  }
  return local;
}

/// Task indices drawn for one meta-iteration (without replacement).
std::vector<std::size_t> sample_task_batch(std::size_t n_tasks, std::size_t task_batch,
                                           std::uint64_t seed, std::uint64_t iteration);

/// One cross-task step: returns L_total at the current parameters and writes
/// the first-order meta-gradient (sum of query gradients at the adapted
/// parameters) into `meta_grad`.
template <TrainableModel M>
double meta_gradient(const M& global, const nn::PairedData& source, const MetaTaskSet& tasks,
                     std::span<const std::size_t> batch, const MetaConfig& cfg,
                     std::span<double> meta_grad) {
  std::fill(meta_grad.begin(), meta_grad.end(), 0.0);
  nn::Gradients task_grad(global.parameter_count());
  double total = 0.0;
  for (std::size_t index : batch) {
    const MetaTask& task = tasks.tasks.at(index);
    const M adapted = inner_update(global, source, task.support, cfg.inner_lr, cfg.inner_steps);
    total += adapted.loss_and_gradient(source, task.query, task_grad);
    for (std::size_t i = 0; i < meta_grad.size(); ++i) meta_grad[i] += task_grad[i];
  }
  return total;
}

/// First-order MAML. loss_history holds L_total of every meta-iteration.
template <TrainableModel M>
TrainResult<M> meta_train(M init, const nn::PairedData& source, const MetaTaskSet& tasks,
                          const MetaConfig& cfg) {
  cfg.validate();
  if (cfg.task_batch > tasks.size()) {
    throw ConfigError("task_batch (E_batch) exceeds the number of tasks");
  }
  TrainResult<M> result{std::move(init), {}, 0, false};
  M& global = result.model;
  nn::AdamState adam(global.parameter_count());
  nn::Gradients meta_grad(global.parameter_count());
  PlateauDetector plateau(cfg.plateau);
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    const std::vector<std::size_t> batch = sample_task_batch(tasks.size(), cfg.task_batch, cfg.seed, it);
    const double total = meta_gradient(global, source, tasks, batch, cfg, meta_grad);
    nn::adam_step(global.parameters(), meta_grad, adam, cfg.outer_lr);
    ++result.iterations;
    result.loss_history.push_back(total);
    if (plateau.push(total)) {
      result.plateaued = true;
      break;
    }
  }
  return result;
}

}  // namespace fdkg::strategies
