#include "fdkg/strategies.hpp"

#include <cmath>

namespace fdkg::strategies {

MetaTaskSet partition_source_into_tasks(std::size_t source_size, std::size_t n_tasks,
                                        std::size_t samples_per_task, double support_fraction,
                                        std::uint64_t seed) {
  if (n_tasks == 0 || samples_per_task < 2) {
    throw ConfigError("need at least one task with two samples");
  }
  if (!(support_fraction > 0.0 && support_fraction < 1.0)) {
    throw ConfigError("support_fraction must be in (0, 1)");
  }
  const std::size_t needed = n_tasks * samples_per_task;
  if (needed > source_size) {
    throw ConfigError("insufficient source data: need " + std::to_string(needed) + " samples, have " +
                      std::to_string(source_size));
  }
  auto n_support = static_cast<std::size_t>(std::llround(support_fraction * static_cast<double>(samples_per_task)));
  n_support = std::clamp<std::size_t>(n_support, 1, samples_per_task - 1);

  std::vector<std::size_t> order(needed);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng = CounterRng::for_stream(seed, {0x5441 /* "TA" */});
  shuffle(std::span<std::size_t>(order), rng);

  MetaTaskSet set;
  set.samples_per_task = samples_per_task;
  set.tasks.resize(n_tasks);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const auto begin = order.begin() + static_cast<std::ptrdiff_t>(t * samples_per_task);
    const auto split = begin + static_cast<std::ptrdiff_t>(n_support);
    const auto end = begin + static_cast<std::ptrdiff_t>(samples_per_task);
    set.tasks[t].support.assign(begin, split);
    set.tasks[t].query.assign(split, end);
  }
  return set;
}

std::vector<std::size_t> sample_task_batch(std::size_t n_tasks, std::size_t task_batch,
                                           std::uint64_t seed, std::uint64_t iteration) {
  if (task_batch > n_tasks) throw ConfigError("task_batch exceeds the number of tasks");
  std::vector<std::size_t> indices(n_tasks);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  CounterRng rng = CounterRng::for_stream(seed, {0x4d42 /* "MB" */, iteration});
  // Partial Fisher-Yates: the first task_batch slots are a uniform sample.
  for (std::size_t i = 0; i < task_batch; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n_tasks - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(task_batch);
  return indices;
}

}  // namespace fdkg::strategies
