#ifndef FMLOC_SAMPLING_HPP
#define FMLOC_SAMPLING_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "fmloc/core/error.hpp"
#include "fmloc/core/rng.hpp"
#include "fmloc/disorder.hpp"

namespace fmloc {

/// Redraws allowed for one sample index before the run is declared broken.
inline constexpr std::uint32_t kMaxResamples = 64;

/// Output of one Monte Carlo sample: a fixed-width row of numbers plus the
/// number of disorder redraws it needed.
struct SampleRow {
  std::vector<double> values;
  std::uint32_t resamples = 0;

  bool operator==(const SampleRow&) const = default;
};

/// Stream for attempt `attempt` of sample `index`. Attempt 0 is the plain
/// derived seed, so runs without resamples only ever touch that stream.
inline Rng sample_rng(std::uint64_t master_seed, std::uint64_t index, std::uint32_t attempt = 0) {
  const std::uint64_t seed = derive_sample_seed(master_seed, index);
  return Rng(attempt == 0 ? seed : derive_sample_seed(seed, attempt));
}

inline std::vector<double> draw_disorder(const DisorderSpec& spec, Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = sample(spec, rng);
  return v;
}

/// Effective worker count: 0 means one per hardware thread.
inline std::size_t resolve_workers(std::size_t workers) {
  if (workers != 0) return workers;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls fn(i) for every i in `indices` on a fixed pool that pulls work from
/// a shared counter. The first exception stops the pool and is rethrown
/// after all workers have joined.
template <class F>
void parallel_for(std::span<const std::uint64_t> indices, std::size_t workers, F&& fn) {
  const std::size_t pool = std::min(resolve_workers(workers), std::max<std::size_t>(indices.size(), 1));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_lock;

  auto work = [&] {
    while (!abort.load(std::memory_order_relaxed)) {
      const std::size_t slot = next.fetch_add(1, std::memory_order_relaxed);
      if (slot >= indices.size()) return;
      try {
        fn(indices[slot]);
      } catch (...) {
        std::lock_guard lock(failure_lock);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    }
  };

  if (pool <= 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(pool);
    for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

/// Runs kernel(index) for index = 0..n-1 and returns the rows in index order.
template <class Kernel>
std::vector<SampleRow> run_rows(std::size_t n, std::size_t workers, const Kernel& kernel) {
  std::vector<std::uint64_t> indices(n);
  for (std::size_t i = 0; i < n; ++i) indices[i] = i;
  std::vector<SampleRow> rows(n);
  parallel_for(indices, workers, [&](std::uint64_t i) { rows[i] = kernel(i); });
  return rows;
}

/// Column j of a row table.
inline std::vector<double> column(std::span<const SampleRow> rows, std::size_t j) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.values.at(j));
  return out;
}

inline std::uint64_t total_resamples(std::span<const SampleRow> rows) {
  std::uint64_t t = 0;
  for (const auto& r : rows) t += r.resamples;
  return t;
}

}  // namespace fmloc

#endif  // FMLOC_SAMPLING_HPP
