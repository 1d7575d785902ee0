#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "nikodym/random.hpp"

namespace nikodym {

namespace detail {
inline int& thread_setting() {
  static int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return threads;
}
inline bool& in_parallel_region() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

inline int threads() { return detail::thread_setting(); }
inline void set_threads(int t) { detail::thread_setting() = t < 1 ? 1 : t; }

// Runs body(i) for i in [0, count). Work items must write only to their own slots,
// so results never depend on the thread count.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const int t = threads();
  if (t <= 1 || count <= 1 || detail::in_parallel_region()) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  tbb::task_arena arena(t);
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, count), [&](const tbb::blocked_range<std::size_t>& r) {
      bool& inside = detail::in_parallel_region();
      const bool saved = inside;
      inside = true;
      for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
      inside = saved;
    });
  });
}

template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F&& f) {
  std::vector<T> out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = f(i); });
  return out;
}

/// Monte Carlo estimate of a mean or a volume.
struct MCEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
};

// Samples are split into fixed-size blocks; block b draws from stream (seed, b).
inline constexpr std::int64_t kBlockSamples = 4096;

// Mean of draw(rng) over `samples` draws, reduced block by block in index order.
template <class Draw>
MCEstimate mc_mean(Draw&& draw, std::int64_t samples, std::uint64_t seed) {
  const std::int64_t blocks = (samples + kBlockSamples - 1) / kBlockSamples;
  struct Partial {
    double sum = 0.0, sum2 = 0.0;
  };
  std::vector<Partial> parts(static_cast<std::size_t>(blocks));
  auto run_block = [&](std::size_t b) {
    Rng rng(seed, b);
    const std::int64_t first = static_cast<std::int64_t>(b) * kBlockSamples;
    const std::int64_t count = std::min(kBlockSamples, samples - first);
    Partial p;
    for (std::int64_t i = 0; i < count; ++i) {
      const double v = draw(rng);
      p.sum += v;
      p.sum2 += v * v;
    }
    parts[b] = p;
  };
  if (blocks <= 1) {
    if (blocks == 1) run_block(0);
  } else {
    parallel_for(static_cast<std::size_t>(blocks), run_block);
  }
  double sum = 0.0, sum2 = 0.0;
  for (const auto& p : parts) {
    sum += p.sum;
    sum2 += p.sum2;
  }
  MCEstimate est;
  est.samples = samples;
  est.seed = seed;
  if (samples <= 0) return est;
  const double n = static_cast<double>(samples);
  est.value = sum / n;
  const double var = samples > 1 ? std::max(0.0, (sum2 - n * est.value * est.value) / (n - 1.0)) : 0.0;
  est.std_err = std::sqrt(var / n);
  return est;
}

}  // namespace nikodym
