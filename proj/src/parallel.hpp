#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace lodweaver::detail {

// Runs task(i) for i in [0, count) on at most `cap` threads. Tasks must
// not throw.
template <typename Task>
void run_bounded(std::size_t count, int cap, Task&& task) {
  std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(cap, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace lodweaver::detail
