#include "hkflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace hkflow {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int k) { g_threads = std::max(1, k); }

int num_threads() { return g_threads; }

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(g_threads), count);
  // Small loops are not worth a thread launch.
  if (workers <= 1 || count < 4096) {
    fn(0, count);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    std::size_t b = w * chunk, e = std::min(count, b + chunk);
    if (b < e) pool.emplace_back(fn, b, e);
  }
  fn(0, std::min(count, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace hkflow
