#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace snfl {

/// Worker budget: SNFL_WORKERS if set and positive, else hardware threads.
std::size_t worker_count();

/// Paths per work block. Fixed so that block boundaries, and therefore
/// reduction order, never depend on the worker count.
inline constexpr std::size_t kBlockSize = 1024;

/// Runs fn(block, begin, end) for every block of [0, items). Blocks are
/// claimed dynamically; callers store per-block results and reduce them in
/// block order. The first exception thrown by any block is rethrown.
template <class Fn>
void for_each_block(std::size_t items, std::size_t block_size, Fn&& fn) {
  const std::size_t blocks = (items + block_size - 1) / block_size;
  const std::size_t workers = std::min(worker_count(), blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b, b * block_size, std::min(items, (b + 1) * block_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        fn(b, b * block_size, std::min(items, (b + 1) * block_size));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(blocks);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace snfl
