#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace cvp {

// Runs fn(begin, end, chunk_index) over [0, n) split into fixed-size chunks.
// Chunk boundaries depend only on n and chunk_size, never on the worker
// count, so per-chunk partial results (reduced afterwards in chunk order)
// are bit-identical for any number of threads.
template <typename Fn>
inline void parallel_chunks(std::size_t n, std::size_t chunk_size, int threads, Fn&& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = begin + chunk_size < n ? begin + chunk_size : n;
    fn(begin, end, c);
  };

  if (threads <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      run_chunk(c);
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n_chunks);
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

inline std::size_t num_chunks(std::size_t n, std::size_t chunk_size) {
  if (chunk_size == 0) chunk_size = 1;
  return n == 0 ? 0 : (n + chunk_size - 1) / chunk_size;
}

}  // namespace cvp
