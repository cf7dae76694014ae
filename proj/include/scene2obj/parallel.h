#ifndef SCENE2OBJ_PARALLEL_H_
#define SCENE2OBJ_PARALLEL_H_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace scene2obj {

// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads`
// workers. Chunk boundaries depend only on n and threads; callers that write
// to disjoint output slots get results independent of scheduling. The first
// exception thrown by a worker is rethrown after all workers join.
template <typename Body>
void parallel_chunks(std::size_t n, unsigned threads, Body&& body) {
  if (n == 0) return;
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  if (workers == 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace scene2obj

#endif  // SCENE2OBJ_PARALLEL_H_
