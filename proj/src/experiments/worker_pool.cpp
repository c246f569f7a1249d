#include "heidih/experiments.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace heidih::experiments {

void for_each_batch(std::size_t samples, std::size_t batch, std::size_t workers,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  if (batch == 0) {
    batch = 1;
  }
  const std::size_t batches = (samples + batch - 1) / batch;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= batches) {
        return;
      }
      try {
        body(b, b * batch, std::min(samples, (b + 1) * batch));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        next.store(batches);
        return;
      }
    }
  };

  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(batches, 1));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(work);
    }
    for (auto& th : pool) {
      th.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

std::size_t workers_from_env(std::size_t fallback) {
  const char* env = std::getenv("HEIDIH_WORKERS");
  if (env == nullptr || *env == '\0') {
    return fallback;
  }
  try {
    std::size_t used = 0;
    const long v = std::stol(env, &used);
    if (used == std::string(env).size() && v >= 1) {
      return static_cast<std::size_t>(v);
    }
  } catch (const std::exception&) {
  }
  return fallback;
}

}  // namespace heidih::experiments
