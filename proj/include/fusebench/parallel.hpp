#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fusebench/error.hpp"

namespace fusebench {

// Parses a thread-count spec: a positive integer or "auto".
inline unsigned parse_threads(const std::string& spec) {
  if (spec == "auto") return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const long n = std::strtol(spec.c_str(), &end, 10);
  if (spec.empty() || *end != '\0' || n < 1 || n > 4096) {
    throw ConfigError("invalid thread count '" + spec + "' (expected a positive integer or 'auto')");
  }
  return static_cast<unsigned>(n);
}

// --threads flag, then FUSEBENCH_THREADS, then "auto".
inline unsigned resolve_threads(const std::optional<std::string>& flag) {
  if (flag) return parse_threads(*flag);
  if (const char* env = std::getenv("FUSEBENCH_THREADS"); env && *env) return parse_threads(env);
  return parse_threads("auto");
}

// Runs body(i) for i in [0, n) over contiguous static chunks. Bodies must only
// write to slot i of preallocated output, so results never depend on scheduling.
// If several chunks throw, the exception from the lowest chunk is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
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

}  // namespace fusebench
