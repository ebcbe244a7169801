#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fracperim {

/// Integer cell coordinates. Components beyond the lattice dimension are 0.
using Coord = std::array<int, 3>;
/// Physical point. Components beyond the lattice dimension are 0.
using Point = std::array<double, 3>;

/// Precondition or configuration violation detected by a library routine.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the domain where a quantity is defined (e.g. sampled potentials).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// File system or parse failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

/// Volume of the unit ball in R^n, with omega_0 = 1.
inline double unit_ball_volume(int n) {
  using std::numbers::pi;
  switch (n) {
    case 0: return 1.0;
    case 1: return 2.0;
    case 2: return pi;
    case 3: return 4.0 * pi / 3.0;
    default: return std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
  }
}

inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

/// Worker count: hardware concurrency, capped by FRACPERIM_THREADS when set.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FRACPERIM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Runs body(i) for i in [0, n) over static contiguous chunks. Each index is
/// visited exactly once, so writes to per-index slots are deterministic.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// splitmix64 step; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace fracperim
