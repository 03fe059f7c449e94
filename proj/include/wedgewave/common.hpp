#ifndef WEDGEWAVE_COMMON_HPP
#define WEDGEWAVE_COMMON_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace wedgewave {

using Complex    = std::complex<double>;
using Matrix     = Eigen::MatrixXcd;
using Vector     = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi    = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;

// ---------------------------------------------------------------------------
// Error taxonomy.  Everything numerical that can fail does so loudly, with a
// type the harness can map to an exit code.

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionOverflowError : public Error {
public:
  using Error::Error;
};

class GridMismatchError : public Error {
public:
  using Error::Error;
};

class SupportViolationError : public Error {
public:
  using Error::Error;
};

class NonConvergenceError : public Error {
public:
  using Error::Error;
};

class QuadratureBudgetError : public NonConvergenceError {
public:
  using NonConvergenceError::NonConvergenceError;
};

class PathDisagreementError : public NonConvergenceError {
public:
  using NonConvergenceError::NonConvergenceError;
};

class ApproximantError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class CacheError : public Error {
public:
  using Error::Error;
};

class CacheStaleError : public CacheError {
public:
  using CacheError::CacheError;
};

class CacheCorruptError : public CacheError {
public:
  using CacheError::CacheError;
};

class ModularStructureError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic reductions.  Sums are evaluated over a fixed pairwise tree so
// reruns (and parallel fan-outs that land on the same slots) are bit-stable.

template <class T>
T pairwise_sum(std::span<const T> xs, T zero) {
  if (xs.empty()) return zero;
  if (xs.size() <= 8) {
    T acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = acc + xs[i];
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, half), zero) +
         pairwise_sum(xs.subspan(half), std::move(zero));
}

template <class T>
T pairwise_sum(const std::vector<T>& xs, T zero) {
  return pairwise_sum(std::span<const T>(xs.data(), xs.size()), std::move(zero));
}

// Index-parallel loop: each job writes only its own slot, so the merged
// result does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& body, unsigned max_threads = 0) {
  if (n == 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (max_threads != 0 && max_threads < hw) hw = max_threads;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Seeded RNG for probe vectors.  Distributions are hand-rolled on top of the
// raw 64-bit stream so identical seeds give identical probes on any platform.

class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    // Box-Muller; discards the second draw to keep the stream simple.
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Complex complex_gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-std::log(u1));
    return Complex(r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2));
  }

  Vector complex_gaussian_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = complex_gaussian();
    return v;
  }

private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_COMMON_HPP
