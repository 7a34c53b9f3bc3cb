// Shared error types, numeric tolerances, deterministic RNG streams and a
// small index-parallel map used by the experiment drivers.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace mfl {

using Point = Eigen::VectorXd;
// Rows are agents (or atoms), columns are state coordinates.
using AgentState = Eigen::MatrixXd;
using ControlInput = Eigen::VectorXd;

// Tolerance for Gram positive-semidefiniteness checks; squared-norm radicands
// in [-kPsdTolerance, 0) are clamped to zero, anything below it is an error.
inline constexpr double kPsdTolerance = 1e-9;

// Stage costs smaller than this count as zero in certificate ratios.
inline constexpr double kZeroCostTolerance = 1e-12;

// Raised when a radicand or Gram matrix violates positive semidefiniteness
// beyond kPsdTolerance, or a computation leaves the representable regime.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a certificate hypothesis fails structurally (e.g. a zero-cost
// state that is not value-monotone), as opposed to a quantitative failure
// which is reported through the certificate object.
class certificate_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a sampled estimator has no usable samples.
class estimation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Combines a seed with a stream index. Every sample of every experiment owns
// an engine derived from (master seed, stream tags...), so results do not
// depend on how the samples are scheduled across threads.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return detail::splitmix64(seed ^ detail::splitmix64(tag));
}

// Thin RNG wrapper. Doubles are produced from the raw 64-bit output directly
// (53 mantissa bits) instead of std::uniform_real_distribution, so streams
// are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::uint64_t a) {
    return Rng(mix_seed(seed, a));
  }
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return Rng(mix_seed(mix_seed(seed, a), b));
  }
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                    std::uint64_t c) {
    return Rng(mix_seed(mix_seed(mix_seed(seed, a), b), c));
  }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in {0, ..., n-1}; n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
           n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Evaluates fn(i) for i in [0, n) and returns the results in index order.
// fn must be safe to call concurrently; determinism follows because every
// slot is written exactly once from its own index. An exception thrown by
// fn is rethrown on the calling thread after all workers have joined.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, int jobs, Fn&& fn) {
  std::vector<T> out(n);
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::vector<std::exception_ptr> errors(workers, nullptr);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& error : errors)
    if (error) std::rethrow_exception(error);
  return out;
}

// Lexicographic order of matrix rows. Aggregations over agents or atoms run
// in this order, which makes them exactly permutation invariant: the same
// multiset of rows always produces the same summation sequence.
inline std::vector<Eigen::Index> canonical_order(const Eigen::MatrixXd& rows) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows.rows()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = static_cast<Eigen::Index>(i);
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (rows(a, c) < rows(b, c)) return true;
      if (rows(a, c) > rows(b, c)) return false;
    }
    return false;
  });
  return idx;
}

// As canonical_order, with a scalar per row as final tie-breaker (used for
// weighted atoms so equal atoms with unequal weights still sort canonically).
inline std::vector<Eigen::Index> canonical_order(const Eigen::MatrixXd& rows,
                                                 const Eigen::VectorXd& tie) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows.rows()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = static_cast<Eigen::Index>(i);
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (rows(a, c) < rows(b, c)) return true;
      if (rows(a, c) > rows(b, c)) return false;
    }
    return tie[a] < tie[b];
  });
  return idx;
}

}  // namespace mfl
