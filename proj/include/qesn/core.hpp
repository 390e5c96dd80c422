// Shared scalar aliases, error categories, seeded random streams and bit
// arithmetic used across the library.
#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

// GCC's tree vectorizer turns the strided gate kernels into slow
// gather/scatter code; they run several times faster as scalar loops. Eigen's
// own packet math is unaffected.
#if defined(__GNUC__) && !defined(__clang__)
#define QESN_KERNEL __attribute__((optimize("no-tree-vectorize")))
#else
#define QESN_KERNEL
#endif

namespace qesn {

using Index = Eigen::Index;

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

enum class ErrorCategory {
  capacity,
  operand,
  shape,
  data,
  config,
  numeric,
  integration,
  init,
  io,
};

inline const char* error_category_name(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::capacity: return "capacity";
    case ErrorCategory::operand: return "operand";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::data: return "data";
    case ErrorCategory::config: return "config";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::integration: return "integration";
    case ErrorCategory::init: return "init";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(std::string(error_category_name(cat)) + ": " + msg),
        cat_(cat) {}
  ErrorCategory category() const noexcept { return cat_; }

 private:
  ErrorCategory cat_;
};

[[noreturn]] inline void raise(ErrorCategory cat, const std::string& msg) {
  throw Error(cat, msg);
}

inline void require(bool cond, ErrorCategory cat, const std::string& msg) {
  if (!cond) raise(cat, msg);
}

// --- seeding ---------------------------------------------------------------

// splitmix64 finalizer; the documented mix for deriving per-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives the seed of stream `stream` from a master seed. Stream 0 is the
// weight/topology stream; stream 1 + i belongs to shot i. Results do not
// depend on thread scheduling because every consumer owns its stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// Deterministic random stream. Doubles are built from the top 53 bits of
// mt19937_64 output, so sequences are identical across platforms.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t bits() { return rng_(); }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // uniform on [a, b)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // uniform integer in [0, n)
  std::uint64_t index(std::uint64_t n) { return bits() % n; }

 private:
  std::mt19937_64 rng_;
};

// --- basis-state bit conventions --------------------------------------------
//
// Qubit 0 is the MOST significant bit of a basis-state index, and every
// bitstring in inputs/outputs is written qubit-0-first. For an n-qubit state,
// qubit q toggles bit (n - 1 - q) of the index.

inline std::uint64_t qubit_stride(int n_qubits, int qubit) {
  return std::uint64_t{1} << (n_qubits - 1 - qubit);
}

inline int bit_of(std::uint64_t basis_index, int n_qubits, int qubit) {
  return static_cast<int>((basis_index >> (n_qubits - 1 - qubit)) & 1u);
}

// --- tiny thread fan-out -----------------------------------------------------

// Runs body(chunk_index, begin, end) over [0, n) split into contiguous chunks,
// one per worker. Callers keep determinism by merging per-chunk results in
// chunk order.
inline void parallel_chunks(Index n,
                            const std::function<void(int, Index, Index)>& body,
                            int max_threads = 0) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  int workers = max_threads > 0 ? std::min(max_threads, hw) : hw;
  if (n < workers) workers = static_cast<int>(n);
  if (workers <= 1) {
    if (n > 0) body(0, 0, n);
    return;
  }
  const Index chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const Index begin = static_cast<Index>(w) * chunk;
    const Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, w, begin, end] { body(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace qesn
