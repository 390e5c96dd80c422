// The quantum echo-state network: sparse random weight initialization,
// context-window angle encoding, the per-timestep re-uploading circuit with
// measure-and-reset of the readout register, and feature accumulation over
// shots (or the exact density-matrix channel).
#pragma once

#include <qesn/core.hpp>
#include <qesn/density_matrix.hpp>
#include <qesn/gates.hpp>
#include <qesn/state_vector.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

namespace qesn {

enum class FeatureMode { distribution, expectation };

// Which qubits form the entangled pairs P_k. The default couples memory[k]
// (control) to readout[k] (target), which realizes the memory-to-readout
// information transfer; readout_ring is the alternative reading where pairs
// live inside the readout register, kept as a config option.
enum class PairingScheme { memory_readout, readout_ring };

template <class Scalar = double>
struct QesnParams {
  int n_qubits = 8;         // total qubits; registers hold n_qubits/2 each
  int context_len = 4;      // c: sliding window length
  int input_dim = 1;        // d: channels per sample
  int reupload_blocks = 3;  // r: repeated circuit blocks per timestep
  Scalar sparsity = Scalar(0.5);  // kappa: fraction of entangling weights zeroed
  long shots = 60000;
  FeatureMode feature_mode = FeatureMode::distribution;
  std::uint64_t seed = 1;
  std::optional<NoiseParams<Scalar>> noise;
  bool exact_mode = false;
  Scalar input_scale = Scalar(1);  // multiplier on the pi/(c*d*r) weight scale
  PairingScheme pairing = PairingScheme::memory_readout;

  int n_memory() const { return n_qubits / 2; }
  int n_readout() const { return n_qubits / 2; }

  std::vector<int> memory_qubits() const {
    std::vector<int> q(static_cast<std::size_t>(n_memory()));
    std::iota(q.begin(), q.end(), 0);
    return q;
  }
  std::vector<int> readout_qubits() const {
    std::vector<int> q(static_cast<std::size_t>(n_readout()));
    std::iota(q.begin(), q.end(), n_memory());
    return q;
  }

  void validate() const {
    require(n_qubits >= 2 && n_qubits % 2 == 0, ErrorCategory::config,
            "n_qubits must be even and >= 2");
    require(n_qubits <= kMaxStateQubits, ErrorCategory::capacity,
            "n_qubits exceeds the trajectory capacity of " +
                std::to_string(kMaxStateQubits));
    require(!exact_mode || n_qubits <= kMaxDensityQubits, ErrorCategory::capacity,
            "exact mode supports at most " + std::to_string(kMaxDensityQubits) +
                " qubits");
    require(context_len >= 1, ErrorCategory::config, "context_len must be >= 1");
    require(input_dim >= 1, ErrorCategory::config, "input_dim must be >= 1");
    require(reupload_blocks >= 1, ErrorCategory::config,
            "reupload_blocks must be >= 1");
    require(sparsity >= Scalar(0) && sparsity <= Scalar(1), ErrorCategory::config,
            "sparsity must lie in [0, 1]");
    require(shots >= 1, ErrorCategory::config, "shots must be >= 1");
    if (noise) noise->validate();
  }
};

// All random reservoir parameters; frozen after initialization (the reservoir
// is never trained).
template <class Scalar = double>
struct QesnWeights {
  // w_in[s] is (context_len*input_dim) x n_qubits for Euler slot s in
  // {alpha, beta, gamma}.
  std::array<MatrixX<Scalar>, 3> w_in;
  VectorX<Scalar> w_bias;      // n_qubits, one shared bias per qubit
  MatrixX<Scalar> w_ent_pair;  // n_qubits/2 x 2, columns (CRY, CRX)
  VectorX<Scalar> w_ent_mem;   // n_qubits/2 - 1, CRZ chain on memory qubits

  Index entangling_count() const { return w_ent_pair.size() + w_ent_mem.size(); }
  Index entangling_zeros() const {
    return (w_ent_pair.array() == Scalar(0)).count() +
           (w_ent_mem.array() == Scalar(0)).count();
  }
};

// Draws all reservoir weights as a deterministic function of params.seed.
// w_in ~ U(-1,1) * pi/(c*d*r) * input_scale, w_bias ~ U(0, pi], entangling
// weights ~ U(pi/4, 3pi/4); then exactly floor(kappa * count) entangling
// entries, chosen without replacement, are zeroed.
template <class Scalar = double>
QesnWeights<Scalar> init_weights(const QesnParams<Scalar>& params) {
  params.validate();
  constexpr Scalar kPi = Scalar(3.14159265358979323846L);
  RandomStream rng(mix_seed(params.seed, 0));

  const Index cd = static_cast<Index>(params.context_len) * params.input_dim;
  const int nq = params.n_qubits;
  const int np = params.n_memory();

  QesnWeights<Scalar> w;
  for (auto& m : w.w_in) m.resize(cd, nq);
  const Scalar scale = params.input_scale * kPi /
                       (Scalar(params.context_len) * Scalar(params.input_dim) *
                        Scalar(params.reupload_blocks));
  for (Index k = 0; k < cd; ++k) {
    for (int q = 0; q < nq; ++q) {
      for (int s = 0; s < 3; ++s) {
        w.w_in[static_cast<std::size_t>(s)](k, q) =
            scale * static_cast<Scalar>(rng.uniform(-1.0, 1.0));
      }
    }
  }

  w.w_bias.resize(nq);
  for (int q = 0; q < nq; ++q) {
    w.w_bias[q] = kPi - kPi * static_cast<Scalar>(rng.uniform());  // (0, pi]
  }

  w.w_ent_pair.resize(np, 2);
  for (int k = 0; k < np; ++k) {
    for (int c = 0; c < 2; ++c) {
      w.w_ent_pair(k, c) = static_cast<Scalar>(
          rng.uniform(static_cast<double>(kPi / 4), static_cast<double>(3 * kPi / 4)));
    }
  }
  w.w_ent_mem.resize(np - 1);
  for (int k = 0; k + 1 < np; ++k) {
    w.w_ent_mem[k] = static_cast<Scalar>(
        rng.uniform(static_cast<double>(kPi / 4), static_cast<double>(3 * kPi / 4)));
  }

  // exact-count sparsification: entangling entries indexed row-major over
  // w_ent_pair, then w_ent_mem
  const Index total = w.entangling_count();
  const Index zeros = static_cast<Index>(
      std::floor(static_cast<double>(params.sparsity) * static_cast<double>(total)));
  std::vector<Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = 0; i < zeros; ++i) {
    const Index j = i + static_cast<Index>(
                            rng.index(static_cast<std::uint64_t>(total - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    const Index e = order[static_cast<std::size_t>(i)];
    if (e < 2 * np) {
      w.w_ent_pair(e / 2, static_cast<int>(e % 2)) = Scalar(0);
    } else {
      w.w_ent_mem[e - 2 * np] = Scalar(0);
    }
  }
  return w;
}

// Per-qubit Euler triples for one context window: angles(q, s) =
// sum_k w_in[s](k, q) * window[k] + w_bias[q].
template <class Scalar = double>
MatrixX<Scalar> compute_angles(const QesnWeights<Scalar>& weights,
                               const VectorX<Scalar>& window) {
  require(window.size() == weights.w_in[0].rows(), ErrorCategory::shape,
          "window length " + std::to_string(window.size()) +
              " does not match context_len*input_dim = " +
              std::to_string(weights.w_in[0].rows()));
  const Index nq = weights.w_bias.size();
  MatrixX<Scalar> angles(nq, 3);
  for (int s = 0; s < 3; ++s) {
    angles.col(s) =
        weights.w_in[static_cast<std::size_t>(s)].transpose() * window + weights.w_bias;
  }
  return angles;
}

namespace detail {

template <class Scalar>
std::vector<std::pair<int, int>> entangled_pairs(const QesnParams<Scalar>& p) {
  std::vector<std::pair<int, int>> pairs;
  const int np = p.n_memory();
  if (p.pairing == PairingScheme::memory_readout) {
    for (int k = 0; k < np; ++k) pairs.emplace_back(k, np + k);  // control, target
  } else if (np >= 2) {
    for (int k = 0; k < np; ++k) pairs.emplace_back(np + k, np + (k + 1) % np);
  }
  return pairs;
}

// Emits one timestep's gates in order, tagging each with its logical layer.
// This is the single source of truth for the circuit structure: the
// statevector executor, the density-matrix executor and the depth/gate audit
// all consume it. Weighted entangling gates with zero weight are not emitted.
template <class Scalar, class Sink>
void emit_timestep_gates(const QesnWeights<Scalar>& w, const QesnParams<Scalar>& p,
                         const MatrixX<Scalar>& angles, Sink&& sink) {
  const auto pairs = entangled_pairs(p);
  const int np = p.n_memory();
  int layer = 0;

  auto rotation_layer = [&] {
    for (int q = 0; q < p.n_qubits; ++q) {
      sink(Gate<Scalar>::rotation(q, angles(q, 0), angles(q, 1), angles(q, 2)), layer);
    }
    ++layer;
  };

  for (int block = 0; block < p.reupload_blocks; ++block) {
    rotation_layer();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      sink(Gate<Scalar>::cnot(pairs[k].first, pairs[k].second), layer);
    }
    if (!pairs.empty()) ++layer;
    rotation_layer();
    bool emitted = false;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Scalar eps1 = w.w_ent_pair(static_cast<Index>(k), 0);
      if (eps1 == Scalar(0)) continue;
      sink(Gate<Scalar>::cry(pairs[k].first, pairs[k].second, eps1), layer);
      emitted = true;
    }
    if (emitted) ++layer;
    rotation_layer();
    emitted = false;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Scalar eps2 = w.w_ent_pair(static_cast<Index>(k), 1);
      if (eps2 == Scalar(0)) continue;
      sink(Gate<Scalar>::crx(pairs[k].first, pairs[k].second, eps2), layer);
      emitted = true;
    }
    if (emitted) ++layer;
    // sequential CRZ chain over adjacent memory qubits
    for (int k = 0; k + 1 < np; ++k) {
      const Scalar eps3 = w.w_ent_mem[k];
      if (eps3 == Scalar(0)) continue;
      sink(Gate<Scalar>::crz(k, k + 1, eps3), layer);
      ++layer;
    }
  }
}

template <class Scalar>
using Matrix4c = Eigen::Matrix<std::complex<Scalar>, 4, 4>;

template <class Scalar>
Matrix4c<Scalar> kron2(const Matrix2c<Scalar>& hi, const Matrix2c<Scalar>& lo) {
  Matrix4c<Scalar> out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.template block<2, 2>(2 * i, 2 * j) = hi(i, j) * lo;
  return out;
}

// Controlled-u on the ordered pair basis |hi lo>; the control is the hi qubit.
template <class Scalar>
Matrix4c<Scalar> controlled_on_hi(const Matrix2c<Scalar>& u) {
  Matrix4c<Scalar> out = Matrix4c<Scalar>::Identity();
  out.template block<2, 2>(2, 2) = u;
  return out;
}

// One fused two-qubit operation of the precompiled timestep program.
template <class Scalar>
struct PairOp {
  int hi = 0, lo = 0;  // hi is the smaller qubit index (more significant bit)
  Matrix4c<Scalar> u;
};

// Precompiled gates for a single timestep, shared across all shots. The fused
// form collapses each pair's rotation/CNOT/CRY/CRX segment into one 4x4
// unitary; it is only built when no per-gate noise must be interleaved and the
// pairs are disjoint (memory_readout pairing).
template <class Scalar>
struct TimestepProgram {
  std::vector<PairOp<Scalar>> fused;
  std::vector<Gate<Scalar>> raw;
  bool use_fused = false;
};

template <class Scalar>
bool fusable(const QesnParams<Scalar>& p) {
  return !p.noise.has_value() && p.pairing == PairingScheme::memory_readout;
}

template <class Scalar>
TimestepProgram<Scalar> compile_timestep(const QesnWeights<Scalar>& w,
                                         const QesnParams<Scalar>& p,
                                         const MatrixX<Scalar>& angles,
                                         bool allow_fused = true) {
  TimestepProgram<Scalar> prog;
  if (allow_fused && fusable(p)) {
    prog.use_fused = true;
    const int np = p.n_memory();
    for (int block = 0; block < p.reupload_blocks; ++block) {
      for (int k = 0; k < np; ++k) {
        const int m = k, r = np + k;
        const Matrix4c<Scalar> rot =
            kron2(rotation_matrix(angles(m, 0), angles(m, 1), angles(m, 2)),
                  rotation_matrix(angles(r, 0), angles(r, 1), angles(r, 2)));
        Matrix4c<Scalar> u = controlled_on_hi(pauli_x_matrix<Scalar>()) * rot;
        u = rot * u;
        if (w.w_ent_pair(k, 0) != Scalar(0)) {
          u = controlled_on_hi(ry_matrix(w.w_ent_pair(k, 0))) * u;
        }
        u = rot * u;
        if (w.w_ent_pair(k, 1) != Scalar(0)) {
          u = controlled_on_hi(rx_matrix(w.w_ent_pair(k, 1))) * u;
        }
        prog.fused.push_back({m, r, u});
      }
      for (int k = 0; k + 1 < np; ++k) {
        if (w.w_ent_mem[k] == Scalar(0)) continue;
        prog.fused.push_back({k, k + 1, controlled_on_hi(rz_matrix(w.w_ent_mem[k]))});
      }
    }
  } else {
    emit_timestep_gates(w, p, angles, [&prog](const Gate<Scalar>& g, int) {
      prog.raw.push_back(g);
    });
  }
  return prog;
}

template <class Scalar>
void run_program_sv(StateVector<Scalar>& state, const TimestepProgram<Scalar>& prog,
                    const QesnParams<Scalar>& p, RandomStream& rng) {
  if (prog.use_fused) {
    for (const auto& op : prog.fused) {
      apply_2q(state.amps, state.n_qubits, op.hi, op.lo, op.u);
    }
    return;
  }
  for (const auto& g : prog.raw) {
    apply_gate(state, g);
    if (p.noise) {
      if (g.controlled()) {
        apply_stochastic_pauli(state, {g.control, g.target}, p.noise->p_depol_2q, rng);
      } else {
        apply_stochastic_pauli(state, {g.target}, p.noise->p_depol_1q, rng);
      }
    }
  }
}

template <class Scalar>
void run_program_dm(DensityMatrix<Scalar>& dm, const TimestepProgram<Scalar>& prog,
                    const QesnParams<Scalar>& p) {
  if (prog.use_fused) {
    for (const auto& op : prog.fused) {
      dm_left_2q(dm.entries, dm.n_qubits, op.hi, op.lo, op.u);
      dm_right_2q(dm.entries, dm.n_qubits, op.hi, op.lo, op.u);
    }
    return;
  }
  for (const auto& g : prog.raw) {
    dm_apply_gate(dm, g);
    if (p.noise) {
      if (g.controlled()) {
        dm_depolarize(dm, g.control, p.noise->p_depol_2q);
        dm_depolarize(dm, g.target, p.noise->p_depol_2q);
      } else {
        dm_depolarize(dm, g.target, p.noise->p_depol_1q);
      }
    }
  }
}

template <class Scalar>
VectorX<Scalar> window_at(const MatrixX<Scalar>& series, Index t, int context_len) {
  const Index d = series.cols();
  VectorX<Scalar> window(static_cast<Index>(context_len) * d);
  for (Index k = 0; k < window.size(); ++k) {
    window[k] = series(t - context_len + 1 + k / d, k % d);
  }
  return window;
}

template <class Scalar>
void check_series(const MatrixX<Scalar>& series, const QesnParams<Scalar>& p) {
  require(series.cols() == p.input_dim, ErrorCategory::shape,
          "series has " + std::to_string(series.cols()) + " channels, expected " +
              std::to_string(p.input_dim));
  require(series.rows() > p.context_len, ErrorCategory::shape,
          "series length must exceed context_len");
}

template <class Scalar>
void check_weights(const QesnWeights<Scalar>& w, const QesnParams<Scalar>& p) {
  const Index cd = static_cast<Index>(p.context_len) * p.input_dim;
  require(w.w_in[0].rows() == cd && w.w_in[0].cols() == p.n_qubits &&
              w.w_bias.size() == p.n_qubits && w.w_ent_pair.rows() == p.n_memory() &&
              w.w_ent_mem.size() == p.n_memory() - 1,
          ErrorCategory::shape, "weights do not match params");
}

}  // namespace detail

// Logical gate and layer counts for one timestep of the compiled circuit.
struct CircuitStats {
  long rotations = 0;
  long cnots = 0;
  long crys = 0;
  long crxs = 0;
  long crzs = 0;
  long depth = 0;  // gate layers incl. the measurement layer

  long total_gates() const { return rotations + cnots + crys + crxs + crzs; }
};

template <class Scalar = double>
CircuitStats audit_timestep(const QesnWeights<Scalar>& weights,
                            const QesnParams<Scalar>& params) {
  params.validate();
  detail::check_weights(weights, params);
  CircuitStats stats;
  const MatrixX<Scalar> angles = MatrixX<Scalar>::Zero(params.n_qubits, 3);
  int max_layer = -1;
  detail::emit_timestep_gates(weights, params, angles,
                              [&](const Gate<Scalar>& g, int layer) {
                                using K = typename Gate<Scalar>::Kind;
                                switch (g.kind) {
                                  case K::rotation: ++stats.rotations; break;
                                  case K::cnot: ++stats.cnots; break;
                                  case K::cry: ++stats.crys; break;
                                  case K::crx: ++stats.crxs; break;
                                  case K::crz: ++stats.crzs; break;
                                }
                                max_layer = std::max(max_layer, layer);
                              });
  stats.depth = max_layer + 2;  // + measurement layer
  return stats;
}

// Runs one timestep on a live trajectory: the r re-uploading blocks followed
// by measure-and-reset of the readout register. Returns the outcome bitstring
// (readout[0] first, most significant), corrupted by readout noise when
// enabled.
template <class Scalar = double>
std::uint64_t apply_timestep(StateVector<Scalar>& state,
                             const QesnWeights<Scalar>& weights,
                             const VectorX<Scalar>& window,
                             const QesnParams<Scalar>& params, RandomStream& rng) {
  params.validate();
  detail::check_weights(weights, params);
  require(state.n_qubits == params.n_qubits, ErrorCategory::shape,
          "state does not match params.n_qubits");
  const auto angles = compute_angles(weights, window);
  const auto prog = detail::compile_timestep(weights, params, angles,
                                             /*allow_fused=*/false);
  detail::run_program_sv(state, prog, params, rng);
  std::uint64_t outcome = measure_collapse_reset(state, params.readout_qubits(), rng);
  if (params.noise) {
    outcome = readout_bitflip(outcome, params.n_readout(),
                              static_cast<double>(params.noise->p_readout_flip), rng);
  }
  return outcome;
}

// One stochastic end-to-end trajectory: the state is initialized once and the
// context window slides over the series; the memory register is never reset.
// Returns one outcome per timestep t in [context_len-1, N-1] (0-based; the
// window covers series[t-c+1 .. t]).
template <class Scalar = double>
std::vector<std::uint64_t> run_trajectory(const MatrixX<Scalar>& series,
                                          const QesnWeights<Scalar>& weights,
                                          const QesnParams<Scalar>& params,
                                          RandomStream& rng) {
  params.validate();
  detail::check_weights(weights, params);
  detail::check_series(series, params);
  auto state = init_state<Scalar>(params.n_qubits);
  std::vector<std::uint64_t> outcomes;
  outcomes.reserve(static_cast<std::size_t>(series.rows() - params.context_len + 1));
  for (Index t = params.context_len - 1; t < series.rows(); ++t) {
    outcomes.push_back(apply_timestep(
        state, weights, detail::window_at(series, t, params.context_len), params, rng));
  }
  return outcomes;
}

// Per-timestep measured features: a probability row over the 2^{n_q/2}
// readout basis (distribution mode) or per-qubit Pauli-Z means (expectation
// mode). timesteps[i] is the 0-based series index of row i's window end.
template <class Scalar = double>
struct FeatureMatrix {
  Eigen::VectorXi timesteps;
  MatrixX<Scalar> values;
  FeatureMode mode = FeatureMode::distribution;
  int n_readout = 0;
};

// Pauli-Z means from a distribution row: entry q = sum_b p(b) (1 - 2 bit_q(b)).
template <class Scalar = double>
VectorX<Scalar> expectation_features(const VectorX<Scalar>& dist_row) {
  require(std::abs(dist_row.sum() - Scalar(1)) <= Scalar(1e-6), ErrorCategory::numeric,
          "distribution row is not normalized");
  int n_bits = 0;
  while ((Index{1} << n_bits) < dist_row.size()) ++n_bits;
  require(Index{1} << n_bits == dist_row.size(), ErrorCategory::shape,
          "distribution row length must be a power of two");
  VectorX<Scalar> z = VectorX<Scalar>::Zero(n_bits);
  for (Index b = 0; b < dist_row.size(); ++b) {
    for (int q = 0; q < n_bits; ++q) {
      const int bit = static_cast<int>((static_cast<std::uint64_t>(b) >>
                                        (n_bits - 1 - q)) & 1u);
      z[q] += dist_row[b] * Scalar(1 - 2 * bit);
    }
  }
  return z;
}

// Accumulates params.shots independent trajectories into the FeatureMatrix.
// Shot i owns the derived stream mix_seed(seed, 1 + i), so the result is a
// pure function of (series, weights, params) regardless of scheduling.
template <class Scalar = double>
FeatureMatrix<Scalar> run_reservoir(const MatrixX<Scalar>& series,
                                    const QesnWeights<Scalar>& weights,
                                    const QesnParams<Scalar>& params) {
  params.validate();
  detail::check_weights(weights, params);
  detail::check_series(series, params);

  const Index rows = series.rows() - params.context_len + 1;
  const int nr = params.n_readout();
  const Index bins = Index{1} << nr;

  // compile every timestep once; all shots share the programs
  std::vector<MatrixX<Scalar>> angle_cache;
  std::vector<detail::TimestepProgram<Scalar>> programs;
  angle_cache.reserve(static_cast<std::size_t>(rows));
  programs.reserve(static_cast<std::size_t>(rows));
  for (Index t = params.context_len - 1; t < series.rows(); ++t) {
    angle_cache.push_back(
        compute_angles(weights, detail::window_at(series, t, params.context_len)));
    programs.push_back(detail::compile_timestep(weights, params, angle_cache.back()));
  }

  const auto readout = params.readout_qubits();
  const bool dist = params.feature_mode == FeatureMode::distribution;
  const Index width = dist ? bins : nr;

  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 0) workers = 1;
  workers = static_cast<int>(std::min<long>(workers, params.shots));
  std::vector<MatrixX<std::int64_t>> counts(
      static_cast<std::size_t>(workers), MatrixX<std::int64_t>::Zero(rows, width));

  parallel_chunks(
      static_cast<Index>(params.shots),
      [&](int worker, Index begin, Index end) {
        auto& local = counts[static_cast<std::size_t>(worker)];
        for (Index shot = begin; shot < end; ++shot) {
          RandomStream rng(mix_seed(params.seed, 1 + static_cast<std::uint64_t>(shot)));
          auto state = init_state<Scalar>(params.n_qubits);
          for (Index row = 0; row < rows; ++row) {
            detail::run_program_sv(state, programs[static_cast<std::size_t>(row)],
                                   params, rng);
            std::uint64_t outcome = measure_collapse_reset(state, readout, rng);
            if (params.noise) {
              outcome = readout_bitflip(
                  outcome, nr, static_cast<double>(params.noise->p_readout_flip), rng);
            }
            if (dist) {
              local(row, static_cast<Index>(outcome)) += 1;
            } else {
              for (int q = 0; q < nr; ++q) {
                local(row, q) += static_cast<std::int64_t>((outcome >> (nr - 1 - q)) & 1u);
              }
            }
          }
        }
      },
      workers);

  for (int w = 1; w < workers; ++w) counts[0] += counts[static_cast<std::size_t>(w)];

  FeatureMatrix<Scalar> fm;
  fm.mode = params.feature_mode;
  fm.n_readout = nr;
  fm.timesteps.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    fm.timesteps[i] = static_cast<int>(params.context_len - 1 + i);
  }
  const Scalar inv_shots = Scalar(1) / Scalar(params.shots);
  if (dist) {
    fm.values = counts[0].template cast<Scalar>() * inv_shots;
  } else {
    fm.values = MatrixX<Scalar>::Constant(rows, nr, Scalar(1)) -
                Scalar(2) * counts[0].template cast<Scalar>() * inv_shots;
  }
  return fm;
}

// Shot-noise-free oracle path: evolves the exact density matrix through the
// same per-timestep programs and the deterministic measure-and-reset channel,
// starting from an arbitrary initial density matrix.
template <class Scalar = double>
FeatureMatrix<Scalar> run_reservoir_exact_from(DensityMatrix<Scalar> dm,
                                               const MatrixX<Scalar>& series,
                                               const QesnWeights<Scalar>& weights,
                                               const QesnParams<Scalar>& params) {
  params.validate();
  require(params.n_qubits <= kMaxDensityQubits, ErrorCategory::capacity,
          "exact mode supports at most " + std::to_string(kMaxDensityQubits) +
              " qubits");
  detail::check_weights(weights, params);
  detail::check_series(series, params);
  require(dm.n_qubits == params.n_qubits, ErrorCategory::shape,
          "initial density matrix does not match params.n_qubits");

  const Index rows = series.rows() - params.context_len + 1;
  const int nr = params.n_readout();
  const Index bins = Index{1} << nr;
  const auto readout = params.readout_qubits();
  const Scalar p_flip = params.noise ? params.noise->p_readout_flip : Scalar(0);

  FeatureMatrix<Scalar> fm;
  fm.mode = params.feature_mode;
  fm.n_readout = nr;
  fm.timesteps.resize(rows);
  fm.values.resize(rows, params.feature_mode == FeatureMode::distribution ? bins : nr);

  for (Index row = 0; row < rows; ++row) {
    const Index t = params.context_len - 1 + row;
    fm.timesteps[row] = static_cast<int>(t);
    const auto angles =
        compute_angles(weights, detail::window_at(series, t, params.context_len));
    const auto prog = detail::compile_timestep(weights, params, angles);
    detail::run_program_dm(dm, prog, params);
    VectorX<Scalar> probs = dm_measure_reset_channel(dm, readout);
    if (p_flip > Scalar(0)) {
      // readout error as a transition matrix, one bit at a time
      for (int q = 0; q < nr; ++q) {
        const Index flip = Index{1} << (nr - 1 - q);
        VectorX<Scalar> mixed(bins);
        for (Index b = 0; b < bins; ++b) {
          mixed[b] = (1 - p_flip) * probs[b] + p_flip * probs[b ^ flip];
        }
        probs.swap(mixed);
      }
    }
    if (params.feature_mode == FeatureMode::distribution) {
      fm.values.row(row) = probs.transpose();
    } else {
      fm.values.row(row) = expectation_features(probs).transpose();
    }
  }
  return fm;
}

template <class Scalar = double>
FeatureMatrix<Scalar> run_reservoir_exact(const MatrixX<Scalar>& series,
                                          const QesnWeights<Scalar>& weights,
                                          const QesnParams<Scalar>& params) {
  params.validate();
  require(params.n_qubits <= kMaxDensityQubits, ErrorCategory::capacity,
          "exact mode supports at most " + std::to_string(kMaxDensityQubits) +
              " qubits");
  return run_reservoir_exact_from(init_density_matrix<Scalar>(params.n_qubits),
                                  series, weights, params);
}

}  // namespace qesn
