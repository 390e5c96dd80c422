// Statevector trajectories: gate application, marginal probabilities,
// mid-circuit measurement with collapse and reset, and the trajectory
// unraveling of the depolarizing channel.
#pragma once

#include <qesn/core.hpp>
#include <qesn/gates.hpp>

#include <cmath>
#include <vector>

namespace qesn {

inline constexpr int kMaxStateQubits = 24;

template <class Scalar = double>
struct StateVector {
  using Complex = std::complex<Scalar>;

  int n_qubits = 0;
  VectorXc<Scalar> amps;

  Index dim() const { return amps.size(); }
};

// |0...0> on n_qubits. Trajectories are supported up to 24 qubits (2^24
// amplitudes).
template <class Scalar = double>
StateVector<Scalar> init_state(int n_qubits) {
  require(n_qubits >= 1 && n_qubits <= kMaxStateQubits, ErrorCategory::capacity,
          "n_qubits must lie in [1, " + std::to_string(kMaxStateQubits) +
              "], got " + std::to_string(n_qubits));
  StateVector<Scalar> s;
  s.n_qubits = n_qubits;
  s.amps = VectorXc<Scalar>::Zero(Index{1} << n_qubits);
  s.amps[0] = Scalar(1);
  return s;
}

namespace detail {

// In-place u on qubit q of a 2^n amplitude vector.
template <class Scalar>
QESN_KERNEL void apply_1q(VectorXc<Scalar>& amps, int n_qubits, int qubit,
              const Matrix2c<Scalar>& u) {
  using C = std::complex<Scalar>;
  const std::uint64_t s = qubit_stride(n_qubits, qubit);
  const std::uint64_t dim = static_cast<std::uint64_t>(amps.size());
  const C u00 = u(0, 0), u01 = u(0, 1), u10 = u(1, 0), u11 = u(1, 1);
  C* a = amps.data();
  for (std::uint64_t base = 0; base < dim; base += 2 * s) {
    for (std::uint64_t i = base; i < base + s; ++i) {
      const C a0 = a[i], a1 = a[i + s];
      a[i] = u00 * a0 + u01 * a1;
      a[i + s] = u10 * a0 + u11 * a1;
    }
  }
}

// Inserts a zero bit at the position of stride s (a power of two): bits below
// s are kept, bits at or above s shift up by one.
inline std::uint64_t insert_zero_bit(std::uint64_t x, std::uint64_t s) {
  return ((x & ~(s - 1)) << 1) | (x & (s - 1));
}

// In-place controlled-u: u acts on the target only where the control bit is 1;
// amplitudes with control bit 0 are not touched at all.
template <class Scalar>
QESN_KERNEL void apply_controlled_1q(VectorXc<Scalar>& amps, int n_qubits, int control,
                         int target, const Matrix2c<Scalar>& u) {
  using C = std::complex<Scalar>;
  const std::uint64_t sc = qubit_stride(n_qubits, control);
  const std::uint64_t st = qubit_stride(n_qubits, target);
  const std::uint64_t s1 = std::min(sc, st), s2 = std::max(sc, st);
  const std::uint64_t quarter = static_cast<std::uint64_t>(amps.size()) / 4;
  const C u00 = u(0, 0), u01 = u(0, 1), u10 = u(1, 0), u11 = u(1, 1);
  C* a = amps.data();
  for (std::uint64_t k = 0; k < quarter; ++k) {
    const std::uint64_t i = insert_zero_bit(insert_zero_bit(k, s1), s2) | sc;
    const C a0 = a[i], a1 = a[i | st];
    a[i] = u00 * a0 + u01 * a1;
    a[i | st] = u10 * a0 + u11 * a1;
  }
}

// In-place dense 4x4 unitary on the qubit pair (q_hi, q_lo), where q_hi is
// the more significant index bit; basis order |q_hi q_lo> = 00, 01, 10, 11.
template <class Scalar>
QESN_KERNEL void apply_2q(VectorXc<Scalar>& amps, int n_qubits, int q_hi, int q_lo,
              const Eigen::Matrix<std::complex<Scalar>, 4, 4>& u) {
  using C = std::complex<Scalar>;
  const std::uint64_t sh = qubit_stride(n_qubits, q_hi);
  const std::uint64_t sl = qubit_stride(n_qubits, q_lo);
  const std::uint64_t s1 = std::min(sh, sl), s2 = std::max(sh, sl);
  const std::uint64_t quarter = static_cast<std::uint64_t>(amps.size()) / 4;
  C* a = amps.data();
  for (std::uint64_t k = 0; k < quarter; ++k) {
    const std::uint64_t i = insert_zero_bit(insert_zero_bit(k, s1), s2);
    const std::uint64_t i01 = i | sl, i10 = i | sh, i11 = i | sh | sl;
    const C a0 = a[i], a1 = a[i01], a2 = a[i10], a3 = a[i11];
    a[i] = u(0, 0) * a0 + u(0, 1) * a1 + u(0, 2) * a2 + u(0, 3) * a3;
    a[i01] = u(1, 0) * a0 + u(1, 1) * a1 + u(1, 2) * a2 + u(1, 3) * a3;
    a[i10] = u(2, 0) * a0 + u(2, 1) * a1 + u(2, 2) * a2 + u(2, 3) * a3;
    a[i11] = u(3, 0) * a0 + u(3, 1) * a1 + u(3, 2) * a2 + u(3, 3) * a3;
  }
}

template <class Scalar>
void check_qubits(int n_qubits, const std::vector<int>& qubits) {
  std::uint64_t seen = 0;
  for (int q : qubits) {
    require(q >= 0 && q < n_qubits, ErrorCategory::operand,
            "qubit index " + std::to_string(q) + " out of range");
    const std::uint64_t bit = std::uint64_t{1} << q;
    require((seen & bit) == 0, ErrorCategory::operand,
            "duplicate qubit index " + std::to_string(q));
    seen |= bit;
  }
}

// Outcome index of a basis state restricted to the listed qubits; the first
// listed qubit becomes the most significant outcome bit.
inline std::uint64_t restrict_bits(std::uint64_t basis_index, int n_qubits,
                                   const std::vector<int>& qubits) {
  std::uint64_t out = 0;
  for (int q : qubits) out = (out << 1) | ((basis_index >> (n_qubits - 1 - q)) & 1u);
  return out;
}

}  // namespace detail

template <class Scalar = double>
void apply_gate(StateVector<Scalar>& state, const Gate<Scalar>& gate) {
  gate.validate(state.n_qubits);
  if (gate.kind == Gate<Scalar>::Kind::rotation) {
    detail::apply_1q(state.amps, state.n_qubits, gate.target, gate.target_unitary());
  } else {
    detail::apply_controlled_1q(state.amps, state.n_qubits, gate.control,
                                gate.target, gate.target_unitary());
  }
}

// Probability vector over the listed qubits, entry b = sum of |amp|^2 over all
// basis states whose restriction to `qubits` equals b.
template <class Scalar = double>
VectorX<Scalar> marginal_probs(const StateVector<Scalar>& state,
                               const std::vector<int>& qubits) {
  detail::check_qubits<Scalar>(state.n_qubits, qubits);
  VectorX<Scalar> probs = VectorX<Scalar>::Zero(Index{1} << qubits.size());
  const std::uint64_t dim = static_cast<std::uint64_t>(state.dim());
  for (std::uint64_t i = 0; i < dim; ++i) {
    probs[static_cast<Index>(detail::restrict_bits(i, state.n_qubits, qubits))] +=
        std::norm(state.amps[static_cast<Index>(i)]);
  }
  return probs;
}

// Samples a measurement outcome of the listed qubits, collapses the state onto
// it, renormalizes, and deterministically returns every measured qubit to |0>.
// Returns the outcome as a bitstring packed into an index, first listed qubit
// first (most significant).
template <class Scalar = double>
std::uint64_t measure_collapse_reset(StateVector<Scalar>& state,
                                     const std::vector<int>& qubits,
                                     RandomStream& rng) {
  const VectorX<Scalar> probs = marginal_probs(state, qubits);
  const Scalar total = probs.sum();
  require(total >= Scalar(1e-24), ErrorCategory::numeric,
          "state norm degenerate before measurement");

  // cumulative walk over the (possibly slightly unnormalized) marginal
  const Scalar u = static_cast<Scalar>(rng.uniform()) * total;
  std::uint64_t outcome = static_cast<std::uint64_t>(probs.size()) - 1;
  Scalar acc = 0;
  for (Index b = 0; b < probs.size(); ++b) {
    acc += probs[b];
    if (u < acc) {
      outcome = static_cast<std::uint64_t>(b);
      break;
    }
  }
  const Scalar p = probs[static_cast<Index>(outcome)];
  require(p >= Scalar(1e-24), ErrorCategory::numeric,
          "selected outcome probability degenerate");

  // Project onto the outcome and move the surviving amplitudes to the slots
  // where every measured qubit reads 0 (collapse + reset in one pass). With
  // measured bits set in `mask` and the outcome pattern in `pattern`, the
  // destination index i & ~mask is always <= i, and never collides with a
  // later surviving source, so the remap is safe in place.
  std::uint64_t mask = 0, pattern = 0;
  for (std::size_t j = 0; j < qubits.size(); ++j) {
    const std::uint64_t bit = qubit_stride(state.n_qubits, qubits[j]);
    mask |= bit;
    if ((outcome >> (qubits.size() - 1 - j)) & 1u) pattern |= bit;
  }
  const Scalar inv = Scalar(1) / std::sqrt(p);
  const std::uint64_t dim = static_cast<std::uint64_t>(state.dim());
  auto* a = state.amps.data();
  for (std::uint64_t i = 0; i < dim; ++i) {
    if ((i & mask) == pattern) a[i & ~mask] = a[i] * inv;
  }
  for (std::uint64_t i = 0; i < dim; ++i) {
    if ((i & mask) != 0) a[i] = std::complex<Scalar>(0, 0);
  }
  return outcome;
}

// Trajectory unraveling of the depolarizing channel: independently per listed
// qubit, with probability p apply one of {X, Y, Z} chosen uniformly. The
// ensemble average over trajectories is rho -> (1-p) rho + p/3 (X rho X +
// Y rho Y + Z rho Z) per qubit.
template <class Scalar = double>
void apply_stochastic_pauli(StateVector<Scalar>& state,
                            const std::vector<int>& qubits, Scalar p,
                            RandomStream& rng) {
  require(p >= Scalar(0) && p <= Scalar(1), ErrorCategory::config,
          "depolarizing probability must lie in [0, 1]");
  detail::check_qubits<Scalar>(state.n_qubits, qubits);
  for (int q : qubits) {
    if (!rng.bernoulli(static_cast<double>(p))) continue;
    switch (rng.index(3)) {
      case 0: detail::apply_1q(state.amps, state.n_qubits, q, pauli_x_matrix<Scalar>()); break;
      case 1: detail::apply_1q(state.amps, state.n_qubits, q, pauli_y_matrix<Scalar>()); break;
      default: detail::apply_1q(state.amps, state.n_qubits, q, pauli_z_matrix<Scalar>()); break;
    }
  }
}

// Flips each of the n_bits bits independently with probability p_flip.
inline std::uint64_t readout_bitflip(std::uint64_t bits, int n_bits, double p_flip,
                                     RandomStream& rng) {
  require(p_flip >= 0.0 && p_flip <= 1.0, ErrorCategory::config,
          "readout flip probability must lie in [0, 1]");
  for (int b = 0; b < n_bits; ++b) {
    if (rng.bernoulli(p_flip)) bits ^= std::uint64_t{1} << b;
  }
  return bits;
}

template <class Scalar>
Scalar state_norm(const StateVector<Scalar>& state) {
  return state.amps.norm();
}

}  // namespace qesn
