// Exact-mode mirror of the statevector path: unitary conjugation, the
// deterministic measure-and-reset channel, and the depolarizing channel on
// density matrices.
#pragma once

#include <qesn/core.hpp>
#include <qesn/gates.hpp>
#include <qesn/state_vector.hpp>

#include <cmath>
#include <vector>

namespace qesn {

inline constexpr int kMaxDensityQubits = 12;

template <class Scalar = double>
struct DensityMatrix {
  using Complex = std::complex<Scalar>;

  int n_qubits = 0;
  MatrixXc<Scalar> entries;

  Index dim() const { return entries.rows(); }
};

template <class Scalar = double>
DensityMatrix<Scalar> init_density_matrix(int n_qubits) {
  require(n_qubits >= 1 && n_qubits <= kMaxDensityQubits, ErrorCategory::capacity,
          "density-matrix mode supports 1.." + std::to_string(kMaxDensityQubits) +
              " qubits, got " + std::to_string(n_qubits));
  DensityMatrix<Scalar> dm;
  dm.n_qubits = n_qubits;
  dm.entries = MatrixXc<Scalar>::Zero(Index{1} << n_qubits, Index{1} << n_qubits);
  dm.entries(0, 0) = Scalar(1);
  return dm;
}

// rho = |psi><psi|
template <class Scalar = double>
DensityMatrix<Scalar> dm_from_state(const StateVector<Scalar>& state) {
  require(state.n_qubits <= kMaxDensityQubits, ErrorCategory::capacity,
          "density-matrix mode supports at most " +
              std::to_string(kMaxDensityQubits) + " qubits");
  DensityMatrix<Scalar> dm;
  dm.n_qubits = state.n_qubits;
  dm.entries = state.amps * state.amps.adjoint();
  return dm;
}

namespace detail {

// Row (left-factor) indices of a 1-qubit update: all indices with the qubit
// bit 0 and, when controlled, the control bit 1.
inline std::uint64_t nth_pair_base(std::uint64_t k, std::uint64_t s,
                                   std::uint64_t sc) {
  if (sc == 0) return insert_zero_bit(k, s);
  const std::uint64_t s1 = std::min(s, sc), s2 = std::max(s, sc);
  return insert_zero_bit(insert_zero_bit(k, s1), s2) | sc;
}

// rho <- U rho on the row index of `qubit` (left factor of the conjugation).
template <class Scalar>
QESN_KERNEL void dm_left_1q(MatrixXc<Scalar>& rho, int n_qubits, int qubit,
                const Matrix2c<Scalar>& u, int control = -1) {
  using C = std::complex<Scalar>;
  const std::uint64_t s = qubit_stride(n_qubits, qubit);
  const std::uint64_t sc = control >= 0 ? qubit_stride(n_qubits, control) : 0;
  const std::uint64_t dim = static_cast<std::uint64_t>(rho.rows());
  const std::uint64_t pairs = sc == 0 ? dim / 2 : dim / 4;
  const C u00 = u(0, 0), u01 = u(0, 1), u10 = u(1, 0), u11 = u(1, 1);
  for (std::uint64_t j = 0; j < dim; ++j) {
    C* col = rho.data() + j * dim;
    for (std::uint64_t k = 0; k < pairs; ++k) {
      const std::uint64_t i = nth_pair_base(k, s, sc);
      const C a0 = col[i], a1 = col[i | s];
      col[i] = u00 * a0 + u01 * a1;
      col[i | s] = u10 * a0 + u11 * a1;
    }
  }
}

// rho <- rho U^dagger on the column index of `qubit` (right factor).
template <class Scalar>
QESN_KERNEL void dm_right_1q(MatrixXc<Scalar>& rho, int n_qubits, int qubit,
                 const Matrix2c<Scalar>& u, int control = -1) {
  using C = std::complex<Scalar>;
  const std::uint64_t s = qubit_stride(n_qubits, qubit);
  const std::uint64_t sc = control >= 0 ? qubit_stride(n_qubits, control) : 0;
  const std::uint64_t dim = static_cast<std::uint64_t>(rho.rows());
  const std::uint64_t pairs = sc == 0 ? dim / 2 : dim / 4;
  const C c00 = std::conj(u(0, 0)), c01 = std::conj(u(0, 1));
  const C c10 = std::conj(u(1, 0)), c11 = std::conj(u(1, 1));
  for (std::uint64_t k = 0; k < pairs; ++k) {
    const std::uint64_t j = nth_pair_base(k, s, sc);
    C* col0 = rho.data() + j * dim;
    C* col1 = rho.data() + (j | s) * dim;
    for (std::uint64_t i = 0; i < dim; ++i) {
      const C a0 = col0[i], a1 = col1[i];
      col0[i] = a0 * c00 + a1 * c01;
      col1[i] = a0 * c10 + a1 * c11;
    }
  }
}

// rho <- U rho for a dense 4x4 on the pair (q_hi, q_lo).
template <class Scalar>
QESN_KERNEL void dm_left_2q(MatrixXc<Scalar>& rho, int n_qubits, int q_hi, int q_lo,
                const Eigen::Matrix<std::complex<Scalar>, 4, 4>& u) {
  using C = std::complex<Scalar>;
  const std::uint64_t sh = qubit_stride(n_qubits, q_hi);
  const std::uint64_t sl = qubit_stride(n_qubits, q_lo);
  const std::uint64_t s1 = std::min(sh, sl), s2 = std::max(sh, sl);
  const std::uint64_t dim = static_cast<std::uint64_t>(rho.rows());
  const std::uint64_t quads = dim / 4;
  for (std::uint64_t j = 0; j < dim; ++j) {
    C* col = rho.data() + j * dim;
    for (std::uint64_t k = 0; k < quads; ++k) {
      const std::uint64_t i = insert_zero_bit(insert_zero_bit(k, s1), s2);
      const std::uint64_t i01 = i | sl, i10 = i | sh, i11 = i | sh | sl;
      const C a0 = col[i], a1 = col[i01], a2 = col[i10], a3 = col[i11];
      col[i] = u(0, 0) * a0 + u(0, 1) * a1 + u(0, 2) * a2 + u(0, 3) * a3;
      col[i01] = u(1, 0) * a0 + u(1, 1) * a1 + u(1, 2) * a2 + u(1, 3) * a3;
      col[i10] = u(2, 0) * a0 + u(2, 1) * a1 + u(2, 2) * a2 + u(2, 3) * a3;
      col[i11] = u(3, 0) * a0 + u(3, 1) * a1 + u(3, 2) * a2 + u(3, 3) * a3;
    }
  }
}

// rho <- rho U^dagger for a dense 4x4 on the pair (q_hi, q_lo).
template <class Scalar>
QESN_KERNEL void dm_right_2q(MatrixXc<Scalar>& rho, int n_qubits, int q_hi, int q_lo,
                 const Eigen::Matrix<std::complex<Scalar>, 4, 4>& u) {
  using C = std::complex<Scalar>;
  const std::uint64_t sh = qubit_stride(n_qubits, q_hi);
  const std::uint64_t sl = qubit_stride(n_qubits, q_lo);
  const std::uint64_t s1 = std::min(sh, sl), s2 = std::max(sh, sl);
  const std::uint64_t dim = static_cast<std::uint64_t>(rho.rows());
  const std::uint64_t quads = dim / 4;
  Eigen::Matrix<C, 4, 4> uc = u.conjugate();
  for (std::uint64_t k = 0; k < quads; ++k) {
    const std::uint64_t j = insert_zero_bit(insert_zero_bit(k, s1), s2);
    C* c0 = rho.data() + j * dim;
    C* c1 = rho.data() + (j | sl) * dim;
    C* c2 = rho.data() + (j | sh) * dim;
    C* c3 = rho.data() + (j | sh | sl) * dim;
    for (std::uint64_t i = 0; i < dim; ++i) {
      const C a0 = c0[i], a1 = c1[i], a2 = c2[i], a3 = c3[i];
      c0[i] = a0 * uc(0, 0) + a1 * uc(0, 1) + a2 * uc(0, 2) + a3 * uc(0, 3);
      c1[i] = a0 * uc(1, 0) + a1 * uc(1, 1) + a2 * uc(1, 2) + a3 * uc(1, 3);
      c2[i] = a0 * uc(2, 0) + a1 * uc(2, 1) + a2 * uc(2, 2) + a3 * uc(2, 3);
      c3[i] = a0 * uc(3, 0) + a1 * uc(3, 1) + a2 * uc(3, 2) + a3 * uc(3, 3);
    }
  }
}

}  // namespace detail

// rho -> U rho U^dagger. Controlled gates touch only the control-bit-1 block,
// matching the statevector kernels bit for bit.
template <class Scalar = double>
void dm_apply_gate(DensityMatrix<Scalar>& dm, const Gate<Scalar>& gate) {
  gate.validate(dm.n_qubits);
  const Matrix2c<Scalar> u = gate.target_unitary();
  const int control = gate.controlled() ? gate.control : -1;
  detail::dm_left_1q(dm.entries, dm.n_qubits, gate.target, u, control);
  detail::dm_right_1q(dm.entries, dm.n_qubits, gate.target, u, control);
}

// Deterministic measure-and-reset channel on the listed qubits: returns the
// diagonal marginal before the reset, and leaves the measured qubits in |0>
// with the unmeasured subsystem in the ensemble-averaged conditional state
// (partial trace over the measured register, tensored back with |0..0><0..0|).
template <class Scalar = double>
VectorX<Scalar> dm_measure_reset_channel(DensityMatrix<Scalar>& dm,
                                         const std::vector<int>& qubits) {
  detail::check_qubits<Scalar>(dm.n_qubits, qubits);
  const std::uint64_t dim = static_cast<std::uint64_t>(dm.dim());
  const int m = static_cast<int>(qubits.size());

  VectorX<Scalar> probs = VectorX<Scalar>::Zero(Index{1} << m);
  for (std::uint64_t i = 0; i < dim; ++i) {
    probs[static_cast<Index>(detail::restrict_bits(i, dm.n_qubits, qubits))] +=
        std::real(dm.entries(static_cast<Index>(i), static_cast<Index>(i)));
  }
  // diagonal entries may round slightly below zero
  for (Index b = 0; b < probs.size(); ++b) {
    if (probs[b] < Scalar(0) && probs[b] > Scalar(-1e-15)) probs[b] = Scalar(0);
  }

  std::uint64_t mask = 0;
  for (int q : qubits) mask |= qubit_stride(dm.n_qubits, q);

  MatrixXc<Scalar> out = MatrixXc<Scalar>::Zero(dm.dim(), dm.dim());
  for (std::uint64_t j = 0; j < dim; ++j) {
    for (std::uint64_t i = 0; i < dim; ++i) {
      if ((i & mask) != (j & mask)) continue;
      out(static_cast<Index>(i & ~mask), static_cast<Index>(j & ~mask)) +=
          dm.entries(static_cast<Index>(i), static_cast<Index>(j));
    }
  }
  dm.entries.swap(out);
  return probs;
}

// rho -> (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z) on one qubit, in
// closed form on the 2x2 sub-blocks:
//   diag pair   (a, d) -> ((1-2p/3) a + (2p/3) d, (2p/3) a + (1-2p/3) d)
//   off-diagonal b      -> (1-4p/3) b
template <class Scalar = double>
QESN_KERNEL void dm_depolarize(DensityMatrix<Scalar>& dm, int qubit, Scalar p) {
  require(p >= Scalar(0) && p <= Scalar(1), ErrorCategory::config,
          "depolarizing probability must lie in [0, 1]");
  require(qubit >= 0 && qubit < dm.n_qubits, ErrorCategory::operand,
          "qubit index out of range");
  using C = std::complex<Scalar>;
  const std::uint64_t s = qubit_stride(dm.n_qubits, qubit);
  const std::uint64_t dim = static_cast<std::uint64_t>(dm.dim());
  const std::uint64_t pairs = dim / 2;
  const Scalar keep = 1 - 2 * p / 3, swap = 2 * p / 3, off = 1 - 4 * p / 3;
  for (std::uint64_t jk = 0; jk < pairs; ++jk) {
    const std::uint64_t j = detail::insert_zero_bit(jk, s);
    C* col0 = dm.entries.data() + j * dim;
    C* col1 = dm.entries.data() + (j | s) * dim;
    for (std::uint64_t ik = 0; ik < pairs; ++ik) {
      const std::uint64_t i = detail::insert_zero_bit(ik, s);
      const C a = col0[i], b = col1[i], c = col0[i | s], d = col1[i | s];
      col0[i] = keep * a + swap * d;
      col1[i | s] = swap * a + keep * d;
      col1[i] = off * b;
      col0[i | s] = off * c;
    }
  }
}

template <class Scalar>
Scalar dm_trace(const DensityMatrix<Scalar>& dm) {
  return dm.entries.trace().real();
}

template <class Scalar>
Scalar dm_hermiticity_defect(const DensityMatrix<Scalar>& dm) {
  return (dm.entries - dm.entries.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace qesn
