// Gate set of the reservoir circuit: arbitrary single-qubit Euler rotations
// plus CNOT / CRX / CRY / CRZ.
#pragma once

#include <qesn/core.hpp>

#include <cmath>
#include <complex>

namespace qesn {

template <class Scalar>
using Matrix2c = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

template <class Scalar = double>
Matrix2c<Scalar> rx_matrix(Scalar theta) {
  using C = std::complex<Scalar>;
  const Scalar c = std::cos(theta / 2), s = std::sin(theta / 2);
  Matrix2c<Scalar> m;
  m << C(c, 0), C(0, -s), C(0, -s), C(c, 0);
  return m;
}

template <class Scalar = double>
Matrix2c<Scalar> ry_matrix(Scalar theta) {
  using C = std::complex<Scalar>;
  const Scalar c = std::cos(theta / 2), s = std::sin(theta / 2);
  Matrix2c<Scalar> m;
  m << C(c, 0), C(-s, 0), C(s, 0), C(c, 0);
  return m;
}

template <class Scalar = double>
Matrix2c<Scalar> rz_matrix(Scalar theta) {
  using C = std::complex<Scalar>;
  Matrix2c<Scalar> m;
  m << std::exp(C(0, -theta / 2)), C(0, 0), C(0, 0), std::exp(C(0, theta / 2));
  return m;
}

template <class Scalar = double>
Matrix2c<Scalar> pauli_x_matrix() {
  Matrix2c<Scalar> m;
  m << 0, 1, 1, 0;
  return m;
}

template <class Scalar = double>
Matrix2c<Scalar> pauli_y_matrix() {
  using C = std::complex<Scalar>;
  Matrix2c<Scalar> m;
  m << C(0, 0), C(0, -1), C(0, 1), C(0, 0);
  return m;
}

template <class Scalar = double>
Matrix2c<Scalar> pauli_z_matrix() {
  Matrix2c<Scalar> m;
  m << 1, 0, 0, -1;
  return m;
}

// Arbitrary single-qubit rotation R(alpha, beta, gamma) in the ZYZ convention
// with alpha applied first: RZ(gamma) * RY(beta) * RZ(alpha).
template <class Scalar = double>
Matrix2c<Scalar> rotation_matrix(Scalar alpha, Scalar beta, Scalar gamma) {
  return rz_matrix(gamma) * ry_matrix(beta) * rz_matrix(alpha);
}

template <class Scalar = double>
struct Gate {
  enum class Kind { rotation, cnot, crx, cry, crz };

  Kind kind = Kind::rotation;
  int target = 0;
  int control = -1;  // -1 for uncontrolled
  Scalar alpha = 0, beta = 0, gamma = 0;  // controlled rotations keep theta in alpha

  static Gate rotation(int qubit, Scalar alpha, Scalar beta, Scalar gamma) {
    Gate g;
    g.kind = Kind::rotation;
    g.target = qubit;
    g.alpha = alpha;
    g.beta = beta;
    g.gamma = gamma;
    return g;
  }

  static Gate cnot(int control, int target) { return make_controlled(Kind::cnot, control, target, 0); }
  static Gate crx(int control, int target, Scalar theta) { return make_controlled(Kind::crx, control, target, theta); }
  static Gate cry(int control, int target, Scalar theta) { return make_controlled(Kind::cry, control, target, theta); }
  static Gate crz(int control, int target, Scalar theta) { return make_controlled(Kind::crz, control, target, theta); }

  bool controlled() const { return control >= 0; }
  Scalar theta() const { return alpha; }

  // The 2x2 unitary applied on the target (conditioned on the control for the
  // controlled kinds).
  Matrix2c<Scalar> target_unitary() const {
    switch (kind) {
      case Kind::rotation: return rotation_matrix(alpha, beta, gamma);
      case Kind::cnot: return pauli_x_matrix<Scalar>();
      case Kind::crx: return rx_matrix(alpha);
      case Kind::cry: return ry_matrix(alpha);
      case Kind::crz: return rz_matrix(alpha);
    }
    return Matrix2c<Scalar>::Identity();
  }

  void validate(int n_qubits) const {
    require(target >= 0 && target < n_qubits, ErrorCategory::operand,
            "gate target " + std::to_string(target) + " out of range for " +
                std::to_string(n_qubits) + " qubits");
    if (controlled()) {
      require(control < n_qubits, ErrorCategory::operand,
              "gate control " + std::to_string(control) + " out of range for " +
                  std::to_string(n_qubits) + " qubits");
      require(control != target, ErrorCategory::operand,
              "gate control equals target (" + std::to_string(target) + ")");
    }
  }

 private:
  static Gate make_controlled(Kind kind, int control, int target, Scalar theta) {
    require(control >= 0 && target >= 0, ErrorCategory::operand,
            "controlled gate operands must be nonnegative");
    require(control != target, ErrorCategory::operand, "control equals target");
    Gate g;
    g.kind = kind;
    g.control = control;
    g.target = target;
    g.alpha = theta;
    return g;
  }
};

// Parameters of the depolarizing + readout bit-flip noise proxy. Depolarizing
// strength p_depol_1q follows each single-qubit gate on its qubit, p_depol_2q
// follows each two-qubit gate on both qubits, and p_readout_flip corrupts each
// measured bit independently.
template <class Scalar = double>
struct NoiseParams {
  Scalar p_depol_1q = Scalar(2e-4);
  Scalar p_depol_2q = Scalar(3e-3);
  Scalar p_readout_flip = Scalar(1e-2);

  void validate() const {
    auto in_unit = [](Scalar p) { return p >= Scalar(0) && p <= Scalar(1); };
    require(in_unit(p_depol_1q) && in_unit(p_depol_2q) && in_unit(p_readout_flip),
            ErrorCategory::config, "noise probabilities must lie in [0, 1]");
  }
};

}  // namespace qesn
