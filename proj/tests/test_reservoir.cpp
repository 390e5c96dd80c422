#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <qesn/reservoir.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

using namespace qesn;
using C = std::complex<double>;
using Matrix4 = Eigen::Matrix<C, 4, 4>;

namespace {

constexpr double kPi = 3.14159265358979323846;

QesnParams<double> small_params() {
  QesnParams<double> p;
  p.n_qubits = 4;
  p.context_len = 2;
  p.input_dim = 1;
  p.reupload_blocks = 2;
  p.sparsity = 0.0;
  p.shots = 1;
  p.seed = 3;
  return p;
}

QesnWeights<double> zero_weights(const QesnParams<double>& p) {
  QesnWeights<double> w;
  const Index cd = static_cast<Index>(p.context_len) * p.input_dim;
  for (auto& m : w.w_in) m = MatrixX<double>::Zero(cd, p.n_qubits);
  w.w_bias = VectorX<double>::Zero(p.n_qubits);
  w.w_ent_pair = MatrixX<double>::Zero(p.n_memory(), 2);
  w.w_ent_mem = VectorX<double>::Zero(p.n_memory() - 1);
  return w;
}

MatrixX<double> sine_series(Index n) {
  MatrixX<double> s(n, 1);
  for (Index t = 0; t < n; ++t) s(t, 0) = std::sin(0.3 * static_cast<double>(t));
  return s;
}

double tv_distance(const VectorX<double>& a, const VectorX<double>& b) {
  return 0.5 * (a - b).cwiseAbs().sum();
}

// Test-local 4x4 helpers, independent of the library kernels.
Matrix4 kron_test(const Matrix2c<double>& a, const Matrix2c<double>& b) {
  Matrix4 out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      out(i, j) = a(i / 2, j / 2) * b(i % 2, j % 2);
  return out;
}

Matrix4 ctrl_test(const Matrix2c<double>& u) {
  Matrix4 out = Matrix4::Identity();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out(2 + i, 2 + j) = u(i, j);
  return out;
}

}  // namespace

TEST_CASE("init_weights shapes, determinism and sparsity") {
  QesnParams<double> p;
  p.n_qubits = 8;
  p.context_len = 4;
  p.input_dim = 1;
  p.reupload_blocks = 3;
  p.sparsity = 0.5;
  p.seed = 11;

  const auto w1 = init_weights(p);
  const auto w2 = init_weights(p);
  CHECK(w1.w_in[0] == w2.w_in[0]);
  CHECK(w1.w_in[2] == w2.w_in[2]);
  CHECK(w1.w_bias == w2.w_bias);
  CHECK(w1.w_ent_pair == w2.w_ent_pair);
  CHECK(w1.w_ent_mem == w2.w_ent_mem);

  CHECK(w1.w_in[0].rows() == 4);
  CHECK(w1.w_in[0].cols() == 8);
  CHECK(w1.w_ent_pair.rows() == 4);
  CHECK(w1.w_ent_mem.size() == 3);

  // 11 entangling weights, floor(0.5 * 11) = 5 zeroed exactly
  CHECK(w1.entangling_count() == 11);
  CHECK(w1.entangling_zeros() == 5);

  // kappa = fraction zeroed within 1/total
  CHECK(std::abs(static_cast<double>(w1.entangling_zeros()) / 11.0 - 0.5) < 1.0 / 11.0);

  // scale bound: |w_in| <= pi/(c d r), bias in (0, pi], entanglers in
  // {0} u (pi/4, 3pi/4)
  CHECK(w1.w_in[0].cwiseAbs().maxCoeff() <= kPi / 12.0);
  CHECK(w1.w_bias.minCoeff() > 0.0);
  CHECK(w1.w_bias.maxCoeff() <= kPi);
  for (Index k = 0; k < 4; ++k) {
    for (Index c = 0; c < 2; ++c) {
      const double v = w1.w_ent_pair(k, c);
      CHECK((v == 0.0 || (v > kPi / 4 && v < 3 * kPi / 4)));
    }
  }

  SUBCASE("kappa = 1 zeroes everything") {
    p.sparsity = 1.0;
    const auto w = init_weights(p);
    CHECK(w.entangling_zeros() == w.entangling_count());
  }
  SUBCASE("different seeds differ") {
    p.seed = 12;
    const auto w = init_weights(p);
    CHECK(w.w_in[0] != w1.w_in[0]);
  }
}

TEST_CASE("compute_angles") {
  auto p = small_params();
  const auto w = init_weights(p);

  SUBCASE("zero window leaves only the bias") {
    const auto angles = compute_angles(w, VectorX<double>(VectorX<double>::Zero(2)));
    for (int q = 0; q < 4; ++q) {
      for (int s = 0; s < 3; ++s) CHECK(angles(q, s) == doctest::Approx(w.w_bias[q]));
    }
  }
  SUBCASE("one-hot window selects a w_in row on top of zero bias") {
    auto wz = w;
    wz.w_bias.setZero();
    VectorX<double> window = VectorX<double>::Zero(2);
    window[1] = 1.0;
    const auto angles = compute_angles(wz, window);
    for (int q = 0; q < 4; ++q) {
      for (int s = 0; s < 3; ++s) {
        CHECK(angles(q, s) ==
              doctest::Approx(wz.w_in[static_cast<std::size_t>(s)](1, q)));
      }
    }
  }
  SUBCASE("random window matches the naive double-loop oracle") {
    RandomStream rng(21);
    VectorX<double> window(2);
    window << rng.uniform(-2, 2), rng.uniform(-2, 2);
    const auto angles = compute_angles(w, window);
    for (int q = 0; q < 4; ++q) {
      for (int s = 0; s < 3; ++s) {
        double acc = w.w_bias[q];
        for (Index k = 0; k < 2; ++k) {
          acc += w.w_in[static_cast<std::size_t>(s)](k, q) * window[k];
        }
        CHECK(std::abs(angles(q, s) - acc) < 1e-12);
      }
    }
  }
  SUBCASE("window length mismatch is a shape error") {
    CHECK_THROWS_AS(compute_angles(w, VectorX<double>(VectorX<double>::Zero(3))), Error);
  }
}

TEST_CASE("apply_timestep with all-zero weights is the identity circuit") {
  auto p = small_params();
  p.reupload_blocks = 1;
  const auto w = zero_weights(p);
  auto state = init_state<double>(p.n_qubits);
  RandomStream rng(5);
  VectorX<double> window = VectorX<double>::Zero(2);
  for (int rep = 0; rep < 4; ++rep) {
    CHECK(apply_timestep(state, w, window, p, rng) == 0);
  }
  CHECK(std::abs(std::abs(state.amps[0]) - 1.0) < 1e-12);
}

TEST_CASE("single-pair circuit matches a 4x4 matrix-product oracle") {
  QesnParams<double> p;
  p.n_qubits = 2;
  p.context_len = 1;
  p.input_dim = 1;
  p.reupload_blocks = 2;
  p.sparsity = 0.0;
  p.shots = 1;
  p.seed = 9;

  QesnWeights<double> w = zero_weights(p);
  w.w_in[0](0, 0) = 0.3;
  w.w_in[1](0, 0) = -0.2;
  w.w_in[2](0, 0) = 0.15;
  w.w_in[0](0, 1) = -0.4;
  w.w_in[1](0, 1) = 0.25;
  w.w_in[2](0, 1) = 0.6;
  w.w_bias << 0.9, 1.7;
  w.w_ent_pair(0, 0) = 1.1;  // CRY
  w.w_ent_pair(0, 1) = 0.7;  // CRX

  MatrixX<double> series(3, 1);
  series << 0.5, -0.8, 0.2;

  // oracle: explicit 4x4 chain per timestep plus the hand-written partial
  // trace / reset between timesteps
  Matrix4 rho = Matrix4::Zero();
  rho(0, 0) = 1.0;
  MatrixX<double> expected(3, 2);
  for (Index t = 0; t < 3; ++t) {
    const double x = series(t, 0);
    Matrix2c<double> r0 = rotation_matrix(0.3 * x + 0.9, -0.2 * x + 0.9, 0.15 * x + 0.9);
    Matrix2c<double> r1 = rotation_matrix(-0.4 * x + 1.7, 0.25 * x + 1.7, 0.6 * x + 1.7);
    Matrix4 rot = kron_test(r0, r1);
    Matrix4 block = ctrl_test(rx_matrix(0.7)) * rot * ctrl_test(ry_matrix(1.1)) * rot *
                    ctrl_test(pauli_x_matrix<double>()) * rot;
    Matrix4 u = Matrix4::Identity();
    for (int b = 0; b < p.reupload_blocks; ++b) u = block * u;
    rho = u * rho * u.adjoint();
    // readout marginal: qubit 1 is the least significant bit
    expected(t, 0) = std::real(rho(0, 0) + rho(2, 2));
    expected(t, 1) = std::real(rho(1, 1) + rho(3, 3));
    // trace out the readout and reset it to |0>
    Matrix2c<double> mem;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        mem(i, j) = rho(2 * i, 2 * j) + rho(2 * i + 1, 2 * j + 1);
    rho.setZero();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) rho(2 * i, 2 * j) = mem(i, j);
  }

  p.exact_mode = true;
  const auto fm = run_reservoir_exact(series, w, p);
  REQUIRE(fm.values.rows() == 3);
  CHECK((fm.values - expected).cwiseAbs().maxCoeff() < 1e-12);

  // the sampled path agrees statistically
  p.exact_mode = false;
  p.shots = 200000;
  const auto sampled = run_reservoir(series, w, p);
  CHECK((sampled.values - expected).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("run_trajectory basics") {
  auto p = small_params();
  const auto w = zero_weights(p);

  SUBCASE("constant-zero input with zero weights gives all-zero outcomes") {
    RandomStream rng(1);
    const auto outcomes = run_trajectory(MatrixX<double>(MatrixX<double>::Zero(12, 1)), w, p, rng);
    CHECK(outcomes.size() == 11);
    for (auto o : outcomes) CHECK(o == 0);
  }
  SUBCASE("identical seeds give identical bitstring sequences") {
    const auto wr = init_weights(p);
    const auto series = sine_series(20);
    RandomStream rng1(77), rng2(77);
    CHECK(run_trajectory(series, wr, p, rng1) == run_trajectory(series, wr, p, rng2));
  }
  SUBCASE("series not longer than the context window is a shape error") {
    RandomStream rng(1);
    CHECK_THROWS_AS(run_trajectory(MatrixX<double>(MatrixX<double>::Zero(2, 1)), w, p, rng), Error);
  }
}

TEST_CASE("run_reservoir feature semantics") {
  auto p = small_params();
  const auto w = init_weights(p);
  const auto series = sine_series(10);

  SUBCASE("shots = 1 gives one-hot distribution rows") {
    p.shots = 1;
    const auto fm = run_reservoir(series, w, p);
    CHECK(fm.values.rows() == 9);
    CHECK(fm.values.cols() == 4);
    for (Index r = 0; r < fm.values.rows(); ++r) {
      CHECK(fm.values.row(r).sum() == doctest::Approx(1.0));
      CHECK(fm.values.row(r).maxCoeff() == doctest::Approx(1.0));
    }
  }
  SUBCASE("all-zero outcomes give expectation +1") {
    p.feature_mode = FeatureMode::expectation;
    p.shots = 8;
    const auto zw = zero_weights(p);
    const auto fm = run_reservoir(MatrixX<double>(MatrixX<double>::Zero(8, 1)), zw, p);
    CHECK(fm.values.cols() == 2);
    CHECK((fm.values.array() == 1.0).all());
  }
  SUBCASE("expectation mode equals expectation_features of distribution mode") {
    p.shots = 500;
    p.feature_mode = FeatureMode::distribution;
    const auto fd = run_reservoir(series, w, p);
    p.feature_mode = FeatureMode::expectation;
    const auto fe = run_reservoir(series, w, p);
    for (Index r = 0; r < fd.values.rows(); ++r) {
      const VectorX<double> ze = expectation_features<double>(fd.values.row(r).transpose());
      CHECK((ze.transpose() - fe.values.row(r)).cwiseAbs().maxCoeff() < 1e-12);
    }
    // invariants: distribution rows normalized, expectations in [-1, 1]
    for (Index r = 0; r < fd.values.rows(); ++r) {
      CHECK(std::abs(fd.values.row(r).sum() - 1.0) < 1e-9);
      CHECK(fd.values.row(r).minCoeff() >= 0.0);
      CHECK(fe.values.row(r).minCoeff() >= -1.0);
      CHECK(fe.values.row(r).maxCoeff() <= 1.0);
    }
  }
  SUBCASE("the feature matrix is a pure function of its inputs") {
    p.shots = 4000;  // enough to engage both worker threads
    const auto a = run_reservoir(series, w, p);
    const auto b = run_reservoir(series, w, p);
    CHECK(a.values == b.values);
    CHECK(a.timesteps == b.timesteps);
  }
}

TEST_CASE("expectation_features examples") {
  VectorX<double> one_hot(4);
  one_hot << 1, 0, 0, 0;
  auto z = expectation_features(one_hot);
  CHECK(z[0] == doctest::Approx(1.0));
  CHECK(z[1] == doctest::Approx(1.0));

  VectorX<double> uniform = VectorX<double>::Constant(4, 0.25);
  z = expectation_features(uniform);
  CHECK(std::abs(z[0]) < 1e-15);
  CHECK(std::abs(z[1]) < 1e-15);

  VectorX<double> bell(4);
  bell << 0.5, 0, 0, 0.5;
  z = expectation_features(bell);
  CHECK(std::abs(z[0]) < 1e-15);
  CHECK(std::abs(z[1]) < 1e-15);

  VectorX<double> bad(4);
  bad << 0.5, 0.1, 0, 0.1;
  CHECK_THROWS_AS(expectation_features(bad), Error);
}

TEST_CASE("run_reservoir_exact") {
  auto p = small_params();
  p.exact_mode = true;

  SUBCASE("zero weights give one-hot rows at outcome 0") {
    const auto fm = run_reservoir_exact(sine_series(8), zero_weights(p), p);
    for (Index r = 0; r < fm.values.rows(); ++r) {
      CHECK(fm.values(r, 0) == doctest::Approx(1.0));
    }
  }
  SUBCASE("rows sum to one within 1e-9") {
    const auto fm = run_reservoir_exact(sine_series(25), init_weights(p), p);
    for (Index r = 0; r < fm.values.rows(); ++r) {
      CHECK(std::abs(fm.values.row(r).sum() - 1.0) < 1e-9);
    }
  }
  SUBCASE("fused and per-gate executors agree") {
    const auto w = init_weights(p);
    const auto series = sine_series(15);
    const auto fused = run_reservoir_exact(series, w, p);
    // the per-gate path is forced by recompiling with fusion disabled
    auto dm = init_density_matrix<double>(p.n_qubits);
    MatrixX<double> raw_rows(fused.values.rows(), fused.values.cols());
    for (Index row = 0; row < fused.values.rows(); ++row) {
      const Index t = p.context_len - 1 + row;
      const auto angles =
          compute_angles(w, detail::window_at(series, t, p.context_len));
      const auto prog = detail::compile_timestep(w, p, angles, /*allow_fused=*/false);
      detail::run_program_dm(dm, prog, p);
      raw_rows.row(row) = dm_measure_reset_channel(dm, p.readout_qubits()).transpose();
    }
    CHECK((fused.values - raw_rows).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("capacity error above the density-matrix limit") {
    QesnParams<double> big = p;
    big.n_qubits = 14;
    CHECK_THROWS_AS(big.validate(), Error);
  }
  SUBCASE("noise strictly changes the exact features") {
    const auto w = init_weights(p);
    const auto series = sine_series(12);
    const auto clean = run_reservoir_exact(series, w, p);
    auto noisy_p = p;
    noisy_p.noise = NoiseParams<double>{};
    const auto noisy = run_reservoir_exact(series, w, noisy_p);
    CHECK((clean.values - noisy.values).cwiseAbs().maxCoeff() > 1e-6);
    for (Index r = 0; r < noisy.values.rows(); ++r) {
      CHECK(std::abs(noisy.values.row(r).sum() - 1.0) < 1e-9);
    }
  }
  SUBCASE("readout bit-flip transition matches direct summation") {
    const auto w = init_weights(p);
    const auto series = sine_series(6);
    auto noisy_p = p;
    NoiseParams<double> nz;
    nz.p_depol_1q = 0;  // isolate the readout error
    nz.p_depol_2q = 0;
    nz.p_readout_flip = 0.07;
    noisy_p.noise = nz;
    const auto clean = run_reservoir_exact(series, w, p);
    const auto noisy = run_reservoir_exact(series, w, noisy_p);
    const double pf = 0.07;
    for (Index r = 0; r < clean.values.rows(); ++r) {
      for (Index o = 0; o < 4; ++o) {
        double acc = 0;
        for (Index b = 0; b < 4; ++b) {
          const int flips = ((o ^ b) & 1) + (((o ^ b) >> 1) & 1);
          acc += clean.values(r, b) * std::pow(pf, flips) * std::pow(1 - pf, 2 - flips);
        }
        CHECK(noisy.values(r, o) == doctest::Approx(acc).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sampled trajectories converge to the exact channel") {
  auto p = small_params();
  p.sparsity = 0.0;
  const auto w = init_weights(p);
  const auto series = sine_series(11);  // 10 timesteps

  p.exact_mode = true;
  const auto exact = run_reservoir_exact(series, w, p);
  p.exact_mode = false;
  p.shots = 100000;
  const auto sampled = run_reservoir(series, w, p);

  REQUIRE(exact.values.rows() == sampled.values.rows());
  for (Index r = 0; r < exact.values.rows(); ++r) {
    CHECK(tv_distance(exact.values.row(r).transpose(),
                      sampled.values.row(r).transpose()) < 0.02);
  }
}

TEST_CASE("sparsity audit: zero weights emit zero gates") {
  QesnParams<double> p;
  p.n_qubits = 8;
  p.context_len = 3;
  p.reupload_blocks = 3;
  p.sparsity = 0.6;
  p.seed = 31;
  const auto w = init_weights(p);

  const auto stats = audit_timestep(w, p);
  const long nonzero_pair0 = (w.w_ent_pair.col(0).array() != 0.0).count();
  const long nonzero_pair1 = (w.w_ent_pair.col(1).array() != 0.0).count();
  const long nonzero_mem = (w.w_ent_mem.array() != 0.0).count();
  CHECK(stats.crys == p.reupload_blocks * nonzero_pair0);
  CHECK(stats.crxs == p.reupload_blocks * nonzero_pair1);
  CHECK(stats.crzs == p.reupload_blocks * nonzero_mem);
  CHECK(stats.cnots == p.reupload_blocks * 4);
  CHECK(stats.rotations == p.reupload_blocks * 3 * 8);
}

TEST_CASE("logical depth with dense weights is about 27 layers") {
  QesnParams<double> p;
  p.n_qubits = 8;
  p.context_len = 4;
  p.reupload_blocks = 3;
  p.sparsity = 0.0;  // dense
  p.seed = 1;
  const auto stats = audit_timestep(init_weights(p), p);
  // 3 blocks x (3 rotation layers + CNOT + CRY + CRX + 3 chain layers) + measure
  CHECK(stats.depth == 28);
  CHECK(std::abs(static_cast<double>(stats.depth) - 27.0) / 27.0 < 0.30);
}

TEST_CASE("pair permutation permutes feature bits and nothing else") {
  QesnParams<double> p;
  p.n_qubits = 8;
  p.context_len = 2;
  p.reupload_blocks = 2;
  p.sparsity = 0.0;
  p.seed = 17;
  p.exact_mode = true;
  auto w = init_weights(p);
  w.w_ent_mem.setZero();  // the memory chain is not pair-symmetric

  const std::vector<int> perm{2, 0, 3, 1};  // new pair k = old pair perm[k]
  auto wp = w;
  for (int k = 0; k < 4; ++k) {
    for (int s = 0; s < 3; ++s) {
      wp.w_in[static_cast<std::size_t>(s)].col(k) =
          w.w_in[static_cast<std::size_t>(s)].col(perm[static_cast<std::size_t>(k)]);
      wp.w_in[static_cast<std::size_t>(s)].col(4 + k) =
          w.w_in[static_cast<std::size_t>(s)].col(4 + perm[static_cast<std::size_t>(k)]);
    }
    wp.w_bias[k] = w.w_bias[perm[static_cast<std::size_t>(k)]];
    wp.w_bias[4 + k] = w.w_bias[4 + perm[static_cast<std::size_t>(k)]];
    wp.w_ent_pair.row(k) = w.w_ent_pair.row(perm[static_cast<std::size_t>(k)]);
  }

  const auto series = sine_series(12);
  const auto base = run_reservoir_exact(series, w, p);
  const auto permuted = run_reservoir_exact(series, wp, p);

  for (Index r = 0; r < base.values.rows(); ++r) {
    for (Index b = 0; b < 16; ++b) {
      // bit k of the permuted outcome reads old bit perm[k]
      Index mapped = 0;
      for (int k = 0; k < 4; ++k) {
        const Index bit = (b >> (3 - perm[static_cast<std::size_t>(k)])) & 1;
        mapped |= bit << (3 - k);
      }
      CHECK(std::abs(permuted.values(r, mapped) - base.values(r, b)) < 1e-12);
    }
    VectorX<double> sa = base.values.row(r).transpose();
    VectorX<double> sb = permuted.values.row(r).transpose();
    std::sort(sa.data(), sa.data() + sa.size());
    std::sort(sb.data(), sb.data() + sb.size());
    CHECK((sa - sb).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fading memory: different initial states converge in exact mode") {
  QesnParams<double> p;
  p.n_qubits = 4;
  p.context_len = 2;
  p.reupload_blocks = 2;
  p.sparsity = 0.25;
  p.seed = 23;
  p.exact_mode = true;
  const auto w = init_weights(p);
  const auto series = sine_series(140);

  const auto from_zero = run_reservoir_exact(series, w, p);

  // alternative start: a random pure state on the memory register, |00> readout
  RandomStream rng(99);
  auto alt = init_state<double>(4);
  alt.amps.setZero();
  for (Index m = 0; m < 4; ++m) {
    alt.amps[m << 2] = C(rng.uniform(-1, 1), rng.uniform(-1, 1));
  }
  alt.amps /= alt.amps.norm();
  const auto from_random = run_reservoir_exact_from(dm_from_state(alt), series, w, p);

  const Index last = from_zero.values.rows() - 1;
  CHECK(tv_distance(from_zero.values.row(0).transpose(),
                    from_random.values.row(0).transpose()) > 1e-8);
  for (Index r = last - 5; r <= last; ++r) {
    CHECK(tv_distance(from_zero.values.row(r).transpose(),
                      from_random.values.row(r).transpose()) < 1e-2);
  }
}

TEST_CASE("readout_ring pairing alternative stays normalized") {
  auto p = small_params();
  p.pairing = PairingScheme::readout_ring;
  p.exact_mode = true;
  const auto fm = run_reservoir_exact(sine_series(10), init_weights(p), p);
  for (Index r = 0; r < fm.values.rows(); ++r) {
    CHECK(std::abs(fm.values.row(r).sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("feature row count follows the sliding window") {
  QesnParams<double> p;
  p.n_qubits = 4;
  p.context_len = 4;
  p.reupload_blocks = 1;
  p.seed = 2;
  p.exact_mode = true;
  const auto fm = run_reservoir_exact(sine_series(50), init_weights(p), p);
  CHECK(fm.values.rows() == 47);
  CHECK(fm.timesteps[0] == 3);
  CHECK(fm.timesteps[46] == 49);
}
