#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <qesn/esn.hpp>
#include <qesn/lorenz.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace qesn;

namespace {

double radius_oracle(const MatrixX<double>& m) {
  Eigen::EigenSolver<MatrixX<double>> solver(m);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixX<double> lorenz_x(Index n) {
  LorenzParams<double> p;
  p.n_steps = n + 500;
  const auto ds = make_dataset(p, n, n / 2);
  return ds.samples.col(0);
}

}  // namespace

TEST_CASE("spectral_radius_estimate matches the eigenvalue oracle") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    RandomStream rng(seed);
    const Index n = 2 + static_cast<Index>(rng.index(7));
    MatrixX<double> m(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    const double oracle = radius_oracle(m);
    const double estimate = spectral_radius_estimate(m, 1e-12);
    CHECK(std::abs(estimate - oracle) < 1e-6 * std::max(1.0, oracle));
  }

  SUBCASE("nilpotent matrices report zero") {
    MatrixX<double> m = MatrixX<double>::Zero(2, 2);
    m(0, 1) = 1.0;
    CHECK(spectral_radius_estimate(m) == 0.0);
  }
}

TEST_CASE("init_esn") {
  SUBCASE("dense 2-node reservoir hits the target radius") {
    EsnParams<double> p;
    p.n_nodes = 2;
    p.density = 1.0;
    p.spectral_radius = 0.8;
    p.seed = 5;
    const auto s = init_esn(p, 1);
    CHECK(std::abs(radius_oracle(s.reservoir_weights) - 0.8) < 1e-6);
    CHECK(s.activation.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("larger sparse reservoirs hit the target radius") {
    EsnParams<double> p;
    p.n_nodes = 12;
    p.density = 0.4;
    p.spectral_radius = 0.95;
    p.seed = 3;
    const auto s = init_esn(p, 2);
    CHECK(std::abs(radius_oracle(s.reservoir_weights) - 0.95) < 1e-6);
  }
  SUBCASE("density 0 is an init error") {
    EsnParams<double> p;
    p.density = 0.0;
    try {
      init_esn(p, 1);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::init);
    }
  }
  SUBCASE("same seed gives the identical state") {
    EsnParams<double> p;
    p.seed = 9;
    const auto a = init_esn(p, 1);
    const auto b = init_esn(p, 1);
    CHECK(a.reservoir_weights == b.reservoir_weights);
    CHECK(a.input_weights == b.input_weights);
  }
  SUBCASE("rescaling is idempotent") {
    EsnParams<double> p;
    p.n_nodes = 6;
    p.density = 0.5;
    p.seed = 21;
    const auto s = init_esn(p, 1);
    const double est = spectral_radius_estimate(s.reservoir_weights, 1e-12, p.seed);
    const MatrixX<double> again = s.reservoir_weights * (p.spectral_radius / est);
    CHECK((again - s.reservoir_weights).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("esn_run") {
  EsnParams<double> p;
  p.n_nodes = 5;
  p.seed = 2;
  auto state = init_esn(p, 1);

  SUBCASE("zero input from a zero activation stays at zero") {
    MatrixX<double> zeros = MatrixX<double>::Zero(10, 1);
    const auto rows = esn_run(state, zeros, p.leak_rate);
    CHECK(rows.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("leak 1 with a zero reservoir is memoryless") {
    state.reservoir_weights.setZero();
    MatrixX<double> u(3, 1);
    u << 0.2, -0.5, 1.0;
    const auto rows = esn_run(state, u, 1.0);
    for (Index t = 0; t < 3; ++t) {
      const VectorX<double> expect =
          (state.input_weights * u.row(t).transpose()).array().tanh();
      CHECK((rows.row(t).transpose() - expect).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
  SUBCASE("activations stay inside (-1, 1)") {
    const MatrixX<double> x = 5.0 * lorenz_x(300);
    const auto rows = esn_run(state, x, 0.7);
    CHECK(rows.cwiseAbs().maxCoeff() < 1.0);
  }
  SUBCASE("echo-state property: initial conditions wash out") {
    EsnParams<double> ep;
    ep.n_nodes = 8;
    ep.spectral_radius = 0.9;
    ep.seed = 4;
    const MatrixX<double> x = lorenz_x(400);

    auto a = init_esn(ep, 1);
    auto b = init_esn(ep, 1);
    RandomStream rng(77);
    for (Index i = 0; i < b.activation.size(); ++i) {
      b.activation[i] = rng.uniform(-1.0, 1.0);
    }
    const auto ra = esn_run(a, x, ep.leak_rate);
    const auto rb = esn_run(b, x, ep.leak_rate);
    CHECK((ra.row(0) - rb.row(0)).cwiseAbs().maxCoeff() > 1e-3);
    for (Index t = 200; t < 400; t += 50) {
      CHECK((ra.row(t) - rb.row(t)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("linear_baseline") {
  SUBCASE("a linear target is recovered exactly") {
    // well-conditioned windows; smooth series make the window columns nearly
    // collinear, where cyclic coordinate descent converges too slowly for an
    // exactness check
    RandomStream rng(31);
    MatrixX<double> x(500, 1);
    for (Index t = 0; t < 500; ++t) x(t, 0) = rng.uniform(-1.0, 1.0);
    const MatrixX<double> y = 2.0 * x;
    RidgeElasticConfig<double> cfg;
    cfg.washout = 20;
    cfg.tol = 1e-13;
    cfg.max_iter = 10000;
    const auto model = linear_baseline(x, y, 4, cfg);
    const auto features = window_features(x, 4);
    const auto pred = predict(model, features);
    CHECK(mean_rmse(pred, MatrixX<double>(y.bottomRows(features.rows()))) < 1e-6);
  }
  SUBCASE("washout rows have no effect on the coefficients") {
    MatrixX<double> x = lorenz_x(300);
    MatrixX<double> y = 2.0 * x + MatrixX<double>::Constant(300, 1, 0.1);
    RidgeElasticConfig<double> cfg;
    cfg.washout = 30;
    cfg.l2 = 1e-4;
    const auto base = linear_baseline(x, y, 3, cfg);
    // perturb rows that fall inside the washout after windowing
    MatrixX<double> y2 = y;
    y2.topRows(20).setConstant(99.0);
    const auto perturbed = linear_baseline(x, y2, 3, cfg);
    CHECK(base.coefficients == perturbed.coefficients);
  }
  SUBCASE("the nonlinear z target favors the ESN over the linear window") {
    LorenzParams<double> lp;
    lp.n_steps = 3500;
    const auto ds = make_dataset(lp, 3000, 2000);
    const MatrixX<double> x = ds.samples.col(0);
    const MatrixX<double> z = ds.samples.col(2);
    const Index split = ds.split_index;
    const int c = 4;

    RidgeElasticConfig<double> cfg;
    cfg.washout = 100;
    cfg.l2 = 1e-4;

    // linear baseline fit on the training half
    const auto lin = linear_baseline(MatrixX<double>(x.topRows(split)),
                                     MatrixX<double>(z.topRows(split)), c, cfg);
    const auto all_windows = window_features(x, c);
    const Index test_rows = x.rows() - split;
    const MatrixX<double> lin_pred = predict(lin, all_windows);
    const double lin_rmse = mean_rmse(
        MatrixX<double>(lin_pred.bottomRows(test_rows)),
        MatrixX<double>(z.bottomRows(test_rows)));

    // ESN with 8 nodes, same regression config, grid over its scales
    double esn_rmse = 1e9;
    for (double radius : {0.8, 0.9, 0.99}) {
      for (double in_scale : {0.1, 0.5, 1.0}) {
        EsnParams<double> ep;
        ep.n_nodes = 8;
        ep.spectral_radius = radius;
        ep.input_scale = in_scale;
        ep.seed = 6;
        auto state = init_esn(ep, 1);
        const auto rows = esn_run(state, x, ep.leak_rate);
        const auto model = fit_elastic_net(
            MatrixX<double>(rows.topRows(split)), MatrixX<double>(z.topRows(split)), cfg);
        const auto pred = predict(model, rows);
        esn_rmse = std::min(
            esn_rmse, mean_rmse(MatrixX<double>(pred.bottomRows(test_rows)),
                                MatrixX<double>(z.bottomRows(test_rows))));
      }
    }
    CHECK(esn_rmse < lin_rmse);
  }
}
