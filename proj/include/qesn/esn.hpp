// Classical echo-state network and plain linear-regression baselines.
#pragma once

#include <qesn/core.hpp>
#include <qesn/elastic_net.hpp>

#include <cmath>

namespace qesn {

template <class Scalar = double>
struct EsnParams {
  int n_nodes = 4;
  Scalar spectral_radius = Scalar(0.9);
  Scalar input_scale = Scalar(0.5);
  Scalar density = Scalar(0.2);
  Scalar leak_rate = Scalar(1);
  std::uint64_t seed = 1;

  void validate() const {
    require(n_nodes >= 1, ErrorCategory::config, "n_nodes must be >= 1");
    require(spectral_radius > Scalar(0), ErrorCategory::config,
            "spectral_radius must be positive");
    require(density >= Scalar(0) && density <= Scalar(1), ErrorCategory::config,
            "density must lie in [0, 1]");
    require(leak_rate > Scalar(0) && leak_rate <= Scalar(1), ErrorCategory::config,
            "leak_rate must lie in (0, 1]");
  }
};

template <class Scalar = double>
struct EsnState {
  MatrixX<Scalar> reservoir_weights;  // n x n, rescaled to the target radius
  MatrixX<Scalar> input_weights;      // n x d
  VectorX<Scalar> activation;         // n
};

// Power-iteration estimate of the spectral radius. Random reservoirs routinely
// have a dominant complex pair, so each iteration advances two steps and fits
// x_{k+2} = a x_{k+1} + b x_k; the dominant magnitude is the larger root of
// t^2 = a t + b. Deterministic for a fixed seed.
template <class Scalar = double>
Scalar spectral_radius_estimate(const MatrixX<Scalar>& m, Scalar rel_tol = Scalar(1e-8),
                                std::uint64_t seed = 7) {
  require(m.rows() == m.cols() && m.rows() >= 1, ErrorCategory::shape,
          "matrix must be square");
  if (m.cwiseAbs().maxCoeff() == Scalar(0)) return Scalar(0);

  RandomStream rng(mix_seed(seed, 0x5f3759df));
  VectorX<Scalar> v(m.rows());
  for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
  v.normalize();

  Scalar estimate = 0;
  for (int iter = 0; iter < 20000; ++iter) {
    const VectorX<Scalar> y = m * v;
    const Scalar ny = y.norm();
    if (!(ny > Scalar(0))) return Scalar(0);  // reached the nilpotent kernel
    const VectorX<Scalar> z = m * y;

    // least squares for z ~ a y + b v
    const Scalar yy = y.squaredNorm(), vv = v.squaredNorm(), yv = y.dot(v);
    const Scalar det = yy * vv - yv * yv;
    Scalar next;
    if (det <= Scalar(1e-14) * yy * vv) {
      next = ny / std::sqrt(vv);  // v is (numerically) an eigenvector already
    } else {
      const Scalar zy = z.dot(y), zv = z.dot(v);
      const Scalar a = (zy * vv - zv * yv) / det;
      const Scalar b = (zv * yy - zy * yv) / det;
      const Scalar disc = a * a + 4 * b;
      if (disc >= Scalar(0)) {
        const Scalar root = std::sqrt(disc);
        next = std::max(std::abs((a + root) / 2), std::abs((a - root) / 2));
      } else {
        next = std::sqrt(-b);  // conjugate pair: |lambda|^2 = -b
      }
    }
    const Scalar nz = z.norm();
    if (!(nz > Scalar(0))) return Scalar(0);
    v = z / nz;
    if (iter > 2 && std::abs(next - estimate) <= rel_tol * std::abs(next)) {
      return next;
    }
    estimate = next;
  }
  return estimate;
}

// Random sparse reservoir rescaled to the requested spectral radius.
template <class Scalar = double>
EsnState<Scalar> init_esn(const EsnParams<Scalar>& params, int input_dim) {
  params.validate();
  require(input_dim >= 1, ErrorCategory::config, "input_dim must be >= 1");
  RandomStream rng(mix_seed(params.seed, 0));

  EsnState<Scalar> s;
  s.reservoir_weights.resize(params.n_nodes, params.n_nodes);
  for (Index i = 0; i < params.n_nodes; ++i) {
    for (Index j = 0; j < params.n_nodes; ++j) {
      const Scalar value = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
      const bool keep = rng.bernoulli(static_cast<double>(params.density));
      s.reservoir_weights(i, j) = keep ? value : Scalar(0);
    }
  }
  s.input_weights.resize(params.n_nodes, input_dim);
  for (Index i = 0; i < params.n_nodes; ++i) {
    for (Index j = 0; j < input_dim; ++j) {
      s.input_weights(i, j) =
          params.input_scale * static_cast<Scalar>(rng.uniform(-1.0, 1.0));
    }
  }
  s.activation = VectorX<Scalar>::Zero(params.n_nodes);

  // rescale, then verify and correct until the estimate sits on the target;
  // a zero or nilpotent draw cannot be rescaled and needs a different seed
  const Scalar tight = Scalar(1e-12);
  Scalar radius = spectral_radius_estimate(s.reservoir_weights, tight, params.seed);
  require(radius > Scalar(0), ErrorCategory::init,
          "sparsified reservoir has spectral radius 0; reseed required");
  for (int pass = 0; pass < 8; ++pass) {
    s.reservoir_weights *= params.spectral_radius / radius;
    radius = spectral_radius_estimate(s.reservoir_weights, tight, params.seed);
    if (std::abs(radius - params.spectral_radius) <=
        Scalar(1e-10) * params.spectral_radius) {
      break;
    }
  }
  return s;
}

// Leaky-tanh update a_t = (1-leak) a_{t-1} + leak tanh(W_res a_{t-1} + W_in u_t);
// returns one activation row per input row and leaves the final activation in
// the state.
template <class Scalar = double>
MatrixX<Scalar> esn_run(EsnState<Scalar>& state, const MatrixX<Scalar>& series,
                        Scalar leak_rate = Scalar(1)) {
  require(series.cols() == state.input_weights.cols(), ErrorCategory::shape,
          "series dimension does not match the input weights");
  require(leak_rate > Scalar(0) && leak_rate <= Scalar(1), ErrorCategory::config,
          "leak_rate must lie in (0, 1]");
  MatrixX<Scalar> rows(series.rows(), state.activation.size());
  for (Index t = 0; t < series.rows(); ++t) {
    const VectorX<Scalar> pre = state.reservoir_weights * state.activation +
                                state.input_weights * series.row(t).transpose();
    state.activation =
        (1 - leak_rate) * state.activation + leak_rate * pre.array().tanh().matrix();
    rows.row(t) = state.activation.transpose();
  }
  return rows;
}

// Flattened raw context windows: row i corresponds to window end
// t = context_len - 1 + i and holds series[t-c+1 .. t] sample-major.
template <class Scalar = double>
MatrixX<Scalar> window_features(const MatrixX<Scalar>& series, int context_len) {
  require(context_len >= 1, ErrorCategory::config, "context_len must be >= 1");
  require(series.rows() >= context_len, ErrorCategory::shape,
          "series shorter than the context window");
  const Index d = series.cols();
  const Index rows = series.rows() - context_len + 1;
  MatrixX<Scalar> out(rows, static_cast<Index>(context_len) * d);
  for (Index i = 0; i < rows; ++i) {
    for (Index k = 0; k < out.cols(); ++k) {
      out(i, k) = series(i + k / d, k % d);
    }
  }
  return out;
}

// Plain linear baseline: ridge regression (l1 = 0) straight from the raw
// context windows onto the targets aligned with the window ends.
template <class Scalar = double>
ReadoutModel<Scalar> linear_baseline(const MatrixX<Scalar>& series,
                                     const MatrixX<Scalar>& targets, int context_len,
                                     RidgeElasticConfig<Scalar> config) {
  const MatrixX<Scalar> x = window_features(series, context_len);
  require(targets.rows() == series.rows(), ErrorCategory::shape,
          "targets must be row-aligned with the series");
  config.l1 = Scalar(0);
  return fit_elastic_net<Scalar>(x, targets.bottomRows(x.rows()), config);
}

}  // namespace qesn
