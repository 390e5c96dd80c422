// Lorenz-system data generation: fixed-step RK4 integration, transient
// removal, z-score normalization on the training split.
#pragma once

#include <qesn/core.hpp>

#include <cmath>

namespace qesn {

template <class Scalar = double>
struct LorenzParams {
  Scalar sigma = Scalar(10);
  Scalar rho = Scalar(28);
  Scalar beta = Scalar(8.0 / 3.0);
  Scalar dt = Scalar(0.02);
  Index n_steps = 10400;  // total integrated samples incl. the transient
  Eigen::Matrix<Scalar, 3, 1> initial{Scalar(1), Scalar(1), Scalar(1)};
  Index transient_skip = 500;

  void validate() const {
    require(dt > Scalar(0), ErrorCategory::config, "dt must be positive");
    require(n_steps > transient_skip, ErrorCategory::config,
            "n_steps must exceed transient_skip");
    require(transient_skip >= 0, ErrorCategory::config,
            "transient_skip must be nonnegative");
  }
};

template <class Scalar = double>
Eigen::Matrix<Scalar, 3, 1> lorenz_derivative(const Eigen::Matrix<Scalar, 3, 1>& v,
                                              const LorenzParams<Scalar>& p) {
  Eigen::Matrix<Scalar, 3, 1> d;
  d[0] = p.sigma * (v[1] - v[0]);
  d[1] = v[0] * (p.rho - v[2]) - v[1];
  d[2] = v[0] * v[1] - p.beta * v[2];
  return d;
}

// Classical fixed-step RK4; row i is the state at t = i*dt, with the first
// transient_skip rows discarded.
template <class Scalar = double>
MatrixX<Scalar> rk4_integrate(const LorenzParams<Scalar>& params) {
  params.validate();
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  const Index kept = params.n_steps - params.transient_skip;
  MatrixX<Scalar> out(kept, 3);
  Vec3 v = params.initial;
  const Scalar h = params.dt;
  for (Index i = 0; i < params.n_steps; ++i) {
    if (i >= params.transient_skip) out.row(i - params.transient_skip) = v.transpose();
    const Vec3 k1 = lorenz_derivative<Scalar>(v, params);
    const Vec3 k2 = lorenz_derivative<Scalar>(v + h / 2 * k1, params);
    const Vec3 k3 = lorenz_derivative<Scalar>(v + h / 2 * k2, params);
    const Vec3 k4 = lorenz_derivative<Scalar>(v + h * k3, params);
    v += h / 6 * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
    require(v.allFinite(), ErrorCategory::integration,
            "trajectory blew up at step " + std::to_string(i));
  }
  return out;
}

// Normalized (x, y, z) trajectory with the train/test split recorded. The
// z-score statistics come from the training rows only.
template <class Scalar = double>
struct LorenzDataset {
  MatrixX<Scalar> samples;  // N x 3, normalized
  Eigen::Matrix<Scalar, 3, 1> mean;
  Eigen::Matrix<Scalar, 3, 1> scale;
  Index split_index = 0;  // rows [0, split_index) are training data
  LorenzParams<Scalar> params;

  MatrixX<Scalar> denormalize(const MatrixX<Scalar>& normalized) const {
    return (normalized.array().rowwise() * scale.transpose().array()).rowwise() +
           mean.transpose().array();
  }
};

template <class Scalar = double>
LorenzDataset<Scalar> make_dataset(const LorenzParams<Scalar>& params,
                                   Index n_points = 9900, Index split = 6900) {
  require(n_points > 0 && split > 0 && split < n_points, ErrorCategory::config,
          "need 0 < split < n_points");
  const MatrixX<Scalar> raw = rk4_integrate(params);
  require(raw.rows() >= n_points, ErrorCategory::data,
          "integration produced " + std::to_string(raw.rows()) +
              " post-transient samples, need " + std::to_string(n_points));

  LorenzDataset<Scalar> ds;
  ds.params = params;
  ds.split_index = split;
  ds.samples = raw.topRows(n_points);
  for (int c = 0; c < 3; ++c) {
    const auto train = ds.samples.col(c).head(split);
    ds.mean[c] = train.mean();
    const Scalar var = (train.array() - ds.mean[c]).square().mean();
    ds.scale[c] = std::sqrt(var);
    if (ds.scale[c] == Scalar(0)) ds.scale[c] = Scalar(1);
    ds.samples.col(c) = (ds.samples.col(c).array() - ds.mean[c]) / ds.scale[c];
  }
  return ds;
}

}  // namespace qesn
