// Classical linear readout: elastic-net regression by cyclic coordinate
// descent with soft thresholding, plus prediction and RMSE metrics.
#pragma once

#include <qesn/core.hpp>

#include <cmath>
#include <vector>

namespace qesn {

template <class Scalar = double>
struct RidgeElasticConfig {
  Scalar l1 = Scalar(0);  // lambda_1, weight of ||W||_1
  Scalar l2 = Scalar(0);  // lambda_2, weight of ||W||^2 / 2
  Index washout = 0;      // leading rows dropped before the fit
  int max_iter = 1000;    // coordinate-descent sweeps
  Scalar tol = Scalar(1e-8);
  bool fit_intercept = true;

  void validate() const {
    require(l1 >= Scalar(0) && l2 >= Scalar(0), ErrorCategory::config,
            "regularization weights must be nonnegative");
    require(tol > Scalar(0), ErrorCategory::config, "tol must be positive");
    require(max_iter >= 1, ErrorCategory::config, "max_iter must be >= 1");
    require(washout >= 0, ErrorCategory::config, "washout must be nonnegative");
  }
};

// Fitted readout. Coefficients live in standardized feature space; predict()
// applies the stored standardization, so callers never standardize inputs.
template <class Scalar = double>
struct ReadoutModel {
  MatrixX<Scalar> coefficients;  // n_features x n_targets
  VectorX<Scalar> intercept;     // n_targets
  RidgeElasticConfig<Scalar> config;
  VectorX<Scalar> feature_mean;
  VectorX<Scalar> feature_scale;
  std::vector<std::vector<Scalar>> objective_trace;  // per target, per sweep

  // coefficients mapped back to raw (unstandardized) feature space
  MatrixX<Scalar> raw_coefficients() const {
    return coefficients.array().colwise() / feature_scale.array();
  }
};

// Minimizes (1/2m) ||Y - XW||^2 + l1 ||W||_1 + (l2/2) ||W||^2 per target
// column after dropping `washout` rows and standardizing features (constant
// features get scale 1). The intercept absorbs the target means when enabled.
template <class Scalar = double>
ReadoutModel<Scalar> fit_elastic_net(const MatrixX<Scalar>& features,
                                     const MatrixX<Scalar>& targets,
                                     const RidgeElasticConfig<Scalar>& config) {
  config.validate();
  require(features.rows() == targets.rows(), ErrorCategory::shape,
          "features and targets must be row-aligned");
  require(features.allFinite() && targets.allFinite(), ErrorCategory::data,
          "non-finite entries in the training data");
  require(config.washout < features.rows(), ErrorCategory::config,
          "washout (" + std::to_string(config.washout) +
              ") must be smaller than the number of rows (" +
              std::to_string(features.rows()) + ")");

  const Index m = features.rows() - config.washout;
  const Index n = features.cols();
  const Index n_targets = targets.cols();

  ReadoutModel<Scalar> model;
  model.config = config;
  model.feature_mean.resize(n);
  model.feature_scale.resize(n);

  MatrixX<Scalar> x = features.bottomRows(m);
  for (Index j = 0; j < n; ++j) {
    model.feature_mean[j] = x.col(j).mean();
    const Scalar var = (x.col(j).array() - model.feature_mean[j]).square().mean();
    model.feature_scale[j] = var > Scalar(0) ? std::sqrt(var) : Scalar(1);
    x.col(j) = (x.col(j).array() - model.feature_mean[j]) / model.feature_scale[j];
  }

  MatrixX<Scalar> y = targets.bottomRows(m);
  model.intercept = VectorX<Scalar>::Zero(n_targets);
  if (config.fit_intercept) {
    model.intercept = y.colwise().mean();
    y.rowwise() -= model.intercept.transpose();
  }

  // per-coordinate curvature (1/m) ||x_j||^2; 1 for standardized columns,
  // 0 for constant ones
  VectorX<Scalar> curvature(n);
  for (Index j = 0; j < n; ++j) curvature[j] = x.col(j).squaredNorm() / Scalar(m);

  model.coefficients = MatrixX<Scalar>::Zero(n, n_targets);
  model.objective_trace.assign(static_cast<std::size_t>(n_targets), {});

  const Scalar inv_m = Scalar(1) / Scalar(m);
  for (Index target = 0; target < n_targets; ++target) {
    auto w = model.coefficients.col(target);
    VectorX<Scalar> residual = y.col(target);
    auto objective = [&] {
      return residual.squaredNorm() * inv_m / 2 + config.l1 * w.template lpNorm<1>() +
             config.l2 / 2 * w.squaredNorm();
    };
    auto& trace = model.objective_trace[static_cast<std::size_t>(target)];
    trace.push_back(objective());
    for (int sweep = 0; sweep < config.max_iter; ++sweep) {
      Scalar max_delta = 0;
      for (Index j = 0; j < n; ++j) {
        const Scalar denom = curvature[j] + config.l2;
        if (denom == Scalar(0)) continue;
        const Scalar z = inv_m * x.col(j).dot(residual) + curvature[j] * w[j];
        const Scalar shrunk = std::abs(z) - config.l1;
        const Scalar w_new =
            shrunk > Scalar(0) ? (z > Scalar(0) ? shrunk : -shrunk) / denom : Scalar(0);
        const Scalar delta = w_new - w[j];
        if (delta != Scalar(0)) {
          residual -= delta * x.col(j);
          w[j] = w_new;
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
      const Scalar obj = objective();
      require(obj <= trace.back() + Scalar(1e-10) * std::max(Scalar(1), trace.back()),
              ErrorCategory::numeric, "coordinate-descent objective increased");
      trace.push_back(obj);
      if (max_delta < config.tol) break;
    }
  }
  return model;
}

template <class Scalar = double>
MatrixX<Scalar> predict(const ReadoutModel<Scalar>& model,
                        const MatrixX<Scalar>& features) {
  require(features.cols() == model.coefficients.rows(), ErrorCategory::shape,
          "feature width " + std::to_string(features.cols()) +
              " does not match the model (" +
              std::to_string(model.coefficients.rows()) + ")");
  MatrixX<Scalar> x = features;
  for (Index j = 0; j < x.cols(); ++j) {
    x.col(j) = (x.col(j).array() - model.feature_mean[j]) / model.feature_scale[j];
  }
  MatrixX<Scalar> out = x * model.coefficients;
  out.rowwise() += model.intercept.transpose();
  return out;
}

// Per-target-column RMSE over rows >= skip.
template <class Scalar = double>
VectorX<Scalar> rmse(const MatrixX<Scalar>& predictions, const MatrixX<Scalar>& targets,
                     Index skip = 0) {
  require(predictions.rows() == targets.rows() && predictions.cols() == targets.cols(),
          ErrorCategory::shape, "predictions and targets must be aligned");
  require(skip >= 0 && skip < predictions.rows(), ErrorCategory::data,
          "no rows left after skip");
  const Index m = predictions.rows() - skip;
  VectorX<Scalar> out(predictions.cols());
  for (Index c = 0; c < predictions.cols(); ++c) {
    out[c] = std::sqrt(
        (predictions.col(c).tail(m) - targets.col(c).tail(m)).squaredNorm() /
        Scalar(m));
  }
  return out;
}

// The reported aggregate: mean RMSE across target columns.
template <class Scalar = double>
Scalar mean_rmse(const MatrixX<Scalar>& predictions, const MatrixX<Scalar>& targets,
                 Index skip = 0) {
  return rmse(predictions, targets, skip).mean();
}

}  // namespace qesn
