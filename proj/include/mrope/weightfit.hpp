#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mrope/dataset.hpp"
#include "mrope/mlp.hpp"
#include "mrope/models.hpp"
#include "mrope/policy.hpp"
#include "mrope/representation.hpp"
#include "mrope/softmax.hpp"

namespace mrope {

enum class FitMode { kAuto, kDiscrete, kMlp };

FitMode fit_mode_from_name(const std::string& name);

struct RegressionConfig {
  FitMode mode = FitMode::kAuto;
  // kAuto picks the sample-mean table at or below this many distinct keys.
  std::size_t discrete_threshold = 64;
  MlpConfig mlp;
  bool clamp_at_zero = false;
};

struct OutcomeFitConfig {
  double l2 = 1.0;
};

// Every fit_* entry point rejects datasets tagged DatasetRole::kEval.
void require_training_role(const LoggedDataset& data, const char* who);

// Held-out mean negative log-likelihood for each l2 in config.l2_grid.
std::vector<double> behavior_cv_losses(const LoggedDataset& train, const SoftmaxConfig& config);
// With a nonempty l2_grid the penalty with the lowest held-out loss is used
// (first one on ties) and the final model is refit on all of train.
SoftmaxClassifier fit_behavior_model(const LoggedDataset& train, const SoftmaxConfig& config = {});
Policy fit_behavior_policy(const LoggedDataset& train, const SoftmaxConfig& config = {});

PolicyRatio make_policy_ratio(const Policy& target, const Policy& behavior_hat, double floor = 1e-6);

// Generic least-squares regression of targets onto keys.
RatioModel fit_regression(RatioKind kind, const std::vector<std::vector<double>>& keys,
                          const std::vector<double>& targets, const RegressionConfig& config);

// w(y) ~ E[rho(A, X) | Y = y]
RatioModel fit_marginal_ratio(const LoggedDataset& train, const PolicyRatio& rho_hat,
                              const RegressionConfig& config = {});
// h(y) ~ E[Y rho(A, X) | Y = y]
RatioModel fit_h_model(const LoggedDataset& train, const PolicyRatio& rho_hat,
                       const RegressionConfig& config = {});
// E[rho(A, X) | R = r]
RatioModel fit_representation_ratio(const LoggedDataset& train, const PolicyRatio& rho_hat,
                                    const Representation& representation,
                                    const RegressionConfig& config = {});
// E[(1(A=1) - 1(A=0)) / pi0(A|X) | Y = y]
RatioModel fit_ate_weights(const LoggedDataset& train, const Policy& behavior_hat,
                           const RegressionConfig& config = {}, double floor = 1e-6);

// Gradient of the mean squared error over a batch (one sample per column).
std::vector<double> mlp_gradient(const MlpRegressor& regressor, const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y);

// Per-action ridge regression of y on the context (one-hot for categorical
// ids); actions with fewer than two records fall back to the pooled fit.
OutcomeModel fit_outcome_model(const LoggedDataset& train, const OutcomeFitConfig& config = {});

}  // namespace mrope
