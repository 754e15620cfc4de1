#include "mrope/weightfit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "mrope/errors.hpp"

namespace mrope {

FitMode fit_mode_from_name(const std::string& name) {
  if (name == "auto") return FitMode::kAuto;
  if (name == "discrete") return FitMode::kDiscrete;
  if (name == "mlp") return FitMode::kMlp;
  throw ConfigurationError("unknown fit mode '" + name + "' (auto, discrete, mlp)");
}

void require_training_role(const LoggedDataset& data, const char* who) {
  if (data.role() == DatasetRole::kEval)
    throw ConfigurationError(std::string(who) + ": refusing to fit on an evaluation dataset");
  if (data.size() == 0) throw FitError(std::string(who) + ": empty training set");
}

std::vector<double> behavior_cv_losses(const LoggedDataset& train, const SoftmaxConfig& config) {
  require_training_role(train, "behavior_cv_losses");
  const std::size_t n = train.size(), folds = config.cv_folds;
  if (folds < 2 || folds > n) throw ConfigurationError("behavior model: cv_folds must lie in [2, n]");
  std::size_t dim = 0;
  const auto x = design_matrix(train, &dim);
  const auto n_classes = static_cast<std::size_t>(train.n_actions());
  std::vector<double> losses;
  for (double l2 : config.l2_grid) {
    if (!(l2 >= 0.0)) throw ConfigurationError("behavior model: l2 grid values must be >= 0");
    SoftmaxConfig fold_config = config;
    fold_config.l2 = l2;
    double total = 0.0;
    for (std::size_t k = 0; k < folds; ++k) {
      const std::size_t lo = k * n / folds, hi = (k + 1) * n / folds;
      std::vector<double> fx;
      std::vector<int> fy;
      for (std::size_t i = 0; i < n; ++i) {
        if (i >= lo && i < hi) continue;
        fx.insert(fx.end(), x.begin() + static_cast<std::ptrdiff_t>(i * dim),
                  x.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
        fy.push_back(train.action(i));
      }
      const auto model = SoftmaxClassifier::fit(dim, fx, fy, n_classes, fold_config);
      std::vector<double> p(n_classes);
      for (std::size_t i = lo; i < hi; ++i) {
        model.predict_proba(std::span<const double>(x.data() + i * dim, dim), p);
        total -= std::log(std::max(p[static_cast<std::size_t>(train.action(i))], 1e-300));
      }
    }
    losses.push_back(total / static_cast<double>(n));
  }
  return losses;
}

SoftmaxClassifier fit_behavior_model(const LoggedDataset& train, const SoftmaxConfig& config) {
  require_training_role(train, "fit_behavior_policy");
  SoftmaxConfig final_config = config;
  if (!config.l2_grid.empty()) {
    const auto losses = behavior_cv_losses(train, config);
    final_config.l2 = config.l2_grid[static_cast<std::size_t>(
        std::min_element(losses.begin(), losses.end()) - losses.begin())];
  }
  std::size_t dim = 0;
  const auto x = design_matrix(train, &dim);
  return SoftmaxClassifier::fit(dim, x, train.actions(), static_cast<std::size_t>(train.n_actions()),
                                final_config);
}

Policy fit_behavior_policy(const LoggedDataset& train, const SoftmaxConfig& config) {
  return fit_behavior_model(train, config).policy();
}

PolicyRatio make_policy_ratio(const Policy& target, const Policy& behavior_hat, double floor) {
  return PolicyRatio::from_policies(target, behavior_hat, floor);
}

RatioModel fit_regression(RatioKind kind, const std::vector<std::vector<double>>& keys,
                          const std::vector<double>& targets, const RegressionConfig& config) {
  if (keys.empty()) throw FitError("regression: empty training set");
  if (keys.size() != targets.size()) throw ConfigurationError("regression: keys and targets differ in length");
  const std::size_t dim = keys.front().size();
  for (const auto& k : keys)
    if (k.size() != dim) throw ConfigurationError("regression: keys have inconsistent width");

  FitMode mode = config.mode;
  if (mode == FitMode::kAuto) {
    std::set<std::vector<double>> distinct;
    for (const auto& k : keys) {
      distinct.insert(k);
      if (distinct.size() > config.discrete_threshold) break;
    }
    mode = distinct.size() <= config.discrete_threshold ? FitMode::kDiscrete : FitMode::kMlp;
  }

  RatioModel model = [&] {
    if (mode == FitMode::kDiscrete)
      return RatioModel::from_table(kind, DiscreteRatioTable::fit(keys, targets));
    const auto n = static_cast<Eigen::Index>(keys.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < dim; ++k)
        x(static_cast<Eigen::Index>(k), i) = keys[static_cast<std::size_t>(i)][k];
      y(i) = targets[static_cast<std::size_t>(i)];
    }
    MlpRegressor mlp(dim, config.mlp.hidden, config.mlp.seed);
    mlp.fit(x, y, config.mlp);
    return RatioModel::from_mlp(kind, std::move(mlp));
  }();
  return model.clamped_at_zero(config.clamp_at_zero);
}

namespace {

std::vector<std::vector<double>> outcome_keys(const LoggedDataset& d) {
  std::vector<std::vector<double>> keys(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) keys[i] = {d.outcome(i)};
  return keys;
}

std::vector<double> ratio_targets(const LoggedDataset& d, const PolicyRatio& rho, bool times_y) {
  std::vector<double> t(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    t[i] = rho(d.context(i), d.action(i));
    if (times_y) t[i] *= d.outcome(i);
  }
  return t;
}

}  // namespace

RatioModel fit_marginal_ratio(const LoggedDataset& train, const PolicyRatio& rho_hat,
                              const RegressionConfig& config) {
  require_training_role(train, "fit_marginal_ratio");
  return fit_regression(RatioKind::kMarginalRatio, outcome_keys(train),
                        ratio_targets(train, rho_hat, false), config);
}

RatioModel fit_h_model(const LoggedDataset& train, const PolicyRatio& rho_hat,
                       const RegressionConfig& config) {
  require_training_role(train, "fit_h_model");
  return fit_regression(RatioKind::kHModel, outcome_keys(train), ratio_targets(train, rho_hat, true),
                        config);
}

RatioModel fit_representation_ratio(const LoggedDataset& train, const PolicyRatio& rho_hat,
                                    const Representation& representation,
                                    const RegressionConfig& config) {
  require_training_role(train, "fit_representation_ratio");
  if (representation.needs_embeddings && !train.has_embeddings())
    throw ConfigurationError("fit_representation_ratio: representation needs embeddings");
  std::vector<std::vector<double>> keys(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) keys[i] = representation.of_record(train, i);
  return fit_regression(RatioKind::kRepresentationRatio, keys, ratio_targets(train, rho_hat, false),
                        config);
}

RatioModel fit_ate_weights(const LoggedDataset& train, const Policy& behavior_hat,
                           const RegressionConfig& config, double floor) {
  require_training_role(train, "fit_ate_weights");
  if (train.n_actions() != 2) throw ConfigurationError("fit_ate_weights: binary actions required");
  const PolicyRatio rho = PolicyRatio::ate(behavior_hat, floor);
  return fit_regression(RatioKind::kAteMarginalRatio, outcome_keys(train),
                        ratio_targets(train, rho, false), config);
}

std::vector<double> mlp_gradient(const MlpRegressor& regressor, const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y) {
  return regressor.gradient(x, y);
}

namespace {

// Ridge with an unpenalized intercept: center, solve, recover the bias.
std::vector<double> ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2) {
  const Eigen::Index d = x.cols();
  const Eigen::RowVectorXd mx = x.colwise().mean();
  const double my = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - mx;
  Eigen::MatrixXd a = xc.transpose() * xc;
  a.diagonal().array() += l2;
  const Eigen::VectorXd w = a.ldlt().solve(xc.transpose() * (y.array() - my).matrix());
  std::vector<double> out(static_cast<std::size_t>(d) + 1);
  for (Eigen::Index k = 0; k < d; ++k) out[static_cast<std::size_t>(k)] = w(k);
  out[static_cast<std::size_t>(d)] = my - mx.dot(w);
  return out;
}

}  // namespace

OutcomeModel fit_outcome_model(const LoggedDataset& train, const OutcomeFitConfig& config) {
  require_training_role(train, "fit_outcome_model");
  if (!(config.l2 > 0.0)) throw ConfigurationError("fit_outcome_model: l2 must be positive");
  std::size_t dim = 0;
  const auto flat = design_matrix(train, &dim);
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto di = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd x(n, di);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < di; ++k) x(i, k) = flat[static_cast<std::size_t>(i * di + k)];
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = train.outcome(static_cast<std::size_t>(i));

  const auto pooled = ridge(x, y, config.l2);
  const auto na = static_cast<std::size_t>(train.n_actions());
  std::vector<double> weights;
  weights.reserve(na * (dim + 1));
  for (std::size_t a = 0; a < na; ++a) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n; ++i)
      if (train.action(static_cast<std::size_t>(i)) == static_cast<int>(a)) rows.push_back(i);
    if (rows.size() < 2) {
      weights.insert(weights.end(), pooled.begin(), pooled.end());
      continue;
    }
    Eigen::MatrixXd xa(static_cast<Eigen::Index>(rows.size()), di);
    Eigen::VectorXd ya(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xa.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
      ya(static_cast<Eigen::Index>(r)) = y(rows[r]);
    }
    const auto wa = ridge(xa, ya, config.l2);
    weights.insert(weights.end(), wa.begin(), wa.end());
  }
  return OutcomeModel::linear(na, dim, std::move(weights));
}

}  // namespace mrope
