#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrope/dataset.hpp"
#include "mrope/models.hpp"
#include "mrope/policy.hpp"
#include "mrope/representation.hpp"

namespace mrope {

// Non-owning bundle of everything an estimator may consume. Each estimator
// checks the fields it needs and throws ConfigurationError when one is absent.
struct EstimatorInputs {
  const LoggedDataset* dataset = nullptr;
  const Policy* target = nullptr;
  const PolicyRatio* policy_ratio = nullptr;
  const RatioModel* marginal_ratio = nullptr;
  const RatioModel* h_model = nullptr;
  const OutcomeModel* outcome_model = nullptr;
  const Representation* representation = nullptr;
  const RatioModel* representation_ratio = nullptr;
  // mu~(r) for GM-DR.
  std::function<double(std::span<const double>)> representation_outcome;
  std::optional<double> tau;
  std::optional<double> lambda;
};

// (1/n) sum_i sum_a q(x_i, a) pi(a | x_i)
double dm_estimate(const EstimatorInputs& in);
double ipw_estimate(const EstimatorInputs& in);
double mr_estimate(const EstimatorInputs& in);
double mr_alt_estimate(const EstimatorInputs& in);
double dr_estimate(const EstimatorInputs& in);
// Residual term kept only where rho <= tau.
double switch_dr_estimate(const EstimatorInputs& in);
// Residual term weighted by lambda rho / (rho^2 + lambda).
double dros_estimate(const EstimatorInputs& in);
double gmips_estimate(const EstimatorInputs& in);
double gmdr_estimate(const EstimatorInputs& in);

// sum w_i v_i / sum w_i
double self_normalize(std::span<const double> weights, std::span<const double> values);
double snipw_estimate(const EstimatorInputs& in);
double sndr_estimate(const EstimatorInputs& in);
double snmr_estimate(const EstimatorInputs& in);

enum class AteMethod { kDm, kIpw, kDr, kSwitchDr, kDros, kMr };
AteMethod ate_method_from_name(std::string_view name);
const char* ate_method_name(AteMethod m);

// Binary actions. policy_ratio must be the signed ATE ratio and
// marginal_ratio an ATE weight model; the target policy is not used.
double ate_estimate(AteMethod method, const EstimatorInputs& in);

// dm, ipw, dr, switch-dr, dros, mr, mr-alt, mips, gmips, gmdr, snipw, sndr, snmr
const std::vector<std::string>& estimator_ids();
double estimate(std::string_view id, const EstimatorInputs& in);

}  // namespace mrope
