#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrope/tabular.hpp"

namespace mrope {

// Representations the oracle can enumerate.
enum class OracleRep { kContextAction, kContextEmbedding, kEmbedding, kR1, kR2, kOutcome };

// Estimated quantities plugged into exact moment computations. Empty members
// default to the exact quantity of the environment.
struct OracleModels {
  std::function<double(std::size_t x, std::size_t a)> rho;
  std::function<double(double y)> w;
  std::function<double(double y)> h;
  std::function<double(std::size_t x, std::size_t a)> mu;
  double tau = 10.0;
  double lambda = 10.0;
  OracleRep representation = OracleRep::kContextEmbedding;
};

double true_policy_value(const TabularEnvironment& env);
// Value of an arbitrary n_contexts x n_actions policy table.
double true_policy_value(const TabularEnvironment& env, std::span<const double> policy);

struct MarginalRatioForms {
  std::vector<double> outcomes;
  std::vector<double> quotient;     // p_pi(y) / p_pi0(y)
  std::vector<double> conditional;  // E_pi0[rho | Y = y]
  double max_abs_difference = 0.0;
};

// Both forms of w(y). Throws SupportViolationError when p_pi0(y) = 0 < p_pi(y).
MarginalRatioForms marginal_ratio_forms(const TabularEnvironment& env);
// Quotient form keyed by outcome value, after checking that the two forms
// agree to 1e-12 (relative to max(1, |w|)).
std::map<double, double> true_marginal_ratio(const TabularEnvironment& env);
// rho(x, a) = pi(a|x) / pi0(a|x), zero where pi0 is zero.
std::vector<double> true_policy_ratio(const TabularEnvironment& env);
// mu(x, a) = E[Y | X = x, A = a]
std::vector<double> true_outcome_mean(const TabularEnvironment& env);

// Expectation and per-sample variance (n Var) of an estimator's summand
// under the behavior distribution. ids: ipw, mr, mr-alt, dm, dr, switch-dr,
// dros, mips, gmips, gmdr, ate-ipw, ate-dm, ate-dr, ate-mr. Self-normalized
// estimators throw UnsupportedError.
double exact_mean(const TabularEnvironment& env, const std::string& estimator,
                  const OracleModels& models = {});
double exact_variance(const TabularEnvironment& env, const std::string& estimator,
                      const OracleModels& models = {});

struct GapReport {
  std::string proposition;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
  std::map<std::string, double> terms;

  nlohmann::json to_json() const;
};

struct GapOptions {
  std::uint64_t seed = 0;  // random outcome model for the arbitrary-mu variants
  double tau = 1.0;        // Switch-DR threshold in propB1
  double lambda = 1.0;     // DRos shrinkage in propB1
};

// which: prop3, prop4, thm5, propB1, propE1, propE2, propD1, propD2.
GapReport proposition_gap(const TabularEnvironment& env, const std::string& which,
                          const GapOptions& options = {});

struct WeightIdentityReport {
  double bias_difference = 0.0;  // Bias(MR) - Bias(IPW)
  double expected_eps_y = 0.0;   // E[eps Y]
  double variance_gap = 0.0;     // n (Var IPW - Var MR)
  double variance_rhs = 0.0;     // E[Var[rho|Y] Y^2] - Var[eps Y] - 2 Cov(w~ Y, eps Y)
  std::vector<double> w_tilde;   // per outcome index
  bool satisfied = false;
};

WeightIdentityReport approx_weight_identities(
    const TabularEnvironment& env, const std::function<double(std::size_t, std::size_t)>& rho_hat,
    const std::function<double(double)>& w_hat);

enum class Divergence { kKl, kTotalVariation, kChiSquare };
Divergence divergence_from_name(const std::string& name);
const char* divergence_name(Divergence f);

struct DivergenceReport {
  double joint = 0.0;
  double marginal = 0.0;
  bool satisfied = false;
};

DivergenceReport divergence_check(const TabularEnvironment& env, Divergence f);

struct KlResult {
  double value = 0.0;
  bool infinite = false;
};

// E_x[KL(pi_b(.|x) || pi_t(.|x))] over tables indexed like the env.
KlResult policy_kl(const TabularEnvironment& env, std::span<const double> behavior,
                   std::span<const double> target);

// The tolerance the oracle uses for identities: tol * max(1, |lhs|, |rhs|).
double mixed_tolerance(double tol, double lhs, double rhs);

}  // namespace mrope
