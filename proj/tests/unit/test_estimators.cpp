#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "envs.hpp"
#include "mrope/errors.hpp"
#include "mrope/estimators.hpp"
#include "mrope/oracle.hpp"
#include "mrope/representation.hpp"
#include "mrope/synth.hpp"
#include "mrope/weightfit.hpp"

namespace mrope {
namespace {

RatioModel outcome_table(RatioKind kind, std::map<double, double> values, double fallback = 0.0) {
  std::map<std::vector<double>, double> entries;
  for (const auto& [y, v] : values) entries[{y}] = v;
  return RatioModel::from_table(kind, DiscreteRatioTable::from_entries(entries, fallback));
}

// Records (x, 1, 1) and (x, 0, 0) with pi_b uniform and pi_t = delta_1.
struct TwoPoint {
  LoggedDataset data = LoggedDataset::categorical({0, 0}, {1, 0}, {1.0, 0.0}, 2);
  Policy target = Policy::tabular(2, {0.0, 1.0});
  Policy behavior = Policy::tabular(2, {0.5, 0.5});
  PolicyRatio rho = PolicyRatio::from_policies(target, behavior);
  RatioModel w = outcome_table(RatioKind::kMarginalRatio, {{0.0, 0.0}, {1.0, 2.0}});
  RatioModel h = outcome_table(RatioKind::kHModel, {{0.0, 0.0}, {1.0, 2.0}});
  OutcomeModel q_equals_a = OutcomeModel::tabular(2, {0.0, 1.0});

  EstimatorInputs inputs() const {
    EstimatorInputs in;
    in.dataset = &data;
    in.target = &target;
    in.policy_ratio = &rho;
    in.marginal_ratio = &w;
    in.h_model = &h;
    in.outcome_model = &q_equals_a;
    return in;
  }
};

TEST(Dm, HandSum) {
  const auto data = LoggedDataset::categorical({0}, {0}, {0.0}, 2);
  const auto target = Policy::tabular(2, {0.25, 0.75});
  const auto q = OutcomeModel::tabular(2, {1.0, 3.0});
  EstimatorInputs in;
  in.dataset = &data;
  in.target = &target;
  in.outcome_model = &q;
  EXPECT_DOUBLE_EQ(dm_estimate(in), 2.5);
}

TEST(Dm, ConstantModels) {
  const auto data = LoggedDataset::categorical({0, 1, 1}, {0, 1, 0}, {5, 6, 7}, 2);
  const auto target = Policy::tabular(2, {0.2, 0.8, 0.9, 0.1});
  for (double c : {0.0, -1.5, 4.0}) {
    const auto q = OutcomeModel::tabular(2, {c, c, c, c});
    EstimatorInputs in;
    in.dataset = &data;
    in.target = &target;
    in.outcome_model = &q;
    EXPECT_NEAR(dm_estimate(in), c, 1e-15);
  }
}

TEST(Ipw, TwoPoint) {
  TwoPoint t;
  EXPECT_DOUBLE_EQ(ipw_estimate(t.inputs()), 1.0);
}

TEST(Ipw, NoShiftIsSampleMean) {
  const auto data = LoggedDataset::categorical({0, 0, 0}, {0, 1, 1}, {1.0, 2.0, 6.0}, 2);
  const auto pi = Policy::tabular(2, {0.3, 0.7});
  const auto rho = PolicyRatio::from_policies(pi, pi);
  EstimatorInputs in;
  in.dataset = &data;
  in.policy_ratio = &rho;
  EXPECT_DOUBLE_EQ(ipw_estimate(in), 3.0);
}

TEST(Ipw, ZeroOutcomes) {
  TwoPoint t;
  const auto zero = t.data.with_outcomes({0.0, 0.0});
  auto in = t.inputs();
  in.dataset = &zero;
  EXPECT_EQ(ipw_estimate(in), 0.0);
  EXPECT_EQ(mr_estimate(in), 0.0);
}

TEST(Mr, TwoPoint) {
  TwoPoint t;
  EXPECT_DOUBLE_EQ(mr_estimate(t.inputs()), 1.0);
}

TEST(Mr, UnitWeightsGiveSampleMean) {
  const auto data = LoggedDataset::categorical({0, 0, 0}, {0, 1, 1}, {1.0, 2.0, 6.0}, 2);
  const auto w = RatioModel::from_function(RatioKind::kMarginalRatio, 1, [](std::span<const double>) { return 1.0; });
  EstimatorInputs in;
  in.dataset = &data;
  in.marginal_ratio = &w;
  EXPECT_DOUBLE_EQ(mr_estimate(in), 3.0);
}

TEST(MrAlt, MatchesMrWithExactH) {
  TwoPoint t;
  EXPECT_DOUBLE_EQ(mr_alt_estimate(t.inputs()), 1.0);
  EXPECT_DOUBLE_EQ(mr_alt_estimate(t.inputs()), mr_estimate(t.inputs()));
}

TEST(MrAlt, LimitingModels) {
  const auto data = LoggedDataset::categorical({0, 0, 0}, {0, 1, 1}, {1.0, 2.0, 6.0}, 2);
  const auto zero = RatioModel::from_function(RatioKind::kHModel, 1, [](std::span<const double>) { return 0.0; });
  const auto ident = RatioModel::from_function(RatioKind::kHModel, 1, [](std::span<const double> y) { return y[0]; });
  EstimatorInputs in;
  in.dataset = &data;
  in.h_model = &zero;
  EXPECT_EQ(mr_alt_estimate(in), 0.0);
  in.h_model = &ident;
  EXPECT_DOUBLE_EQ(mr_alt_estimate(in), 3.0);
}

TEST(Dr, ResidualsVanish) {
  TwoPoint t;
  EXPECT_DOUBLE_EQ(dr_estimate(t.inputs()), 1.0);
  EXPECT_DOUBLE_EQ(dr_estimate(t.inputs()), dm_estimate(t.inputs()));
}

TEST(Dr, ZeroModelIsIpw) {
  TwoPoint t;
  const auto zero = OutcomeModel::tabular(2, {0.0, 0.0});
  auto in = t.inputs();
  in.outcome_model = &zero;
  EXPECT_DOUBLE_EQ(dr_estimate(in), ipw_estimate(in));
}

TEST(SwitchDr, KeepsOnlySmallRatios) {
  TwoPoint t;
  auto in = t.inputs();
  in.tau = 1.0;
  // Only the rho = 0 record keeps its residual; the DM term is pi_t(1|x) * 1.
  EXPECT_DOUBLE_EQ(switch_dr_estimate(in), 1.0);
  const auto zero = OutcomeModel::tabular(2, {0.0, 0.0});
  in.outcome_model = &zero;
  EXPECT_DOUBLE_EQ(switch_dr_estimate(in), 0.0);
}

TEST(SwitchDr, Limits) {
  const auto data = LoggedDataset::categorical({0, 0, 0}, {0, 1, 1}, {1.0, 2.0, 6.0}, 2);
  const auto target = Policy::tabular(2, {0.3, 0.7});
  const auto behavior = Policy::tabular(2, {0.5, 0.5});
  const auto rho = PolicyRatio::from_policies(target, behavior);
  const auto q = OutcomeModel::tabular(2, {0.5, 2.5});
  EstimatorInputs in;
  in.dataset = &data;
  in.target = &target;
  in.policy_ratio = &rho;
  in.outcome_model = &q;
  in.tau = std::numeric_limits<double>::infinity();
  EXPECT_EQ(switch_dr_estimate(in), dr_estimate(in));
  in.tau = 0.0;
  EXPECT_DOUBLE_EQ(switch_dr_estimate(in), dm_estimate(in));
}

TEST(Dros, ShrunkWeight) {
  // rho = 1 and lambda = 1: weight 1 / (1 + 1) on a residual of 1.
  const auto data = LoggedDataset::categorical({0}, {0}, {1.0}, 2);
  const auto pi = Policy::tabular(2, {0.5, 0.5});
  const auto rho = PolicyRatio::from_policies(pi, pi);
  const auto zero = OutcomeModel::tabular(2, {0.0, 0.0});
  EstimatorInputs in;
  in.dataset = &data;
  in.target = &pi;
  in.policy_ratio = &rho;
  in.outcome_model = &zero;
  in.lambda = 1.0;
  EXPECT_DOUBLE_EQ(dros_estimate(in), 0.5);
}

TEST(SelfNormalize, HandValues) {
  const std::vector<double> w = {2.0, 0.0};
  const std::vector<double> y = {1.0, 0.0};
  EXPECT_DOUBLE_EQ(self_normalize(w, y), 1.0);
  const std::vector<double> one_w = {7.0};
  const std::vector<double> one_y = {-3.0};
  EXPECT_DOUBLE_EQ(self_normalize(one_w, one_y), -3.0);
  const std::vector<double> zeros = {0.0, 0.0};
  EXPECT_THROW(self_normalize(zeros, y), DegenerateWeightsError);
}

TEST(SelfNormalize, ConstantWeightsGiveMean) {
  const std::vector<double> y = {1.0, 4.0, -2.0};
  for (double c : {0.5, 3.0, -2.0}) {
    const std::vector<double> w(3, c);
    EXPECT_NEAR(self_normalize(w, y), 1.0, 1e-15);
  }
}

TEST(Ate, IpwTwoPoint) {
  const auto data = LoggedDataset::categorical({0, 0}, {1, 0}, {1.0, 0.0}, 2);
  const auto behavior = Policy::tabular(2, {0.5, 0.5});
  const auto rho = PolicyRatio::ate(behavior);
  EstimatorInputs in;
  in.dataset = &data;
  in.policy_ratio = &rho;
  EXPECT_DOUBLE_EQ(ate_estimate(AteMethod::kIpw, in), 1.0);
}

TEST(Ate, ExactOutcomeModelGivesExactAte) {
  // Two contexts; mu(x, 1) - mu(x, 0) = 0.4 and -0.2.
  const auto data = LoggedDataset::categorical({0, 1, 1, 0}, {0, 1, 0, 1}, {1, 0, 0, 1}, 2);
  const auto q = OutcomeModel::tabular(2, {0.1, 0.5, 0.6, 0.4});
  EstimatorInputs in;
  in.dataset = &data;
  in.outcome_model = &q;
  EXPECT_NEAR(ate_estimate(AteMethod::kDm, in), 0.1, 1e-15);
}

TEST(Ate, IneffectiveTreatmentZeroWeights) {
  const auto data = LoggedDataset::categorical({0, 0, 0}, {0, 1, 1}, {1, 0, 1}, 2);
  const auto w = RatioModel::from_function(RatioKind::kAteMarginalRatio, 1, [](std::span<const double>) { return 0.0; });
  EstimatorInputs in;
  in.dataset = &data;
  in.marginal_ratio = &w;
  EXPECT_EQ(ate_estimate(AteMethod::kMr, in), 0.0);
}

TEST(Dispatch, MissingInputsAndUnknownIds) {
  TwoPoint t;
  EstimatorInputs in;
  in.dataset = &t.data;
  for (const auto& id : estimator_ids()) EXPECT_THROW(estimate(id, in), ConfigurationError) << id;
  EXPECT_THROW(estimate("nope", t.inputs()), ConfigurationError);
  EXPECT_THROW(ate_method_from_name("nope"), ConfigurationError);
}

TEST(Dispatch, SignedRatioRejectedByPolicyEstimators) {
  TwoPoint t;
  const auto ate_rho = PolicyRatio::ate(t.behavior);
  auto in = t.inputs();
  in.policy_ratio = &ate_rho;
  EXPECT_THROW(ipw_estimate(in), ConfigurationError);
}

// Per-record representation r = y on the Y = a environment: the support of
// R given x under pi is {(a, pi(a|x))}.
Representation outcome_with_support() {
  Representation r = Representation::outcome();
  r.distribution = [](ContextRef ctx, const Policy& pi) {
    std::vector<std::pair<Representation::Key, double>> out;
    for (int a = 0; a < 2; ++a) out.push_back({{static_cast<double>(a)}, pi.prob(ctx, a)});
    return out;
  };
  return r;
}

TEST(GmDr, ExactModelsRecoverTruth) {
  const auto env = testing::y_equals_a_env({0.3, 0.7}, {0.8, 0.2});
  const auto data = sample_logged_dataset(env, 40, 5);
  const auto target = env.target_policy();
  const auto rep = outcome_with_support();
  const auto w_true = true_marginal_ratio(env);
  const auto ratio = RatioModel::from_function(RatioKind::kRepresentationRatio, 1,
                                               [&](std::span<const double> r) { return w_true.at(r[0]); });
  EstimatorInputs in;
  in.dataset = &data;
  in.target = &target;
  in.representation = &rep;
  in.representation_ratio = &ratio;
  in.representation_outcome = [](std::span<const double> r) { return r[0]; };
  EXPECT_NEAR(gmdr_estimate(in), true_policy_value(env), 1e-14);

  in.representation_outcome = [](std::span<const double>) { return 0.0; };
  EXPECT_DOUBLE_EQ(gmdr_estimate(in), gmips_estimate(in));
}

TEST(GmDr, OutcomeRepresentationLeavesDirectTerm) {
  const auto env = testing::y_equals_a_env({0.3, 0.7}, {0.8, 0.2});
  const auto data = sample_logged_dataset(env, 25, 8);
  const auto target = env.target_policy();
  const auto rep = outcome_with_support();
  const auto ratio = RatioModel::from_function(RatioKind::kRepresentationRatio, 1,
                                               [](std::span<const double> r) { return 3.0 + r[0]; });
  EstimatorInputs in;
  in.dataset = &data;
  in.target = &target;
  in.representation = &rep;
  in.representation_ratio = &ratio;
  in.representation_outcome = [](std::span<const double> r) { return r[0]; };
  // mu(y) = y makes every residual zero whatever the ratio is.
  EXPECT_NEAR(gmdr_estimate(in), 0.2, 1e-15);
}

// Coincidences on random tabular data with estimated models.
class Coincidence : public ::testing::TestWithParam<int> {};

TEST_P(Coincidence, EstimatorLimits) {
  const std::uint64_t seed = GetParam();
  const auto env = random_tabular_env({4, 3, 4, 3, 3, 3}, {}, seed);
  const auto train = sample_logged_dataset(env, 300, seed, 0).with_role(DatasetRole::kTrain);
  const auto data = sample_logged_dataset(env, 60, seed, 1);
  const auto target = env.target_policy();
  const auto behavior_hat = fit_behavior_policy(train);
  const auto rho = make_policy_ratio(target, behavior_hat);
  const auto w = fit_marginal_ratio(train, rho);
  const auto q = fit_outcome_model(train);
  const auto zero_q = OutcomeModel::tabular(3, std::vector<double>(12, 0.0));

  EstimatorInputs in;
  in.dataset = &data;
  in.target = &target;
  in.policy_ratio = &rho;
  in.marginal_ratio = &w;
  in.outcome_model = &q;
  const double dm = dm_estimate(in);
  const double dr = dr_estimate(in);

  in.lambda = 0.0;
  EXPECT_NEAR(dros_estimate(in), dm, 1e-14);
  in.lambda = 1e12;
  EXPECT_NEAR(dros_estimate(in), dr, 1e-6);
  in.tau = std::numeric_limits<double>::infinity();
  EXPECT_EQ(switch_dr_estimate(in), dr);

  in.outcome_model = &zero_q;
  EXPECT_NEAR(dr_estimate(in), ipw_estimate(in), 1e-14);

  RegressionConfig discrete;
  discrete.mode = FitMode::kDiscrete;
  const auto xa = Representation::context_action();
  const auto xa_ratio = fit_representation_ratio(train, rho, xa, discrete);
  in.representation = &xa;
  in.representation_ratio = &xa_ratio;
  EXPECT_NEAR(gmips_estimate(in), ipw_estimate(in), 1e-12);

  const auto yrep = Representation::outcome();
  const auto y_ratio = fit_representation_ratio(train, rho, yrep, discrete);
  in.representation = &yrep;
  in.representation_ratio = &y_ratio;
  EXPECT_NEAR(gmips_estimate(in), mr_estimate(in), 1e-12);

  // Rescaling every weight leaves the self-normalized estimators unchanged.
  const auto scaled = PolicyRatio::from_function([&](ContextRef c, int a) { return 3.7 * rho(c, a); });
  const auto w_scaled = RatioModel::from_function(RatioKind::kMarginalRatio, 1,
                                                  [&](std::span<const double> y) { return 3.7 * w(y); });
  in.outcome_model = &q;
  const double snipw = snipw_estimate(in);
  const double sndr = sndr_estimate(in);
  const double snmr = snmr_estimate(in);
  in.policy_ratio = &scaled;
  in.marginal_ratio = &w_scaled;
  EXPECT_NEAR(snipw_estimate(in), snipw, 1e-13);
  EXPECT_NEAR(sndr_estimate(in), sndr, 1e-13);
  EXPECT_NEAR(snmr_estimate(in), snmr, 1e-13);
}

INSTANTIATE_TEST_SUITE_P(RandomEnvs, Coincidence, ::testing::Range(0, 20));

}  // namespace
}  // namespace mrope
