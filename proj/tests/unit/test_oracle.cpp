#include <cmath>

#include <gtest/gtest.h>

#include "envs.hpp"
#include "mrope/errors.hpp"
#include "mrope/oracle.hpp"
#include "mrope/rng.hpp"
#include "mrope/synth.hpp"

namespace mrope {
namespace {

using testing::constant_outcome_env;
using testing::y_equals_a_env;

TEST(TrueValue, HandValues) {
  EXPECT_DOUBLE_EQ(true_policy_value(constant_outcome_env(2.5)), 2.5);
  EXPECT_DOUBLE_EQ(true_policy_value(y_equals_a_env()), 1.0);
  const auto env = random_tabular_env({}, {}, 3);
  EXPECT_DOUBLE_EQ(true_policy_value(env.with_target(env.spec().behavior)),
                   true_policy_value(env, env.spec().behavior));
}

TEST(MarginalRatio, OneContextTwoActions) {
  const auto w = true_marginal_ratio(y_equals_a_env());
  EXPECT_DOUBLE_EQ(w.at(1.0), 2.0);
  EXPECT_DOUBLE_EQ(w.at(0.0), 0.0);
}

TEST(MarginalRatio, NoShiftIsOne) {
  const auto env = random_tabular_env({}, {}, 4);
  for (const auto& [y, v] : true_marginal_ratio(env.with_target(env.spec().behavior)))
    EXPECT_NEAR(v, 1.0, 1e-12) << y;
}

TEST(MarginalRatio, OutcomeIndependentOfActionIsOne) {
  StructureFlags f;
  f.y_indep_a = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (const auto& [y, v] : true_marginal_ratio(random_tabular_env({}, f, seed))) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(MarginalRatio, FormsAgree) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto forms = marginal_ratio_forms(random_tabular_env({4, 5, 3, 3, 3, 3}, {}, seed));
    EXPECT_LE(forms.max_abs_difference, 1e-12);
  }
}

TEST(ExactMoments, DegenerateEnvironments) {
  const auto zero = constant_outcome_env(0.0);
  for (const char* id : {"ipw", "mr", "dm", "dr", "mr-alt"}) {
    EXPECT_EQ(exact_mean(zero, id), 0.0) << id;
    EXPECT_EQ(exact_variance(zero, id), 0.0) << id;
  }
  const auto one = constant_outcome_env(1.0);
  EXPECT_DOUBLE_EQ(exact_variance(one, "ipw"), 1.0);
  EXPECT_DOUBLE_EQ(exact_variance(one, "mr"), 0.0);
}

TEST(ExactMoments, NoShift) {
  const auto base = random_tabular_env({}, {}, 5);
  const auto env = base.with_target(base.spec().behavior);
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t x = 0; x < env.n_contexts(); ++x)
    for (std::size_t a = 0; a < env.n_actions(); ++a)
      for (std::size_t y = 0; y < env.n_outcomes(); ++y) {
        const double p = env.context_prob(x) * env.behavior(x, a) * env.outcome_prob(x, a, y);
        m1 += p * env.outcome_value(y);
        m2 += p * env.outcome_value(y) * env.outcome_value(y);
      }
  EXPECT_NEAR(exact_variance(env, "ipw"), m2 - m1 * m1, 1e-12);
  EXPECT_NEAR(exact_variance(env, "mr"), m2 - m1 * m1, 1e-12);
}

TEST(ExactMoments, UnbiasedWithExactModels) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto env = random_tabular_env({}, {}, seed);
    const double truth = true_policy_value(env);
    OracleModels xa;
    xa.representation = OracleRep::kContextAction;
    for (const char* id : {"ipw", "mr", "mr-alt", "dm", "dr", "gmips"})
      EXPECT_NEAR(exact_mean(env, id, xa), truth, 1e-12) << id << " seed " << seed;
  }
}

TEST(ExactMoments, SelfNormalizedUnsupported) {
  EXPECT_THROW(exact_variance(y_equals_a_env(), "snipw"), UnsupportedError);
}

TEST(Gaps, Prop3HandValues) {
  const auto shifted = proposition_gap(constant_outcome_env(1.0), "prop3");
  EXPECT_DOUBLE_EQ(shifted.lhs, 1.0);
  EXPECT_DOUBLE_EQ(shifted.rhs, 1.0);
  EXPECT_TRUE(shifted.satisfied);
  const auto none = proposition_gap(constant_outcome_env(1.0, {0.5, 0.5}, {0.5, 0.5}), "prop3");
  EXPECT_EQ(none.lhs, 0.0);
  EXPECT_EQ(none.rhs, 0.0);
}

TEST(Gaps, Thm5ChainOnAssumption2Envs) {
  StructureFlags f;
  f.assumption2 = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto g = proposition_gap(random_tabular_env({}, f, seed), "thm5");
    EXPECT_TRUE(g.satisfied) << seed;
    EXPECT_LE(g.terms.at("var_mr"), g.terms.at("var_mips") + 1e-12);
    EXPECT_LE(g.terms.at("var_mips"), g.terms.at("var_ipw") + 1e-12);
  }
}

TEST(Gaps, Prop4HoldsForExactAndRandomOutcomeModels) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GapOptions o;
    o.seed = seed;
    const auto g = proposition_gap(random_tabular_env({}, {}, seed), "prop4", o);
    EXPECT_TRUE(g.satisfied);
    EXPECT_GE(g.terms.at("lhs_random_mu") - g.rhs, -1e-10);
  }
}

TEST(Gaps, PropE1RequiresBinaryActions) {
  EXPECT_THROW(proposition_gap(random_tabular_env({}, {}, 1), "propE1"), ConfigurationError);
  EXPECT_THROW(proposition_gap(random_tabular_env({}, {}, 1), "nope"), ConfigurationError);
}

TEST(Gaps, MarkovChainRequiresChainEnv) {
  EXPECT_THROW(proposition_gap(random_tabular_env({}, {}, 1), "propD2"), ConfigurationError);
}

TEST(WeightIdentities, ExactWeightsZeroError) {
  const auto env = random_tabular_env({}, {}, 6);
  const auto rho = true_policy_ratio(env);
  const auto w = true_marginal_ratio(env);
  const std::size_t na = env.n_actions();
  const auto r = approx_weight_identities(
      env, [&](std::size_t x, std::size_t a) { return rho[x * na + a]; }, [&](double y) { return w.at(y); });
  EXPECT_NEAR(r.bias_difference, 0.0, 1e-12);
  EXPECT_NEAR(r.expected_eps_y, 0.0, 1e-12);
  EXPECT_NEAR(r.variance_gap, proposition_gap(env, "prop3").rhs, 1e-10);
  EXPECT_TRUE(r.satisfied);
}

TEST(WeightIdentities, ShiftedWeightsBiasIsMeanOutcome) {
  const auto env = random_tabular_env({}, {}, 7);
  const auto rho = true_policy_ratio(env);
  const auto w = true_marginal_ratio(env);
  const std::size_t na = env.n_actions();
  const auto r = approx_weight_identities(
      env, [&](std::size_t x, std::size_t a) { return rho[x * na + a]; },
      [&](double y) { return w.at(y) + 1.0; });
  const double mean_y = true_policy_value(env, env.spec().behavior);
  EXPECT_NEAR(r.bias_difference, mean_y, 1e-12);
  EXPECT_NEAR(r.expected_eps_y, mean_y, 1e-12);
}

TEST(WeightIdentities, ArbitraryEstimates) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto env = random_tabular_env({}, {}, seed);
    auto rng = make_rng(seed, 3);
    std::vector<double> rho(9);
    for (double& v : rho) v = 3.0 * uniform01(rng);
    std::map<double, double> w;
    for (double y : env.outcome_values()) w[y] = standard_normal(rng);
    const auto r = approx_weight_identities(
        env, [&](std::size_t x, std::size_t a) { return rho[x * 3 + a]; }, [&](double y) { return w.at(y); });
    EXPECT_NEAR(r.bias_difference, r.expected_eps_y, 1e-10);
    EXPECT_NEAR(r.variance_gap, r.variance_rhs, 1e-10);
  }
}

TEST(Divergence, NoShiftIsZero) {
  const auto base = random_tabular_env({}, {}, 8);
  const auto env = base.with_target(base.spec().behavior);
  for (auto f : {Divergence::kKl, Divergence::kTotalVariation, Divergence::kChiSquare}) {
    const auto d = divergence_check(env, f);
    EXPECT_NEAR(d.joint, 0.0, 1e-12);
    EXPECT_NEAR(d.marginal, 0.0, 1e-12);
  }
}

TEST(Divergence, OutcomeIndependentOfActionMarginalIsZero) {
  StructureFlags f;
  f.y_indep_a = true;
  const auto d = divergence_check(random_tabular_env({}, f, 9), Divergence::kKl);
  EXPECT_NEAR(d.marginal, 0.0, 1e-12);
  EXPECT_GT(d.joint, 0.0);
}

TEST(Divergence, KlWhenOutcomeDeterminesAction) {
  const auto d = divergence_check(y_equals_a_env(), Divergence::kKl);
  EXPECT_NEAR(d.joint, std::log(2.0), 1e-12);
  EXPECT_NEAR(d.marginal, std::log(2.0), 1e-12);
  EXPECT_TRUE(d.satisfied);
}

TEST(PolicyKl, ClosedForm) {
  const auto env = y_equals_a_env({0.5, 0.5}, {0.9, 0.1});
  const auto kl = policy_kl(env, env.spec().behavior, env.spec().target);
  EXPECT_FALSE(kl.infinite);
  EXPECT_NEAR(kl.value, 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-15);
  EXPECT_NEAR(kl.value, 0.5108, 1e-4);
  EXPECT_EQ(policy_kl(env, env.spec().behavior, env.spec().behavior).value, 0.0);
}

TEST(PolicyKl, InfiniteSentinel) {
  const auto env = y_equals_a_env();
  const auto kl = policy_kl(env, env.spec().behavior, env.spec().target);
  EXPECT_TRUE(kl.infinite);
}

TEST(PolicyKl, Nonnegative) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto env = random_tabular_env({}, {}, seed);
    EXPECT_GE(policy_kl(env, env.spec().behavior, env.spec().target).value, 0.0);
  }
}

TEST(MixedTolerance, Scale) {
  EXPECT_DOUBLE_EQ(mixed_tolerance(1e-10, 0.1, 0.2), 1e-10);
  EXPECT_DOUBLE_EQ(mixed_tolerance(1e-10, -50.0, 3.0), 5e-9);
}

}  // namespace
}  // namespace mrope
