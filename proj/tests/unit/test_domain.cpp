#include <cmath>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "envs.hpp"
#include "mrope/dataset.hpp"
#include "mrope/errors.hpp"
#include "mrope/policy.hpp"
#include "mrope/report.hpp"
#include "mrope/rng.hpp"
#include "mrope/synth.hpp"
#include "mrope/tabular.hpp"

namespace mrope {
namespace {

Scores bias_scores(std::vector<double> biases) {
  std::vector<double> w;
  for (double b : biases) {
    w.push_back(0.0);
    w.push_back(b);
  }
  return Scores::linear(biases.size(), 1, w);
}

const double kZero[] = {0.0};

TEST(Policy, UniformTabular) {
  const auto p = Policy::tabular(4, {0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25});
  EXPECT_DOUBLE_EQ(p.prob(ContextRef(std::int64_t{1}), 2), 0.25);
  EXPECT_DOUBLE_EQ(Policy::uniform(4).prob(ContextRef(std::int64_t{0}), 2), 0.25);
}

TEST(Policy, AlphaArgmaxDeterministicLimit) {
  const auto p = Policy::alpha_argmax(bias_scores({0, 1, 2, 5, 3}), 1.0);
  const ContextRef x(kZero);
  for (int a = 0; a < 5; ++a) EXPECT_DOUBLE_EQ(p.prob(x, a), a == 3 ? 1.0 : 0.0);
}

TEST(Policy, AlphaArgmaxMixture) {
  const auto p = Policy::alpha_argmax(bias_scores({0, 1, 2, 9, 3, 0, 0, 0, 0, 0}), 0.8);
  const ContextRef x(kZero);
  EXPECT_NEAR(p.prob(x, 3), 0.82, 1e-15);
  EXPECT_NEAR(p.prob(x, 0), 0.02, 1e-15);
}

TEST(Policy, AlphaArgmaxTiesGoToLowestIndex) {
  const auto p = Policy::alpha_argmax(bias_scores({1, 4, 4}), 1.0);
  EXPECT_DOUBLE_EQ(p.prob(ContextRef(kZero), 1), 1.0);
}

TEST(Policy, SoftmaxRowsSumToOne) {
  const auto p = Policy::softmax(bias_scores({-3, 0, 7, 2}), -1.0);
  const auto probs = p.probs(ContextRef(kZero));
  double total = 0.0;
  for (double v : probs) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_GT(probs[0], probs[1]);  // sign -1 favors low scores
}

TEST(Policy, JsonRoundTrip) {
  const std::vector<Policy> policies = {
      Policy::tabular(2, {0.3, 0.7, 0.5, 0.5}), Policy::uniform(3), Policy::point_mass(3, 1),
      Policy::softmax(bias_scores({1, 2, 3}), -1.0), Policy::alpha_argmax(bias_scores({1, 2, 3}), 0.6)};
  for (const auto& p : policies) {
    const auto back = Policy::from_json(p.to_json());
    EXPECT_EQ(back.to_json(), p.to_json());
    const ContextRef x = p.variant() == Policy::Variant::kTabular ? ContextRef(std::int64_t{1}) : ContextRef(kZero);
    for (int a = 0; a < static_cast<int>(p.n_actions()); ++a) EXPECT_DOUBLE_EQ(back.prob(x, a), p.prob(x, a));
  }
}

TEST(Policy, CustomScoresAreNotSerializable) {
  const auto p = Policy::softmax(Scores::custom(2, [](ContextRef, std::span<double> out) { out[0] = out[1] = 0; }));
  EXPECT_THROW(p.to_json(), ConfigurationError);
}

TEST(Sampling, DegenerateSupport) {
  TabularEnvironment::Spec s;
  s.context_probs = {1.0};
  s.n_actions = 1;
  s.outcomes = {0.0};
  s.behavior = {1.0};
  s.target = {1.0};
  s.outcome_table = {1.0};
  const auto d = sample_logged_dataset(TabularEnvironment(s), 5, 3);
  ASSERT_EQ(d.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(d.context_id(i), 0);
    EXPECT_EQ(d.action(i), 0);
    EXPECT_EQ(d.outcome(i), 0.0);
  }
}

TEST(Sampling, SameSeedSameData) {
  const auto env = random_tabular_env({}, {}, 11);
  const auto a = sample_logged_dataset(env, 200, 7);
  const auto b = sample_logged_dataset(env, 200, 7);
  EXPECT_EQ(a, b);
  std::ostringstream sa, sb;
  write_jsonl(a, sa);
  write_jsonl(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_FALSE(a == sample_logged_dataset(env, 200, 7, 1));
}

TEST(Sampling, BinomialConcentration) {
  const auto env = testing::y_equals_a_env({0.5, 0.5}, {0.5, 0.5});
  const std::size_t n = 100000;
  const auto d = sample_logged_dataset(env, n, 42);
  double zeros = 0;
  for (int a : d.actions()) zeros += (a == 0);
  EXPECT_NEAR(zeros / n, 0.5, 3.0 * std::sqrt(0.25 / n));
}

TEST(Dataset, JsonlRoundTripKeepsEmbeddings) {
  const auto d = LoggedDataset::dense(2, {0.5, -1.0, 2.0, 0.25}, {1, 0}, {3.5, -0.125}, 3, 9, {1, 2, 0, 4}, 2);
  std::stringstream s;
  write_jsonl(d, s);
  const auto back = read_jsonl(s);
  EXPECT_EQ(back.size(), 2u);
  EXPECT_EQ(back.dim(), 2u);
  EXPECT_EQ(back.n_actions(), 3);
  EXPECT_EQ(back.seed(), 9u);
  EXPECT_EQ(back.embedding(1)[1], 4);
  EXPECT_EQ(back.outcome(1), -0.125);
  EXPECT_EQ(back.context(0).features()[1], -1.0);
}

TEST(Dataset, JsonlRejectsMalformedInput) {
  std::istringstream missing_header(R"({"x":0,"a":0,"y":1})" "\n");
  EXPECT_THROW(read_jsonl(missing_header), IngestionError);
  std::istringstream bad_action(R"({"schema":"logged-v1","n":1,"n_actions":2,"seed":0})" "\n"
                                R"({"x":0,"a":5,"y":1})" "\n");
  EXPECT_THROW(read_jsonl(bad_action), std::out_of_range);
  std::istringstream wrong_count(R"({"schema":"logged-v1","n":2,"n_actions":2,"seed":0})" "\n"
                                 R"({"x":0,"a":1,"y":1})" "\n");
  EXPECT_THROW(read_jsonl(wrong_count), IngestionError);
}

TEST(Dataset, RejectsActionsOutOfRange) {
  EXPECT_THROW(LoggedDataset::categorical({0}, {2}, {1.0}, 2), std::out_of_range);
  EXPECT_THROW(LoggedDataset::categorical({0, 1}, {0}, {1.0}, 2), ConfigurationError);
}

TEST(Dataset, SliceAndRole) {
  const auto d = LoggedDataset::categorical({0, 1, 2, 0}, {0, 1, 0, 1}, {1, 2, 3, 4}, 2);
  const auto s = d.slice(1, 3);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.context_id(0), 1);
  EXPECT_EQ(s.outcome(1), 3.0);
  EXPECT_EQ(d.with_role(DatasetRole::kEval).role(), DatasetRole::kEval);
}

TEST(TabularEnv, RejectsMalformedTables) {
  TabularEnvironment::Spec s;
  s.context_probs = {0.5, 0.4};
  s.n_actions = 1;
  s.outcomes = {0.0};
  s.behavior = {1.0, 1.0};
  s.target = {1.0, 1.0};
  s.outcome_table = {1.0, 1.0};
  EXPECT_THROW(TabularEnvironment{s}, ConfigurationError);
  s.context_probs = {0.5, 0.5};
  s.outcomes = {};
  EXPECT_THROW(TabularEnvironment{s}, ConfigurationError);
}

TEST(TabularEnv, SupportViolation) {
  EXPECT_THROW(testing::y_equals_a_env({1.0, 0.0}, {0.0, 1.0}), SupportViolationError);
}

TEST(Rng, StreamsAreIndependentAndRepeatable) {
  auto a = make_rng(5, 0);
  auto b = make_rng(5, 0);
  auto c = make_rng(5, 1);
  EXPECT_EQ(a(), b());
  EXPECT_NE(make_rng(5, 0)(), c());
}

TEST(Rng, DirichletOnSimplex) {
  auto rng = make_rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto p = sample_dirichlet(5, 1.0, rng);
    double total = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Report, AteErrorArithmetic) {
  EXPECT_EQ(ate_error(-0.025, -0.025), 0.0);
  EXPECT_NEAR(ate_error(0.03, -0.025), 0.055, 1e-15);
  EXPECT_EQ(ate_error(0.3, -0.2), ate_error(-0.2, 0.3));
}

TEST(Report, DecompositionCloses) {
  auto rng = make_rng(17);
  std::vector<double> est(10), truth(10);
  for (int i = 0; i < 10; ++i) {
    est[i] = standard_normal(rng);
    truth[i] = 0.3 + 0.01 * standard_normal(rng);
  }
  const auto d = decompose_errors(est, truth);
  EXPECT_NEAR(d.mse, d.bias_sq + d.variance, 1e-12);
  EXPECT_GE(d.variance, 0.0);
}

TEST(Report, SharedTruthDecomposition) {
  const std::vector<double> est = {1.0, 3.0};
  const std::vector<double> truth = {1.0, 1.0};
  const auto d = decompose_errors(est, truth);
  EXPECT_DOUBLE_EQ(d.mse, 2.0);
  EXPECT_DOUBLE_EQ(d.bias_sq, 1.0);
  EXPECT_DOUBLE_EQ(d.variance, 1.0);
}

}  // namespace
}  // namespace mrope
