#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mrope/dataset.hpp"
#include "mrope/models.hpp"
#include "mrope/oracle.hpp"
#include "mrope/policy.hpp"
#include "mrope/report.hpp"
#include "mrope/softmax.hpp"
#include "mrope/synth.hpp"
#include "mrope/tabular.hpp"
#include "mrope/weightfit.hpp"

namespace mrope {

enum class SweepAxis { kN, kM, kAlphaStar, kD, kNActions };

SweepAxis sweep_axis_from_name(std::string_view name);
const char* sweep_axis_name(SweepAxis axis);

// Resolved knob values for one grid point.
struct SweepPoint {
  std::size_t n = 800;
  std::size_t m = 2000;
  double alpha_star = 0.8;
  std::size_t d = 50;
  std::size_t n_actions = 20;
};

// kHalf: pi0 for the MR family on the first half of the training split, the
// ratio regression on the second half. kReuse: both on the whole training
// split, sharing the baselines' pi0 (the classification protocol).
enum class MrSplit { kHalf, kReuse };

MrSplit mr_split_from_name(std::string_view name);
const char* mr_split_name(MrSplit split);

// One seed's data: a training split, one evaluation split per requested
// size, and the ground truth plus whatever exact quantities the generator
// can expose.
struct Replicate {
  LoggedDataset train;
  std::vector<LoggedDataset> evals;
  std::vector<double> truths;
  std::shared_ptr<const Policy> target;
  std::shared_ptr<const Policy> behavior;
  std::shared_ptr<const EmbeddingModel> embedding;
  std::function<double(double)> exact_marginal_ratio;
  std::function<double(double)> exact_ate_ratio;
  std::shared_ptr<const OutcomeModel> exact_outcome;
};

class Scenario {
 public:
  virtual ~Scenario() = default;
  // Training data from stream 0, evaluation data from stream 1 of the seed.
  virtual Replicate replicate(std::size_t m, std::span<const std::size_t> eval_sizes,
                              std::uint64_t seed) const = 0;
  // Truth is an average treatment effect and estimators are ATE methods.
  virtual bool is_ate() const { return false; }
  // Training-data discipline for MR-family weights when the sweep leaves it open.
  virtual MrSplit default_mr_split() const { return MrSplit::kHalf; }
  virtual nlohmann::json describe() const = 0;
};

using ScenarioFactory = std::function<std::shared_ptr<const Scenario>(const SweepPoint&)>;

// Truth by Monte Carlo with mc_samples draws, computed once per grid point.
ScenarioFactory saito_scenarios(SaitoConfig base, std::size_t mc_samples = 1000000);
ScenarioFactory sin_scenarios(SinConfig base, std::size_t mc_samples = 1000000);
// Ignores d, n_actions and alpha_star.
ScenarioFactory tabular_scenarios(std::shared_ptr<const TabularEnvironment> env);
// The split is fixed by train_fraction, so n and m are ignored; each seed
// reshuffles, refits the classifier and redraws actions.
ScenarioFactory classification_scenarios(std::shared_ptr<const ClassificationData> data,
                                          double train_fraction, SoftmaxConfig softmax = {});
ScenarioFactory ate_scenarios(AteConfig base);

enum class WeightSource { kEstimated, kExact };

struct EstimatorSettings {
  double tau = 10.0;
  double lambda = 10.0;
  double floor = 1e-6;
  RegressionConfig regression;
  SoftmaxConfig softmax;
  OutcomeFitConfig outcome;
  std::optional<MrSplit> mr_split;  // unset: the generator's default

  nlohmann::json to_json() const;
};

struct SweepConfig {
  std::string generator;
  nlohmann::json generator_config;
  ScenarioFactory factory;
  std::vector<std::string> estimators;
  EstimatorSettings settings;
  WeightSource weights = WeightSource::kEstimated;
  SweepAxis axis = SweepAxis::kN;
  std::vector<double> grid;
  SweepPoint fixed;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t jobs = 0;  // 0: hardware concurrency

  void validate() const;
  // Everything except the factory.
  nlohmann::json to_json() const;
};

// Harness estimator ids: the core ids plus ate-dm, ate-ipw, ate-dr,
// ate-switch-dr, ate-dros, ate-mr.
bool is_harness_estimator(std::string_view id);

struct SeedRow {
  std::string estimator;
  double axis_value = 0.0;
  std::uint64_t seed = 0;
  double estimate = 0.0;
  double true_value = 0.0;
};

struct AggregateRow {
  double axis_value = 0.0;
  EstimateReport report;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kN;
  bool ate = false;
  std::vector<SeedRow> rows;             // grid order, then estimator, then seed
  std::vector<AggregateRow> aggregates;  // grid order, then estimator

  const AggregateRow& find(std::string_view estimator, double axis_value) const;
  nlohmann::json to_json() const;
};

SweepResult run_sweep(const SweepConfig& config);

// estimator,axis,axis_value,seed,estimate,true_value
void write_seed_csv(const SweepResult& result, std::ostream& out);
// estimator,axis,axis_value,mse,bias_sq,variance,n_seeds
void write_aggregate_csv(const SweepResult& result, std::ostream& out);
// estimator,axis,axis_value,seed,ate_error (ATE sweeps)
void write_ate_error_csv(const SweepResult& result, std::ostream& out);

// ---- oracle checks over random finite environments ----

struct OracleSuiteConfig {
  std::size_t n_envs = 100;
  std::uint64_t seed = 0;
  TabularSize size;
  GapOptions gap;
};

struct OracleInstance {
  std::uint64_t seed = 0;  // random_tabular_env seed for replay
  double lhs = 0.0;
  double rhs = 0.0;
  bool passed = false;
};

struct OracleCheckSummary {
  std::string check;
  std::vector<OracleInstance> instances;
  std::size_t envs = 0;
  std::size_t failures = 0;
  double min_lhs_minus_rhs = 0.0;
  double max_abs_lhs_minus_rhs = 0.0;
};

struct OracleSuiteResult {
  std::vector<OracleCheckSummary> checks;
  bool all_passed() const;
  nlohmann::json to_json() const;
};

// Lemma 1 forms, the proposition gaps, the estimated-weight identities and
// the f-divergence inequality on n_envs seeded environments per structure.
OracleSuiteResult run_oracle_suite(const OracleSuiteConfig& config);

// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace mrope
