#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrope/dataset.hpp"
#include "mrope/policy.hpp"
#include "mrope/softmax.hpp"
#include "mrope/tabular.hpp"

namespace mrope {

// ---- finite environments for the oracle ----

struct TabularSize {
  std::size_t n_contexts = 3;
  std::size_t n_actions = 3;
  std::size_t n_outcomes = 3;
  std::size_t n_embeddings = 3;  // used with assumption2
  std::size_t n_r1 = 3;          // used with markov_chain
  std::size_t n_r2 = 3;
};

struct StructureFlags {
  bool assumption2 = false;   // p(e|a) and p(y|x,e)
  bool markov_chain = false;  // (x,a) -> r1 -> r2 -> y
  bool y_indep_a = false;     // p(y|x,a) = p(y|x)
};

// Dirichlet rows throughout; behavior rows are bounded below by 0.01 so the
// support condition holds for any target. Outcome values are distinct draws
// from U(-1, 2).
TabularEnvironment random_tabular_env(const TabularSize& size, const StructureFlags& flags,
                                      std::uint64_t seed);

// ---- categorical action embeddings (known p(e|a), used by MIPS) ----

// p(e|a) = prod_k p_k(e_k | a), independent of x.
class EmbeddingModel {
 public:
  EmbeddingModel(std::size_t n_actions, std::size_t n_dims, std::size_t cardinality,
                 std::vector<double> probs);

  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_dims() const { return n_dims_; }
  std::size_t cardinality() const { return cardinality_; }
  double component(std::size_t a, std::size_t k, std::size_t c) const {
    return probs_[(a * n_dims_ + k) * cardinality_ + c];
  }
  double prob(std::size_t a, std::span<const int> e) const;

 private:
  std::size_t n_actions_;
  std::size_t n_dims_;
  std::size_t cardinality_;
  std::vector<double> probs_;  // n_actions x n_dims x cardinality
};

struct MonteCarloValue {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

// ---- embedding-based synthetic bandit ----

struct SaitoConfig {
  std::size_t d = 50;
  std::size_t n_actions = 20;
  std::size_t embedding_dims = 3;
  std::size_t embedding_cardinality = 10;
  double alpha_star = 0.8;
  double noise_sd = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Keys absent from j keep the values in base.
  static SaitoConfig from_json(const nlohmann::json& j, SaitoConfig base);
  static SaitoConfig from_json(const nlohmann::json& j);
};

// Contexts x ~ N(0, I_d); embeddings from per-dimension softmaxes over
// standard-normal logits; reward
//   q(x, e) = sum_k eta_k (x'M v_{k,e_k} + theta_x'x + theta_e'v_{k,e_k}) / d
// with unobserved category vectors v ~ N(0, I_d), M, theta ~ U[-1, 1],
// eta ~ Dirichlet(1). Behavior softmax(-q(x, a)); target alpha-argmax of q.
class SaitoSetup {
 public:
  explicit SaitoSetup(SaitoConfig config);

  const SaitoConfig& config() const { return config_; }
  std::span<const double> eta() const { return eta_; }

  // stream separates training (0) and evaluation (1) draws for one seed.
  LoggedDataset sample(std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) const;

  double reward_mean(std::span<const double> x, std::span<const int> e) const;
  // q(x, a) = E[q(x, E) | A = a], linear in x.
  void action_values(std::span<const double> x, std::span<double> out) const;
  const Scores& scores() const { return *scores_; }

  Policy behavior_policy() const;
  Policy target_policy(double alpha_star) const;
  Policy target_policy() const { return target_policy(config_.alpha_star); }
  const EmbeddingModel& embedding_model() const { return *embedding_; }

  MonteCarloValue true_value(const Policy& target, std::size_t samples = 1000000,
                             std::uint64_t seed = 0) const;
  // Monte Carlo E_x[KL(pi_b || pi_t)].
  MonteCarloValue behavior_target_kl(const Policy& target, std::size_t samples,
                                     std::uint64_t seed) const;

 private:
  SaitoConfig config_;
  std::vector<double> eta_;
  std::vector<double> theta_x_;        // d
  std::vector<double> category_dot_;   // (k, c) -> M v_{k,c}, d each
  std::vector<double> category_bias_;  // (k, c) -> theta_e' v_{k,c}
  std::shared_ptr<const EmbeddingModel> embedding_;
  std::shared_ptr<const Scores> scores_;
};

// ---- sin-reward synthetic bandit ----

struct SinConfig {
  std::size_t d = 5;
  std::size_t n_actions = 10;
  double alpha_star = 0.8;
  double noise_sd = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Keys absent from j keep the values in base.
  static SinConfig from_json(const nlohmann::json& j, SinConfig base);
  static SinConfig from_json(const nlohmann::json& j);
};

// q(x, a) = sin(a ||x||), behavior softmax(+q), y = q + N(0, noise_sd^2).
class SinSetup {
 public:
  explicit SinSetup(SinConfig config);

  const SinConfig& config() const { return config_; }
  LoggedDataset sample(std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) const;
  double reward_mean(std::span<const double> x, int a) const;
  const Scores& scores() const { return *scores_; }
  Policy behavior_policy() const;
  Policy target_policy(double alpha_star) const;
  Policy target_policy() const { return target_policy(config_.alpha_star); }
  MonteCarloValue true_value(const Policy& target, std::size_t samples = 1000000,
                             std::uint64_t seed = 0) const;

 private:
  SinConfig config_;
  std::shared_ptr<const Scores> scores_;
};

// ---- binary-treatment synthetic study with known ATE ----

struct AteConfig {
  std::size_t d = 5;          // Gaussian covariates besides the group feature
  double base_rate = 0.1;     // p0(x) = base_rate + spread * sigmoid(gamma'x)
  double spread = 0.2;
  double effect = -0.025;     // p1(x) = p0(x) + effect, so the ATE is exact
  double min_propensity = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Keys absent from j keep the values in base.
  static AteConfig from_json(const nlohmann::json& j, AteConfig base);
  static AteConfig from_json(const nlohmann::json& j);
};

// Features (z, x_1..x_d) with z uniform on 0..9; A ~ Bern(clip(z/10)),
// Y ~ Bern(p_A(x)).
class AteSetup {
 public:
  explicit AteSetup(AteConfig config);

  const AteConfig& config() const { return config_; }
  LoggedDataset sample(std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) const;
  double outcome_prob(std::span<const double> features, int a) const;
  double propensity(std::span<const double> features) const;  // P(A = 1 | x)
  Policy behavior_policy() const;
  double true_ate() const { return config_.effect; }

 private:
  AteConfig config_;
  std::vector<double> gamma_;
};

// ---- classification datasets ----

struct ClassificationData {
  std::vector<std::string> feature_names;
  std::size_t dim = 0;
  std::vector<double> features;  // row-major
  std::vector<int> labels;
  std::size_t n_classes = 0;

  std::size_t size() const { return labels.size(); }
};

// Header row, numeric feature columns, last column `label` with integer
// values 0..K-1 (every class present).
ClassificationData read_classification_csv(std::istream& in);
ClassificationData read_classification_csv_file(const std::string& path);

struct ClassificationBandit {
  LoggedDataset train;
  LoggedDataset eval;
  Policy behavior;
  Policy target;
  double true_value = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  double classifier_accuracy = 0.0;  // argmax accuracy on the evaluation rows
};

// Shuffles rows by seed, z-scores features with training statistics, fits
// the softmax classifier f on the training labels, logs actions from
// pi_b = f(x) with rewards 1(a = label). The target is alpha-argmax of f and
// its value is the mean over evaluation rows of pi(label | x).
ClassificationBandit classification_to_bandit(const ClassificationData& data, double train_fraction,
                                              double alpha_star, std::uint64_t seed,
                                              const SoftmaxConfig& config = {});

// Linearly separable K-class data: Gaussian clouds around random centers,
// each point labelled by its nearest center.
ClassificationData make_separable_classification(std::size_t n, std::size_t dim,
                                                 std::size_t n_classes, std::uint64_t seed);
void write_classification_csv(const ClassificationData& data, std::ostream& out);

}  // namespace mrope
