#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mrope/dataset.hpp"
#include "mrope/policy.hpp"

namespace mrope {

// Action embedding E with p(e|a) independent of x; outcomes depend on (x, e).
struct EmbeddingStructure {
  std::size_t n_embeddings = 0;
  std::vector<double> given_action;      // n_actions x n_embeddings
  std::vector<double> outcome_given_xe;  // n_contexts x n_embeddings x n_outcomes
};

// (X, A) -> R1 -> R2 -> Y.
struct RepresentationChain {
  std::size_t n_r1 = 0;
  std::size_t n_r2 = 0;
  std::vector<double> r1_given_xa;       // (n_contexts * n_actions) x n_r1
  std::vector<double> r2_given_r1;       // n_r1 x n_r2
  std::vector<double> outcome_given_r2;  // n_r2 x n_outcomes
};

// Finite joint distribution p(x) pi(a|x) p(y|x,a) enumerated exactly.
class TabularEnvironment {
 public:
  struct Spec {
    std::vector<double> context_probs;
    std::size_t n_actions = 0;
    std::vector<double> outcomes;       // support values
    std::vector<double> behavior;       // n_contexts x n_actions
    std::vector<double> target;         // n_contexts x n_actions
    std::vector<double> outcome_table;  // n_contexts x n_actions x n_outcomes; derived when empty
    std::optional<EmbeddingStructure> embedding;
    std::optional<RepresentationChain> chain;
  };

  explicit TabularEnvironment(Spec spec);

  std::size_t n_contexts() const { return spec_.context_probs.size(); }
  std::size_t n_actions() const { return spec_.n_actions; }
  std::size_t n_outcomes() const { return spec_.outcomes.size(); }

  double context_prob(std::size_t x) const { return spec_.context_probs[x]; }
  double behavior(std::size_t x, std::size_t a) const { return spec_.behavior[x * n_actions() + a]; }
  double target(std::size_t x, std::size_t a) const { return spec_.target[x * n_actions() + a]; }
  double outcome_value(std::size_t y) const { return spec_.outcomes[y]; }
  std::span<const double> outcome_values() const { return spec_.outcomes; }
  double outcome_prob(std::size_t x, std::size_t a, std::size_t y) const {
    return spec_.outcome_table[(x * n_actions() + a) * n_outcomes() + y];
  }

  const std::optional<EmbeddingStructure>& embedding() const { return spec_.embedding; }
  const std::optional<RepresentationChain>& chain() const { return spec_.chain; }
  double embedding_prob(std::size_t a, std::size_t e) const;
  double outcome_given_embedding(std::size_t x, std::size_t e, std::size_t y) const;

  const Spec& spec() const { return spec_; }

  Policy behavior_policy() const;
  Policy target_policy() const;
  // Copy with a different target table (support condition re-checked).
  TabularEnvironment with_target(std::vector<double> target) const;
  TabularEnvironment with_behavior(std::vector<double> behavior) const;

 private:
  Spec spec_;
};

// Records drawn x ~ p(x), a ~ pi_b(.|x), (e ~ p(.|a)), y ~ p(y|.). Chain
// environments log (r1, r2) as the embedding tuple. Identical (env, n, seed,
// stream) give identical datasets.
LoggedDataset sample_logged_dataset(const TabularEnvironment& env, std::size_t n,
                                    std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace mrope
