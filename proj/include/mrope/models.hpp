#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrope/dataset.hpp"
#include "mrope/mlp.hpp"
#include "mrope/policy.hpp"

namespace mrope {

// rho(a, x). Always nonnegative except for the signed ATE variant.
class PolicyRatio {
 public:
  using Fn = std::function<double(ContextRef, int)>;

  // target(a|x) / max(behavior(a|x), floor)
  static PolicyRatio from_policies(Policy target, Policy behavior, double floor = 1e-6);
  // (1(a=1) - 1(a=0)) / max(behavior(a|x), floor)
  static PolicyRatio ate(Policy behavior, double floor = 1e-6);
  static PolicyRatio from_function(Fn fn, bool signed_ratio = false);

  double operator()(ContextRef ctx, int a) const;
  bool is_signed() const { return signed_; }

 private:
  std::shared_ptr<const Policy> target_;
  std::shared_ptr<const Policy> behavior_;
  double floor_ = 1e-6;
  bool signed_ = false;
  Fn fn_;
};

enum class RatioKind { kMarginalRatio, kHModel, kRepresentationRatio, kAteMarginalRatio };

const char* ratio_kind_name(RatioKind kind);
RatioKind ratio_kind_from_name(const std::string& name);

// Sample-mean table keyed by exact covariate value, with the global mean as
// the fallback for unseen keys.
class DiscreteRatioTable {
 public:
  static DiscreteRatioTable fit(std::span<const std::vector<double>> keys,
                                std::span<const double> targets);
  static DiscreteRatioTable from_entries(std::map<std::vector<double>, double> entries,
                                         double fallback);

  double lookup(std::span<const double> key) const;
  const std::map<std::vector<double>, double>& entries() const { return entries_; }
  double fallback() const { return fallback_; }

 private:
  std::map<std::vector<double>, double> entries_;
  double fallback_ = 0.0;
};

// Regression of a per-record target onto a covariate key: y for the
// marginal ratio, h-model and ATE weights, r for representation ratios.
class RatioModel {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  enum class Backing { kTable, kMlp, kFunction };

  static RatioModel from_table(RatioKind kind, DiscreteRatioTable table);
  static RatioModel from_mlp(RatioKind kind, MlpRegressor mlp);
  static RatioModel from_function(RatioKind kind, std::size_t key_dim, Fn fn);

  RatioKind kind() const { return kind_; }
  Backing backing() const { return backing_; }
  std::size_t key_dim() const { return key_dim_; }
  // False for an MLP that received no training epochs.
  bool fitted() const;

  double operator()(std::span<const double> key) const;
  double at(double y) const { return (*this)(std::span<const double>(&y, 1)); }

  // Negative predictions are passed through unless this is set.
  RatioModel clamped_at_zero(bool clamp = true) const;
  bool clamps() const { return clamp_; }

  const DiscreteRatioTable* table() const { return table_.get(); }
  const MlpRegressor* mlp() const { return mlp_.get(); }

  nlohmann::json to_json() const;
  static RatioModel from_json(const nlohmann::json& j);

 private:
  RatioKind kind_ = RatioKind::kMarginalRatio;
  Backing backing_ = Backing::kFunction;
  std::size_t key_dim_ = 1;
  std::shared_ptr<const DiscreteRatioTable> table_;
  std::shared_ptr<const MlpRegressor> mlp_;
  Fn fn_;
  bool clamp_ = false;
};

// q(x, a) ~ E[Y | X = x, A = a].
class OutcomeModel {
 public:
  using Fn = std::function<double(ContextRef, int)>;

  static OutcomeModel from_function(std::size_t n_actions, Fn fn);
  // table: n_contexts x n_actions indexed by categorical id.
  static OutcomeModel tabular(std::size_t n_actions, std::vector<double> table);
  // Per-action ridge regression, n_actions x (dim + 1), bias last.
  static OutcomeModel linear(std::size_t n_actions, std::size_t dim, std::vector<double> weights);

  std::size_t n_actions() const { return n_actions_; }
  double operator()(ContextRef ctx, int a) const;

  nlohmann::json to_json() const;
  static OutcomeModel from_json(const nlohmann::json& j);

 private:
  std::size_t n_actions_ = 0;
  std::shared_ptr<const Scores> linear_;
  std::vector<double> table_;
  Fn fn_;
};

}  // namespace mrope
