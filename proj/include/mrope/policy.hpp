#pragma once

#include <functional>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mrope/dataset.hpp"

namespace mrope {

// Per-action score function q(x, .). Linear scores are serializable; custom
// scores wrap an arbitrary callable (analytic generator rewards).
class Scores {
 public:
  using Fn = std::function<void(ContextRef, std::span<double>)>;

  // weights: row-major n_actions x (dim + 1), last column is the bias. For a
  // categorical context id the feature vector is the one-hot indicator.
  static Scores linear(std::size_t n_actions, std::size_t dim, std::vector<double> weights);
  static Scores custom(std::size_t n_actions, Fn fn);

  std::size_t n_actions() const { return n_actions_; }
  void eval(ContextRef ctx, std::span<double> out) const;

  bool is_linear() const { return !fn_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> linear_weights() const { return weights_; }

  nlohmann::json to_json() const;
  static Scores from_json(const nlohmann::json& j);

 private:
  std::size_t n_actions_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> weights_;
  Fn fn_;
};

class Policy {
 public:
  enum class Variant { kTabular, kFixed, kSoftmax, kAlphaArgmax };

  // table: row-major n_contexts x n_actions, indexed by categorical id.
  static Policy tabular(std::size_t n_actions, std::vector<double> table);
  // Same distribution for every context (uniform, point masses).
  static Policy fixed(std::vector<double> probs);
  static Policy uniform(std::size_t n_actions);
  static Policy point_mass(std::size_t n_actions, int action);
  // softmax(sign * q(x, .)); sign = -1 gives exp(-q) behavior policies.
  static Policy softmax(Scores scores, double sign = 1.0);
  // alpha * 1(a = argmax q(x, .)) + (1 - alpha) / |A|; ties go to the lowest index.
  static Policy alpha_argmax(Scores scores, double alpha);

  Variant variant() const { return variant_; }
  std::size_t n_actions() const { return n_actions_; }
  double alpha() const { return alpha_; }

  void probs(ContextRef ctx, std::span<double> out) const;
  std::vector<double> probs(ContextRef ctx) const;
  double prob(ContextRef ctx, int action) const;

  nlohmann::json to_json() const;
  static Policy from_json(const nlohmann::json& j);

 private:
  Variant variant_ = Variant::kFixed;
  std::size_t n_actions_ = 0;
  std::vector<double> table_;
  std::shared_ptr<const Scores> scores_;
  double sign_ = 1.0;
  double alpha_ = 0.0;
};

}  // namespace mrope
