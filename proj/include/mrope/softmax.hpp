#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mrope/dataset.hpp"
#include "mrope/policy.hpp"

namespace mrope {

struct SoftmaxConfig {
  std::size_t epochs = 300;  // full-batch gradient steps
  double l2 = 1e-3;          // on standardized features
  bool standardize = true;
  // fit_behavior_model picks l2 from this grid by held-out log-loss over
  // cv_folds contiguous folds; an empty grid keeps l2 fixed.
  std::vector<double> l2_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::size_t cv_folds = 2;
};

// Multinomial logistic regression trained by full-batch gradient descent with
// step 1/L, L = lambda_max(X'X / n) / 2 + l2 (Bohning's curvature bound), so
// the penalized cross-entropy never increases between steps.
class SoftmaxClassifier {
 public:
  // features: row-major n x dim. labels in [0, n_classes).
  static SoftmaxClassifier fit(std::size_t dim, std::span<const double> features,
                               std::span<const int> labels, std::size_t n_classes,
                               const SoftmaxConfig& config);

  std::size_t n_classes() const { return n_classes_; }
  std::size_t dim() const { return dim_; }
  // n_classes x (dim + 1) on the original feature scale, bias last.
  const std::vector<double>& weights() const { return weights_; }
  // Penalized loss before the first step and after every step.
  const std::vector<double>& loss_history() const { return history_; }
  // Only one class present in the training labels.
  bool degenerate() const { return degenerate_; }
  double l2() const { return l2_; }

  void predict_proba(std::span<const double> x, std::span<double> out) const;
  int predict(std::span<const double> x) const;
  Policy policy() const;
  Scores scores() const;

 private:
  std::size_t dim_ = 0;
  std::size_t n_classes_ = 0;
  std::vector<double> weights_;
  std::vector<double> history_;
  bool degenerate_ = false;
  double l2_ = 0.0;
};

// Contexts of a dataset as a dense design (one-hot for categorical ids).
std::vector<double> design_matrix(const LoggedDataset& data, std::size_t* dim_out);

}  // namespace mrope
