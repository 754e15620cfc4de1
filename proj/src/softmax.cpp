#include "mrope/softmax.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mrope/errors.hpp"

namespace mrope {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-wise softmax of logits, stable.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

double penalized_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                      std::span<const int> labels, double l2) {
  const Eigen::MatrixXd logits = x * w.transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  const auto n = static_cast<double>(logits.rows());
  return total / n + 0.5 * l2 * w.leftCols(w.cols() - 1).squaredNorm();
}

}  // namespace

SoftmaxClassifier SoftmaxClassifier::fit(std::size_t dim, std::span<const double> features,
                                         std::span<const int> labels, std::size_t n_classes,
                                         const SoftmaxConfig& config) {
  const std::size_t n = labels.size();
  if (n == 0) throw FitError("softmax: empty training set");
  if (n_classes < 2) throw ConfigurationError("softmax: need at least two classes");
  if (features.size() != n * dim) throw ConfigurationError("softmax: feature matrix has the wrong shape");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes)
      throw ConfigurationError("softmax: label out of range");

  const auto ni = static_cast<Eigen::Index>(n);
  const auto di = static_cast<Eigen::Index>(dim);
  Eigen::Map<const RowMatrix> raw(features.data(), ni, di);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(di);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(di);
  if (config.standardize && dim > 0) {
    mean = raw.colwise().mean().transpose();
    scale = ((raw.rowwise() - mean.transpose()).array().square().colwise().sum() /
             static_cast<double>(n)).sqrt().transpose();
    for (Eigen::Index j = 0; j < di; ++j)
      if (!(scale(j) > 1e-12)) scale(j) = 1.0;
  }
  Eigen::MatrixXd x(ni, di + 1);
  x.leftCols(di) = (raw.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  x.col(di).setOnes();

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(ni, static_cast<Eigen::Index>(n_classes));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;

  // Largest eigenvalue of X'X/n by power iteration.
  const Eigen::MatrixXd gram = x.transpose() * x / static_cast<double>(n);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(gram.rows()).normalized();
  double lambda_max = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd next = gram * v;
    const double norm = next.norm();
    if (!(norm > 0.0)) break;
    next /= norm;
    const bool done = (next - v).norm() < 1e-10;
    v = next;
    lambda_max = norm;
    if (done) break;
  }
  // Power iteration underestimates from below; pad slightly so the bound holds.
  const double curvature = 0.5 * lambda_max * 1.01 + config.l2;
  const double step = 1.0 / curvature;

  SoftmaxClassifier model;
  model.dim_ = dim;
  model.n_classes_ = n_classes;
  model.l2_ = config.l2;
  model.degenerate_ = std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; });

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes), di + 1);
  model.history_.push_back(penalized_loss(x, w, labels, config.l2));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const Eigen::MatrixXd p = softmax_rows(x * w.transpose());
    Eigen::MatrixXd grad = (p - y).transpose() * x / static_cast<double>(n);
    grad.leftCols(di) += config.l2 * w.leftCols(di);
    w -= step * grad;
    model.history_.push_back(penalized_loss(x, w, labels, config.l2));
  }

  // Fold the standardization into original-scale weights.
  model.weights_.assign(n_classes * (dim + 1), 0.0);
  for (std::size_t k = 0; k < n_classes; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    double bias = w(ki, di);
    for (Eigen::Index j = 0; j < di; ++j) {
      const double coef = w(ki, j) / scale(j);
      model.weights_[k * (dim + 1) + static_cast<std::size_t>(j)] = coef;
      bias -= coef * mean(j);
    }
    model.weights_[k * (dim + 1) + dim] = bias;
  }
  return model;
}

Scores SoftmaxClassifier::scores() const { return Scores::linear(n_classes_, dim_, weights_); }

Policy SoftmaxClassifier::policy() const { return Policy::softmax(scores(), 1.0); }

void SoftmaxClassifier::predict_proba(std::span<const double> x, std::span<double> out) const {
  policy().probs(ContextRef(x), out);
}

int SoftmaxClassifier::predict(std::span<const double> x) const {
  std::vector<double> s(n_classes_);
  scores().eval(ContextRef(x), s);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::vector<double> design_matrix(const LoggedDataset& data, std::size_t* dim_out) {
  if (!data.is_categorical()) {
    *dim_out = data.dim();
    return {data.features().begin(), data.features().end()};
  }
  const auto card = static_cast<std::size_t>(data.context_cardinality());
  *dim_out = card;
  std::vector<double> x(data.size() * card, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    x[i * card + static_cast<std::size_t>(data.context_id(i))] = 1.0;
  return x;
}

}  // namespace mrope
