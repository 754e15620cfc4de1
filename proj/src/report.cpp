#include "mrope/report.hpp"

#include <cmath>
#include <numeric>

#include "mrope/errors.hpp"
#include "mrope/rng.hpp"

namespace mrope {

nlohmann::json EstimateReport::to_json() const {
  nlohmann::json j;
  j["estimator"] = estimator_id;
  j["value"] = value;
  j["hyperparams"] = hyperparams;
  j["per_seed_values"] = per_seed_values;
  j["mse"] = mse;
  j["bias_sq"] = bias_sq;
  j["variance"] = variance;
  if (true_value) j["true_value"] = *true_value;
  j["rng"] = rng;
  return j;
}

ErrorDecomposition decompose_errors(std::span<const double> estimates,
                                    std::span<const double> truths) {
  if (estimates.empty()) throw ConfigurationError("decompose_errors: no estimates");
  if (truths.size() != estimates.size())
    throw ConfigurationError("decompose_errors: estimates and truths differ in length");
  const double n = static_cast<double>(estimates.size());
  double mean = 0.0;
  for (std::size_t s = 0; s < estimates.size(); ++s) mean += estimates[s] - truths[s];
  mean /= n;
  double var = 0.0;
  double sq = 0.0;
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    const double e = estimates[s] - truths[s];
    var += (e - mean) * (e - mean);
    sq += e * e;
  }
  ErrorDecomposition out;
  out.bias_sq = mean * mean;
  out.variance = var / n;
  out.mse = sq / n;
  return out;
}

EstimateReport make_report(std::string estimator_id, std::vector<double> estimates,
                           std::vector<double> truths,
                           std::map<std::string, std::string> hyperparams) {
  EstimateReport r;
  r.estimator_id = std::move(estimator_id);
  r.hyperparams = std::move(hyperparams);
  r.rng = kRngAlgorithm;
  if (!estimates.empty()) {
    r.value = std::accumulate(estimates.begin(), estimates.end(), 0.0) /
              static_cast<double>(estimates.size());
  }
  if (!truths.empty() && !estimates.empty()) {
    const auto dec = decompose_errors(estimates, truths);
    r.mse = dec.mse;
    r.bias_sq = dec.bias_sq;
    r.variance = dec.variance;
    r.true_value = std::accumulate(truths.begin(), truths.end(), 0.0) /
                   static_cast<double>(truths.size());
  }
  r.per_seed_values = std::move(estimates);
  r.per_seed_truth = std::move(truths);
  return r;
}

double ate_error(double estimate, double true_ate) { return std::abs(estimate - true_ate); }

}  // namespace mrope
