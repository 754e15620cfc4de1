#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mrope {

struct EstimateReport {
  std::string estimator_id;
  double value = 0.0;  // mean of per_seed_values when replicated
  std::map<std::string, std::string> hyperparams;
  std::vector<double> per_seed_values;
  // Truth per seed; a single shared truth is stored once per seed as well.
  std::vector<double> per_seed_truth;
  double mse = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;
  std::optional<double> true_value;
  std::string rng = "";

  nlohmann::json to_json() const;
};

struct ErrorDecomposition {
  double mse = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;
};

// Errors e_s = estimate_s - truth_s; mse = mean e^2, bias_sq = (mean e)^2,
// variance = population variance of e. With a shared truth this is the usual
// decomposition over estimates, and mse = bias_sq + variance always closes.
ErrorDecomposition decompose_errors(std::span<const double> estimates,
                                    std::span<const double> truths);

EstimateReport make_report(std::string estimator_id, std::vector<double> estimates,
                           std::vector<double> truths,
                           std::map<std::string, std::string> hyperparams = {});

// |estimate - truth|
double ate_error(double estimate, double true_ate);

}  // namespace mrope
