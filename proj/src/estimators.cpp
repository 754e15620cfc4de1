#include "mrope/estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mrope/errors.hpp"

namespace mrope {
namespace {

const LoggedDataset& data_of(const EstimatorInputs& in, const char* who) {
  if (in.dataset == nullptr) throw ConfigurationError(std::string(who) + ": dataset missing");
  if (in.dataset->size() == 0) throw ConfigurationError(std::string(who) + ": empty dataset");
  return *in.dataset;
}

template <typename T>
const T& require(const T* p, const char* who, const char* what) {
  if (p == nullptr) throw ConfigurationError(std::string(who) + ": missing " + what);
  return *p;
}

const PolicyRatio& unsigned_ratio(const EstimatorInputs& in, const char* who) {
  const auto& rho = require(in.policy_ratio, who, "policy_ratio");
  if (rho.is_signed()) throw ConfigurationError(std::string(who) + ": signed ATE ratio given to a policy estimator");
  return rho;
}

double direct_term(const LoggedDataset& d, const Policy& target, const OutcomeModel& q) {
  const auto na = static_cast<std::size_t>(d.n_actions());
  std::vector<double> probs(na);
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const ContextRef ctx = d.context(i);
    target.probs(ctx, probs);
    double s = 0.0;
    for (std::size_t a = 0; a < na; ++a)
      if (probs[a] != 0.0) s += probs[a] * q(ctx, static_cast<int>(a));
    total += s;
  }
  return total / static_cast<double>(d.size());
}

// (1/n) sum_i g(rho_i) (y_i - q(x_i, a_i)) + DM
template <typename Shrink>
double dr_family(const EstimatorInputs& in, const char* who, Shrink shrink) {
  const auto& d = data_of(in, who);
  const auto& rho = unsigned_ratio(in, who);
  const auto& q = require(in.outcome_model, who, "outcome_model");
  const auto& target = require(in.target, who, "target_policy");
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const ContextRef ctx = d.context(i);
    const int a = d.action(i);
    const double w = shrink(rho(ctx, a));
    if (w != 0.0) total += w * (d.outcome(i) - q(ctx, a));
  }
  return total / static_cast<double>(d.size()) + direct_term(d, target, q);
}

double mean_of(const LoggedDataset& d, auto term) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) total += term(i);
  return total / static_cast<double>(d.size());
}

}  // namespace

double dm_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "dm");
  return direct_term(d, require(in.target, "dm", "target_policy"),
                     require(in.outcome_model, "dm", "outcome_model"));
}

double ipw_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "ipw");
  const auto& rho = unsigned_ratio(in, "ipw");
  return mean_of(d, [&](std::size_t i) { return rho(d.context(i), d.action(i)) * d.outcome(i); });
}

double mr_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "mr");
  const auto& w = require(in.marginal_ratio, "mr", "marginal_ratio");
  return mean_of(d, [&](std::size_t i) { return w.at(d.outcome(i)) * d.outcome(i); });
}

double mr_alt_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "mr-alt");
  const auto& h = require(in.h_model, "mr-alt", "h_model");
  return mean_of(d, [&](std::size_t i) { return h.at(d.outcome(i)); });
}

double dr_estimate(const EstimatorInputs& in) {
  return dr_family(in, "dr", [](double r) { return r; });
}

double switch_dr_estimate(const EstimatorInputs& in) {
  if (!in.tau) throw ConfigurationError("switch-dr: missing tau");
  const double tau = *in.tau;
  if (!(tau >= 0.0)) throw std::domain_error("switch-dr: tau must be >= 0");
  return dr_family(in, "switch-dr", [tau](double r) { return r <= tau ? r : 0.0; });
}

double dros_estimate(const EstimatorInputs& in) {
  if (!in.lambda) throw ConfigurationError("dros: missing lambda");
  const double lambda = *in.lambda;
  if (!(lambda >= 0.0)) throw std::domain_error("dros: lambda must be >= 0");
  return dr_family(in, "dros", [lambda](double r) {
    const double denom = r * r + lambda;
    return denom > 0.0 ? lambda * r / denom : 0.0;
  });
}

double gmips_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "gmips");
  const auto& rep = require(in.representation, "gmips", "representation");
  const auto& ratio = require(in.representation_ratio, "gmips", "representation_ratio");
  if (rep.needs_embeddings && !d.has_embeddings())
    throw ConfigurationError("gmips: representation needs embeddings the dataset lacks");
  return mean_of(d, [&](std::size_t i) { return ratio(rep.of_record(d, i)) * d.outcome(i); });
}

double gmdr_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "gmdr");
  const auto& rep = require(in.representation, "gmdr", "representation");
  const auto& ratio = require(in.representation_ratio, "gmdr", "representation_ratio");
  const auto& target = require(in.target, "gmdr", "target_policy");
  if (!in.representation_outcome) throw ConfigurationError("gmdr: missing representation outcome model");
  if (!rep.distribution)
    throw ConfigurationError("gmdr: representation support is not enumerable");
  if (rep.needs_embeddings && !d.has_embeddings())
    throw ConfigurationError("gmdr: representation needs embeddings the dataset lacks");
  const auto& mu = in.representation_outcome;
  double residual = 0.0;
  double direct = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = rep.of_record(d, i);
    residual += ratio(r) * (d.outcome(i) - mu(r));
    for (const auto& [key, p] : rep.distribution(d.context(i), target))
      if (p != 0.0) direct += p * mu(key);
  }
  return (residual + direct) / static_cast<double>(d.size());
}

double self_normalize(std::span<const double> weights, std::span<const double> values) {
  if (weights.size() != values.size() || weights.empty())
    throw ConfigurationError("self_normalize: weights and values must be nonempty and equal length");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    num += weights[i] * values[i];
    den += weights[i];
  }
  if (den == 0.0) throw DegenerateWeightsError("self_normalize: weights sum to zero");
  return num / den;
}

double snipw_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "snipw");
  const auto& rho = unsigned_ratio(in, "snipw");
  std::vector<double> w(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) w[i] = rho(d.context(i), d.action(i));
  return self_normalize(w, d.outcomes());
}

double sndr_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "sndr");
  const auto& rho = unsigned_ratio(in, "sndr");
  const auto& q = require(in.outcome_model, "sndr", "outcome_model");
  const auto& target = require(in.target, "sndr", "target_policy");
  std::vector<double> w(d.size());
  std::vector<double> resid(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const ContextRef ctx = d.context(i);
    w[i] = rho(ctx, d.action(i));
    resid[i] = d.outcome(i) - q(ctx, d.action(i));
  }
  return self_normalize(w, resid) + direct_term(d, target, q);
}

double snmr_estimate(const EstimatorInputs& in) {
  const auto& d = data_of(in, "snmr");
  const auto& m = require(in.marginal_ratio, "snmr", "marginal_ratio");
  std::vector<double> w(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) w[i] = m.at(d.outcome(i));
  return self_normalize(w, d.outcomes());
}

AteMethod ate_method_from_name(std::string_view name) {
  for (auto m : {AteMethod::kDm, AteMethod::kIpw, AteMethod::kDr, AteMethod::kSwitchDr,
                 AteMethod::kDros, AteMethod::kMr})
    if (name == ate_method_name(m)) return m;
  throw ConfigurationError("unknown ATE method '" + std::string(name) + "'");
}

const char* ate_method_name(AteMethod m) {
  switch (m) {
    case AteMethod::kDm: return "dm";
    case AteMethod::kIpw: return "ipw";
    case AteMethod::kDr: return "dr";
    case AteMethod::kSwitchDr: return "switch-dr";
    case AteMethod::kDros: return "dros";
    case AteMethod::kMr: return "mr";
  }
  return "?";
}

double ate_estimate(AteMethod method, const EstimatorInputs& in) {
  const auto& d = data_of(in, "ate");
  if (d.n_actions() != 2) throw ConfigurationError("ate: exactly two actions required");

  const auto contrast = [&](const OutcomeModel& q) {
    return mean_of(d, [&](std::size_t i) {
      const ContextRef ctx = d.context(i);
      return q(ctx, 1) - q(ctx, 0);
    });
  };
  const auto residual = [&](auto shrink) {
    const auto& rho = require(in.policy_ratio, "ate", "policy_ratio");
    const auto& q = require(in.outcome_model, "ate", "outcome_model");
    return mean_of(d, [&](std::size_t i) {
             const ContextRef ctx = d.context(i);
             const double w = shrink(rho(ctx, d.action(i)));
             return w == 0.0 ? 0.0 : w * (d.outcome(i) - q(ctx, d.action(i)));
           }) +
           contrast(q);
  };

  switch (method) {
    case AteMethod::kDm:
      return contrast(require(in.outcome_model, "ate", "outcome_model"));
    case AteMethod::kIpw: {
      const auto& rho = require(in.policy_ratio, "ate", "policy_ratio");
      return mean_of(d, [&](std::size_t i) { return rho(d.context(i), d.action(i)) * d.outcome(i); });
    }
    case AteMethod::kDr:
      return residual([](double r) { return r; });
    case AteMethod::kSwitchDr: {
      if (!in.tau) throw ConfigurationError("ate switch-dr: missing tau");
      const double tau = *in.tau;
      if (!(tau >= 0.0)) throw std::domain_error("ate switch-dr: tau must be >= 0");
      return residual([tau](double r) { return std::abs(r) <= tau ? r : 0.0; });
    }
    case AteMethod::kDros: {
      if (!in.lambda) throw ConfigurationError("ate dros: missing lambda");
      const double lambda = *in.lambda;
      if (!(lambda >= 0.0)) throw std::domain_error("ate dros: lambda must be >= 0");
      return residual([lambda](double r) {
        const double denom = r * r + lambda;
        return denom > 0.0 ? lambda * r / denom : 0.0;
      });
    }
    case AteMethod::kMr: {
      const auto& w = require(in.marginal_ratio, "ate", "marginal_ratio");
      return mean_of(d, [&](std::size_t i) { return w.at(d.outcome(i)) * d.outcome(i); });
    }
  }
  throw ConfigurationError("ate: unknown method");
}

const std::vector<std::string>& estimator_ids() {
  static const std::vector<std::string> ids = {"dm",   "ipw",   "dr",    "switch-dr", "dros",
                                               "mr",   "mr-alt", "mips", "gmips",     "gmdr",
                                               "snipw", "sndr",  "snmr"};
  return ids;
}

double estimate(std::string_view id, const EstimatorInputs& in) {
  if (id == "dm") return dm_estimate(in);
  if (id == "ipw") return ipw_estimate(in);
  if (id == "dr") return dr_estimate(in);
  if (id == "switch-dr") return switch_dr_estimate(in);
  if (id == "dros") return dros_estimate(in);
  if (id == "mr") return mr_estimate(in);
  if (id == "mr-alt") return mr_alt_estimate(in);
  if (id == "mips" || id == "gmips") return gmips_estimate(in);
  if (id == "gmdr") return gmdr_estimate(in);
  if (id == "snipw") return snipw_estimate(in);
  if (id == "sndr") return sndr_estimate(in);
  if (id == "snmr") return snmr_estimate(in);
  throw ConfigurationError("unknown estimator '" + std::string(id) + "'");
}

}  // namespace mrope
