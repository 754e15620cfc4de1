#include "mrope/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <thread>

#include "mrope/errors.hpp"
#include "mrope/estimators.hpp"
#include "mrope/oracle.hpp"
#include "mrope/representation.hpp"
#include "mrope/rng.hpp"

namespace mrope {

SweepAxis sweep_axis_from_name(std::string_view name) {
  if (name == "n") return SweepAxis::kN;
  if (name == "m") return SweepAxis::kM;
  if (name == "alpha_star" || name == "alpha-star") return SweepAxis::kAlphaStar;
  if (name == "d") return SweepAxis::kD;
  if (name == "n_a" || name == "n-actions" || name == "n_actions") return SweepAxis::kNActions;
  throw ConfigurationError("unknown sweep axis '" + std::string(name) + "'");
}

const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kN: return "n";
    case SweepAxis::kM: return "m";
    case SweepAxis::kAlphaStar: return "alpha_star";
    case SweepAxis::kD: return "d";
    case SweepAxis::kNActions: return "n_a";
  }
  return "?";
}

MrSplit mr_split_from_name(std::string_view name) {
  if (name == "half") return MrSplit::kHalf;
  if (name == "reuse") return MrSplit::kReuse;
  throw ConfigurationError("unknown MR split '" + std::string(name) + "' (expected half or reuse)");
}

const char* mr_split_name(MrSplit split) { return split == MrSplit::kHalf ? "half" : "reuse"; }

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---- scenarios ----

namespace {

std::vector<LoggedDataset> tagged_evals(std::span<const std::size_t> sizes,
                                        const std::function<LoggedDataset(std::size_t)>& draw) {
  std::vector<LoggedDataset> out;
  out.reserve(sizes.size());
  for (std::size_t n : sizes) out.push_back(draw(n).with_role(DatasetRole::kEval));
  return out;
}

class SaitoScenario final : public Scenario {
 public:
  SaitoScenario(SaitoConfig config, std::size_t mc_samples)
      : setup_(std::make_shared<const SaitoSetup>(config)),
        target_(std::make_shared<const Policy>(setup_->target_policy())),
        behavior_(std::make_shared<const Policy>(setup_->behavior_policy())),
        embedding_(std::make_shared<const EmbeddingModel>(setup_->embedding_model())),
        truth_(setup_->true_value(*target_, mc_samples, config.seed)) {
    auto setup = setup_;
    exact_outcome_ = std::make_shared<const OutcomeModel>(OutcomeModel::from_function(
        config.n_actions, [setup](ContextRef ctx, int a) {
          std::vector<double> q(setup->config().n_actions);
          setup->action_values(ctx.features(), q);
          return q.at(static_cast<std::size_t>(a));
        }));
  }

  Replicate replicate(std::size_t m, std::span<const std::size_t> sizes, std::uint64_t seed) const override {
    Replicate r;
    r.train = setup_->sample(m, seed, 0).with_role(DatasetRole::kTrain);
    r.evals = tagged_evals(sizes, [&](std::size_t n) { return setup_->sample(n, seed, 1); });
    r.truths.assign(sizes.size(), truth_.value);
    r.target = target_;
    r.behavior = behavior_;
    r.embedding = embedding_;
    r.exact_outcome = exact_outcome_;
    return r;
  }

  nlohmann::json describe() const override {
    auto j = setup_->config().to_json();
    j["true_value"] = truth_.value;
    j["true_value_se"] = truth_.standard_error;
    j["mc_samples"] = truth_.samples;
    return j;
  }

 private:
  std::shared_ptr<const SaitoSetup> setup_;
  std::shared_ptr<const Policy> target_;
  std::shared_ptr<const Policy> behavior_;
  std::shared_ptr<const EmbeddingModel> embedding_;
  std::shared_ptr<const OutcomeModel> exact_outcome_;
  MonteCarloValue truth_;
};

class SinScenario final : public Scenario {
 public:
  SinScenario(SinConfig config, std::size_t mc_samples)
      : setup_(std::make_shared<const SinSetup>(config)),
        target_(std::make_shared<const Policy>(setup_->target_policy())),
        behavior_(std::make_shared<const Policy>(setup_->behavior_policy())),
        truth_(setup_->true_value(*target_, mc_samples, config.seed)) {
    auto setup = setup_;
    exact_outcome_ = std::make_shared<const OutcomeModel>(OutcomeModel::from_function(
        config.n_actions,
        [setup](ContextRef ctx, int a) { return setup->reward_mean(ctx.features(), a); }));
  }

  Replicate replicate(std::size_t m, std::span<const std::size_t> sizes, std::uint64_t seed) const override {
    Replicate r;
    r.train = setup_->sample(m, seed, 0).with_role(DatasetRole::kTrain);
    r.evals = tagged_evals(sizes, [&](std::size_t n) { return setup_->sample(n, seed, 1); });
    r.truths.assign(sizes.size(), truth_.value);
    r.target = target_;
    r.behavior = behavior_;
    r.exact_outcome = exact_outcome_;
    return r;
  }

  nlohmann::json describe() const override {
    auto j = setup_->config().to_json();
    j["true_value"] = truth_.value;
    j["true_value_se"] = truth_.standard_error;
    j["mc_samples"] = truth_.samples;
    return j;
  }

 private:
  std::shared_ptr<const SinSetup> setup_;
  std::shared_ptr<const Policy> target_;
  std::shared_ptr<const Policy> behavior_;
  std::shared_ptr<const OutcomeModel> exact_outcome_;
  MonteCarloValue truth_;
};

class TabularScenario final : public Scenario {
 public:
  explicit TabularScenario(std::shared_ptr<const TabularEnvironment> env)
      : env_(std::move(env)),
        target_(std::make_shared<const Policy>(env_->target_policy())),
        behavior_(std::make_shared<const Policy>(env_->behavior_policy())),
        truth_(true_policy_value(*env_)) {
    const auto w = true_marginal_ratio(*env_);
    exact_w_ = [w](double y) {
      const auto it = w.find(y);
      if (it == w.end()) throw ConfigurationError("exact marginal ratio: outcome outside the support");
      return it->second;
    };
    const auto mu = true_outcome_mean(*env_);
    exact_outcome_ = std::make_shared<const OutcomeModel>(OutcomeModel::tabular(env_->n_actions(), mu));
    if (const auto& emb = env_->embedding())
      embedding_ = std::make_shared<const EmbeddingModel>(env_->n_actions(), 1, emb->n_embeddings,
                                                          emb->given_action);
    if (env_->n_actions() == 2) exact_ate_ = ate_weights();
  }

  Replicate replicate(std::size_t m, std::span<const std::size_t> sizes, std::uint64_t seed) const override {
    Replicate r;
    r.train = sample_logged_dataset(*env_, m, seed, 0).with_role(DatasetRole::kTrain);
    r.evals = tagged_evals(sizes, [&](std::size_t n) { return sample_logged_dataset(*env_, n, seed, 1); });
    r.truths.assign(sizes.size(), truth_);
    r.target = target_;
    r.behavior = behavior_;
    r.embedding = embedding_;
    r.exact_marginal_ratio = exact_w_;
    r.exact_ate_ratio = exact_ate_;
    r.exact_outcome = exact_outcome_;
    return r;
  }

  nlohmann::json describe() const override {
    return {{"n_contexts", env_->n_contexts()},
            {"n_actions", env_->n_actions()},
            {"n_outcomes", env_->n_outcomes()},
            {"true_value", truth_}};
  }

 private:
  // E_b[(1(a=1) - 1(a=0)) / b(a|x) | Y = y]
  std::function<double(double)> ate_weights() const {
    std::map<double, double> num, den;
    for (std::size_t x = 0; x < env_->n_contexts(); ++x)
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t y = 0; y < env_->n_outcomes(); ++y) {
          const double p = env_->context_prob(x) * env_->behavior(x, a) * env_->outcome_prob(x, a, y);
          const double rho = (a == 1 ? 1.0 : -1.0) / env_->behavior(x, a);
          num[env_->outcome_value(y)] += p * rho;
          den[env_->outcome_value(y)] += p;
        }
    std::map<double, double> w;
    for (const auto& [y, d] : den) w[y] = d > 0.0 ? num[y] / d : 0.0;
    return [w](double y) {
      const auto it = w.find(y);
      if (it == w.end()) throw ConfigurationError("exact ATE ratio: outcome outside the support");
      return it->second;
    };
  }

  std::shared_ptr<const TabularEnvironment> env_;
  std::shared_ptr<const Policy> target_;
  std::shared_ptr<const Policy> behavior_;
  std::shared_ptr<const EmbeddingModel> embedding_;
  std::shared_ptr<const OutcomeModel> exact_outcome_;
  std::function<double(double)> exact_w_;
  std::function<double(double)> exact_ate_;
  double truth_;
};

class ClassificationScenario final : public Scenario {
 public:
  ClassificationScenario(std::shared_ptr<const ClassificationData> data, double train_fraction,
                         double alpha_star, SoftmaxConfig softmax)
      : data_(std::move(data)), train_fraction_(train_fraction), alpha_star_(alpha_star), softmax_(softmax) {}

  Replicate replicate(std::size_t, std::span<const std::size_t> sizes, std::uint64_t seed) const override {
    if (sizes.size() != 1)
      throw ConfigurationError("classification sweeps fix n by the train fraction; sweep alpha_star instead");
    auto bandit = classification_to_bandit(*data_, train_fraction_, alpha_star_, seed, softmax_);
    Replicate r;
    r.train = std::move(bandit.train);
    r.evals.push_back(std::move(bandit.eval));
    r.truths.push_back(bandit.true_value);
    r.target = std::make_shared<const Policy>(std::move(bandit.target));
    r.behavior = std::make_shared<const Policy>(std::move(bandit.behavior));
    return r;
  }

  MrSplit default_mr_split() const override { return MrSplit::kReuse; }

  nlohmann::json describe() const override {
    return {{"rows", data_->size()},
            {"features", data_->dim},
            {"classes", data_->n_classes},
            {"train_fraction", train_fraction_},
            {"alpha_star", alpha_star_},
            {"feature_normalization", "z-score (training split)"}};
  }

 private:
  std::shared_ptr<const ClassificationData> data_;
  double train_fraction_;
  double alpha_star_;
  SoftmaxConfig softmax_;
};

class AteScenario final : public Scenario {
 public:
  explicit AteScenario(AteConfig config)
      : setup_(std::make_shared<const AteSetup>(config)),
        behavior_(std::make_shared<const Policy>(setup_->behavior_policy())) {
    auto setup = setup_;
    exact_outcome_ = std::make_shared<const OutcomeModel>(OutcomeModel::from_function(
        2, [setup](ContextRef ctx, int a) { return setup->outcome_prob(ctx.features(), a); }));
  }

  Replicate replicate(std::size_t m, std::span<const std::size_t> sizes, std::uint64_t seed) const override {
    Replicate r;
    r.train = setup_->sample(m, seed, 0).with_role(DatasetRole::kTrain);
    r.evals = tagged_evals(sizes, [&](std::size_t n) { return setup_->sample(n, seed, 1); });
    r.truths.assign(sizes.size(), setup_->true_ate());
    r.behavior = behavior_;
    r.exact_outcome = exact_outcome_;
    return r;
  }

  bool is_ate() const override { return true; }

  nlohmann::json describe() const override {
    auto j = setup_->config().to_json();
    j["true_ate"] = setup_->true_ate();
    return j;
  }

 private:
  std::shared_ptr<const AteSetup> setup_;
  std::shared_ptr<const Policy> behavior_;
  std::shared_ptr<const OutcomeModel> exact_outcome_;
};

}  // namespace

ScenarioFactory saito_scenarios(SaitoConfig base, std::size_t mc_samples) {
  return [base, mc_samples](const SweepPoint& p) {
    SaitoConfig c = base;
    c.d = p.d;
    c.n_actions = p.n_actions;
    c.alpha_star = p.alpha_star;
    return std::make_shared<const SaitoScenario>(c, mc_samples);
  };
}

ScenarioFactory sin_scenarios(SinConfig base, std::size_t mc_samples) {
  return [base, mc_samples](const SweepPoint& p) {
    SinConfig c = base;
    c.d = p.d;
    c.n_actions = p.n_actions;
    c.alpha_star = p.alpha_star;
    return std::make_shared<const SinScenario>(c, mc_samples);
  };
}

ScenarioFactory tabular_scenarios(std::shared_ptr<const TabularEnvironment> env) {
  auto scenario = std::make_shared<const TabularScenario>(std::move(env));
  return [scenario](const SweepPoint&) { return scenario; };
}

ScenarioFactory classification_scenarios(std::shared_ptr<const ClassificationData> data,
                                          double train_fraction, SoftmaxConfig softmax) {
  return [data, train_fraction, softmax](const SweepPoint& p) {
    return std::make_shared<const ClassificationScenario>(data, train_fraction, p.alpha_star, softmax);
  };
}

ScenarioFactory ate_scenarios(AteConfig base) {
  auto scenario = std::make_shared<const AteScenario>(base);
  return [scenario](const SweepPoint&) { return scenario; };
}

// ---- configuration ----

nlohmann::json EstimatorSettings::to_json() const {
  const char* mode = regression.mode == FitMode::kAuto       ? "auto"
                     : regression.mode == FitMode::kDiscrete ? "discrete"
                                                             : "mlp";
  return {{"tau", tau},
          {"lambda", lambda},
          {"floor", floor},
          {"regression",
           {{"mode", mode},
            {"discrete_threshold", regression.discrete_threshold},
            {"clamp_at_zero", regression.clamp_at_zero},
            {"mlp",
             {{"hidden", regression.mlp.hidden},
              {"epochs", regression.mlp.epochs},
              {"batch_size", regression.mlp.batch_size},
              {"learning_rate", regression.mlp.learning_rate},
              {"momentum", regression.mlp.momentum},
              {"gradient_clip", regression.mlp.gradient_clip},
              {"seed", regression.mlp.seed}}}}},
          {"behavior_model",
           {{"epochs", softmax.epochs},
            {"l2", softmax.l2},
            {"l2_grid", softmax.l2_grid},
            {"cv_folds", softmax.cv_folds},
            {"standardize", softmax.standardize}}},
          {"outcome_model", {{"l2", outcome.l2}}},
          {"mr_split", mr_split ? nlohmann::json(mr_split_name(*mr_split)) : nlohmann::json("generator default")}};
}

namespace {

const std::vector<std::string>& ate_ids() {
  static const std::vector<std::string> ids = {"ate-dm", "ate-ipw", "ate-dr", "ate-switch-dr", "ate-dros", "ate-mr"};
  return ids;
}

bool is_ate_id(std::string_view id) { return id.substr(0, 4) == "ate-"; }

}  // namespace

bool is_harness_estimator(std::string_view id) {
  if (id == "gmdr") return false;
  const auto& core = estimator_ids();
  if (std::find(core.begin(), core.end(), id) != core.end()) return true;
  return std::find(ate_ids().begin(), ate_ids().end(), id) != ate_ids().end();
}

void SweepConfig::validate() const {
  if (!factory) throw ConfigurationError("sweep: no generator configured");
  if (grid.empty()) throw ConfigurationError("sweep: grid must be nonempty");
  if (seeds.empty()) throw ConfigurationError("sweep: seed list must be nonempty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigurationError("sweep: seeds must be distinct");
  if (std::set<double>(grid.begin(), grid.end()).size() != grid.size())
    throw ConfigurationError("sweep: grid values must be distinct");
  if (estimators.empty()) throw ConfigurationError("sweep: estimator list must be nonempty");
  if (std::set<std::string>(estimators.begin(), estimators.end()).size() != estimators.size())
    throw ConfigurationError("sweep: estimator list has duplicates");
  for (const auto& id : estimators)
    if (!is_harness_estimator(id)) throw ConfigurationError("sweep: unsupported estimator '" + id + "'");
  if (settings.tau < 0.0 || settings.lambda < 0.0) throw ConfigurationError("sweep: tau and lambda must be >= 0");
  if (!(settings.floor > 0.0 && settings.floor < 1.0)) throw ConfigurationError("sweep: floor must lie in (0, 1)");
  for (double v : grid) {
    const bool integral_axis = axis != SweepAxis::kAlphaStar;
    if (integral_axis && (v < 1.0 || v != std::floor(v)))
      throw ConfigurationError(std::string("sweep: ") + sweep_axis_name(axis) + " grid values must be positive integers");
    if (!integral_axis && (v < 0.0 || v > 1.0)) throw ConfigurationError("sweep: alpha_star grid must lie in [0, 1]");
    if (axis == SweepAxis::kM && v < 4.0) throw ConfigurationError("sweep: m must be at least 4");
    if (axis == SweepAxis::kNActions && v < 2.0) throw ConfigurationError("sweep: n_a must be at least 2");
  }
  if (fixed.m < 4) throw ConfigurationError("sweep: m must be at least 4");
  if (fixed.n < 1) throw ConfigurationError("sweep: n must be at least 1");
}

nlohmann::json SweepConfig::to_json() const {
  return {{"generator", generator},
          {"generator_config", generator_config},
          {"estimators", estimators},
          {"settings", settings.to_json()},
          {"weights", weights == WeightSource::kExact ? "exact" : "estimated"},
          {"axis", sweep_axis_name(axis)},
          {"grid", grid},
          {"fixed",
           {{"n", fixed.n}, {"m", fixed.m}, {"alpha_star", fixed.alpha_star}, {"d", fixed.d}, {"n_a", fixed.n_actions}}},
          {"seeds", seeds},
          {"rng", kRngAlgorithm}};
}

// ---- per-seed evaluation ----

namespace {

SweepPoint resolve(const SweepConfig& c, double v) {
  SweepPoint p = c.fixed;
  switch (c.axis) {
    case SweepAxis::kN: p.n = static_cast<std::size_t>(v); break;
    case SweepAxis::kM: p.m = static_cast<std::size_t>(v); break;
    case SweepAxis::kAlphaStar: p.alpha_star = v; break;
    case SweepAxis::kD: p.d = static_cast<std::size_t>(v); break;
    case SweepAxis::kNActions: p.n_actions = static_cast<std::size_t>(v); break;
  }
  return p;
}

bool uses(const std::vector<std::string>& ids, std::initializer_list<std::string_view> wanted) {
  for (const auto& id : ids)
    for (auto w : wanted)
      if (id == w) return true;
  return false;
}

// p_pi(e | x) / p_b(e | x) with p(e|x) = sum_a pi(a|x) p(e|a).
RatioModel embedding_ratio(const EmbeddingModel& emb, std::shared_ptr<const Policy> target,
                           std::shared_ptr<const Policy> behavior, std::size_t ctx_width, bool categorical) {
  auto model = std::make_shared<const EmbeddingModel>(emb);
  return RatioModel::from_function(
      RatioKind::kRepresentationRatio, ctx_width + emb.n_dims(),
      [model, target, behavior, ctx_width, categorical](std::span<const double> key) {
        const std::size_t na = model->n_actions();
        std::vector<double> pt(na), pb(na);
        std::vector<int> e(model->n_dims());
        for (std::size_t k = 0; k < e.size(); ++k) e[k] = static_cast<int>(key[ctx_width + k]);
        const ContextRef ctx = categorical ? ContextRef(static_cast<std::int64_t>(key[0]))
                                           : ContextRef(key.subspan(0, ctx_width));
        target->probs(ctx, pt);
        behavior->probs(ctx, pb);
        double num = 0.0, den = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
          const double pe = model->prob(a, e);
          num += pt[a] * pe;
          den += pb[a] * pe;
        }
        return den > 0.0 ? num / den : 0.0;
      });
}

struct SeedModels {
  std::optional<PolicyRatio> rho_full;
  std::optional<PolicyRatio> rho_mr;
  std::optional<RatioModel> w;
  std::optional<RatioModel> h;
  std::optional<RatioModel> mips_ratio;
  std::optional<RatioModel> gmips_ratio;
  std::optional<OutcomeModel> q;
  std::shared_ptr<const Policy> pi0_full;
  std::size_t pi0_full_records = 0;
  std::size_t pi0_mr_records = 0;
  std::size_t ratio_records = 0;
};

SeedModels build_models(const SweepConfig& c, const Replicate& r, bool ate, MrSplit split) {
  const auto& ids = c.estimators;
  const auto& s = c.settings;
  const bool exact = c.weights == WeightSource::kExact;
  SeedModels out;

  const bool need_w = uses(ids, {"mr", "snmr", "ate-mr"});
  const bool need_h = uses(ids, {"mr-alt"});
  const bool need_gmips = uses(ids, {"gmips"});
  const bool need_full = uses(ids, {"ipw", "dr", "switch-dr", "dros", "snipw", "sndr", "mips", "ate-ipw",
                                    "ate-dr", "ate-switch-dr", "ate-dros"}) ||
                         (split == MrSplit::kReuse && (need_w || need_h || need_gmips));
  const bool need_q = uses(ids, {"dm", "dr", "switch-dr", "dros", "sndr", "ate-dm", "ate-dr", "ate-switch-dr", "ate-dros"});

  if (!ate && !r.target) throw ConfigurationError("sweep: generator provides no target policy");

  auto ratio_for = [&](const Policy& behavior) {
    return ate ? PolicyRatio::ate(behavior, s.floor) : PolicyRatio::from_policies(*r.target, behavior, s.floor);
  };

  if (exact) {
    if (!r.behavior) throw ConfigurationError("exact weights: generator exposes no behavior policy");
    out.pi0_full = r.behavior;
    out.rho_full = ratio_for(*r.behavior);
    out.rho_mr = out.rho_full;
    if (need_w) {
      auto fn = ate ? r.exact_ate_ratio : r.exact_marginal_ratio;
      if (!fn) throw ConfigurationError("exact weights: generator has no closed-form marginal ratio");
      out.w = RatioModel::from_function(ate ? RatioKind::kAteMarginalRatio : RatioKind::kMarginalRatio, 1,
                                        [fn](std::span<const double> k) { return fn(k[0]); });
    }
    if (need_h) {
      auto fn = r.exact_marginal_ratio;
      if (!fn) throw ConfigurationError("exact weights: generator has no closed-form marginal ratio");
      out.h = RatioModel::from_function(RatioKind::kHModel, 1,
                                        [fn](std::span<const double> k) { return k[0] * fn(k[0]); });
    }
    if (need_gmips) throw ConfigurationError("exact weights: gmips needs a fitted representation ratio; use mips");
    if (need_q) {
      if (r.exact_outcome) out.q = *r.exact_outcome;
      else out.q = fit_outcome_model(r.train, s.outcome);
    }
  } else {
    if (need_full) {
      out.pi0_full = std::make_shared<const Policy>(fit_behavior_policy(r.train, s.softmax));
      out.pi0_full_records = r.train.size();
      out.rho_full = ratio_for(*out.pi0_full);
    }
    if (need_w || need_h || need_gmips) {
      LoggedDataset ratio_data;
      std::shared_ptr<const Policy> pi0;
      if (split == MrSplit::kHalf) {
        const std::size_t half = r.train.size() / 2;
        const LoggedDataset part_a = r.train.slice(0, half);
        ratio_data = r.train.slice(half, r.train.size());
        pi0 = std::make_shared<const Policy>(fit_behavior_policy(part_a, s.softmax));
        out.pi0_mr_records = part_a.size();
      } else {
        ratio_data = r.train;
        pi0 = out.pi0_full;
        out.pi0_mr_records = r.train.size();
      }
      out.ratio_records = ratio_data.size();
      out.rho_mr = ratio_for(*pi0);
      if (need_w) {
        out.w = ate ? fit_ate_weights(ratio_data, *pi0, s.regression, s.floor)
                    : fit_marginal_ratio(ratio_data, *out.rho_mr, s.regression);
      }
      if (need_h) out.h = fit_h_model(ratio_data, *out.rho_mr, s.regression);
      if (need_gmips)
        out.gmips_ratio = fit_representation_ratio(ratio_data, *out.rho_mr, Representation::context_embedding(),
                                                   s.regression);
    }
    if (need_q) out.q = fit_outcome_model(r.train, s.outcome);
  }

  if (uses(ids, {"mips"})) {
    if (!r.embedding) throw ConfigurationError("mips: generator exposes no embedding distribution p(e|a)");
    const bool categorical = r.train.is_categorical();
    out.mips_ratio = embedding_ratio(*r.embedding, r.target, out.pi0_full, categorical ? 1 : r.train.dim(),
                                     categorical);
  }
  return out;
}

double run_estimator(const std::string& id, const SweepConfig& c, const SeedModels& models,
                     const LoggedDataset& eval, const Policy* target) {
  EstimatorInputs in;
  in.dataset = &eval;
  in.target = target;
  in.tau = c.settings.tau;
  in.lambda = c.settings.lambda;
  if (models.q) in.outcome_model = &*models.q;
  if (is_ate_id(id)) {
    const auto method = ate_method_from_name(std::string_view(id).substr(4));
    if (models.rho_full) in.policy_ratio = &*models.rho_full;
    if (models.w) in.marginal_ratio = &*models.w;
    return ate_estimate(method, in);
  }
  if (id == "mr" || id == "snmr") {
    in.marginal_ratio = models.w ? &*models.w : nullptr;
  } else if (id == "mr-alt") {
    in.h_model = models.h ? &*models.h : nullptr;
  } else if (id == "mips" || id == "gmips") {
    static const Representation rep = Representation::context_embedding();
    in.representation = &rep;
    const auto& ratio = id == "mips" ? models.mips_ratio : models.gmips_ratio;
    in.representation_ratio = ratio ? &*ratio : nullptr;
  } else if (models.rho_full) {
    in.policy_ratio = &*models.rho_full;
  }
  return estimate(id, in);
}

std::map<std::string, std::string> provenance(const std::string& id, const SweepConfig& c, const SeedModels& m,
                                              MrSplit split) {
  std::map<std::string, std::string> tags;
  tags["weights"] = c.weights == WeightSource::kExact ? "exact" : "estimated";
  if (id == "switch-dr" || id == "ate-switch-dr") tags["tau"] = format_number(c.settings.tau);
  if (id == "dros" || id == "ate-dros") tags["lambda"] = format_number(c.settings.lambda);
  const bool half = id == "mr" || id == "snmr" || id == "mr-alt" || id == "gmips" || id == "ate-mr";
  const bool full = uses({id}, {"ipw", "dr", "switch-dr", "dros", "snipw", "sndr", "mips", "ate-ipw", "ate-dr",
                                "ate-switch-dr", "ate-dros"});
  if (c.weights == WeightSource::kEstimated) {
    if (half) {
      tags["behavior_fit"] = split == MrSplit::kHalf ? "half-train" : "full-train";
      tags["mr_split"] = mr_split_name(split);
      tags["behavior_fit_records"] = std::to_string(m.pi0_mr_records);
      tags["ratio_fit_records"] = std::to_string(m.ratio_records);
    } else if (full) {
      tags["behavior_fit"] = "full-train";
      tags["behavior_fit_records"] = std::to_string(m.pi0_full_records);
    }
  }
  tags["floor"] = format_number(c.settings.floor);
  return tags;
}

struct Task {
  std::size_t first_point;
  std::vector<std::size_t> points;
  std::uint64_t seed;
};

struct TaskOutput {
  // (point index, estimator index) -> estimate, truth
  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> values;
  std::map<std::size_t, std::map<std::string, std::string>> tags;  // estimator index -> tags
};

}  // namespace

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const std::size_t n_points = config.grid.size();
  std::vector<SweepPoint> points(n_points);
  for (std::size_t g = 0; g < n_points; ++g) points[g] = resolve(config, config.grid[g]);

  // Points sharing training data are evaluated in one task per seed.
  std::vector<std::vector<std::size_t>> groups;
  if (config.axis == SweepAxis::kN) {
    groups.emplace_back();
    for (std::size_t g = 0; g < n_points; ++g) groups.back().push_back(g);
  } else {
    for (std::size_t g = 0; g < n_points; ++g) groups.push_back({g});
  }
  std::vector<std::shared_ptr<const Scenario>> scenarios;
  for (const auto& group : groups) scenarios.push_back(config.factory(points[group.front()]));
  const bool ate = scenarios.front()->is_ate();
  for (const auto& id : config.estimators)
    if (is_ate_id(id) != ate)
      throw ConfigurationError("sweep: estimator '" + id + (ate ? "' is not an ATE method" : "' needs an ATE generator"));

  std::vector<Task> tasks;
  std::vector<std::size_t> task_group;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (auto seed : config.seeds) {
      tasks.push_back({groups[gi].front(), groups[gi], seed});
      task_group.push_back(gi);
    }

  std::vector<TaskOutput> outputs(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  auto work = [&](std::size_t t) {
    const Task& task = tasks[t];
    const auto& scenario = *scenarios[task_group[t]];
    std::vector<std::size_t> sizes;
    for (auto g : task.points) sizes.push_back(points[g].n);
    const Replicate rep = scenario.replicate(points[task.first_point].m, sizes, task.seed);
    const MrSplit split = config.settings.mr_split.value_or(scenario.default_mr_split());
    const SeedModels models = build_models(config, rep, ate, split);
    TaskOutput& out = outputs[t];
    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      out.tags[e] = provenance(config.estimators[e], config, models, split);
      for (std::size_t k = 0; k < task.points.size(); ++k) {
        const double v = run_estimator(config.estimators[e], config, models, rep.evals[k], rep.target.get());
        out.values[{task.points[k], e}] = {v, rep.truths[k]};
      }
    }
  };

  std::size_t jobs = config.jobs ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        work(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  // Canonical order: grid point, estimator, seed (seeds in configured order).
  SweepResult result;
  result.axis = config.axis;
  result.ate = ate;
  const std::size_t n_seeds = config.seeds.size();
  for (std::size_t g = 0; g < n_points; ++g) {
    const std::size_t gi = config.axis == SweepAxis::kN ? 0 : g;
    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      std::vector<double> estimates, truths;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const TaskOutput& out = outputs[gi * n_seeds + s];
        const auto [v, truth] = out.values.at({g, e});
        estimates.push_back(v);
        truths.push_back(truth);
        result.rows.push_back({config.estimators[e], config.grid[g], config.seeds[s], v, truth});
      }
      auto tags = outputs[gi * n_seeds].tags.at(e);
      tags["axis"] = sweep_axis_name(config.axis);
      tags["axis_value"] = format_number(config.grid[g]);
      tags["generator"] = config.generator;
      auto report = make_report(config.estimators[e], std::move(estimates), std::move(truths), std::move(tags));
      report.rng = kRngAlgorithm;
      result.aggregates.push_back({config.grid[g], std::move(report)});
    }
  }
  return result;
}

const AggregateRow& SweepResult::find(std::string_view estimator, double axis_value) const {
  for (const auto& a : aggregates)
    if (a.report.estimator_id == estimator && a.axis_value == axis_value) return a;
  throw std::out_of_range("sweep result: no aggregate for " + std::string(estimator) + " at " +
                          format_number(axis_value));
}

nlohmann::json SweepResult::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"estimator", r.estimator}, {"axis", sweep_axis_name(axis)}, {"axis_value", r.axis_value},
                        {"seed", r.seed},           {"estimate", r.estimate},        {"true_value", r.true_value}};
    if (ate) j["ate_error"] = ate_error(r.estimate, r.true_value);
    rows_json.push_back(std::move(j));
  }
  nlohmann::json agg = nlohmann::json::array();
  for (const auto& a : aggregates) {
    auto j = a.report.to_json();
    j["axis"] = sweep_axis_name(axis);
    j["axis_value"] = a.axis_value;
    if (ate) {
      double total = 0.0;
      for (std::size_t s = 0; s < a.report.per_seed_values.size(); ++s)
        total += ate_error(a.report.per_seed_values[s], a.report.per_seed_truth[s]);
      j["mean_ate_error"] = total / static_cast<double>(a.report.per_seed_values.size());
    }
    agg.push_back(std::move(j));
  }
  return {{"axis", sweep_axis_name(axis)}, {"per_seed", rows_json}, {"aggregate", agg}};
}

void write_seed_csv(const SweepResult& result, std::ostream& out) {
  out << "estimator,axis,axis_value,seed,estimate,true_value\n";
  for (const auto& r : result.rows)
    out << r.estimator << ',' << sweep_axis_name(result.axis) << ',' << format_number(r.axis_value) << ',' << r.seed
        << ',' << format_number(r.estimate) << ',' << format_number(r.true_value) << '\n';
}

void write_aggregate_csv(const SweepResult& result, std::ostream& out) {
  out << "estimator,axis,axis_value,mse,bias_sq,variance,n_seeds\n";
  for (const auto& a : result.aggregates)
    out << a.report.estimator_id << ',' << sweep_axis_name(result.axis) << ',' << format_number(a.axis_value) << ','
        << format_number(a.report.mse) << ',' << format_number(a.report.bias_sq) << ','
        << format_number(a.report.variance) << ',' << a.report.per_seed_values.size() << '\n';
}

void write_ate_error_csv(const SweepResult& result, std::ostream& out) {
  out << "estimator,axis,axis_value,seed,ate_error\n";
  for (const auto& r : result.rows)
    out << r.estimator << ',' << sweep_axis_name(result.axis) << ',' << format_number(r.axis_value) << ',' << r.seed
        << ',' << format_number(ate_error(r.estimate, r.true_value)) << '\n';
}

// ---- oracle suite ----

bool OracleSuiteResult::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.failures == 0; });
}

namespace {

nlohmann::json instances_json(const std::vector<OracleInstance>& instances) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& i : instances)
    out.push_back({{"seed", i.seed}, {"lhs", i.lhs}, {"rhs", i.rhs}, {"passed", i.passed}});
  return out;
}

}  // namespace

nlohmann::json OracleSuiteResult::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks)
    list.push_back({{"check", c.check},
                    {"envs", c.envs},
                    {"failures", c.failures},
                    {"min_lhs_minus_rhs", c.min_lhs_minus_rhs},
                    {"max_abs_lhs_minus_rhs", c.max_abs_lhs_minus_rhs},
                    {"instances", instances_json(c.instances)}});
  return {{"checks", list}, {"all_passed", all_passed()}};
}

OracleSuiteResult run_oracle_suite(const OracleSuiteConfig& config) {
  if (config.n_envs == 0) throw ConfigurationError("oracle suite: need at least one environment");
  std::map<std::string, OracleCheckSummary> by_name;
  std::vector<std::string> order;
  std::uint64_t seed = 0;
  auto record = [&](const std::string& name, bool ok, double lhs, double rhs) {
    auto [it, inserted] = by_name.try_emplace(name);
    auto& c = it->second;
    if (inserted) {
      order.push_back(name);
      c.check = name;
      c.min_lhs_minus_rhs = INFINITY;
    }
    ++c.envs;
    if (!ok) ++c.failures;
    c.instances.push_back({seed, lhs, rhs, ok});
    c.min_lhs_minus_rhs = std::min(c.min_lhs_minus_rhs, lhs - rhs);
    c.max_abs_lhs_minus_rhs = std::max(c.max_abs_lhs_minus_rhs, std::abs(lhs - rhs));
  };
  auto gap = [&](const TabularEnvironment& env, const std::string& which) {
    const auto g = proposition_gap(env, which, config.gap);
    record(which, g.satisfied, g.lhs, g.rhs);
  };

  TabularSize binary = config.size;
  binary.n_actions = 2;
  for (std::size_t i = 0; i < config.n_envs; ++i) {
    seed = config.seed + i;
    const auto plain = random_tabular_env(config.size, {}, seed);
    const auto forms = marginal_ratio_forms(plain);
    double scale = 1.0;
    for (double q : forms.quotient) scale = std::max(scale, std::abs(q));
    record("lemma1", forms.max_abs_difference <= 1e-12 * scale, forms.max_abs_difference, 0.0);
    for (const char* which : {"prop3", "prop4", "propB1"}) gap(plain, which);

    const auto binary_env = random_tabular_env(binary, {}, seed);
    gap(binary_env, "propE1");
    gap(binary_env, "propE2");

    StructureFlags a2;
    a2.assumption2 = true;
    gap(random_tabular_env(config.size, a2, seed), "thm5");
    StructureFlags chain;
    chain.markov_chain = true;
    const auto chain_env = random_tabular_env(config.size, chain, seed);
    gap(chain_env, "propD1");
    gap(chain_env, "propD2");

    // Arbitrary positive weight estimates.
    Rng rng = make_rng(seed, 51);
    std::vector<double> rho_hat(plain.n_contexts() * plain.n_actions());
    for (double& r : rho_hat) r = 0.2 + 2.0 * uniform01(rng);
    std::map<double, double> w_hat;
    for (double y : plain.outcome_values()) w_hat[y] = 0.2 + 2.0 * uniform01(rng);
    const std::size_t na = plain.n_actions();
    const auto rep = approx_weight_identities(
        plain, [&](std::size_t x, std::size_t a) { return rho_hat[x * na + a]; },
        [&](double y) { return w_hat.at(y); });
    record("prop6-bias", rep.satisfied, rep.bias_difference, rep.expected_eps_y);
    record("prop6-variance", rep.satisfied, rep.variance_gap, rep.variance_rhs);

    for (auto f : {Divergence::kKl, Divergence::kTotalVariation, Divergence::kChiSquare}) {
      const auto d = divergence_check(plain, f);
      record(std::string("prop2-") + divergence_name(f), d.satisfied, d.joint, d.marginal);
    }
  }
  OracleSuiteResult result;
  for (const auto& name : order) result.checks.push_back(by_name.at(name));
  return result;
}

}  // namespace mrope
