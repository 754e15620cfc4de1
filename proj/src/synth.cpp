#include "mrope/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mrope/errors.hpp"
#include "mrope/rng.hpp"

namespace mrope {

namespace {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const char* who) {
  if (!j.is_object()) throw ConfigurationError(std::string(who) + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
      throw ConfigurationError(std::string(who) + ": unknown key '" + key + "'");
}

void append_dirichlet_rows(std::vector<double>& out, std::size_t rows, std::size_t k, Rng& rng) {
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = sample_dirichlet(k, 1.0, rng);
    out.insert(out.end(), row.begin(), row.end());
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

MonteCarloValue summarize(double sum, double sum_sq, std::size_t n) {
  MonteCarloValue out;
  out.samples = n;
  out.value = sum / static_cast<double>(n);
  const double var = n > 1 ? std::max(0.0, (sum_sq - sum * out.value) / static_cast<double>(n - 1)) : 0.0;
  out.standard_error = std::sqrt(var / static_cast<double>(n));
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigurationError(message);
}

}  // namespace

TabularEnvironment random_tabular_env(const TabularSize& size, const StructureFlags& flags,
                                      std::uint64_t seed) {
  require(size.n_contexts > 0 && size.n_actions > 0 && size.n_outcomes > 0,
          "tabular env: sizes must be positive");
  require(size.n_actions < 100, "tabular env: at most 99 actions");
  require(!(flags.assumption2 && flags.markov_chain),
          "tabular env: embedding and chain structure are exclusive");
  const std::size_t nx = size.n_contexts, na = size.n_actions, ny = size.n_outcomes;
  Rng rng = make_rng(seed, 0);

  TabularEnvironment::Spec spec;
  spec.n_actions = na;
  spec.context_probs = sample_dirichlet(nx, 1.0, rng);

  constexpr double kFloor = 0.01;
  for (std::size_t x = 0; x < nx; ++x) {
    const auto row = sample_dirichlet(na, 1.0, rng);
    for (double p : row) spec.behavior.push_back(kFloor + (1.0 - kFloor * static_cast<double>(na)) * p);
  }
  append_dirichlet_rows(spec.target, nx, na, rng);

  std::uniform_real_distribution<double> value_dist(-1.0, 2.0);
  while (spec.outcomes.size() < ny) {
    const double v = value_dist(rng);
    if (std::find(spec.outcomes.begin(), spec.outcomes.end(), v) == spec.outcomes.end())
      spec.outcomes.push_back(v);
  }
  std::sort(spec.outcomes.begin(), spec.outcomes.end());

  if (flags.assumption2) {
    EmbeddingStructure emb;
    emb.n_embeddings = size.n_embeddings;
    require(emb.n_embeddings > 0, "tabular env: n_embeddings must be positive");
    append_dirichlet_rows(emb.given_action, na, emb.n_embeddings, rng);
    for (std::size_t x = 0; x < nx; ++x) {
      if (flags.y_indep_a) {
        const auto row = sample_dirichlet(ny, 1.0, rng);
        for (std::size_t e = 0; e < emb.n_embeddings; ++e)
          emb.outcome_given_xe.insert(emb.outcome_given_xe.end(), row.begin(), row.end());
      } else {
        append_dirichlet_rows(emb.outcome_given_xe, emb.n_embeddings, ny, rng);
      }
    }
    spec.embedding = std::move(emb);
  } else if (flags.markov_chain) {
    RepresentationChain ch;
    ch.n_r1 = size.n_r1;
    ch.n_r2 = size.n_r2;
    require(ch.n_r1 > 0 && ch.n_r2 > 0, "tabular env: chain cardinalities must be positive");
    if (flags.y_indep_a) {
      for (std::size_t x = 0; x < nx; ++x) {
        const auto row = sample_dirichlet(ch.n_r1, 1.0, rng);
        for (std::size_t a = 0; a < na; ++a) ch.r1_given_xa.insert(ch.r1_given_xa.end(), row.begin(), row.end());
      }
    } else {
      append_dirichlet_rows(ch.r1_given_xa, nx * na, ch.n_r1, rng);
    }
    append_dirichlet_rows(ch.r2_given_r1, ch.n_r1, ch.n_r2, rng);
    append_dirichlet_rows(ch.outcome_given_r2, ch.n_r2, ny, rng);
    spec.chain = std::move(ch);
  } else {
    for (std::size_t x = 0; x < nx; ++x) {
      if (flags.y_indep_a) {
        const auto row = sample_dirichlet(ny, 1.0, rng);
        for (std::size_t a = 0; a < na; ++a)
          spec.outcome_table.insert(spec.outcome_table.end(), row.begin(), row.end());
      } else {
        append_dirichlet_rows(spec.outcome_table, na, ny, rng);
      }
    }
  }
  return TabularEnvironment(std::move(spec));
}

// ---- EmbeddingModel ----

EmbeddingModel::EmbeddingModel(std::size_t n_actions, std::size_t n_dims, std::size_t cardinality,
                               std::vector<double> probs)
    : n_actions_(n_actions), n_dims_(n_dims), cardinality_(cardinality), probs_(std::move(probs)) {
  if (probs_.size() != n_actions_ * n_dims_ * cardinality_)
    throw ConfigurationError("embedding model: probability table has the wrong size");
}

double EmbeddingModel::prob(std::size_t a, std::span<const int> e) const {
  if (e.size() != n_dims_) throw ConfigurationError("embedding model: embedding width mismatch");
  double p = 1.0;
  for (std::size_t k = 0; k < n_dims_; ++k) {
    const auto c = static_cast<std::size_t>(e[k]);
    if (c >= cardinality_) throw std::out_of_range("embedding model: category out of range");
    p *= component(a, k, c);
  }
  return p;
}

// ---- Saito ----

void SaitoConfig::validate() const {
  require(d > 0, "saito: d must be positive");
  require(n_actions >= 2, "saito: need at least two actions");
  require(embedding_dims > 0 && embedding_cardinality > 0, "saito: embedding sizes must be positive");
  require(alpha_star >= 0.0 && alpha_star <= 1.0, "saito: alpha_star must lie in [0, 1]");
  require(noise_sd >= 0.0, "saito: noise_sd must be nonnegative");
}

nlohmann::json SaitoConfig::to_json() const {
  return {{"d", d},
          {"n_actions", n_actions},
          {"embedding_dims", embedding_dims},
          {"embedding_cardinality", embedding_cardinality},
          {"alpha_star", alpha_star},
          {"noise_sd", noise_sd},
          {"seed", seed}};
}

SaitoConfig SaitoConfig::from_json(const nlohmann::json& j) { return from_json(j, SaitoConfig{}); }

SaitoConfig SaitoConfig::from_json(const nlohmann::json& j, SaitoConfig c) {
  reject_unknown_keys(j, {"d", "n_actions", "embedding_dims", "embedding_cardinality", "alpha_star", "noise_sd", "seed"}, "saito config");
  try {
    c.d = j.value("d", c.d);
    c.n_actions = j.value("n_actions", c.n_actions);
    c.embedding_dims = j.value("embedding_dims", c.embedding_dims);
    c.embedding_cardinality = j.value("embedding_cardinality", c.embedding_cardinality);
    c.alpha_star = j.value("alpha_star", c.alpha_star);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("saito config: ") + e.what());
  }
  c.validate();
  return c;
}

SaitoSetup::SaitoSetup(SaitoConfig config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d, na = config_.n_actions;
  const std::size_t nk = config_.embedding_dims, nc = config_.embedding_cardinality;
  Rng rng = make_rng(config_.seed, 100);

  std::vector<double> probs(na * nk * nc);
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t k = 0; k < nk; ++k) {
      double* row = probs.data() + (a * nk + k) * nc;
      double top = -INFINITY;
      for (std::size_t c = 0; c < nc; ++c) {
        row[c] = standard_normal(rng);
        top = std::max(top, row[c]);
      }
      double total = 0.0;
      for (std::size_t c = 0; c < nc; ++c) total += (row[c] = std::exp(row[c] - top));
      for (std::size_t c = 0; c < nc; ++c) row[c] /= total;
    }
  }
  embedding_ = std::make_shared<const EmbeddingModel>(na, nk, nc, std::move(probs));

  std::vector<double> v(nk * nc * d);
  for (double& x : v) x = standard_normal(rng);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> m(d * d);
  for (double& x : m) x = unif(rng);
  theta_x_.resize(d);
  for (double& x : theta_x_) x = unif(rng);
  std::vector<double> theta_e(d);
  for (double& x : theta_e) x = unif(rng);
  eta_ = sample_dirichlet(nk, 1.0, rng);

  const double inv_d = 1.0 / static_cast<double>(d);
  for (double& t : theta_x_) t *= inv_d;
  category_dot_.assign(nk * nc * d, 0.0);
  category_bias_.assign(nk * nc, 0.0);
  for (std::size_t kc = 0; kc < nk * nc; ++kc) {
    std::span<const double> vk(v.data() + kc * d, d);
    for (std::size_t i = 0; i < d; ++i)
      category_dot_[kc * d + i] = dot(std::span<const double>(m.data() + i * d, d), vk) * inv_d;
    category_bias_[kc] = dot(theta_e, vk) * inv_d;
  }

  // q(x, a) = sum_k eta_k sum_c p_k(c|a) (x'u_{k,c} + s_{k,c}) + theta_x'x.
  std::vector<double> weights(na * (d + 1), 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    double* w = weights.data() + a * (d + 1);
    for (std::size_t i = 0; i < d; ++i) w[i] = theta_x_[i];
    for (std::size_t k = 0; k < nk; ++k) {
      for (std::size_t c = 0; c < nc; ++c) {
        const double coef = eta_[k] * embedding_->component(a, k, c);
        const std::size_t kc = k * nc + c;
        for (std::size_t i = 0; i < d; ++i) w[i] += coef * category_dot_[kc * d + i];
        w[d] += coef * category_bias_[kc];
      }
    }
  }
  scores_ = std::make_shared<const Scores>(Scores::linear(na, d, std::move(weights)));
}

double SaitoSetup::reward_mean(std::span<const double> x, std::span<const int> e) const {
  const std::size_t d = config_.d, nc = config_.embedding_cardinality;
  double q = dot(theta_x_, x);
  for (std::size_t k = 0; k < config_.embedding_dims; ++k) {
    const std::size_t kc = k * nc + static_cast<std::size_t>(e[k]);
    q += eta_[k] * (dot(std::span<const double>(category_dot_.data() + kc * d, d), x) + category_bias_[kc]);
  }
  return q;
}

void SaitoSetup::action_values(std::span<const double> x, std::span<double> out) const {
  scores_->eval(ContextRef(x), out);
}

Policy SaitoSetup::behavior_policy() const { return Policy::softmax(*scores_, -1.0); }

Policy SaitoSetup::target_policy(double alpha_star) const {
  return Policy::alpha_argmax(*scores_, alpha_star);
}

LoggedDataset SaitoSetup::sample(std::size_t n, std::uint64_t seed, std::uint64_t stream) const {
  const std::size_t d = config_.d, na = config_.n_actions, nk = config_.embedding_dims;
  const std::size_t nc = config_.embedding_cardinality;
  Rng rng = make_rng(seed, stream);
  const Policy behavior = behavior_policy();
  std::vector<double> features(n * d), outcomes(n), probs(na), comp(nc);
  std::vector<int> actions(n), embeddings(n * nk);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x(features.data() + i * d, d);
    for (double& v : x) v = standard_normal(rng);
    behavior.probs(ContextRef(std::span<const double>(x)), probs);
    const int a = sample_categorical(probs, rng);
    actions[i] = a;
    for (std::size_t k = 0; k < nk; ++k) {
      for (std::size_t c = 0; c < nc; ++c) comp[c] = embedding_->component(static_cast<std::size_t>(a), k, c);
      embeddings[i * nk + k] = sample_categorical(comp, rng);
    }
    const double noise = standard_normal(rng) * config_.noise_sd;
    outcomes[i] = reward_mean(x, std::span<const int>(embeddings.data() + i * nk, nk)) + noise;
  }
  return LoggedDataset::dense(d, std::move(features), std::move(actions), std::move(outcomes),
                              static_cast<int>(na), seed, std::move(embeddings), nk);
}

MonteCarloValue SaitoSetup::true_value(const Policy& target, std::size_t samples,
                                       std::uint64_t seed) const {
  if (samples == 0) throw ConfigurationError("saito: Monte Carlo sample count must be positive");
  const std::size_t d = config_.d, na = config_.n_actions;
  Rng rng = make_rng(seed, 200);
  std::vector<double> x(d), q(na), p(na);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (double& v : x) v = standard_normal(rng);
    const ContextRef ctx{std::span<const double>(x)};
    scores_->eval(ctx, q);
    target.probs(ctx, p);
    const double v = dot(p, q);
    sum += v;
    sum_sq += v * v;
  }
  return summarize(sum, sum_sq, samples);
}

MonteCarloValue SaitoSetup::behavior_target_kl(const Policy& target, std::size_t samples,
                                               std::uint64_t seed) const {
  if (samples == 0) throw ConfigurationError("saito: Monte Carlo sample count must be positive");
  const std::size_t d = config_.d, na = config_.n_actions;
  const Policy behavior = behavior_policy();
  Rng rng = make_rng(seed, 201);
  std::vector<double> x(d), pb(na), pt(na);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (double& v : x) v = standard_normal(rng);
    const ContextRef ctx{std::span<const double>(x)};
    behavior.probs(ctx, pb);
    target.probs(ctx, pt);
    double kl = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      if (pb[a] <= 0.0) continue;
      kl += pt[a] > 0.0 ? pb[a] * std::log(pb[a] / pt[a]) : INFINITY;
    }
    sum += kl;
    sum_sq += kl * kl;
  }
  return summarize(sum, sum_sq, samples);
}

// ---- sin ----

void SinConfig::validate() const {
  require(d > 0, "sin: d must be positive");
  require(n_actions >= 2, "sin: need at least two actions");
  require(alpha_star >= 0.0 && alpha_star <= 1.0, "sin: alpha_star must lie in [0, 1]");
  require(noise_sd >= 0.0, "sin: noise_sd must be nonnegative");
}

nlohmann::json SinConfig::to_json() const {
  return {{"d", d}, {"n_actions", n_actions}, {"alpha_star", alpha_star}, {"noise_sd", noise_sd}, {"seed", seed}};
}

SinConfig SinConfig::from_json(const nlohmann::json& j) { return from_json(j, SinConfig{}); }

SinConfig SinConfig::from_json(const nlohmann::json& j, SinConfig c) {
  reject_unknown_keys(j, {"d", "n_actions", "alpha_star", "noise_sd", "seed"}, "sin config");
  try {
    c.d = j.value("d", c.d);
    c.n_actions = j.value("n_actions", c.n_actions);
    c.alpha_star = j.value("alpha_star", c.alpha_star);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("sin config: ") + e.what());
  }
  c.validate();
  return c;
}

SinSetup::SinSetup(SinConfig config) : config_(config) {
  config_.validate();
  const std::size_t na = config_.n_actions;
  scores_ = std::make_shared<const Scores>(Scores::custom(na, [](ContextRef ctx, std::span<double> out) {
    if (ctx.is_categorical()) throw ConfigurationError("sin scores need dense contexts");
    const auto x = ctx.features();
    const double norm = std::sqrt(dot(x, x));
    for (std::size_t a = 0; a < out.size(); ++a) out[a] = std::sin(static_cast<double>(a) * norm);
  }));
}

double SinSetup::reward_mean(std::span<const double> x, int a) const {
  return std::sin(static_cast<double>(a) * std::sqrt(dot(x, x)));
}

Policy SinSetup::behavior_policy() const { return Policy::softmax(*scores_, 1.0); }

Policy SinSetup::target_policy(double alpha_star) const { return Policy::alpha_argmax(*scores_, alpha_star); }

LoggedDataset SinSetup::sample(std::size_t n, std::uint64_t seed, std::uint64_t stream) const {
  const std::size_t d = config_.d, na = config_.n_actions;
  Rng rng = make_rng(seed, stream);
  const Policy behavior = behavior_policy();
  std::vector<double> features(n * d), outcomes(n), probs(na);
  std::vector<int> actions(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x(features.data() + i * d, d);
    for (double& v : x) v = standard_normal(rng);
    behavior.probs(ContextRef(std::span<const double>(x)), probs);
    actions[i] = sample_categorical(probs, rng);
    outcomes[i] = reward_mean(x, actions[i]) + config_.noise_sd * standard_normal(rng);
  }
  return LoggedDataset::dense(d, std::move(features), std::move(actions), std::move(outcomes),
                              static_cast<int>(na), seed);
}

MonteCarloValue SinSetup::true_value(const Policy& target, std::size_t samples, std::uint64_t seed) const {
  if (samples == 0) throw ConfigurationError("sin: Monte Carlo sample count must be positive");
  const std::size_t d = config_.d, na = config_.n_actions;
  Rng rng = make_rng(seed, 200);
  std::vector<double> x(d), q(na), p(na);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (double& v : x) v = standard_normal(rng);
    const ContextRef ctx{std::span<const double>(x)};
    scores_->eval(ctx, q);
    target.probs(ctx, p);
    const double v = dot(p, q);
    sum += v;
    sum_sq += v * v;
  }
  return summarize(sum, sum_sq, samples);
}

// ---- ATE ----

void AteConfig::validate() const {
  require(min_propensity > 0.0 && min_propensity < 0.5, "ate: min_propensity must lie in (0, 0.5)");
  require(base_rate >= 0.0 && spread >= 0.0, "ate: base_rate and spread must be nonnegative");
  require(base_rate + std::min(effect, 0.0) >= 0.0 && base_rate + spread + std::max(effect, 0.0) <= 1.0,
          "ate: outcome probabilities leave [0, 1]");
}

nlohmann::json AteConfig::to_json() const {
  return {{"d", d},         {"base_rate", base_rate}, {"spread", spread},
          {"effect", effect}, {"min_propensity", min_propensity}, {"seed", seed}};
}

AteConfig AteConfig::from_json(const nlohmann::json& j) { return from_json(j, AteConfig{}); }

AteConfig AteConfig::from_json(const nlohmann::json& j, AteConfig c) {
  reject_unknown_keys(j, {"d", "base_rate", "spread", "effect", "min_propensity", "seed"}, "ate config");
  try {
    c.d = j.value("d", c.d);
    c.base_rate = j.value("base_rate", c.base_rate);
    c.spread = j.value("spread", c.spread);
    c.effect = j.value("effect", c.effect);
    c.min_propensity = j.value("min_propensity", c.min_propensity);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("ate config: ") + e.what());
  }
  c.validate();
  return c;
}

AteSetup::AteSetup(AteConfig config) : config_(config) {
  config_.validate();
  Rng rng = make_rng(config_.seed, 100);
  gamma_.resize(config_.d);
  for (double& g : gamma_) g = standard_normal(rng);
}

double AteSetup::propensity(std::span<const double> features) const {
  const double lo = config_.min_propensity;
  return std::clamp(features[0] / 10.0, lo, 1.0 - lo);
}

double AteSetup::outcome_prob(std::span<const double> features, int a) const {
  const double s = dot(gamma_, features.subspan(1));
  const double p0 = config_.base_rate + config_.spread / (1.0 + std::exp(-s));
  return a == 1 ? p0 + config_.effect : p0;
}

Policy AteSetup::behavior_policy() const {
  const double lo = config_.min_propensity;
  return Policy::softmax(Scores::custom(2, [lo](ContextRef ctx, std::span<double> out) {
    const double p = std::clamp(ctx.features()[0] / 10.0, lo, 1.0 - lo);
    out[0] = std::log(1.0 - p);
    out[1] = std::log(p);
  }));
}

LoggedDataset AteSetup::sample(std::size_t n, std::uint64_t seed, std::uint64_t stream) const {
  const std::size_t dim = config_.d + 1;
  Rng rng = make_rng(seed, stream);
  std::uniform_int_distribution<int> group(0, 9);
  std::vector<double> features(n * dim), outcomes(n);
  std::vector<int> actions(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x(features.data() + i * dim, dim);
    x[0] = group(rng);
    for (std::size_t j = 1; j < dim; ++j) x[j] = standard_normal(rng);
    actions[i] = uniform01(rng) < propensity(x) ? 1 : 0;
    outcomes[i] = uniform01(rng) < outcome_prob(x, actions[i]) ? 1.0 : 0.0;
  }
  return LoggedDataset::dense(dim, std::move(features), std::move(actions), std::move(outcomes), 2, seed);
}

// ---- classification ----

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw IngestionError("csv row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                         ": '" + t + "' is not a finite number");
  return v;
}

}  // namespace

ClassificationData read_classification_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ClassificationData data;
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 2 || header.back() != "label")
    throw IngestionError("csv: header must list feature columns followed by 'label'");
  data.feature_names.assign(header.begin(), header.end() - 1);
  data.dim = data.feature_names.size();

  std::size_t row = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw IngestionError("csv row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                           " columns, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < data.dim; ++c) data.features.push_back(parse_number(cells[c], row, c));
    const double label = parse_number(cells.back(), row, data.dim);
    if (label < 0.0 || label != std::floor(label) || label > 1e6)
      throw IngestionError("csv row " + std::to_string(row) + ": label must be a nonnegative integer");
    data.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
  }
  if (data.labels.empty()) throw IngestionError("csv: no data rows");
  data.n_classes = static_cast<std::size_t>(max_label + 1);
  std::vector<char> seen(data.n_classes, 0);
  for (int l : data.labels) seen[static_cast<std::size_t>(l)] = 1;
  for (std::size_t k = 0; k < seen.size(); ++k)
    if (!seen[k]) throw IngestionError("csv: labels must be contiguous from 0; class " + std::to_string(k) + " is missing");
  if (data.n_classes < 2) throw IngestionError("csv: need at least two classes");
  return data;
}

ClassificationData read_classification_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  return read_classification_csv(in);
}

ClassificationBandit classification_to_bandit(const ClassificationData& data, double train_fraction,
                                              double alpha_star, std::uint64_t seed,
                                              const SoftmaxConfig& config) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "classification: train fraction must lie in (0, 1)");
  require(alpha_star >= 0.0 && alpha_star <= 1.0, "classification: alpha_star must lie in [0, 1]");
  const std::size_t n = data.size(), dim = data.dim, nk = data.n_classes;
  const auto m = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  require(m >= 2 && m < n, "classification: split leaves an empty side");

  Rng rng = make_rng(seed, 0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  ClassificationBandit out;
  out.feature_mean.assign(dim, 0.0);
  out.feature_scale.assign(dim, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < dim; ++j) out.feature_mean[j] += data.features[order[r] * dim + j];
  for (double& v : out.feature_mean) v /= static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < dim; ++j) {
      const double c = data.features[order[r] * dim + j] - out.feature_mean[j];
      out.feature_scale[j] += c * c;
    }
  for (double& v : out.feature_scale) {
    v = std::sqrt(v / static_cast<double>(m));
    if (!(v > 1e-12)) v = 1.0;
  }

  auto build = [&](std::size_t begin, std::size_t end, std::vector<double>& x, std::vector<int>& labels) {
    for (std::size_t r = begin; r < end; ++r) {
      const std::size_t i = order[r];
      for (std::size_t j = 0; j < dim; ++j)
        x.push_back((data.features[i * dim + j] - out.feature_mean[j]) / out.feature_scale[j]);
      labels.push_back(data.labels[i]);
    }
  };
  std::vector<double> x_train, x_eval;
  std::vector<int> y_train, y_eval;
  build(0, m, x_train, y_train);
  build(m, n, x_eval, y_eval);

  SoftmaxConfig fit_config = config;
  fit_config.standardize = false;
  fit_config.l2_grid.clear();
  const auto classifier = SoftmaxClassifier::fit(dim, x_train, y_train, nk, fit_config);
  out.behavior = classifier.policy();
  out.target = Policy::alpha_argmax(classifier.scores(), alpha_star);

  std::vector<double> probs(nk);
  auto log_bandit = [&](const std::vector<double>& x, const std::vector<int>& labels, std::uint64_t stream) {
    Rng act_rng = make_rng(seed, stream);
    const std::size_t rows = labels.size();
    std::vector<int> actions(rows);
    std::vector<double> rewards(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      out.behavior.probs(ContextRef(std::span<const double>(x.data() + i * dim, dim)), probs);
      actions[i] = sample_categorical(probs, act_rng);
      rewards[i] = actions[i] == labels[i] ? 1.0 : 0.0;
    }
    return LoggedDataset::dense(dim, x, std::move(actions), std::move(rewards), static_cast<int>(nk), seed);
  };
  out.train = log_bandit(x_train, y_train, 1).with_role(DatasetRole::kTrain);
  out.eval = log_bandit(x_eval, y_eval, 2).with_role(DatasetRole::kEval);

  double value = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y_eval.size(); ++i) {
    const std::span<const double> xi(x_eval.data() + i * dim, dim);
    value += out.target.prob(ContextRef(xi), y_eval[i]);
    if (classifier.predict(xi) == y_eval[i]) ++correct;
  }
  out.true_value = value / static_cast<double>(y_eval.size());
  out.classifier_accuracy = static_cast<double>(correct) / static_cast<double>(y_eval.size());
  return out;
}

ClassificationData make_separable_classification(std::size_t n, std::size_t dim, std::size_t n_classes,
                                                 std::uint64_t seed) {
  require(n > 0 && dim > 0 && n_classes >= 2, "separable data: invalid sizes");
  Rng rng = make_rng(seed, 0);
  std::vector<double> centers(n_classes * dim);
  for (double& c : centers) c = 2.0 * standard_normal(rng);
  ClassificationData data;
  data.dim = dim;
  data.n_classes = n_classes;
  for (std::size_t j = 0; j < dim; ++j) data.feature_names.push_back("x" + std::to_string(j));
  std::uniform_int_distribution<std::size_t> pick(0, n_classes - 1);
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t origin = pick(rng);
    for (std::size_t j = 0; j < dim; ++j) x[j] = centers[origin * dim + j] + standard_normal(rng);
    // Relabel by nearest center so the classes are linearly separable.
    std::size_t best = 0;
    double best_dist = INFINITY;
    for (std::size_t k = 0; k < n_classes; ++k) {
      double dist = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = x[j] - centers[k * dim + j];
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    data.features.insert(data.features.end(), x.begin(), x.end());
    data.labels.push_back(static_cast<int>(best));
  }
  std::vector<char> seen(n_classes, 0);
  for (int l : data.labels) seen[static_cast<std::size_t>(l)] = 1;
  if (std::count(seen.begin(), seen.end(), 0) > 0)
    throw ConfigurationError("separable data: a class received no rows; increase n");
  return data;
}

void write_classification_csv(const ClassificationData& data, std::ostream& out) {
  for (const auto& name : data.feature_names) out << name << ',';
  out << "label\n";
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim; ++j) out << data.features[i * data.dim + j] << ',';
    out << data.labels[i] << '\n';
  }
}

}  // namespace mrope
