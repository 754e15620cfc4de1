#include "mrope/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrope/errors.hpp"
#include "mrope/rng.hpp"

namespace mrope {
namespace {

// One atom of the joint distribution of (X, A, [E | R1, R2], Y).
struct Cell {
  std::size_t x = 0;
  std::size_t a = 0;
  std::size_t y = 0;
  long e = -1;
  long r1 = -1;
  long r2 = -1;
  double yv = 0.0;
  double pb = 0.0;
  double pt = 0.0;
};

using Key = std::vector<long>;
using KeyFn = std::function<Key(const Cell&)>;
using CellFn = std::function<double(const Cell&)>;

std::vector<Cell> enumerate(const TabularEnvironment& env) {
  std::vector<Cell> cells;
  const std::size_t nx = env.n_contexts();
  const std::size_t na = env.n_actions();
  const std::size_t ny = env.n_outcomes();
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t a = 0; a < na; ++a) {
      const double base_b = env.context_prob(x) * env.behavior(x, a);
      const double base_t = env.context_prob(x) * env.target(x, a);
      if (base_b == 0.0 && base_t == 0.0) continue;
      auto push = [&](Cell c, double factor) {
        c.pb = base_b * factor;
        c.pt = base_t * factor;
        if (c.pb > 0.0 || c.pt > 0.0) cells.push_back(c);
      };
      if (env.embedding()) {
        const std::size_t ne = env.embedding()->n_embeddings;
        for (std::size_t e = 0; e < ne; ++e)
          for (std::size_t y = 0; y < ny; ++y)
            push({x, a, y, static_cast<long>(e), -1, -1, env.outcome_value(y)},
                 env.embedding_prob(a, e) * env.outcome_given_embedding(x, e, y));
      } else if (env.chain()) {
        const auto& ch = *env.chain();
        for (std::size_t r1 = 0; r1 < ch.n_r1; ++r1)
          for (std::size_t r2 = 0; r2 < ch.n_r2; ++r2)
            for (std::size_t y = 0; y < ny; ++y)
              push({x, a, y, -1, static_cast<long>(r1), static_cast<long>(r2), env.outcome_value(y)},
                   ch.r1_given_xa[(x * na + a) * ch.n_r1 + r1] * ch.r2_given_r1[r1 * ch.n_r2 + r2] *
                       ch.outcome_given_r2[r2 * ny + y]);
      } else {
        for (std::size_t y = 0; y < ny; ++y)
          push({x, a, y, -1, -1, -1, env.outcome_value(y)}, env.outcome_prob(x, a, y));
      }
    }
  }
  return cells;
}

double expect(const std::vector<Cell>& cells, const CellFn& f) {
  double total = 0.0;
  for (const auto& c : cells)
    if (c.pb > 0.0) total += c.pb * f(c);
  return total;
}

double variance(const std::vector<Cell>& cells, const CellFn& f) {
  const double m = expect(cells, f);
  return expect(cells, [&](const Cell& c) {
    const double d = f(c) - m;
    return d * d;
  });
}

double covariance(const std::vector<Cell>& cells, const CellFn& f, const CellFn& g) {
  const double mf = expect(cells, f);
  const double mg = expect(cells, g);
  return expect(cells, [&](const Cell& c) { return (f(c) - mf) * (g(c) - mg); });
}

// E_pi0[f | key(cell)], evaluated for every cell.
std::vector<double> conditional_mean(const std::vector<Cell>& cells, const KeyFn& key,
                                     const CellFn& f) {
  std::map<Key, std::pair<double, double>> acc;
  for (const auto& c : cells) {
    auto& slot = acc[key(c)];
    if (c.pb > 0.0) {
      slot.first += c.pb * f(c);
      slot.second += c.pb;
    }
  }
  std::vector<double> out(cells.size(), 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& slot = acc[key(cells[i])];
    out[i] = slot.second > 0.0 ? slot.first / slot.second : 0.0;
  }
  return out;
}

// E_pi0[Var_pi0[f | key]] via per-cell squared deviations from the group mean.
double expected_conditional_variance(const std::vector<Cell>& cells, const KeyFn& key,
                                     const CellFn& f) {
  const auto m = conditional_mean(cells, key, f);
  double total = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].pb == 0.0) continue;
    const double d = f(cells[i]) - m[i];
    total += cells[i].pb * d * d;
  }
  return total;
}

std::size_t index_of(const std::vector<Cell>& cells, const Cell& c) {
  return static_cast<std::size_t>(&c - cells.data());
}

KeyFn rep_key(const TabularEnvironment& env, OracleRep rep) {
  switch (rep) {
    case OracleRep::kContextAction:
      return [](const Cell& c) { return Key{static_cast<long>(c.x), static_cast<long>(c.a)}; };
    case OracleRep::kContextEmbedding:
      if (!env.embedding()) throw ConfigurationError("oracle: representation (x, e) needs embeddings");
      return [](const Cell& c) { return Key{static_cast<long>(c.x), c.e}; };
    case OracleRep::kEmbedding:
      if (!env.embedding()) throw ConfigurationError("oracle: representation e needs embeddings");
      return [](const Cell& c) { return Key{c.e}; };
    case OracleRep::kR1:
      if (!env.chain()) throw ConfigurationError("oracle: representation r1 needs a representation chain");
      return [](const Cell& c) { return Key{c.r1}; };
    case OracleRep::kR2:
      if (!env.chain()) throw ConfigurationError("oracle: representation r2 needs a representation chain");
      return [](const Cell& c) { return Key{c.r2}; };
    case OracleRep::kOutcome:
      return [](const Cell& c) { return Key{static_cast<long>(c.y)}; };
  }
  throw ConfigurationError("oracle: unknown representation");
}

const KeyFn kByOutcome = [](const Cell& c) { return Key{static_cast<long>(c.y)}; };
const KeyFn kByContext = [](const Cell& c) { return Key{static_cast<long>(c.x)}; };
const KeyFn kByContextAction = [](const Cell& c) {
  return Key{static_cast<long>(c.x), static_cast<long>(c.a)};
};

// Resolved per-environment quantities shared by every estimator summand.
struct Resolved {
  const TabularEnvironment* env = nullptr;
  std::vector<Cell> cells;
  std::function<double(std::size_t, std::size_t)> rho;
  std::function<double(std::size_t, std::size_t)> mu;
  std::vector<double> w_cell;  // w evaluated at each cell's outcome
  bool ate = false;
};

double exact_rho(const TabularEnvironment& env, std::size_t x, std::size_t a) {
  const double b = env.behavior(x, a);
  return b > 0.0 ? env.target(x, a) / b : 0.0;
}

double exact_ate_rho(const TabularEnvironment& env, std::size_t x, std::size_t a) {
  const double b = env.behavior(x, a);
  if (!(b > 0.0)) return 0.0;
  return (a == 1 ? 1.0 : -1.0) / b;
}

double exact_mu(const TabularEnvironment& env, std::size_t x, std::size_t a) {
  double m = 0.0;
  for (std::size_t y = 0; y < env.n_outcomes(); ++y) m += env.outcome_value(y) * env.outcome_prob(x, a, y);
  return m;
}

Resolved resolve(const TabularEnvironment& env, const OracleModels& models, bool ate) {
  if (ate && env.n_actions() != 2) throw ConfigurationError("oracle: ATE quantities need two actions");
  Resolved r;
  r.env = &env;
  r.ate = ate;
  r.cells = enumerate(env);
  if (models.rho) {
    r.rho = models.rho;
  } else if (ate) {
    r.rho = [&env](std::size_t x, std::size_t a) { return exact_ate_rho(env, x, a); };
  } else {
    r.rho = [&env](std::size_t x, std::size_t a) { return exact_rho(env, x, a); };
  }
  r.mu = models.mu ? models.mu
                   : std::function<double(std::size_t, std::size_t)>(
                         [&env](std::size_t x, std::size_t a) { return exact_mu(env, x, a); });
  if (models.w) {
    r.w_cell.resize(r.cells.size());
    for (std::size_t i = 0; i < r.cells.size(); ++i) r.w_cell[i] = models.w(r.cells[i].yv);
  } else {
    auto rho = r.rho;
    r.w_cell = conditional_mean(r.cells, kByOutcome, [rho](const Cell& c) { return rho(c.x, c.a); });
  }
  return r;
}

// sum_a' mu(x, a') pi(a'|x) for each context.
std::vector<double> direct_terms(const Resolved& r) {
  const auto& env = *r.env;
  std::vector<double> out(env.n_contexts(), 0.0);
  for (std::size_t x = 0; x < env.n_contexts(); ++x)
    for (std::size_t a = 0; a < env.n_actions(); ++a) {
      const double p = env.target(x, a);
      if (p != 0.0) out[x] += p * r.mu(x, a);
    }
  return out;
}

CellFn dr_like(const Resolved& r, std::function<double(double)> shrink) {
  auto dm = std::make_shared<std::vector<double>>(direct_terms(r));
  return [&r, dm, shrink](const Cell& c) {
    const double w = shrink(r.rho(c.x, c.a));
    return w * (c.yv - r.mu(c.x, c.a)) + (*dm)[c.x];
  };
}

CellFn summand(const Resolved& r, const std::string& id, const OracleModels& models) {
  const auto& env = *r.env;
  const auto& cells = r.cells;
  if (id == "ipw" || id == "ate-ipw") return [&r](const Cell& c) { return r.rho(c.x, c.a) * c.yv; };
  if (id == "mr" || id == "ate-mr")
    return [&r, &cells](const Cell& c) { return r.w_cell[index_of(cells, c)] * c.yv; };
  if (id == "mr-alt") {
    if (models.h) return [h = models.h](const Cell& c) { return h(c.yv); };
    return [&r, &cells](const Cell& c) { return r.w_cell[index_of(cells, c)] * c.yv; };
  }
  if (id == "dm") {
    auto dm = std::make_shared<std::vector<double>>(direct_terms(r));
    return [dm](const Cell& c) { return (*dm)[c.x]; };
  }
  if (id == "dr") return dr_like(r, [](double w) { return w; });
  if (id == "switch-dr") {
    const double tau = models.tau;
    if (!(tau >= 0.0)) throw std::domain_error("oracle: tau must be >= 0");
    return dr_like(r, [tau](double w) { return w <= tau ? w : 0.0; });
  }
  if (id == "dros") {
    const double lambda = models.lambda;
    if (!(lambda >= 0.0)) throw std::domain_error("oracle: lambda must be >= 0");
    return dr_like(r, [lambda](double w) {
      const double d = w * w + lambda;
      return d > 0.0 ? lambda * w / d : 0.0;
    });
  }
  if (id == "mips" || id == "gmips" || id == "gmdr") {
    const OracleRep rep = id == "mips" ? OracleRep::kContextEmbedding : models.representation;
    const KeyFn key = rep_key(env, rep);
    auto rho = r.rho;
    auto ratio = std::make_shared<std::vector<double>>(
        conditional_mean(cells, key, [rho](const Cell& c) { return rho(c.x, c.a); }));
    if (id != "gmdr")
      return [ratio, &cells](const Cell& c) { return (*ratio)[index_of(cells, c)] * c.yv; };
    // mu~(r) = E[Y | R = r]; direct term sum_r' mu~(r') p_pi(r' | x).
    auto mu_r = std::make_shared<std::vector<double>>(
        conditional_mean(cells, key, [](const Cell& c) { return c.yv; }));
    auto direct = std::make_shared<std::vector<double>>(env.n_contexts(), 0.0);
    for (std::size_t i = 0; i < cells.size(); ++i)
      (*direct)[cells[i].x] += cells[i].pt * (*mu_r)[i] / env.context_prob(cells[i].x);
    return [ratio, mu_r, direct, &cells](const Cell& c) {
      const std::size_t i = index_of(cells, c);
      return (*ratio)[i] * (c.yv - (*mu_r)[i]) + (*direct)[c.x];
    };
  }
  if (id == "ate-dm") return [&r](const Cell& c) { return r.mu(c.x, 1) - r.mu(c.x, 0); };
  if (id == "ate-dr")
    return [&r](const Cell& c) {
      return r.rho(c.x, c.a) * (c.yv - r.mu(c.x, c.a)) + r.mu(c.x, 1) - r.mu(c.x, 0);
    };
  if (id == "snipw" || id == "sndr" || id == "snmr")
    throw UnsupportedError("oracle: self-normalized estimators have no closed-form variance");
  throw ConfigurationError("oracle: unknown estimator '" + id + "'");
}

bool is_ate(const std::string& id) { return id.rfind("ate-", 0) == 0; }

}  // namespace

double mixed_tolerance(double tol, double lhs, double rhs) {
  return tol * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

double true_policy_value(const TabularEnvironment& env) {
  return true_policy_value(env, env.spec().target);
}

double true_policy_value(const TabularEnvironment& env, std::span<const double> policy) {
  if (policy.size() != env.n_contexts() * env.n_actions())
    throw ConfigurationError("true_policy_value: policy table has the wrong shape");
  double v = 0.0;
  for (std::size_t x = 0; x < env.n_contexts(); ++x)
    for (std::size_t a = 0; a < env.n_actions(); ++a) {
      const double p = env.context_prob(x) * policy[x * env.n_actions() + a];
      if (p != 0.0) v += p * exact_mu(env, x, a);
    }
  return v;
}

std::vector<double> true_policy_ratio(const TabularEnvironment& env) {
  std::vector<double> out(env.n_contexts() * env.n_actions());
  for (std::size_t x = 0; x < env.n_contexts(); ++x)
    for (std::size_t a = 0; a < env.n_actions(); ++a) out[x * env.n_actions() + a] = exact_rho(env, x, a);
  return out;
}

std::vector<double> true_outcome_mean(const TabularEnvironment& env) {
  std::vector<double> out(env.n_contexts() * env.n_actions());
  for (std::size_t x = 0; x < env.n_contexts(); ++x)
    for (std::size_t a = 0; a < env.n_actions(); ++a) out[x * env.n_actions() + a] = exact_mu(env, x, a);
  return out;
}

MarginalRatioForms marginal_ratio_forms(const TabularEnvironment& env) {
  const auto cells = enumerate(env);
  const std::size_t ny = env.n_outcomes();
  std::vector<double> pb(ny, 0.0), pt(ny, 0.0), num(ny, 0.0);
  for (const auto& c : cells) {
    pb[c.y] += c.pb;
    pt[c.y] += c.pt;
    if (c.pb > 0.0) num[c.y] += c.pb * exact_rho(env, c.x, c.a);
  }
  MarginalRatioForms f;
  f.outcomes.assign(env.outcome_values().begin(), env.outcome_values().end());
  f.quotient.assign(ny, 0.0);
  f.conditional.assign(ny, 0.0);
  for (std::size_t y = 0; y < ny; ++y) {
    if (pb[y] == 0.0) {
      if (pt[y] > 0.0) throw SupportViolationError("true_marginal_ratio: p_pi0(y) = 0 < p_pi(y)");
      continue;
    }
    f.quotient[y] = pt[y] / pb[y];
    f.conditional[y] = num[y] / pb[y];
    f.max_abs_difference = std::max(f.max_abs_difference, std::abs(f.quotient[y] - f.conditional[y]));
  }
  return f;
}

std::map<double, double> true_marginal_ratio(const TabularEnvironment& env) {
  const auto f = marginal_ratio_forms(env);
  std::map<double, double> out;
  for (std::size_t y = 0; y < f.outcomes.size(); ++y) {
    if (std::abs(f.quotient[y] - f.conditional[y]) >
        mixed_tolerance(1e-12, f.quotient[y], f.conditional[y]))
      throw std::logic_error("true_marginal_ratio: quotient and conditional forms disagree");
    out[f.outcomes[y]] = f.quotient[y];
  }
  return out;
}

double exact_mean(const TabularEnvironment& env, const std::string& estimator,
                  const OracleModels& models) {
  const Resolved r = resolve(env, models, is_ate(estimator));
  return expect(r.cells, summand(r, estimator, models));
}

double exact_variance(const TabularEnvironment& env, const std::string& estimator,
                      const OracleModels& models) {
  const Resolved r = resolve(env, models, is_ate(estimator));
  return variance(r.cells, summand(r, estimator, models));
}

nlohmann::json GapReport::to_json() const {
  return {{"proposition", proposition}, {"lhs", lhs}, {"rhs", rhs},
          {"satisfied", satisfied},     {"terms", terms}};
}

namespace {

constexpr double kIdentityTol = 1e-10;
constexpr double kOrderTol = 1e-12;

bool at_least(double lhs, double rhs, double tol) { return lhs >= rhs - mixed_tolerance(tol, lhs, rhs); }

// Outcome model mu + noise, noise drawn per (x, a) from the seed.
std::function<double(std::size_t, std::size_t)> random_outcome_model(const TabularEnvironment& env,
                                                                     std::uint64_t seed) {
  Rng rng = make_rng(seed, 41);
  auto table = std::make_shared<std::vector<double>>(true_outcome_mean(env));
  for (auto& v : *table) v += standard_normal(rng);
  const std::size_t na = env.n_actions();
  return [table, na](std::size_t x, std::size_t a) { return (*table)[x * na + a]; };
}

// E[Var[rho Y | Y]] - E[Var[rho mu | X]]
double dr_bound(const Resolved& r) {
  const auto& cells = r.cells;
  const double a = expected_conditional_variance(cells, kByOutcome,
                                                 [&r](const Cell& c) { return r.rho(c.x, c.a) * c.yv; });
  const double b = expected_conditional_variance(
      cells, kByContext, [&r](const Cell& c) { return r.rho(c.x, c.a) * r.mu(c.x, c.a); });
  return a - b;
}

GapReport prop3(const TabularEnvironment& env) {
  const Resolved r = resolve(env, {}, false);
  GapReport g;
  g.proposition = "prop3";
  const double v_ipw = variance(r.cells, summand(r, "ipw", {}));
  const double v_mr = variance(r.cells, summand(r, "mr", {}));
  g.lhs = v_ipw - v_mr;
  // E[Var[rho | Y] Y^2], with w(y) = E[rho | Y = y] as the group mean.
  g.rhs = expect(r.cells, [&](const Cell& c) {
    const double d = r.rho(c.x, c.a) - r.w_cell[index_of(r.cells, c)];
    return d * d * c.yv * c.yv;
  });
  g.terms = {{"var_ipw", v_ipw}, {"var_mr", v_mr}};
  g.satisfied = std::abs(g.lhs - g.rhs) <= mixed_tolerance(kIdentityTol, g.lhs, g.rhs) &&
                g.lhs >= -mixed_tolerance(kIdentityTol, g.lhs, 0.0);
  return g;
}

GapReport prop4(const TabularEnvironment& env, const GapOptions& opt) {
  const Resolved r = resolve(env, {}, false);
  GapReport g;
  g.proposition = "prop4";
  const double v_mr = variance(r.cells, summand(r, "mr", {}));
  const double v_dr = variance(r.cells, summand(r, "dr", {}));
  g.lhs = v_dr - v_mr;
  g.rhs = dr_bound(r);
  OracleModels noisy;
  noisy.mu = random_outcome_model(env, opt.seed);
  const Resolved rn = resolve(env, noisy, false);
  const double v_dr_noisy = variance(rn.cells, summand(rn, "dr", noisy));
  g.terms = {{"var_mr", v_mr}, {"var_dr", v_dr}, {"var_dr_random_mu", v_dr_noisy},
             {"lhs_random_mu", v_dr_noisy - v_mr}};
  g.satisfied = at_least(g.lhs, g.rhs, kIdentityTol) && at_least(v_dr_noisy - v_mr, g.rhs, kIdentityTol);
  return g;
}

GapReport propB1(const TabularEnvironment& env, const GapOptions& opt) {
  const Resolved r = resolve(env, {}, false);
  GapReport g;
  g.proposition = "propB1";
  const double v_mr = variance(r.cells, summand(r, "mr", {}));
  const double base = expect(r.cells, [&](const Cell& c) {
                        const double d = r.rho(c.x, c.a) - r.w_cell[index_of(r.cells, c)];
                        return d * d * c.yv * c.yv;
                      }) -
                      expected_conditional_variance(r.cells, kByContext, [&r](const Cell& c) {
                        return r.rho(c.x, c.a) * r.mu(c.x, c.a);
                      });
  // Var[Y | X, A] per cell.
  const auto cond_y2 = conditional_mean(r.cells, kByContextAction, [](const Cell& c) { return c.yv * c.yv; });
  auto check = [&](const std::string& id, const std::function<double(double)>& shrink, double& lhs,
                   double& rhs) {
    OracleModels m;
    m.tau = opt.tau;
    m.lambda = opt.lambda;
    lhs = variance(r.cells, summand(r, id, m)) - v_mr;
    const double delta = expect(r.cells, [&](const Cell& c) {
      const double rho = r.rho(c.x, c.a);
      const double mu = r.mu(c.x, c.a);
      const double rt = shrink(rho);
      return (rho * rho - rt * rt) * (cond_y2[index_of(r.cells, c)] - mu * mu);
    });
    rhs = base - delta;
  };
  double lhs_s = 0, rhs_s = 0, lhs_d = 0, rhs_d = 0;
  const double tau = opt.tau;
  const double lambda = opt.lambda;
  check("switch-dr", [tau](double w) { return w <= tau ? w : 0.0; }, lhs_s, rhs_s);
  check("dros", [lambda](double w) { return lambda * w / (w * w + lambda); }, lhs_d, rhs_d);
  g.lhs = lhs_s;
  g.rhs = rhs_s;
  g.terms = {{"lhs_switch", lhs_s}, {"rhs_switch", rhs_s}, {"lhs_dros", lhs_d}, {"rhs_dros", rhs_d}};
  g.satisfied = at_least(lhs_s, rhs_s, kIdentityTol) && at_least(lhs_d, rhs_d, kIdentityTol);
  return g;
}

GapReport propE1(const TabularEnvironment& env) {
  const Resolved r = resolve(env, {}, true);
  GapReport g;
  g.proposition = "propE1";
  const double v_ipw = variance(r.cells, summand(r, "ate-ipw", {}));
  const double v_mr = variance(r.cells, summand(r, "ate-mr", {}));
  g.lhs = v_ipw - v_mr;
  g.rhs = expect(r.cells, [&](const Cell& c) {
    const double d = r.rho(c.x, c.a) - r.w_cell[index_of(r.cells, c)];
    return d * d * c.yv * c.yv;
  });
  // Quotient form (p_{pi1}(y) - p_{pi0}(y)) / p_pi0(y) against E[rho_ATE | Y].
  std::vector<double> p1(env.n_outcomes(), 0.0), p0(env.n_outcomes(), 0.0), pb(env.n_outcomes(), 0.0);
  for (std::size_t x = 0; x < env.n_contexts(); ++x)
    for (std::size_t y = 0; y < env.n_outcomes(); ++y) {
      p1[y] += env.context_prob(x) * env.outcome_prob(x, 1, y);
      p0[y] += env.context_prob(x) * env.outcome_prob(x, 0, y);
    }
  for (const auto& c : r.cells) pb[c.y] += c.pb;
  double max_diff = 0.0;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto y = r.cells[i].y;
    if (pb[y] > 0.0) max_diff = std::max(max_diff, std::abs((p1[y] - p0[y]) / pb[y] - r.w_cell[i]));
  }
  g.terms = {{"var_ipw", v_ipw}, {"var_mr", v_mr}, {"w_forms_max_diff", max_diff}};
  g.satisfied = std::abs(g.lhs - g.rhs) <= mixed_tolerance(kIdentityTol, g.lhs, g.rhs) &&
                g.lhs >= -mixed_tolerance(kIdentityTol, g.lhs, 0.0) && max_diff <= 1e-10;
  return g;
}

GapReport propE2(const TabularEnvironment& env, const GapOptions& opt) {
  const Resolved r = resolve(env, {}, true);
  GapReport g;
  g.proposition = "propE2";
  const double v_mr = variance(r.cells, summand(r, "ate-mr", {}));
  const double v_dr = variance(r.cells, summand(r, "ate-dr", {}));
  g.lhs = v_dr - v_mr;
  g.rhs = dr_bound(r);
  OracleModels noisy;
  noisy.mu = random_outcome_model(env, opt.seed);
  const Resolved rn = resolve(env, noisy, true);
  const double v_dr_noisy = variance(rn.cells, summand(rn, "ate-dr", noisy));
  g.terms = {{"var_mr", v_mr}, {"var_dr", v_dr}, {"lhs_random_mu", v_dr_noisy - v_mr}};
  g.satisfied = at_least(g.lhs, g.rhs, kIdentityTol) && at_least(v_dr_noisy - v_mr, g.rhs, kIdentityTol);
  return g;
}

GapReport propD1(const TabularEnvironment& env) {
  OracleModels m;
  if (env.embedding()) {
    m.representation = OracleRep::kContextEmbedding;
  } else if (env.chain()) {
    m.representation = OracleRep::kR1;
  } else {
    throw ConfigurationError("propD1: environment declares no mediating representation");
  }
  const Resolved r = resolve(env, m, false);
  const KeyFn key = rep_key(env, m.representation);
  GapReport g;
  g.proposition = "propD1";
  const double v_ipw = variance(r.cells, summand(r, "ipw", m));
  const double v_g = variance(r.cells, summand(r, "gmips", m));
  g.lhs = v_ipw - v_g;
  const auto y2 = conditional_mean(r.cells, key, [](const Cell& c) { return c.yv * c.yv; });
  const auto ratio = conditional_mean(r.cells, key, [&r](const Cell& c) { return r.rho(c.x, c.a); });
  g.rhs = expect(r.cells, [&](const Cell& c) {
    const std::size_t i = index_of(r.cells, c);
    const double d = r.rho(c.x, c.a) - ratio[i];
    return y2[i] * d * d;
  });
  g.terms = {{"var_ipw", v_ipw}, {"var_gmips", v_g},
             {"mean_gmips", expect(r.cells, summand(r, "gmips", m))}, {"true_value", true_policy_value(env)}};
  g.satisfied = at_least(g.lhs, g.rhs, kIdentityTol) && g.rhs >= -kOrderTol;
  return g;
}

GapReport propD2(const TabularEnvironment& env) {
  if (!env.chain()) throw ConfigurationError("propD2: environment declares no representation chain");
  const Resolved r = resolve(env, {}, false);
  OracleModels m1, m2;
  m1.representation = OracleRep::kR1;
  m2.representation = OracleRep::kR2;
  const double v_ipw = variance(r.cells, summand(r, "ipw", {}));
  const double v_g1 = variance(r.cells, summand(r, "gmips", m1));
  const double v_g2 = variance(r.cells, summand(r, "gmips", m2));
  const double v_mr = variance(r.cells, summand(r, "mr", {}));
  GapReport g;
  g.proposition = "propD2";
  g.lhs = v_ipw;
  g.rhs = v_mr;
  const double s1 = v_ipw - v_g1, s2 = v_g1 - v_g2, s3 = v_g2 - v_mr;
  g.terms = {{"var_ipw", v_ipw}, {"var_gmips_r1", v_g1}, {"var_gmips_r2", v_g2}, {"var_mr", v_mr},
             {"min_slack", std::min({s1, s2, s3})}};
  g.satisfied = at_least(v_ipw, v_g1, kOrderTol) && at_least(v_g1, v_g2, kOrderTol) &&
                at_least(v_g2, v_mr, kOrderTol);
  return g;
}

GapReport thm5(const TabularEnvironment& env) {
  if (!env.embedding()) throw ConfigurationError("thm5: environment declares no action embedding");
  const Resolved r = resolve(env, {}, false);
  const double v_ipw = variance(r.cells, summand(r, "ipw", {}));
  const double v_mips = variance(r.cells, summand(r, "mips", {}));
  const double v_mr = variance(r.cells, summand(r, "mr", {}));
  GapReport g;
  g.proposition = "thm5";
  g.lhs = v_ipw;
  g.rhs = v_mr;
  g.terms = {{"var_ipw", v_ipw}, {"var_mips", v_mips}, {"var_mr", v_mr},
             {"min_slack", std::min(v_ipw - v_mips, v_mips - v_mr)}};
  g.satisfied = at_least(v_mips, v_mr, kOrderTol) && at_least(v_ipw, v_mips, kOrderTol);
  return g;
}

}  // namespace

GapReport proposition_gap(const TabularEnvironment& env, const std::string& which,
                          const GapOptions& options) {
  if (which == "prop3") return prop3(env);
  if (which == "prop4") return prop4(env, options);
  if (which == "propB1") return propB1(env, options);
  if (which == "propE1") return propE1(env);
  if (which == "propE2") return propE2(env, options);
  if (which == "propD1") return propD1(env);
  if (which == "propD2") return propD2(env);
  if (which == "thm5") return thm5(env);
  throw ConfigurationError("proposition_gap: unknown proposition '" + which + "'");
}

WeightIdentityReport approx_weight_identities(
    const TabularEnvironment& env, const std::function<double(std::size_t, std::size_t)>& rho_hat,
    const std::function<double(double)>& w_hat) {
  const auto cells = enumerate(env);
  const auto w_tilde = conditional_mean(cells, kByOutcome, [&](const Cell& c) { return rho_hat(c.x, c.a); });
  const auto eps = [&](const Cell& c) { return w_hat(c.yv) - w_tilde[index_of(cells, c)]; };
  const double truth = true_policy_value(env);

  WeightIdentityReport rep;
  const double bias_ipw = expect(cells, [&](const Cell& c) { return rho_hat(c.x, c.a) * c.yv; }) - truth;
  const double bias_mr = expect(cells, [&](const Cell& c) { return w_hat(c.yv) * c.yv; }) - truth;
  rep.bias_difference = bias_mr - bias_ipw;
  rep.expected_eps_y = expect(cells, [&](const Cell& c) { return eps(c) * c.yv; });

  rep.variance_gap = variance(cells, [&](const Cell& c) { return rho_hat(c.x, c.a) * c.yv; }) -
                     variance(cells, [&](const Cell& c) { return w_hat(c.yv) * c.yv; });
  const double cond = expect(cells, [&](const Cell& c) {
    const double d = rho_hat(c.x, c.a) - w_tilde[index_of(cells, c)];
    return d * d * c.yv * c.yv;
  });
  const CellFn eps_y = [&](const Cell& c) { return eps(c) * c.yv; };
  const CellFn wt_y = [&](const Cell& c) { return w_tilde[index_of(cells, c)] * c.yv; };
  rep.variance_rhs = cond - variance(cells, eps_y) - 2.0 * covariance(cells, wt_y, eps_y);

  rep.w_tilde.assign(env.n_outcomes(), 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) rep.w_tilde[cells[i].y] = w_tilde[i];
  rep.satisfied =
      std::abs(rep.bias_difference - rep.expected_eps_y) <=
          mixed_tolerance(kIdentityTol, rep.bias_difference, rep.expected_eps_y) &&
      std::abs(rep.variance_gap - rep.variance_rhs) <=
          mixed_tolerance(kIdentityTol, rep.variance_gap, rep.variance_rhs);
  return rep;
}

Divergence divergence_from_name(const std::string& name) {
  if (name == "kl") return Divergence::kKl;
  if (name == "total-variation" || name == "tv") return Divergence::kTotalVariation;
  if (name == "chi-square") return Divergence::kChiSquare;
  throw ConfigurationError("divergence: '" + name + "' is not a supported convex f (kl, total-variation, chi-square)");
}

const char* divergence_name(Divergence f) {
  switch (f) {
    case Divergence::kKl: return "kl";
    case Divergence::kTotalVariation: return "total-variation";
    case Divergence::kChiSquare: return "chi-square";
  }
  return "?";
}

DivergenceReport divergence_check(const TabularEnvironment& env, Divergence f) {
  const auto fn = [f](double t) {
    switch (f) {
      case Divergence::kKl: return t > 0.0 ? t * std::log(t) : 0.0;
      case Divergence::kTotalVariation: return 0.5 * std::abs(t - 1.0);
      case Divergence::kChiSquare: return (t - 1.0) * (t - 1.0);
    }
    return 0.0;
  };
  DivergenceReport rep;
  for (std::size_t x = 0; x < env.n_contexts(); ++x)
    for (std::size_t a = 0; a < env.n_actions(); ++a) {
      const double pb = env.context_prob(x) * env.behavior(x, a);
      if (pb > 0.0) rep.joint += pb * fn(exact_rho(env, x, a));
    }
  const auto cells = enumerate(env);
  std::vector<double> pb(env.n_outcomes(), 0.0), pt(env.n_outcomes(), 0.0);
  for (const auto& c : cells) {
    pb[c.y] += c.pb;
    pt[c.y] += c.pt;
  }
  for (std::size_t y = 0; y < env.n_outcomes(); ++y)
    if (pb[y] > 0.0) rep.marginal += pb[y] * fn(pt[y] / pb[y]);
  rep.satisfied = rep.joint >= rep.marginal - mixed_tolerance(1e-12, rep.joint, rep.marginal);
  return rep;
}

KlResult policy_kl(const TabularEnvironment& env, std::span<const double> behavior,
                   std::span<const double> target) {
  const std::size_t na = env.n_actions();
  if (behavior.size() != env.n_contexts() * na || target.size() != behavior.size())
    throw ConfigurationError("policy_kl: policy tables have the wrong shape");
  KlResult r;
  for (std::size_t x = 0; x < env.n_contexts(); ++x)
    for (std::size_t a = 0; a < na; ++a) {
      const double pb = behavior[x * na + a];
      const double pt = target[x * na + a];
      if (pb == 0.0) continue;
      if (pt == 0.0) {
        r.infinite = true;
        r.value = std::numeric_limits<double>::infinity();
        return r;
      }
      r.value += env.context_prob(x) * pb * std::log(pb / pt);
    }
  return r;
}

}  // namespace mrope
