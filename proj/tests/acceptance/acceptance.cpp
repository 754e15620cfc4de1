// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mrope/estimators.hpp"
#include "mrope/harness.hpp"
#include "mrope/mlp.hpp"
#include "mrope/oracle.hpp"
#include "mrope/report.hpp"
#include "mrope/rng.hpp"
#include "mrope/synth.hpp"
#include "mrope/weightfit.hpp"

namespace {

using namespace mrope;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<TabularEnvironment> envs(std::size_t count, const StructureFlags& flags = {}) {
  std::vector<TabularEnvironment> out;
  out.reserve(count);
  for (std::uint64_t s = 0; s < count; ++s) out.push_back(random_tabular_env({}, flags, s));
  return out;
}

Outcome lemma1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& env : envs(200)) {
    const auto forms = marginal_ratio_forms(env);
    for (std::size_t i = 0; i < forms.outcomes.size(); ++i)
      worst = std::max(worst, std::abs(forms.quotient[i] - forms.conditional[i]));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && t < 5.0, fmt("max |quotient - conditional| = %.3g", worst) + fmt(", %.2f s", t)};
}

Outcome prop3() {
  const auto t0 = Clock::now();
  double worst = 0.0, min_gap = std::numeric_limits<double>::infinity();
  for (const auto& env : envs(200)) {
    const auto g = proposition_gap(env, "prop3");
    worst = std::max(worst, std::abs(g.lhs - g.rhs));
    min_gap = std::min(min_gap, g.lhs);
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-10 && min_gap >= 0.0 && t < 5.0,
          fmt("max identity error %.3g", worst) + fmt(", min gap %.3g", min_gap) + fmt(", %.2f s", t)};
}

Outcome thm5() {
  const auto t0 = Clock::now();
  StructureFlags f;
  f.assumption2 = true;
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& env : envs(100, f)) {
    const double mr = exact_variance(env, "mr");
    const double ipw = exact_variance(env, "ipw");
    OracleModels m;
    m.representation = OracleRep::kContextEmbedding;
    const double mips = exact_variance(env, "mips", m);
    slack = std::min({slack, mips - mr, ipw - mips});
  }
  const double t = seconds_since(t0);
  return {slack >= -1e-12 && t < 10.0, fmt("min slack %.3g", slack) + fmt(", %.2f s", t)};
}

Outcome propD2() {
  StructureFlags f;
  f.markov_chain = true;
  std::size_t failures = 0;
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& env : envs(100, f)) {
    const auto g = proposition_gap(env, "propD2");
    if (!g.satisfied) ++failures;
    const double ipw = g.terms.at("var_ipw"), r1 = g.terms.at("var_gmips_r1");
    const double r2 = g.terms.at("var_gmips_r2"), mr = g.terms.at("var_mr");
    slack = std::min({slack, ipw - r1, r1 - r2, r2 - mr});
  }
  return {failures == 0 && slack >= -1e-12, fmt("failures %.0f", failures) + fmt(", min slack %.3g", slack)};
}

Outcome props_4_b1_e() {
  GapOptions o;
  o.tau = 10.0;
  o.lambda = 10.0;
  std::map<std::string, double> worst;
  StructureFlags binary_flags;
  TabularSize binary;
  binary.n_actions = 2;
  for (std::uint64_t s = 0; s < 100; ++s) {
    o.seed = s;
    const auto env = random_tabular_env({}, {}, s);
    for (const char* p : {"prop4", "propB1"}) {
      const auto g = proposition_gap(env, p, o);
      worst.try_emplace(p, std::numeric_limits<double>::infinity());
      worst[p] = std::min(worst[p], g.lhs - g.rhs);
    }
    const auto benv = random_tabular_env(binary, binary_flags, s);
    const auto e1 = proposition_gap(benv, "propE1", o);
    worst["propE1"] = std::max(worst["propE1"], std::abs(e1.lhs - e1.rhs));
    const auto e2 = proposition_gap(benv, "propE2", o);
    worst.try_emplace("propE2", std::numeric_limits<double>::infinity());
    worst["propE2"] = std::min(worst["propE2"], e2.lhs - e2.rhs);
  }
  const bool pass = worst["prop4"] >= -1e-10 && worst["propB1"] >= -1e-10 && worst["propE2"] >= -1e-10 &&
                    worst["propE1"] <= 1e-10;
  return {pass, fmt("min(lhs-rhs): prop4 %.3g", worst["prop4"]) + fmt(", propB1 %.3g", worst["propB1"]) +
                    fmt(", propE2 %.3g", worst["propE2"]) + fmt("; propE1 max error %.3g", worst["propE1"])};
}

Outcome prop6() {
  double bias = 0.0, var = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto env = random_tabular_env({}, {}, s);
    auto rng = make_rng(s, 51);
    std::vector<double> rho(env.n_contexts() * env.n_actions());
    for (double& v : rho) v = 0.2 + 2.0 * uniform01(rng);
    std::map<double, double> w;
    for (double y : env.outcome_values()) w[y] = 0.2 + 2.0 * uniform01(rng);
    const std::size_t na = env.n_actions();
    const auto r = approx_weight_identities(
        env, [&](std::size_t x, std::size_t a) { return rho[x * na + a]; }, [&](double y) { return w.at(y); });
    bias = std::max(bias, std::abs(r.bias_difference - r.expected_eps_y));
    var = std::max(var, std::abs(r.variance_gap - r.variance_rhs));
  }
  return {bias <= 1e-10 && var <= 1e-10, fmt("bias identity %.3g", bias) + fmt(", variance identity %.3g", var)};
}

// Outcomes one-to-one with (x, a): Y determines (X, A).
TabularEnvironment revealing_env(std::uint64_t seed) {
  auto spec = random_tabular_env({}, {}, seed).spec();
  const std::size_t cells = spec.context_probs.size() * spec.n_actions;
  spec.outcomes.clear();
  for (std::size_t i = 0; i < cells; ++i) spec.outcomes.push_back(0.5 * static_cast<double>(i) - 1.0);
  spec.outcome_table.assign(cells * cells, 0.0);
  for (std::size_t i = 0; i < cells; ++i) spec.outcome_table[i * cells + i] = 1.0;
  spec.embedding.reset();
  spec.chain.reset();
  return TabularEnvironment(std::move(spec));
}

Outcome prop2() {
  std::size_t violations = 0;
  double eq_revealing = 0.0, eq_same = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto env = random_tabular_env({}, {}, s);
    const auto same = env.with_target(env.spec().behavior);
    const auto reveal = revealing_env(s);
    for (auto f : {Divergence::kKl, Divergence::kTotalVariation, Divergence::kChiSquare}) {
      const auto d = divergence_check(env, f);
      if (d.joint < d.marginal - 1e-12) ++violations;
      const auto r = divergence_check(reveal, f);
      eq_revealing = std::max(eq_revealing, std::abs(r.joint - r.marginal));
      const auto c = divergence_check(same, f);
      eq_same = std::max({eq_same, std::abs(c.joint - c.marginal), std::abs(c.joint)});
    }
  }
  return {violations == 0 && eq_revealing <= 1e-12 && eq_same <= 1e-12,
          fmt("violations %.0f", violations) + fmt(", Y-determines-(X,A) gap %.3g", eq_revealing) +
              fmt(", identical-policy gap %.3g", eq_same)};
}

Outcome monte_carlo() {
  const auto t0 = Clock::now();
  StructureFlags f;
  f.assumption2 = true;
  const auto env = std::make_shared<const TabularEnvironment>(random_tabular_env({}, f, 2024));
  SweepConfig c;
  c.generator = "tabular";
  c.factory = tabular_scenarios(env);
  c.estimators = {"ipw", "mr", "mips", "dr"};
  c.weights = WeightSource::kExact;
  c.grid = {20};
  c.fixed.m = 4;
  c.seeds.clear();
  for (std::uint64_t s = 0; s < 10000; ++s) c.seeds.push_back(s);
  const auto result = run_sweep(c);

  bool pass = true;
  std::string detail;
  for (const auto& id : c.estimators) {
    std::vector<double> v;
    for (const auto& row : result.rows)
      if (row.estimator == id) v.push_back(row.estimate);
    const double count = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= count;
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
      const double d = (x - mean) * (x - mean);
      m2 += d;
      m4 += d * d;
    }
    m2 /= count;
    m4 /= count;
    const double se = std::sqrt((m4 - m2 * m2) / count);
    const double oracle = exact_variance(*env, id) / 20.0;
    const double z = std::abs(m2 - oracle) / se;
    pass = pass && z <= 5.0;
    detail += id + fmt(" z=%.2f ", z);
  }
  const double t = seconds_since(t0);
  return {pass && t < 60.0, detail + fmt("(%.1f s)", t)};
}

Outcome gradients() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto rng = make_rng(s, 77);
    const std::size_t in = 2 + s % 4;
    std::vector<std::size_t> hidden = {3 + s % 5};
    if (s % 2) hidden.push_back(2 + s % 3);
    // Random biases as well as weights: zero biases put whole batches exactly
    // on a ReLU kink, where finite differences are one-sided.
    MlpRegressor net(in, hidden, s);
    std::vector<double> params(net.parameter_count());
    for (double& v : params) v = 0.7 * standard_normal(rng);
    net.set_parameters(params);
    Eigen::MatrixXd x(in, 10);
    Eigen::VectorXd y(10);
    for (int j = 0; j < 10; ++j) {
      for (std::size_t i = 0; i < in; ++i) x(i, j) = standard_normal(rng);
      y(j) = standard_normal(rng);
    }
    const auto g = net.gradient(x, y);
    auto p = net.parameters();
    MlpRegressor probe = net;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p[i];
      p[i] = keep + 1e-5;
      probe.set_parameters(p);
      const double up = probe.loss(x, y);
      p[i] = keep - 1e-5;
      probe.set_parameters(p);
      const double down = probe.loss(x, y);
      p[i] = keep;
      const double fd = (up - down) / 2e-5;
      const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-8});
      worst = std::max(worst, std::abs(fd - g[i]) / scale);
    }
  }
  return {worst < 1e-4, fmt("max relative error %.3g", worst)};
}

SweepConfig saito_sweep(SweepAxis axis, std::vector<double> grid) {
  SaitoConfig s;
  s.d = 50;
  s.n_actions = 20;
  s.alpha_star = 0.8;
  SweepConfig c;
  c.generator = "saito";
  c.generator_config = s.to_json();
  c.factory = saito_scenarios(s, 1000000);
  c.estimators = {"ipw", "dr", "mr"};
  c.axis = axis;
  c.grid = std::move(grid);
  c.fixed.m = 2000;
  c.fixed.n = 800;
  c.fixed.alpha_star = 0.8;
  return c;
}

Outcome saito_n() {
  const auto r = run_sweep(saito_sweep(SweepAxis::kN, {100, 400}));
  bool pass = true;
  std::string detail;
  for (double n : {100.0, 400.0}) {
    const double mr = r.find("mr", n).report.mse, ipw = r.find("ipw", n).report.mse;
    const double dr = r.find("dr", n).report.mse;
    pass = pass && mr < ipw && mr < dr;
    detail += fmt("n=%.0f: ", n) + fmt("mr %.3g", mr) + fmt(" ipw %.3g", ipw) + fmt(" dr %.3g; ", dr);
  }
  return {pass, detail};
}

Outcome saito_alpha() {
  auto c = saito_sweep(SweepAxis::kAlphaStar, {0.2, 1.0});
  c.estimators = {"ipw", "mr"};
  const auto r = run_sweep(c);
  const double mr = r.find("mr", 1.0).report.mse / r.find("mr", 0.2).report.mse;
  const double ipw = r.find("ipw", 1.0).report.mse / r.find("ipw", 0.2).report.mse;
  return {mr < ipw, fmt("MSE ratio alpha 1.0/0.2: mr %.3g", mr) + fmt(", ipw %.3g", ipw)};
}

Outcome classification() {
  const auto path = std::filesystem::temp_directory_path() / "mrope_acceptance_classes.csv";
  {
    std::ofstream out(path);
    write_classification_csv(make_separable_classification(4000, 10, 5, 7), out);
  }
  auto data = std::make_shared<const ClassificationData>(read_classification_csv_file(path.string()));
  std::filesystem::remove(path);
  SweepConfig c;
  c.generator = "classification";
  c.factory = classification_scenarios(data, 0.5);
  c.estimators = {"dm", "ipw", "dr", "switch-dr", "dros", "mr"};
  c.axis = SweepAxis::kAlphaStar;
  c.grid = {0.6};
  const auto r = run_sweep(c);
  const double mr = r.find("mr", 0.6).report.mse;
  bool pass = true;
  std::string detail = fmt("mr %.3g", mr);
  for (const char* id : {"dm", "ipw", "dr", "switch-dr", "dros"}) {
    const double b = r.find(id, 0.6).report.mse;
    pass = pass && mr <= b;
    detail += std::string(", ") + id + fmt(" %.3g", b);
  }
  return {pass, detail};
}

Outcome ate() {
  SweepConfig c;
  c.generator = "ate";
  c.factory = ate_scenarios({});
  c.estimators = {"ate-ipw", "ate-dr", "ate-mr"};
  c.grid = {50};
  const auto r = run_sweep(c);
  auto mean_error = [&](const char* id) {
    const auto& rep = r.find(id, 50).report;
    double total = 0.0;
    for (std::size_t i = 0; i < rep.per_seed_values.size(); ++i)
      total += ate_error(rep.per_seed_values[i], rep.per_seed_truth[i]);
    return total / static_cast<double>(rep.per_seed_values.size());
  };
  const double mr = mean_error("ate-mr"), ipw = mean_error("ate-ipw"), dr = mean_error("ate-dr");
  return {mr <= ipw && mr <= dr, fmt("mean |error|: mr %.4g", mr) + fmt(", ipw %.4g", ipw) + fmt(", dr %.4g", dr)};
}

Outcome coincidences() {
  double worst_exact = 0.0, worst_dros = 0.0;
  bool switch_equal = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto env = random_tabular_env({4, 3, 4, 3, 3, 3}, {}, seed);
    const auto train = sample_logged_dataset(env, 300, seed, 0).with_role(DatasetRole::kTrain);
    const auto data = sample_logged_dataset(env, 60, seed, 1);
    const auto target = env.target_policy();
    const auto rho = PolicyRatio::from_policies(target, fit_behavior_policy(train));
    const auto w = fit_marginal_ratio(train, rho);
    const auto q = fit_outcome_model(train);
    const auto zero_q = OutcomeModel::tabular(3, std::vector<double>(12, 0.0));
    EstimatorInputs in;
    in.dataset = &data;
    in.target = &target;
    in.policy_ratio = &rho;
    in.marginal_ratio = &w;
    in.outcome_model = &q;
    const double dm = dm_estimate(in), dr = dr_estimate(in);
    auto note = [&](double a, double b) { worst_exact = std::max(worst_exact, std::abs(a - b)); };

    in.lambda = 0.0;
    note(dros_estimate(in), dm);
    in.lambda = 1e12;
    worst_dros = std::max(worst_dros, std::abs(dros_estimate(in) - dr));
    in.tau = std::numeric_limits<double>::infinity();
    switch_equal = switch_equal && switch_dr_estimate(in) == dr;
    in.outcome_model = &zero_q;
    note(dr_estimate(in), ipw_estimate(in));

    RegressionConfig discrete;
    discrete.mode = FitMode::kDiscrete;
    const auto xa = Representation::context_action();
    const auto xa_ratio = fit_representation_ratio(train, rho, xa, discrete);
    in.representation = &xa;
    in.representation_ratio = &xa_ratio;
    note(gmips_estimate(in), ipw_estimate(in));
    const auto yrep = Representation::outcome();
    const auto y_ratio = fit_representation_ratio(train, rho, yrep, discrete);
    in.representation = &yrep;
    in.representation_ratio = &y_ratio;
    note(gmips_estimate(in), mr_estimate(in));

    in.outcome_model = &q;
    const double sn[] = {snipw_estimate(in), sndr_estimate(in), snmr_estimate(in)};
    const auto scaled = PolicyRatio::from_function([&](ContextRef ctx, int a) { return 3.7 * rho(ctx, a); });
    const auto w_scaled = RatioModel::from_function(RatioKind::kMarginalRatio, 1,
                                                    [&](std::span<const double> y) { return 3.7 * w(y); });
    in.policy_ratio = &scaled;
    in.marginal_ratio = &w_scaled;
    note(snipw_estimate(in), sn[0]);
    note(sndr_estimate(in), sn[1]);
    note(snmr_estimate(in), sn[2]);
  }
  return {worst_exact <= 1e-12 && worst_dros <= 1e-6 && switch_equal,
          fmt("max exact-coincidence error %.3g", worst_exact) + fmt(", DRos(1e12) vs DR %.3g", worst_dros) +
              (switch_equal ? ", SwitchDR(inf) == DR" : ", SwitchDR(inf) != DR")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"marginal ratio forms agree", lemma1},
      {"IPW minus MR variance identity", prop3},
      {"MR <= MIPS <= IPW under the embedding assumption", thm5},
      {"representation chain variance ordering", propD2},
      {"DR, Switch-DR/DRos and binary-action gaps", props_4_b1_e},
      {"estimated-weight bias and variance identities", prop6},
      {"joint f-divergence bounds marginal", prop2},
      {"Monte Carlo variance matches oracle", monte_carlo},
      {"MLP gradient check", gradients},
      {"Saito: MR beats IPW and DR over n", saito_n},
      {"Saito: MR degrades more slowly in alpha*", saito_alpha},
      {"classification: MR has the lowest MSE", classification},
      {"ATE: MR error at n=50 within IPW and DR", ate},
      {"estimator coincidences", coincidences},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
