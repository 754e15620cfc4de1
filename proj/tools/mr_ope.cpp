#include <algorithm>
#include <any>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrope/errors.hpp"
#include "mrope/estimators.hpp"
#include "mrope/harness.hpp"
#include "mrope/representation.hpp"
#include "mrope/weightfit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mrope;

namespace {

// Flags registered here are echoed as a flat JSON object keyed by flag name;
// a --config file may override any of them but may not introduce new keys.
class OptionTable {
 public:
  explicit OptionTable(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON file whose keys override flags");
  }

  template <class T>
  CLI::Option* add(const std::string& name, T initial, const std::string& help) {
    auto slot = std::make_shared<T>(std::move(initial));
    storage_.emplace_back(slot);
    CLI::Option* opt = app_->add_option("--" + name, *slot, help)->capture_default_str();
    if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<std::string>> ||
                  std::is_same_v<T, std::vector<std::size_t>>)
      opt->delimiter(',');
    readers_.emplace_back(name, [slot] { return json(*slot); });
    return opt;
  }

  CLI::Option* flag(const std::string& name, const std::string& help) {
    auto slot = std::make_shared<bool>(false);
    storage_.emplace_back(slot);
    readers_.emplace_back(name, [slot] { return json(*slot); });
    return app_->add_flag("--" + name, *slot, help);
  }

  // Flag values, then the config file's overrides.
  json resolve() const {
    json out = json::object();
    for (const auto& [name, read] : readers_) out[name] = read();
    if (config_path_.empty()) return out;
    std::ifstream in(config_path_);
    if (!in) throw ConfigurationError("cannot open config file " + config_path_);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigurationError("config file " + config_path_ + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigurationError("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      auto it = out.find(key);
      if (it == out.end()) throw ConfigurationError("config file: unknown key '" + key + "'");
      const bool both_numbers = it->is_number() && value.is_number();
      if (!both_numbers && it->type() != value.type())
        throw ConfigurationError("config file: key '" + key + "' has the wrong type");
      *it = value;
    }
    return out;
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::deque<std::any> storage_;
  std::vector<std::pair<std::string, std::function<json()>>> readers_;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("MR_OPE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigurationError(std::string("MR_OPE_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

std::size_t as_size(const json& v, const char* key) {
  const auto& x = v.at(key);
  if (x.is_number_unsigned()) return x.get<std::size_t>();
  if (x.is_number_integer() && x.get<long long>() >= 0) return x.get<std::size_t>();
  throw ConfigurationError(std::string(key) + " must be a nonnegative integer");
}

// Temp file in the destination directory, then rename.
void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <class Fn>
std::string render(Fn fn) {
  std::ostringstream s;
  fn(s);
  return s.str();
}

// ---- shared sweep flags ----

struct SweepDefaults {
  std::string axis = "n";
  std::vector<double> grid;
  std::size_t n = 800;
  std::size_t m = 2000;
  double alpha_star = 0.8;
  std::size_t d = 50;
  std::size_t n_actions = 20;
  std::vector<std::string> estimators;
  std::string mr_split;  // empty: the generator's default
};

void add_estimation_flags(OptionTable& t) {
  t.add<double>("tau", 10.0, "Switch-DR threshold");
  t.add<double>("lambda", 10.0, "DRos shrinkage");
  t.add<double>("floor", 1e-6, "lower bound on behavior probabilities in policy ratios");
  t.add<std::size_t>("discrete-threshold", 64, "largest distinct-key count fitted by a sample-mean table");
  t.add<std::string>("fit-mode", "auto", "weight regression: auto, discrete or mlp");
  t.add<std::vector<std::size_t>>("hidden", {512, 256, 32}, "MLP hidden layer widths");
  t.add<std::size_t>("epochs", 30, "MLP training epochs");
  t.add<double>("learning-rate", 0.003, "MLP SGD step size");
  t.add<std::size_t>("batch-size", 64, "MLP minibatch size");
  t.flag("clamp-weights", "clamp negative marginal-ratio predictions at zero");
  t.add<double>("outcome-l2", 1.0, "ridge penalty of the outcome model");
}

void add_sweep_flags(OptionTable& t, const SweepDefaults& d) {
  t.add<std::string>("axis", d.axis, "swept knob: n, m, alpha_star, d or n_a");
  t.add<std::vector<double>>("grid", d.grid, "comma-separated axis values");
  t.add<std::size_t>("n", d.n, "evaluation size");
  t.add<std::size_t>("m", d.m, "training size");
  t.add<double>("alpha-star", d.alpha_star, "target policy greediness");
  t.add<std::size_t>("d", d.d, "context dimension");
  t.add<std::size_t>("n-actions", d.n_actions, "number of actions");
  t.add<std::vector<std::string>>("estimators", d.estimators, "comma-separated estimator ids");
  t.add<std::string>("weights", "estimated", "estimated or exact weights");
  t.add<std::string>("mr-split", d.mr_split, "half or reuse; empty keeps the generator's default");
  t.add<std::uint64_t>("seed", default_seed(), "first replicate seed (default from MR_OPE_SEED)");
  t.add<std::size_t>("seeds", 10, "number of replicate seeds");
  t.add<std::size_t>("jobs", 0, "worker threads (0: all cores)");
  t.add<std::string>("out", "results", "output directory");
  t.flag("json", "also write results.json");
  add_estimation_flags(t);
}

EstimatorSettings settings_from(const json& r) {
  EstimatorSettings s;
  s.tau = r.at("tau").get<double>();
  s.lambda = r.at("lambda").get<double>();
  s.floor = r.at("floor").get<double>();
  s.regression.discrete_threshold = as_size(r, "discrete-threshold");
  s.regression.mode = fit_mode_from_name(r.at("fit-mode").get<std::string>());
  s.regression.mlp.hidden = r.at("hidden").get<std::vector<std::size_t>>();
  s.regression.mlp.epochs = as_size(r, "epochs");
  s.regression.mlp.learning_rate = r.at("learning-rate").get<double>();
  s.regression.mlp.batch_size = as_size(r, "batch-size");
  s.regression.clamp_at_zero = r.at("clamp-weights").get<bool>();
  s.outcome.l2 = r.at("outcome-l2").get<double>();
  if (r.contains("mr-split") && !r.at("mr-split").get<std::string>().empty())
    s.mr_split = mr_split_from_name(r.at("mr-split").get<std::string>());
  return s;
}

SweepConfig sweep_from(const json& r) {
  SweepConfig c;
  c.axis = sweep_axis_from_name(r.at("axis").get<std::string>());
  c.grid = r.at("grid").get<std::vector<double>>();
  c.fixed.n = as_size(r, "n");
  c.fixed.m = as_size(r, "m");
  c.fixed.alpha_star = r.at("alpha-star").get<double>();
  c.fixed.d = as_size(r, "d");
  c.fixed.n_actions = as_size(r, "n-actions");
  c.estimators = r.at("estimators").get<std::vector<std::string>>();
  const auto weights = r.at("weights").get<std::string>();
  if (weights == "estimated")
    c.weights = WeightSource::kEstimated;
  else if (weights == "exact")
    c.weights = WeightSource::kExact;
  else
    throw ConfigurationError("weights must be 'estimated' or 'exact', got '" + weights + "'");
  c.settings = settings_from(r);
  const auto first = r.at("seed").get<std::uint64_t>();
  const auto count = as_size(r, "seeds");
  if (count == 0) throw ConfigurationError("seeds must be positive");
  c.seeds.clear();
  for (std::size_t i = 0; i < count; ++i) c.seeds.push_back(first + i);
  c.jobs = as_size(r, "jobs");
  return c;
}

void write_sweep(const json& resolved, const SweepConfig& config, const SweepResult& result) {
  const fs::path out = resolved.at("out").get<std::string>();
  json echo = {{"flags", resolved}, {"sweep", config.to_json()}};
  write_atomic(out / "config.json", echo.dump(2) + "\n");
  write_atomic(out / "per_seed.csv", render([&](std::ostream& s) { write_seed_csv(result, s); }));
  write_atomic(out / "aggregate.csv", render([&](std::ostream& s) { write_aggregate_csv(result, s); }));
  if (result.ate)
    write_atomic(out / "ate_errors.csv", render([&](std::ostream& s) { write_ate_error_csv(result, s); }));
  if (resolved.at("json").get<bool>()) write_atomic(out / "results.json", result.to_json().dump(2) + "\n");
  std::cout << "wrote " << result.rows.size() << " rows to " << out.string() << "\n";
}

// ---- subcommands ----

int run_synth(const json& r) {
  SweepConfig c = sweep_from(r);
  SaitoConfig base;
  base.d = c.fixed.d;
  base.n_actions = c.fixed.n_actions;
  base.alpha_star = c.fixed.alpha_star;
  base.noise_sd = r.at("noise-sd").get<double>();
  base.seed = r.at("env-seed").get<std::uint64_t>();
  c.generator = "saito";
  c.generator_config = base.to_json();
  c.factory = saito_scenarios(base, as_size(r, "mc-samples"));
  write_sweep(r, c, run_sweep(c));
  return 0;
}

int run_sin(const json& r) {
  SweepConfig c = sweep_from(r);
  SinConfig base;
  base.d = c.fixed.d;
  base.n_actions = c.fixed.n_actions;
  base.alpha_star = c.fixed.alpha_star;
  base.noise_sd = r.at("noise-sd").get<double>();
  base.seed = r.at("env-seed").get<std::uint64_t>();
  c.generator = "sin";
  c.generator_config = base.to_json();
  c.factory = sin_scenarios(base, as_size(r, "mc-samples"));
  write_sweep(r, c, run_sweep(c));
  return 0;
}

int run_classify(const json& r) {
  SweepConfig c = sweep_from(r);
  if (c.axis != SweepAxis::kAlphaStar)
    throw ConfigurationError("classify-bandit sweeps alpha_star only; n and m follow from --train-fraction");
  std::shared_ptr<const ClassificationData> data;
  const auto csv = r.at("csv").get<std::string>();
  json source;
  if (!csv.empty()) {
    data = std::make_shared<const ClassificationData>(read_classification_csv_file(csv));
    source = {{"csv", csv}};
  } else {
    const auto rows = as_size(r, "rows");
    const auto dim = as_size(r, "features");
    const auto classes = as_size(r, "classes");
    const auto data_seed = r.at("data-seed").get<std::uint64_t>();
    data = std::make_shared<const ClassificationData>(
        make_separable_classification(rows, dim, classes, data_seed));
    source = {{"generated", {{"rows", rows}, {"features", dim}, {"classes", classes}, {"seed", data_seed}}}};
  }
  SoftmaxConfig classifier;
  classifier.l2 = r.at("classifier-l2").get<double>();
  c.generator = "classification";
  c.generator_config = {{"source", source}, {"train_fraction", r.at("train-fraction")},
                        {"classifier_l2", classifier.l2}};
  c.factory = classification_scenarios(data, r.at("train-fraction").get<double>(), classifier);
  write_sweep(r, c, run_sweep(c));
  return 0;
}

int run_ate(const json& r) {
  SweepConfig c = sweep_from(r);
  AteConfig base;
  base.d = c.fixed.d;
  base.base_rate = r.at("base-rate").get<double>();
  base.spread = r.at("spread").get<double>();
  base.effect = r.at("effect").get<double>();
  base.min_propensity = r.at("min-propensity").get<double>();
  base.seed = r.at("env-seed").get<std::uint64_t>();
  c.generator = "ate";
  c.generator_config = base.to_json();
  c.factory = ate_scenarios(base);
  write_sweep(r, c, run_sweep(c));
  return 0;
}

int run_oracle(const json& r) {
  OracleSuiteConfig c;
  c.n_envs = as_size(r, "seeds");
  c.seed = r.at("seed").get<std::uint64_t>();
  c.size.n_contexts = as_size(r, "contexts");
  c.size.n_actions = as_size(r, "actions");
  c.size.n_outcomes = as_size(r, "outcomes");
  c.size.n_embeddings = as_size(r, "embeddings");
  c.gap.tau = r.at("tau").get<double>();
  c.gap.lambda = r.at("lambda").get<double>();
  const auto result = run_oracle_suite(c);
  json report = result.to_json();
  report["config"] = r;
  const auto out = r.at("out").get<std::string>();
  if (out.empty())
    std::cout << report.dump() << "\n";
  else
    write_atomic(out, report.dump(2) + "\n");
  for (const auto& check : result.checks)
    std::cerr << check.check << ": " << (check.envs - check.failures) << "/" << check.envs << " passed\n";
  return result.all_passed() ? 0 : 2;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

Representation representation_from_name(const std::string& name) {
  if (name == "context-action") return Representation::context_action();
  if (name == "outcome") return Representation::outcome();
  if (name == "context-embedding") return Representation::context_embedding();
  if (name == "embedding") return Representation::embedding();
  throw ConfigurationError("unknown representation '" + name + "'");
}

int run_estimate(const json& r) {
  const auto id = r.at("estimator").get<std::string>();
  const bool ate = id.rfind("ate-", 0) == 0;
  if (!ate && std::ranges::find(estimator_ids(), id) == estimator_ids().end()) throw ConfigurationError("unknown estimator '" + id + "'");
  const auto data = read_jsonl_file(r.at("data").get<std::string>()).with_role(DatasetRole::kEval);
  std::optional<LoggedDataset> train;
  if (const auto path = r.at("train").get<std::string>(); !path.empty())
    train = read_jsonl_file(path).with_role(DatasetRole::kTrain);
  auto need_train = [&](const char* what) -> const LoggedDataset& {
    if (!train) throw ConfigurationError(std::string("estimator '") + id + "' needs " + what +
                                         "; pass a file or --train to fit it");
    return *train;
  };

  const double floor = r.at("floor").get<double>();
  EstimatorSettings settings = settings_from(r);

  std::optional<Policy> target;
  if (const auto path = r.at("target-policy").get<std::string>(); !path.empty())
    target = Policy::from_json(read_json_file(path));
  else if (!ate)
    throw ConfigurationError("--target-policy is required");

  std::optional<Policy> behavior;
  if (const auto path = r.at("behavior-policy").get<std::string>(); !path.empty())
    behavior = Policy::from_json(read_json_file(path));
  auto behavior_policy = [&]() -> const Policy& {
    if (!behavior) behavior = fit_behavior_policy(need_train("a behavior policy"));
    return *behavior;
  };

  std::optional<PolicyRatio> rho;
  auto policy_ratio = [&]() -> const PolicyRatio& {
    if (!rho)
      rho = ate ? PolicyRatio::ate(behavior_policy(), floor)
                : make_policy_ratio(*target, behavior_policy(), floor);
    return *rho;
  };

  std::optional<RatioModel> weights;
  if (const auto path = r.at("weights").get<std::string>(); !path.empty())
    weights = RatioModel::from_json(read_json_file(path));
  std::optional<RatioModel> h_model;
  if (const auto path = r.at("h-model").get<std::string>(); !path.empty())
    h_model = RatioModel::from_json(read_json_file(path));
  std::optional<OutcomeModel> outcome;
  if (const auto path = r.at("outcome-model").get<std::string>(); !path.empty())
    outcome = OutcomeModel::from_json(read_json_file(path));
  std::optional<RatioModel> rep_ratio;
  if (const auto path = r.at("representation-ratio").get<std::string>(); !path.empty())
    rep_ratio = RatioModel::from_json(read_json_file(path));
  std::optional<Representation> representation;
  if (const auto name = r.at("representation").get<std::string>(); !name.empty())
    representation = representation_from_name(name);

  const bool representation_based = id == "gmips" || id == "mips";
  const bool uses_rho = id != "dm" && id != "ate-dm" && id != "mr" && id != "snmr" && id != "mr-alt" &&
                        !representation_based && id != "ate-mr";
  const bool uses_w = id == "mr" || id == "snmr" || id == "ate-mr";
  const bool uses_q = id == "dm" || id == "dr" || id == "switch-dr" || id == "dros" || id == "sndr" ||
                      id == "ate-dm" || id == "ate-dr" || id == "ate-switch-dr" || id == "ate-dros";

  EstimatorInputs in;
  in.dataset = &data;
  in.target = target ? &*target : nullptr;
  in.tau = settings.tau;
  in.lambda = settings.lambda;
  if (uses_rho || (uses_w && !weights) || (id == "mr-alt" && !h_model) ||
      (representation_based && !rep_ratio))
    in.policy_ratio = &policy_ratio();
  if (uses_w) {
    if (!weights)
      weights = ate ? fit_ate_weights(need_train("weights"), behavior_policy(), settings.regression, floor)
                    : fit_marginal_ratio(need_train("weights"), policy_ratio(), settings.regression);
    in.marginal_ratio = &*weights;
  }
  if (id == "mr-alt") {
    if (!h_model) h_model = fit_h_model(need_train("an h-model"), policy_ratio(), settings.regression);
    in.h_model = &*h_model;
  }
  if (uses_q) {
    if (!outcome) outcome = fit_outcome_model(need_train("an outcome model"), settings.outcome);
    in.outcome_model = &*outcome;
  }
  if (representation_based) {
    if (!representation) throw ConfigurationError(id + " needs --representation");
    if (!rep_ratio)
      rep_ratio = fit_representation_ratio(need_train("representation weights"), policy_ratio(),
                                           *representation, settings.regression);
    in.representation = &*representation;
    in.representation_ratio = &*rep_ratio;
  }
  const double value = ate ? ate_estimate(ate_method_from_name(id.substr(4)), in) : estimate(id, in);
  std::cout << json{{"estimator", id}, {"value", value}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginal ratio off-policy evaluation"};
  app.require_subcommand(1);
  std::vector<std::pair<CLI::App*, std::unique_ptr<OptionTable>>> tables;
  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    tables.emplace_back(s, std::make_unique<OptionTable>(s));
    return tables.back().second.get();
  };

  const std::vector<std::string> policy_estimators = {"dm", "ipw", "dr", "switch-dr", "dros", "mips", "mr"};
  auto* synth = sub("synth-sweep", "sweep the embedding-based synthetic generator");
  add_sweep_flags(*synth, {"n", {100, 200, 400, 800, 1600}, 800, 2000, 0.8, 50, 20, policy_estimators, ""});
  synth->add<double>("noise-sd", 0.1, "reward noise standard deviation");
  synth->add<std::uint64_t>("env-seed", 0, "seed of the generator parameters");
  synth->add<std::size_t>("mc-samples", 1000000, "Monte Carlo draws for the true value");

  auto* sin = sub("sin-sweep", "sweep the sin(a|x|) generator");
  add_sweep_flags(*sin, {"n", {100, 200, 400, 800, 1600}, 800, 2000, 0.8, 5, 10,
                         {"dm", "ipw", "dr", "switch-dr", "dros", "mr"}, ""});
  sin->add<double>("noise-sd", 0.1, "reward noise standard deviation");
  sin->add<std::uint64_t>("env-seed", 0, "seed of the generator parameters");
  sin->add<std::size_t>("mc-samples", 1000000, "Monte Carlo draws for the true value");

  auto* classify = sub("classify-bandit", "classification data turned into a logged bandit");
  add_sweep_flags(*classify, {"alpha_star", {0.6}, 800, 2000, 0.6, 50, 20,
                              {"dm", "ipw", "dr", "switch-dr", "dros", "mr", "snipw", "sndr", "snmr"}, ""});
  classify->add<std::string>("csv", "", "CSV with numeric features and a final 'label' column");
  classify->add<std::size_t>("rows", 4000, "rows of generated data when no CSV is given");
  classify->add<std::size_t>("features", 10, "features of generated data");
  classify->add<std::size_t>("classes", 5, "classes of generated data");
  classify->add<std::uint64_t>("data-seed", 7, "seed of generated data");
  classify->add<double>("train-fraction", 0.5, "share of rows used for training");
  classify->add<double>("classifier-l2", 1e-3, "ridge penalty of the classifier defining behavior");

  auto* ate = sub("ate", "average treatment effect on a synthetic binary-action generator");
  add_sweep_flags(*ate, {"n", {50, 200, 800}, 800, 2000, 0.8, 5, 2,
                         {"ate-dm", "ate-ipw", "ate-dr", "ate-switch-dr", "ate-dros", "ate-mr"}, ""});
  ate->add<double>("base-rate", 0.1, "outcome rate floor under control");
  ate->add<double>("spread", 0.2, "covariate-driven outcome rate range");
  ate->add<double>("effect", -0.025, "treatment effect on the outcome rate");
  ate->add<double>("min-propensity", 0.1, "propensity clip");
  ate->add<std::uint64_t>("env-seed", 0, "seed of the generator parameters");

  auto* oracle = sub("oracle-check", "exact identity and inequality checks on random finite environments");
  oracle->add<std::size_t>("seeds", 100, "environments per check");
  oracle->add<std::uint64_t>("seed", default_seed(), "first environment seed (default from MR_OPE_SEED)");
  oracle->add<std::size_t>("contexts", 3, "contexts per environment");
  oracle->add<std::size_t>("actions", 3, "actions per environment");
  oracle->add<std::size_t>("outcomes", 3, "outcome values per environment");
  oracle->add<std::size_t>("embeddings", 3, "embedding or representation values");
  oracle->add<double>("tau", 10.0, "Switch-DR threshold in the Switch-DR/DRos bound check");
  oracle->add<double>("lambda", 10.0, "DRos shrinkage in the Switch-DR/DRos bound check");
  oracle->add<std::string>("out", "", "report path (stdout when empty)");

  auto* est = sub("estimate", "one estimate from a logged JSON-lines dataset");
  est->add<std::string>("data", "", "evaluation dataset (JSON lines)")->required();
  est->add<std::string>("estimator", "mr", "estimator id");
  est->add<std::string>("target-policy", "", "target policy JSON");
  est->add<std::string>("behavior-policy", "", "behavior policy JSON");
  est->add<std::string>("weights", "", "marginal ratio or ATE weight model JSON");
  est->add<std::string>("h-model", "", "h-model JSON for mr-alt");
  est->add<std::string>("outcome-model", "", "outcome model JSON");
  est->add<std::string>("representation", "", "gmips representation: context-action, outcome, "
                                              "context-embedding or embedding");
  est->add<std::string>("representation-ratio", "", "representation ratio model JSON for gmips");
  est->add<std::string>("train", "", "training dataset used to fit any model not supplied");
  add_estimation_flags(*est);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    for (auto& [s, table] : tables) {
      if (!s->parsed()) continue;
      const json resolved = table->resolve();
      const std::string name = s->get_name();
      if (name == "synth-sweep") return run_synth(resolved);
      if (name == "sin-sweep") return run_sin(resolved);
      if (name == "classify-bandit") return run_classify(resolved);
      if (name == "ate") return run_ate(resolved);
      if (name == "oracle-check") return run_oracle(resolved);
      if (name == "estimate") return run_estimate(resolved);
    }
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
