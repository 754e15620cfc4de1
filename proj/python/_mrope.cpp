#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mrope/errors.hpp"
#include "mrope/estimators.hpp"
#include "mrope/harness.hpp"
#include "mrope/oracle.hpp"
#include "mrope/synth.hpp"
#include "mrope/weightfit.hpp"

namespace py = pybind11;
using namespace mrope;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

DatasetRole role_from_name(const std::string& name) {
  if (name == "train") return DatasetRole::kTrain;
  if (name == "eval") return DatasetRole::kEval;
  if (name == "unspecified") return DatasetRole::kUnspecified;
  throw ConfigurationError("unknown dataset role '" + name + "'");
}

std::vector<double> policy_probs(const Policy& p, py::object context) {
  if (py::isinstance<py::int_>(context)) return p.probs(ContextRef(context.cast<std::int64_t>()));
  const auto x = context.cast<std::vector<double>>();
  return p.probs(ContextRef(std::span<const double>(x)));
}

RegressionConfig regression(const std::string& mode, std::size_t threshold, bool clamp) {
  RegressionConfig c;
  c.mode = fit_mode_from_name(mode);
  c.discrete_threshold = threshold;
  c.clamp_at_zero = clamp;
  return c;
}

}  // namespace

PYBIND11_MODULE(_mrope, m) {
  m.doc() = "Marginal ratio off-policy evaluation";

  // IngestionError derives from ConfigurationError and maps to the same Python type.
  py::register_exception<ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);
  py::register_exception<DegenerateWeightsError>(m, "DegenerateWeightsError", PyExc_ArithmeticError);
  py::register_exception<SupportViolationError>(m, "SupportViolationError", PyExc_ValueError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);

  py::class_<Policy>(m, "Policy")
      .def_static("tabular", &Policy::tabular, py::arg("n_actions"), py::arg("table"))
      .def_static("uniform", &Policy::uniform, py::arg("n_actions"))
      .def_static("from_json", [](const py::object& o) { return Policy::from_json(from_python(o)); })
      .def_property_readonly("n_actions", &Policy::n_actions)
      .def("probs", &policy_probs, py::arg("context"),
           "Action probabilities for a categorical id or a feature vector.")
      .def("to_json", [](const Policy& p) { return to_python(p.to_json()); });

  py::class_<LoggedDataset>(m, "LoggedDataset")
      .def_static("categorical", &LoggedDataset::categorical, py::arg("context_ids"), py::arg("actions"),
                  py::arg("outcomes"), py::arg("n_actions"), py::arg("seed") = 0,
                  py::arg("embeddings") = std::vector<int>{}, py::arg("embedding_width") = 0)
      .def_static("dense", &LoggedDataset::dense, py::arg("dim"), py::arg("features"), py::arg("actions"),
                  py::arg("outcomes"), py::arg("n_actions"), py::arg("seed") = 0,
                  py::arg("embeddings") = std::vector<int>{}, py::arg("embedding_width") = 0)
      .def_static("from_jsonl",
                  [](const std::string& text) {
                    std::istringstream in(text);
                    return read_jsonl(in);
                  })
      .def("to_jsonl",
           [](const LoggedDataset& d) {
             std::ostringstream out;
             write_jsonl(d, out);
             return out.str();
           })
      .def("__len__", &LoggedDataset::size)
      .def_property_readonly("n_actions", &LoggedDataset::n_actions)
      .def_property_readonly("actions",
                             [](const LoggedDataset& d) { return std::vector<int>(d.actions().begin(), d.actions().end()); })
      .def_property_readonly("outcomes", [](const LoggedDataset& d) {
        return std::vector<double>(d.outcomes().begin(), d.outcomes().end());
      })
      .def("with_role", [](const LoggedDataset& d, const std::string& role) { return d.with_role(role_from_name(role)); },
           py::arg("role"));

  py::class_<TabularEnvironment>(m, "TabularEnvironment")
      .def_property_readonly("n_contexts", &TabularEnvironment::n_contexts)
      .def_property_readonly("n_actions", &TabularEnvironment::n_actions)
      .def_property_readonly("outcome_values", [](const TabularEnvironment& e) { return e.spec().outcomes; })
      .def_property_readonly("behavior", [](const TabularEnvironment& e) { return e.spec().behavior; })
      .def_property_readonly("target", [](const TabularEnvironment& e) { return e.spec().target; })
      .def("behavior_policy", &TabularEnvironment::behavior_policy)
      .def("target_policy", &TabularEnvironment::target_policy)
      .def("with_target", &TabularEnvironment::with_target, py::arg("target"))
      .def("sample", [](const TabularEnvironment& e, std::size_t n, std::uint64_t seed,
                        std::uint64_t stream) { return sample_logged_dataset(e, n, seed, stream); },
           py::arg("n"), py::arg("seed"), py::arg("stream") = 0);

  py::class_<RatioModel>(m, "RatioModel")
      .def("at", &RatioModel::at, py::arg("y"))
      .def("to_json", [](const RatioModel& r) { return to_python(r.to_json()); })
      .def_static("from_json", [](const py::object& o) { return RatioModel::from_json(from_python(o)); });

  py::class_<OutcomeModel>(m, "OutcomeModel")
      .def("to_json", [](const OutcomeModel& q) { return to_python(q.to_json()); })
      .def_static("from_json", [](const py::object& o) { return OutcomeModel::from_json(from_python(o)); });

  py::class_<PolicyRatio>(m, "PolicyRatio")
      .def_static("from_policies", &PolicyRatio::from_policies, py::arg("target"), py::arg("behavior"),
                  py::arg("floor") = 1e-6);

  m.def(
      "random_tabular_env",
      [](std::uint64_t seed, std::size_t n_contexts, std::size_t n_actions, std::size_t n_outcomes,
         bool assumption2, bool markov_chain, bool y_indep_a) {
        TabularSize size;
        size.n_contexts = n_contexts;
        size.n_actions = n_actions;
        size.n_outcomes = n_outcomes;
        return random_tabular_env(size, {assumption2, markov_chain, y_indep_a}, seed);
      },
      py::arg("seed"), py::arg("n_contexts") = 3, py::arg("n_actions") = 3, py::arg("n_outcomes") = 3,
      py::arg("assumption2") = false, py::arg("markov_chain") = false, py::arg("y_indep_a") = false);

  m.def("true_policy_value", py::overload_cast<const TabularEnvironment&>(&true_policy_value), py::arg("env"));
  m.def("true_marginal_ratio", &true_marginal_ratio, py::arg("env"));
  m.def(
      "exact_mean", [](const TabularEnvironment& e, const std::string& id) { return exact_mean(e, id); },
      py::arg("env"), py::arg("estimator"));
  m.def(
      "exact_variance", [](const TabularEnvironment& e, const std::string& id) { return exact_variance(e, id); },
      py::arg("env"), py::arg("estimator"), "Per-sample variance; divide by n for the estimator's variance.");
  m.def(
      "proposition_gap",
      [](const TabularEnvironment& e, const std::string& which) { return to_python(proposition_gap(e, which).to_json()); },
      py::arg("env"), py::arg("which"));
  m.def(
      "divergence_check",
      [](const TabularEnvironment& e, const std::string& f) {
        const auto r = divergence_check(e, divergence_from_name(f));
        py::dict d;
        d["joint"] = r.joint;
        d["marginal"] = r.marginal;
        d["satisfied"] = r.satisfied;
        return d;
      },
      py::arg("env"), py::arg("divergence"));
  m.def(
      "run_oracle_suite",
      [](std::size_t n_envs, std::uint64_t seed) {
        OracleSuiteConfig c;
        c.n_envs = n_envs;
        c.seed = seed;
        return to_python(run_oracle_suite(c).to_json());
      },
      py::arg("n_envs") = 100, py::arg("seed") = 0);

  m.def(
      "fit_behavior_policy", [](const LoggedDataset& train) { return fit_behavior_policy(train); },
      py::arg("train"));
  m.def(
      "fit_marginal_ratio",
      [](const LoggedDataset& train, const PolicyRatio& rho, const std::string& mode, std::size_t threshold,
         bool clamp) { return fit_marginal_ratio(train, rho, regression(mode, threshold, clamp)); },
      py::arg("train"), py::arg("policy_ratio"), py::arg("mode") = "auto", py::arg("discrete_threshold") = 64,
      py::arg("clamp") = false);
  m.def(
      "fit_outcome_model",
      [](const LoggedDataset& train, double l2) {
        OutcomeFitConfig c;
        c.l2 = l2;
        return fit_outcome_model(train, c);
      },
      py::arg("train"), py::arg("l2") = 1.0);

  m.def("estimator_ids", &estimator_ids);
  m.def(
      "estimate",
      [](const std::string& id, const LoggedDataset& data, const Policy* target, const PolicyRatio* policy_ratio,
         const RatioModel* marginal_ratio, const OutcomeModel* outcome_model, std::optional<double> tau,
         std::optional<double> lambda) {
        EstimatorInputs in;
        in.dataset = &data;
        in.target = target;
        in.policy_ratio = policy_ratio;
        in.marginal_ratio = marginal_ratio;
        in.outcome_model = outcome_model;
        in.tau = tau;
        in.lambda = lambda;
        return estimate(id, in);
      },
      py::arg("estimator"), py::arg("data"), py::arg("target") = nullptr, py::arg("policy_ratio") = nullptr,
      py::arg("marginal_ratio") = nullptr, py::arg("outcome_model") = nullptr, py::arg("tau") = py::none(),
      py::arg("lambda_") = py::none());
}
