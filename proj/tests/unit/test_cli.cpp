#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "mrope/estimators.hpp"
#include "mrope/synth.hpp"
#include "mrope/tabular.hpp"
#include "mrope/weightfit.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + MR_OPE_BINARY + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mrope_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Cli, HelpListsDefaults) {
  for (const char* sub : {"synth-sweep", "sin-sweep", "classify-bandit", "ate", "estimate"}) {
    const auto r = run(std::string(sub) + " --help");
    EXPECT_EQ(r.status, 0) << sub;
    EXPECT_NE(r.out.find("--tau FLOAT [10]"), std::string::npos) << sub;
    EXPECT_NE(r.out.find("--lambda FLOAT [10]"), std::string::npos) << sub;
    EXPECT_NE(r.out.find("--floor FLOAT [1e-06]"), std::string::npos) << sub;
    EXPECT_NE(r.out.find("--discrete-threshold UINT [64]"), std::string::npos) << sub;
  }
  const auto oracle = run("oracle-check --help");
  EXPECT_NE(oracle.out.find("--seeds UINT [100]"), std::string::npos);
  EXPECT_NE(oracle.out.find("--tau FLOAT [10]"), std::string::npos);
}

TEST(Cli, ConfigurationErrorsExitOne) {
  const auto dir = scratch("errors");
  EXPECT_EQ(run("ate --no-such-flag").status, 1);
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("ate --alpha-star 2 --axis alpha_star --grid 2 --out " + (dir / "a").string()).status, 1);
  std::ofstream(dir / "bad.json") << R"({"tau": 3, "typo": 1})";
  EXPECT_EQ(run("ate --config " + (dir / "bad.json").string()).status, 1);
  std::ofstream(dir / "wrongtype.json") << R"({"tau": "three"})";
  EXPECT_EQ(run("ate --config " + (dir / "wrongtype.json").string()).status, 1);
  EXPECT_EQ(run("estimate --data " + (dir / "missing.jsonl").string()).status, 1);
}

TEST(Cli, SweepIsByteIdenticalOnRerun) {
  const auto dir = scratch("rerun");
  const std::string args = "ate --grid 50 --seeds 2 --m 200 --json --out ";
  ASSERT_EQ(run(args + (dir / "a").string()).status, 0);
  ASSERT_EQ(run(args + (dir / "b").string() + " --jobs 1").status, 0);
  for (const char* f : {"per_seed.csv", "aggregate.csv", "ate_errors.csv", "results.json"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "a" / "per_seed.csv.tmp"));
  const auto echo = nlohmann::json::parse(slurp(dir / "a" / "config.json"));
  EXPECT_EQ(echo.at("flags").at("tau"), 10.0);
  EXPECT_EQ(echo.at("sweep").at("seeds"), nlohmann::json::array({0, 1}));
}

TEST(Cli, ConfigOverridesFlags) {
  const auto dir = scratch("config");
  std::ofstream(dir / "c.json") << R"({"seeds": 1, "grid": [60], "estimators": ["ate-ipw"]})";
  ASSERT_EQ(run("ate --seeds 3 --m 200 --config " + (dir / "c.json").string() + " --out " + (dir / "o").string())
                .status,
            0);
  const auto rows = slurp(dir / "o" / "per_seed.csv");
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 2);
  EXPECT_NE(rows.find("ate-ipw,n,60,0,"), std::string::npos);
}

TEST(Cli, SeedFromEnvironment) {
  const auto dir = scratch("envseed");
  ASSERT_EQ(run("ate --grid 50 --seeds 2 --m 200 --estimators ate-ipw --out " + (dir / "o").string(),
                "MR_OPE_SEED=40")
                .status,
            0);
  const auto rows = slurp(dir / "o" / "per_seed.csv");
  EXPECT_NE(rows.find("ate-ipw,n,50,40,"), std::string::npos);
  EXPECT_NE(rows.find("ate-ipw,n,50,41,"), std::string::npos);
  ASSERT_EQ(run("ate --grid 50 --seeds 1 --seed 3 --m 200 --estimators ate-ipw --out " + (dir / "p").string(),
                "MR_OPE_SEED=40")
                .status,
            0);
  EXPECT_NE(slurp(dir / "p" / "per_seed.csv").find("ate-ipw,n,50,3,"), std::string::npos);
}

TEST(Cli, OracleCheckReport) {
  const auto r = run("oracle-check --seeds 5");
  EXPECT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.at("all_passed").get<bool>());
  EXPECT_EQ(j.at("checks").at(0).at("instances").size(), 5u);
}

TEST(Cli, EstimateFromFiles) {
  using namespace mrope;
  const auto dir = scratch("estimate");
  const auto env = random_tabular_env({}, {}, 9);
  const auto train = sample_logged_dataset(env, 500, 1, 0).with_role(DatasetRole::kTrain);
  const auto data = sample_logged_dataset(env, 80, 1, 1);
  {
    std::ofstream d(dir / "data.jsonl");
    write_jsonl(data, d);
    std::ofstream t(dir / "train.jsonl");
    write_jsonl(train, t);
    std::ofstream(dir / "target.json") << env.target_policy().to_json().dump();
    std::ofstream(dir / "behavior.json") << env.behavior_policy().to_json().dump();
  }
  const auto rho = make_policy_ratio(env.target_policy(), env.behavior_policy());
  const auto w = fit_marginal_ratio(train, rho);
  std::ofstream(dir / "weights.json") << w.to_json().dump();

  const auto r = run("estimate --data " + (dir / "data.jsonl").string() + " --target-policy " +
                     (dir / "target.json").string() + " --estimator mr --weights " + (dir / "weights.json").string());
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("estimator"), "mr");
  EstimatorInputs in;
  in.dataset = &data;
  in.marginal_ratio = &w;
  EXPECT_EQ(j.at("value").get<double>(), mr_estimate(in));

  const auto ipw = run("estimate --data " + (dir / "data.jsonl").string() + " --target-policy " +
                       (dir / "target.json").string() + " --estimator ipw --behavior-policy " +
                       (dir / "behavior.json").string());
  ASSERT_EQ(ipw.status, 0);
  in.policy_ratio = &rho;
  EXPECT_EQ(nlohmann::json::parse(ipw.out).at("value").get<double>(), ipw_estimate(in));

  // Missing models are fitted from --train; without it the call is a configuration error.
  EXPECT_EQ(run("estimate --data " + (dir / "data.jsonl").string() + " --target-policy " +
                (dir / "target.json").string() + " --estimator dr --train " + (dir / "train.jsonl").string())
                .status,
            0);
  EXPECT_EQ(run("estimate --data " + (dir / "data.jsonl").string() + " --target-policy " +
                (dir / "target.json").string() + " --estimator dr")
                .status,
            1);
}

TEST(Cli, ClassifyBanditFromCsv) {
  const auto dir = scratch("classify");
  {
    std::ofstream csv(dir / "d.csv");
    mrope::write_classification_csv(mrope::make_separable_classification(300, 3, 3, 2), csv);
  }
  const auto r = run("classify-bandit --csv " + (dir / "d.csv").string() +
                     " --seeds 2 --estimators ipw,mr --out " + (dir / "o").string());
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "aggregate.csv"));
  std::ofstream(dir / "bad.csv") << "a,b\n1,2\n";
  EXPECT_EQ(run("classify-bandit --csv " + (dir / "bad.csv").string() + " --out " + (dir / "p").string()).status, 1);
}

}  // namespace
