#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "recsim/experiment.hpp"

using namespace recsim;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "seed": 7,
    "replicates": 2,
    "n_train": 400,
    "n_test": 400,
    "dataset": {"kind": "two-gaussians"},
    "classifiers": ["bayes"],
    "recourse": {
      "searcher": {"kind": "hyperplane-projection"},
      "acceptance": {"kind": "always"}
    },
    "response": "compliant"
  })");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("recsim_exp_" + std::to_string(std::rand()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("unknown keys are rejected everywhere") {
  json bad = base_config();
  bad["typo_key"] = 1;
  CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);

  json bad_nested = base_config();
  bad_nested["dataset"]["surprise"] = true;
  CHECK_THROWS_AS(parse_config(bad_nested), std::invalid_argument);

  json bad_recourse = base_config();
  bad_recourse["recourse"]["acceptance"]["sigma"] = 0.5;
  CHECK_THROWS_AS(parse_config(bad_recourse), std::invalid_argument);
}

TEST_CASE("config parsing: responses, losses, classifiers") {
  json cfg = base_config();
  cfg["response"] = {{"alpha", 0.25}};
  cfg["loss"] = "cross-entropy";
  cfg["classifiers"] = json::array(
      {"bayes", json{{"family", "mlp"}, {"hidden", json::array({4, 4})}}});
  const ExperimentConfig parsed = parse_config(cfg);
  CHECK(parsed.response.alpha == 0.25);
  CHECK(parsed.loss == Loss::Kind::cross_entropy);
  REQUIRE(parsed.classifiers.size() == 2);
  CHECK(parsed.classifiers[0].bayes);
  CHECK(parsed.classifiers[1].display_name == "mlp(4,4)");
  CHECK(parsed.classifiers[1].train.mlp_hidden == std::vector<int>{4, 4});

  json bad_response = base_config();
  bad_response["response"] = "noncompliant";
  CHECK_THROWS_AS(parse_config(bad_response), std::invalid_argument);
  json bad_alpha = base_config();
  bad_alpha["response"] = {{"alpha", 1.5}};
  CHECK_THROWS_AS(parse_config(bad_alpha), std::invalid_argument);
}

TEST_CASE("run is deterministic: byte-identical archives for a fixed seed") {
  const ExperimentConfig config = parse_config(base_config());
  TempDir dir1, dir2;
  CHECK(command_run(config, dir1.path.string()) == 0);
  CHECK(command_run(config, dir2.path.string()) == 0);
  CHECK(slurp((dir1.path / "archive.json").string()) ==
        slurp((dir2.path / "archive.json").string()));
  CHECK(slurp((dir1.path / "results.csv").string()) ==
        slurp((dir2.path / "results.csv").string()));
}

TEST_CASE("aggregate means are recomputable from per-replicate rows") {
  const ExperimentConfig config = parse_config(base_config());
  const ResultsArchive archive = run(config);
  REQUIRE(archive.classifiers.size() == 1);
  const auto& c = archive.classifiers.front();
  double mean = 0.0;
  for (const auto& rep : c.replicates) mean += rep.r_q.value;
  mean /= static_cast<double>(c.replicates.size());
  CHECK(std::abs(mean - c.r_q_mean) < 1e-12);
}

TEST_CASE("bold convention follows interval overlap") {
  json cfg = base_config();
  cfg["replicates"] = 3;
  // r = 0: R_Q == R_P exactly, intervals coincide, both bold.
  cfg["recourse"]["acceptance"] = {{"kind", "constant-p"}, {"p", 0.0}};
  const ResultsArchive same = run(parse_config(cfg));
  CHECK(same.classifiers.front().bold == "both");

  cfg["recourse"]["acceptance"] = {{"kind", "always"}};
  cfg["n_test"] = 20000;
  const ResultsArchive split = run(parse_config(cfg));
  CHECK(split.classifiers.front().bold == "P");
}

TEST_CASE("run covers the mixture response between the two extremes") {
  json cfg = base_config();
  cfg["n_test"] = 50000;
  cfg["replicates"] = 1;
  auto risk_at = [&](const json& response) {
    json c = cfg;
    c["response"] = response;
    const ResultsArchive archive = run(parse_config(c));
    return archive.classifiers.front().r_q_mean;
  };
  const double compliant = risk_at("compliant");
  const double defiant = risk_at("defiant");
  const double mixed = risk_at(json{{"alpha", 0.5}});
  CHECK(compliant < mixed);
  CHECK(mixed < defiant);
  CHECK(std::abs(mixed - 0.5 * (compliant + defiant)) < 0.01);
}

TEST_CASE("sweep: p endpoints, acceptance matching, csv and svg outputs") {
  json cfg = base_config();
  cfg["replicates"] = 2;
  cfg["n_test"] = 20000;
  cfg["recourse"]["acceptance"] = {{"kind", "constant-p"}, {"p", 1.0}};
  cfg["sweep"] = {{"parameter", "p"}, {"grid", json::array({0.0, 0.5, 1.0})}};
  const ExperimentConfig config = parse_config(cfg);
  const SweepResult result = sweep(config);
  CHECK(result.diff_mean.front() == 0.0);  // p = 0 moves nobody
  CHECK(std::abs(result.diff_mean.back() - 0.18794673025251912) < 0.02);
  REQUIRE(result.linear_fit.has_value());
  CHECK(result.linear_fit->r_squared > 0.99);

  TempDir dir;
  CHECK(command_sweep(config, dir.path.string()) == 0);
  CHECK(slurp((dir.path / "sweep.svg").string()).substr(0, 4) == "<svg");
  CHECK(slurp((dir.path / "sweep.csv").string()).substr(0, 2) == "p,");

  // Vanishing kernel bandwidth: acceptance goes to zero with it.
  json kernel_cfg = base_config();
  kernel_cfg["replicates"] = 1;
  kernel_cfg["n_test"] = 20000;
  kernel_cfg["recourse"]["acceptance"] = {{"kind", "gaussian-kernel"},
                                          {"sigma2", 1.0}};
  kernel_cfg["sweep"] = {{"parameter", "sigma2"},
                         {"grid", json::array({1e-6, 1.0})}};
  const SweepResult kernel = sweep(parse_config(kernel_cfg));
  CHECK(std::abs(kernel.diff_mean.front()) < 1e-3);
  CHECK(kernel.diff_mean.back() > 0.05);

  // Acceptance kind must match the swept parameter.
  json mismatched = cfg;
  mismatched["recourse"]["acceptance"] = {{"kind", "always"}};
  CHECK_THROWS_AS(sweep(parse_config(mismatched)), std::invalid_argument);
}

TEST_CASE("verify dispatches suites and writes one line per check") {
  json cfg = base_config();
  cfg["n_test"] = 2000;
  cfg["verify"] = {{"suite", "T5.1"}};
  const ExperimentConfig config = parse_config(cfg);
  const SuiteResult suite = run_verify(config);
  CHECK(suite.checks.size() == 6);  // two widths x {5.1, 5.3, delta}
  CHECK(suite.checks.size() == suite.labels.size());

  json unknown = cfg;
  unknown["verify"] = {{"suite", "T9.9"}};
  CHECK_THROWS_AS(run_verify(parse_config(unknown)), std::invalid_argument);

  TempDir dir;
  CHECK(command_verify(config, dir.path.string()) == 0);
  const json archived = json::parse(slurp((dir.path / "verify.json").string()));
  CHECK(archived.at("verify").at("checks").size() == 6);
  CHECK(archived.at("verify").at("all_passed").get<bool>());
}

TEST_CASE("cross-entropy loss drives the full pipeline") {
  json cfg = base_config();
  cfg["loss"] = "cross-entropy";
  cfg["n_test"] = 20000;
  cfg["replicates"] = 1;
  const ResultsArchive archive = run(parse_config(cfg));
  const auto& c = archive.classifiers.front();
  // The Bayes scorer satisfies the surrogate-loss condition, so the risk
  // increases under recourse for this loss as well.
  CHECK(c.r_q_mean > c.r_p_mean);
  CHECK(c.r_p_mean > 0.0);
}

TEST_CASE("csv dataset config drives the replay pipeline") {
  // Small synthetic csv so the whole config path is exercised end to end.
  const auto model = default_two_gaussians();
  const Dataset rows = sample(*model, 1500, RngStream(66, 0));
  TempDir dir;
  const std::string csv_path = (dir.path / "data.csv").string();
  {
    std::ofstream out(csv_path);
    out << "x1,x2,y\n";
    out.precision(17);
    for (const auto& [x, y] : rows)
      out << x[0] << ',' << x[1] << ',' << (y == Label::positive ? 1 : -1)
          << '\n';
  }
  json cfg = base_config();
  cfg["replicates"] = 1;
  cfg["classifiers"] = json::array({"logistic-regression"});
  cfg["dataset"] = {{"kind", "csv"},
                    {"path", csv_path},
                    {"label_column", "y"},
                    {"positive_value", "1"},
                    {"plan",
                     {{"n_cond_train", 600},
                      {"n_cond_calib", 300},
                      {"n_train", 400},
                      {"n_test", 200}}}};
  const ResultsArchive archive = run(parse_config(cfg));
  REQUIRE(archive.classifiers.size() == 1);
  CHECK(archive.classifiers.front().r_q_mean >
        archive.classifiers.front().r_p_mean);
  CHECK(archive.extra.contains("oracle"));
  CHECK(archive.classifiers.front().classifier_metadata.contains("family"));

  // A csv run leaves a split manifest next to the archive.
  TempDir out;
  CHECK(command_run(parse_config(cfg), out.path.string()) == 0);
  const json manifest =
      json::parse(slurp((out.path / "manifest.json").string()));
  REQUIRE(manifest.is_array());
  CHECK(manifest[0].at("indices").at("test").size() == 200);

  json with_bayes = cfg;
  with_bayes["classifiers"] = json::array({"bayes"});
  CHECK_THROWS_AS(run(parse_config(with_bayes)), std::invalid_argument);
}

TEST_CASE("discrete-grid dataset runs end to end from a config") {
  json cfg = base_config();
  cfg["replicates"] = 1;
  cfg["n_train"] = 2000;
  cfg["n_test"] = 4000;
  // A 1-d three-point world: one negative point, a posterior-1/2 boundary
  // point, one positive point.
  cfg["dataset"] = {{"kind", "discrete-grid"},
                    {"points", json::array({json::array({0.0}),
                                            json::array({1.0}),
                                            json::array({2.0})})},
                    {"probs", json::array({json::array({0.36, 0.04}),
                                           json::array({0.10, 0.10}),
                                           json::array({0.04, 0.36})})}};
  cfg["classifiers"] = json::array({"bayes"});
  cfg["recourse"]["searcher"] = {{"kind", "candidate-set"}};
  const ResultsArchive archive = run(parse_config(cfg));
  const auto& c = archive.classifiers.front();
  // Exact values: R_P = 0.18, compliant R_Q = 0.5*0.4 + 0.10 + 0.04 = 0.34.
  CHECK(std::abs(c.r_p_mean - 0.18) < 0.02);
  CHECK(std::abs(c.r_q_mean - 0.34) < 0.03);
}

TEST_CASE("results csv has the documented header") {
  const ExperimentConfig config = parse_config(base_config());
  const ResultsArchive archive = run(config);
  const std::string csv = archive.to_csv();
  CHECK(csv.rfind("classifier,r_p_mean,r_p_std,r_q_mean,r_q_std,replicates,"
                  "bold\n", 0) == 0);
}
