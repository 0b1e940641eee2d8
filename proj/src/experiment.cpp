#include "recsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "recsim/response.hpp"

namespace recsim {

std::shared_ptr<TwoGaussians> default_two_gaussians() {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.0, 0.5, 0.5, 1.0;
  return std::make_shared<TwoGaussians>(make_point({1.0, 1.0}),
                                        make_point({-1.0, -1.0}), sigma);
}

std::shared_ptr<MoonsModel> default_moons() {
  return std::make_shared<MoonsModel>(0.2, 1000);
}

std::shared_ptr<CirclesModel> default_circles() {
  return std::make_shared<CirclesModel>(0.2, 0.6, 1000);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument("config: expected an object at " + where);
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end())
      throw std::invalid_argument("config: unknown key '" + key + "' in " +
                                  where);
  }
}

Point parse_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("config: " + where + " must be a number array");
  Point p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    p[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return p;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("config: " + where + " must be a matrix");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols)
      throw std::invalid_argument("config: ragged matrix in " + where);
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
  }
  return m;
}

DatasetSpec parse_dataset(const json& j) {
  DatasetSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "two-gaussians") {
    check_keys(j, {"kind", "mu", "nu", "sigma", "class_prior"}, "dataset");
    spec.kind = DatasetSpec::Kind::two_gaussians;
    if (!j.contains("mu")) {
      spec.model = default_two_gaussians();
    } else {
      spec.model = std::make_shared<TwoGaussians>(
          parse_point(j.at("mu"), "dataset.mu"),
          parse_point(j.at("nu"), "dataset.nu"),
          parse_matrix(j.at("sigma"), "dataset.sigma"),
          j.value("class_prior", 0.5));
    }
  } else if (kind == "moons") {
    check_keys(j, {"kind", "noise_sigma", "arc_resolution"}, "dataset");
    spec.kind = DatasetSpec::Kind::moons;
    spec.model = std::make_shared<MoonsModel>(j.value("noise_sigma", 0.2),
                                              j.value("arc_resolution", 1000));
  } else if (kind == "circles") {
    check_keys(j, {"kind", "noise_sigma", "lambda", "arc_resolution"},
               "dataset");
    spec.kind = DatasetSpec::Kind::circles;
    spec.model = std::make_shared<CirclesModel>(j.value("noise_sigma", 0.2),
                                                j.value("lambda", 0.6),
                                                j.value("arc_resolution", 1000));
  } else if (kind == "discrete-grid") {
    check_keys(j, {"kind", "points", "probs"}, "dataset");
    spec.kind = DatasetSpec::Kind::discrete_grid;
    std::vector<Point> points;
    for (const auto& p : j.at("points"))
      points.push_back(parse_point(p, "dataset.points"));
    std::vector<std::array<double, 2>> probs;
    for (const auto& p : j.at("probs"))
      probs.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    spec.model = std::make_shared<DiscreteGridModel>(std::move(points),
                                                     std::move(probs));
  } else if (kind == "csv") {
    check_keys(j, {"kind", "path", "label_column", "positive_value", "plan"},
               "dataset");
    spec.kind = DatasetSpec::Kind::csv;
    spec.csv_path = j.at("path").get<std::string>();
    spec.label_column = j.at("label_column").get<std::string>();
    spec.positive_value = j.at("positive_value").get<std::string>();
    const json& plan = j.at("plan");
    check_keys(plan,
               {"n_cond_train", "n_cond_calib", "n_train", "n_test", "seed"},
               "dataset.plan");
    spec.plan.n_cond_train = plan.at("n_cond_train").get<std::size_t>();
    spec.plan.n_cond_calib = plan.at("n_cond_calib").get<std::size_t>();
    spec.plan.n_train = plan.at("n_train").get<std::size_t>();
    spec.plan.n_test = plan.at("n_test").get<std::size_t>();
    spec.plan.seed = plan.value("seed", 0);
  } else {
    throw std::invalid_argument("config: unknown dataset kind '" + kind + "'");
  }
  return spec;
}

ClassifierSpec parse_classifier(const json& j) {
  ClassifierSpec spec;
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "bayes") {
      spec.bayes = true;
      spec.display_name = "bayes";
      return spec;
    }
    spec.train.family = TrainConfig::family_from_name(name);
    spec.display_name = name;
    return spec;
  }
  check_keys(j,
             {"family", "seed", "max_iters", "grad_tol", "l2",
              "class_balanced", "cov_regularization", "max_depth", "hidden",
              "learning_rate", "epochs", "batch", "momentum", "name"},
             "classifiers[]");
  const std::string family = j.at("family").get<std::string>();
  if (family == "bayes") {
    spec.bayes = true;
    spec.display_name = j.value("name", "bayes");
    return spec;
  }
  spec.train.family = TrainConfig::family_from_name(family);
  spec.train.seed = j.value("seed", 0);
  spec.train.lr_max_iters = j.value("max_iters", spec.train.lr_max_iters);
  spec.train.lr_grad_tol = j.value("grad_tol", spec.train.lr_grad_tol);
  spec.train.lr_l2 = j.value("l2", spec.train.lr_l2);
  spec.train.class_balanced =
      j.value("class_balanced", spec.train.class_balanced);
  spec.train.cov_regularization =
      j.value("cov_regularization", spec.train.cov_regularization);
  spec.train.tree_max_depth = j.value("max_depth", spec.train.tree_max_depth);
  if (j.contains("hidden"))
    spec.train.mlp_hidden = j.at("hidden").get<std::vector<int>>();
  spec.train.mlp_learning_rate =
      j.value("learning_rate", spec.train.mlp_learning_rate);
  spec.train.mlp_epochs = j.value("epochs", spec.train.mlp_epochs);
  spec.train.mlp_batch = j.value("batch", spec.train.mlp_batch);
  spec.train.mlp_momentum = j.value("momentum", spec.train.mlp_momentum);
  spec.display_name = j.value("name", family);
  if (family == "mlp" && !j.contains("name")) {
    std::ostringstream os;
    os << "mlp(";
    for (std::size_t i = 0; i < spec.train.mlp_hidden.size(); ++i)
      os << (i ? "," : "") << spec.train.mlp_hidden[i];
    os << ")";
    spec.display_name = os.str();
  }
  return spec;
}

CostFunction parse_cost(const json& j) {
  if (j.is_null()) return CostFunction::euclidean();
  check_keys(j, {"kind", "weights"}, "recourse.cost");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "euclidean") return CostFunction::euclidean();
  if (kind == "weighted-euclidean")
    return CostFunction::weighted_euclidean(
        parse_point(j.at("weights"), "recourse.cost.weights"));
  throw std::invalid_argument("config: unknown cost kind '" + kind + "'");
}

SearcherSpec parse_searcher(const json& j) {
  SearcherSpec spec;
  check_keys(j,
             {"kind", "resolution", "bbox_inflation", "initial_radius",
              "growth", "samples_per_annulus", "max_annuli",
              "refinement_rounds", "lambda_init", "inner_steps", "bisections"},
             "recourse.searcher");
  spec.kind = SearcherSpec::kind_from_name(j.at("kind").get<std::string>());
  spec.grid_resolution = j.value("resolution", spec.grid_resolution);
  spec.bbox_inflation = j.value("bbox_inflation", spec.bbox_inflation);
  spec.gs_initial_radius = j.value("initial_radius", spec.gs_initial_radius);
  spec.gs_growth = j.value("growth", spec.gs_growth);
  spec.gs_samples_per_annulus =
      j.value("samples_per_annulus", spec.gs_samples_per_annulus);
  spec.gs_max_annuli = j.value("max_annuli", spec.gs_max_annuli);
  spec.gs_refinement_rounds =
      j.value("refinement_rounds", spec.gs_refinement_rounds);
  spec.pg_lambda_init = j.value("lambda_init", spec.pg_lambda_init);
  spec.pg_inner_steps = j.value("inner_steps", spec.pg_inner_steps);
  spec.pg_bisections = j.value("bisections", spec.pg_bisections);
  return spec;
}

AcceptanceFunction parse_acceptance(const json& j) {
  check_keys(j, {"kind", "d", "sigma2", "p"}, "recourse.acceptance");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "always") return AcceptanceFunction::always();
  if (kind == "distance-threshold")
    return AcceptanceFunction::distance_threshold(j.at("d").get<double>());
  if (kind == "gaussian-kernel")
    return AcceptanceFunction::gaussian_kernel(j.at("sigma2").get<double>());
  if (kind == "constant-p")
    return AcceptanceFunction::constant_p(j.at("p").get<double>());
  throw std::invalid_argument("config: unknown acceptance kind '" + kind + "'");
}

ResponseModel parse_response(const json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "compliant") return ResponseModel::compliant();
    if (name == "defiant") return ResponseModel::defiant();
    throw std::invalid_argument("config: unknown response '" + name + "'");
  }
  check_keys(j, {"alpha"}, "response");
  const double alpha = j.at("alpha").get<double>();
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("config: response alpha outside [0,1]");
  return ResponseModel::mixture(alpha);
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j,
             {"seed", "replicates", "n_train", "n_test", "loss", "dataset",
              "classifiers", "recourse", "response", "sweep", "verify",
              "output_dir"},
             "config");
  ExperimentConfig config;
  config.seed = j.value("seed", 0);
  config.replicates = j.value("replicates", 1);
  if (config.replicates < 1)
    throw std::invalid_argument("config: replicates must be >= 1");
  config.n_train = j.value("n_train", config.n_train);
  config.n_test = j.value("n_test", config.n_test);
  if (j.contains("loss")) {
    const std::string loss = j.at("loss").get<std::string>();
    if (loss == "zero-one")
      config.loss = Loss::Kind::zero_one;
    else if (loss == "cross-entropy")
      config.loss = Loss::Kind::cross_entropy;
    else
      throw std::invalid_argument("config: unknown loss '" + loss + "'");
  }
  config.dataset = parse_dataset(j.at("dataset"));
  if (j.contains("classifiers")) {
    for (const auto& c : j.at("classifiers"))
      config.classifiers.push_back(parse_classifier(c));
  }
  if (j.contains("recourse")) {
    const json& r = j.at("recourse");
    check_keys(r, {"cost", "searcher", "acceptance"}, "recourse");
    if (r.contains("cost")) config.policy.cost = parse_cost(r.at("cost"));
    if (r.contains("searcher"))
      config.policy.searcher = parse_searcher(r.at("searcher"));
    if (r.contains("acceptance"))
      config.policy.acceptance = parse_acceptance(r.at("acceptance"));
  }
  if (j.contains("response")) config.response = parse_response(j.at("response"));
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"parameter", "grid"}, "sweep");
    SweepSpec sweep_spec;
    const std::string param = s.at("parameter").get<std::string>();
    if (param == "p")
      sweep_spec.parameter = SweepSpec::Parameter::p;
    else if (param == "sigma2")
      sweep_spec.parameter = SweepSpec::Parameter::sigma2;
    else
      throw std::invalid_argument("config: sweep parameter must be p or sigma2");
    sweep_spec.grid = s.at("grid").get<std::vector<double>>();
    if (sweep_spec.grid.empty())
      throw std::invalid_argument("config: empty sweep grid");
    config.sweep = sweep_spec;
  }
  if (j.contains("verify")) {
    const json& v = j.at("verify");
    check_keys(v, {"suite"}, "verify");
    VerifySpec verify_spec;
    verify_spec.suite = v.value("suite", "all");
    config.verify = verify_spec;
  }
  config.output_dir = j.value("output_dir", config.output_dir);
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  in >> j;
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Run

ReplicateResult run_replicate(const GenerativeModel& model,
                              const ClassifierSpec& classifier_spec,
                              const RecoursePolicy& policy,
                              const ResponseModel& response, const Loss& loss,
                              std::size_t n_train, std::size_t n_test,
                              RngStream rng, Exec exec) {
  Dataset train_data;
  ClassifierPtr classifier;
  if (classifier_spec.bayes) {
    // Non-owning view; the caller keeps the model alive.
    classifier = bayes_classifier(
        std::shared_ptr<const PosteriorModel>(&model, [](const void*) {}));
  } else {
    train_data = sample(model, n_train, rng.fork(0), exec);
    classifier = fit(classifier_spec.train, train_data);
  }
  const Dataset test_data = sample(model, n_test, rng.fork(1), exec);
  const Dataset& domain = train_data.empty() ? test_data : train_data;

  PreparedPolicy prepared(policy, classifier, domain, exec);
  const auto samples =
      apply_recourse(prepared, model, response, test_data, rng.fork(2), exec);

  ReplicateResult result;
  result.report.r_p = estimate_risk(*classifier, loss, test_data, exec);
  result.report.r_q = estimate_risk_post(*classifier, loss, samples, exec);
  result.report.decomposition = decompose(test_data, samples, *classifier);
  result.classifier_metadata = classifier->metadata();
  return result;
}

namespace {

Loss make_loss(Loss::Kind kind) {
  return kind == Loss::Kind::zero_one ? Loss::zero_one()
                                      : Loss::cross_entropy();
}

void aggregate(ClassifierResults& results) {
  std::vector<double> rp, rq;
  for (const auto& rep : results.replicates) {
    rp.push_back(rep.r_p.value);
    rq.push_back(rep.r_q.value);
  }
  auto mean_std = [](const std::vector<double>& v) {
    double mean = compensated_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd =
        v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return std::pair<double, double>(mean, sd);
  };
  std::tie(results.r_p_mean, results.r_p_std) = mean_std(rp);
  std::tie(results.r_q_mean, results.r_q_std) = mean_std(rq);
  // Table convention: bold the lower risk; both bold if intervals overlap.
  const double p_lo = results.r_p_mean - results.r_p_std;
  const double p_hi = results.r_p_mean + results.r_p_std;
  const double q_lo = results.r_q_mean - results.r_q_std;
  const double q_hi = results.r_q_mean + results.r_q_std;
  if (p_lo <= q_hi && q_lo <= p_hi)
    results.bold = "both";
  else
    results.bold = results.r_p_mean < results.r_q_mean ? "P" : "Q";
}

}  // namespace

namespace {

// A candidate-set searcher over a discrete model defaults to the model's
// own grid when the config gives no explicit candidate list.
RecoursePolicy resolve_policy(const ExperimentConfig& config) {
  RecoursePolicy policy = config.policy;
  if (config.dataset.kind == DatasetSpec::Kind::discrete_grid &&
      policy.searcher.kind == SearcherSpec::Kind::candidate_set &&
      policy.searcher.candidates.empty()) {
    const auto* grid =
        dynamic_cast<const DiscreteGridModel*>(config.dataset.model.get());
    if (grid) policy.searcher.candidates = grid->points();
  }
  return policy;
}

}  // namespace

ResultsArchive run(const ExperimentConfig& config, Exec exec) {
  if (config.classifiers.empty())
    throw std::invalid_argument("run: no classifiers configured");

  ResultsArchive archive;
  const std::size_t n_classifiers = config.classifiers.size();
  const std::size_t n_reps = static_cast<std::size_t>(config.replicates);

  if (config.dataset.kind == DatasetSpec::Kind::csv) {
    if (config.loss != Loss::Kind::zero_one)
      throw std::invalid_argument("run: csv experiments use the zero-one loss");
    const TabularDataset dataset = load_csv(
        config.dataset.csv_path, config.dataset.label_column,
        config.dataset.positive_value);
    archive.extra["dataset"] = dataset.provenance_json();
    archive.extra["high_variance_flag"] = dataset.imbalanced();
    // Per-replicate split manifests for bit-exact reruns.
    archive.extra["split_manifests"] = nlohmann::json::array();
    for (std::size_t rep = 0; rep < n_reps; ++rep) {
      SplitPlan plan = config.dataset.plan;
      plan.seed = config.seed + 0x5eed * (rep + 1);
      archive.extra["split_manifests"].push_back(
          split_manifest(dataset, plan, make_splits(dataset.size(), plan)));
    }
    for (std::size_t ci = 0; ci < n_classifiers; ++ci) {
      const auto& spec = config.classifiers[ci];
      if (spec.bayes)
        throw std::invalid_argument(
            "run: the Bayes classifier needs an exact posterior; csv data "
            "has none");
      ClassifierResults results;
      results.name = spec.display_name;
      results.replicates.resize(n_reps);
      std::vector<nlohmann::json> oracle_info(n_reps), meta(n_reps);
      parallel_for(exec, n_reps, [&](std::size_t rep) {
        SplitPlan plan = config.dataset.plan;
        plan.seed = config.seed + 0x5eed * (rep + 1);
        TrainConfig train = spec.train;
        train.seed = config.seed + 7919 * (rep + 1);
        const ReplayReport report = replay_experiment(
            dataset, plan, train, config.policy, config.response,
            RngStream(config.seed, rep), Exec::serial);
        results.replicates[rep] = report.risks;
        oracle_info[rep] = report.oracle_provenance;
        meta[rep] = report.classifier_metadata;
      });
      results.classifier_metadata = meta.front();
      aggregate(results);
      archive.extra["oracle"][results.name] = oracle_info.front();
      archive.classifiers.push_back(std::move(results));
    }
    return archive;
  }

  const auto& model = *config.dataset.model;
  const Loss loss = make_loss(config.loss);
  const RecoursePolicy policy = resolve_policy(config);
  for (std::size_t ci = 0; ci < n_classifiers; ++ci) {
    ClassifierResults results;
    results.name = config.classifiers[ci].display_name;
    results.replicates.resize(n_reps);
    std::vector<nlohmann::json> metadata(n_reps);
    parallel_for(exec, n_reps, [&](std::size_t rep) {
      ClassifierSpec spec = config.classifiers[ci];
      spec.train.seed = config.seed + 0x9e37 * (rep + 1);
      ReplicateResult result =
          run_replicate(model, spec, policy, config.response, loss,
                        config.n_train, config.n_test,
                        RngStream(config.seed, rep), Exec::serial);
      results.replicates[rep] = std::move(result.report);
      metadata[rep] = std::move(result.classifier_metadata);
    });
    results.classifier_metadata = metadata.front();
    aggregate(results);
    archive.classifiers.push_back(std::move(results));
  }
  return archive;
}

nlohmann::json ResultsArchive::to_json() const {
  nlohmann::json j;
  j["config"] = config_echo;
  j["results"] = nlohmann::json::array();
  for (const auto& c : classifiers) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& rep : c.replicates) reps.push_back(rep.to_json());
    j["results"].push_back({{"classifier", c.name},
                            {"metadata", c.classifier_metadata},
                            {"r_p_mean", c.r_p_mean},
                            {"r_p_std", c.r_p_std},
                            {"r_q_mean", c.r_q_mean},
                            {"r_q_std", c.r_q_std},
                            {"bold", c.bold},
                            {"replicates", reps}});
  }
  if (!extra.is_null()) j["extra"] = extra;
  return j;
}

std::string ResultsArchive::to_csv() const {
  std::ostringstream os;
  os << "classifier,r_p_mean,r_p_std,r_q_mean,r_q_std,replicates,bold\n";
  for (const auto& c : classifiers) {
    os << c.name << ',' << c.r_p_mean << ',' << c.r_p_std << ',' << c.r_q_mean
       << ',' << c.r_q_std << ',' << c.replicates.size() << ',' << c.bold
       << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Sweep

nlohmann::json SweepResult::to_json() const {
  nlohmann::json series = nlohmann::json::array();
  for (std::size_t i = 0; i < grid.size(); ++i)
    series.push_back({{"value", grid[i]},
                      {"diff_mean", diff_mean[i]},
                      {"diff_std", diff_std[i]}});
  nlohmann::json j{{"series", series}};
  if (linear_fit) {
    j["fit"] = {{"intercept", linear_fit->intercept},
                {"slope", linear_fit->slope},
                {"r_squared", linear_fit->r_squared}};
  }
  return j;
}

std::string SweepResult::to_csv(const std::string& parameter_name) const {
  std::ostringstream os;
  os << parameter_name << ",risk_diff_mean,risk_diff_std\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    os << grid[i] << ',' << diff_mean[i] << ',' << diff_std[i] << '\n';
  return os.str();
}

SweepResult sweep(const ExperimentConfig& config, Exec exec) {
  if (!config.sweep)
    throw std::invalid_argument("sweep: config has no sweep section");
  if (config.dataset.kind == DatasetSpec::Kind::csv)
    throw std::invalid_argument("sweep: synthetic datasets only");
  if (config.classifiers.size() != 1)
    throw std::invalid_argument("sweep: configure exactly one classifier");
  const auto& spec = *config.sweep;
  const bool is_p = spec.parameter == SweepSpec::Parameter::p;
  if (is_p &&
      config.policy.acceptance.kind() != AcceptanceFunction::Kind::constant_p)
    throw std::invalid_argument(
        "sweep: p sweeps require the constant-p acceptance kind");
  if (!is_p && config.policy.acceptance.kind() !=
                   AcceptanceFunction::Kind::gaussian_kernel)
    throw std::invalid_argument(
        "sweep: sigma2 sweeps require the gaussian-kernel acceptance kind");

  const auto& model = *config.dataset.model;
  const Loss loss = make_loss(config.loss);
  const std::size_t n_reps = static_cast<std::size_t>(config.replicates);
  const std::size_t n_grid = spec.grid.size();

  std::vector<std::vector<double>> diffs(n_grid,
                                         std::vector<double>(n_reps, 0.0));
  parallel_for(exec, n_reps, [&](std::size_t rep) {
    RngStream rng(config.seed, rep);
    ClassifierSpec cspec = config.classifiers.front();
    cspec.train.seed = config.seed + 0x9e37 * (rep + 1);
    Dataset train_data;
    ClassifierPtr classifier;
    if (cspec.bayes) {
      classifier = bayes_classifier(
          std::shared_ptr<const PosteriorModel>(&model, [](const void*) {}));
    } else {
      train_data = sample(model, config.n_train, rng.fork(0), Exec::serial);
      classifier = fit(cspec.train, train_data);
    }
    const Dataset test_data =
        sample(model, config.n_test, rng.fork(1), Exec::serial);
    const Dataset& domain = train_data.empty() ? test_data : train_data;
    PreparedPolicy prepared(resolve_policy(config), classifier, domain,
                            Exec::serial);
    const RiskEstimate r_p =
        estimate_risk(*classifier, loss, test_data, Exec::serial);
    for (std::size_t gi = 0; gi < n_grid; ++gi) {
      const auto policy = prepared.with_acceptance(
          is_p ? AcceptanceFunction::constant_p(spec.grid[gi])
               : AcceptanceFunction::gaussian_kernel(spec.grid[gi]));
      const auto samples = apply_recourse(policy, model, config.response,
                                          test_data, rng.fork(2 + gi),
                                          Exec::serial);
      const RiskEstimate r_q =
          estimate_risk_post(*classifier, loss, samples, Exec::serial);
      diffs[gi][rep] = r_q.value - r_p.value;
    }
  });

  SweepResult result;
  result.grid = spec.grid;
  for (std::size_t gi = 0; gi < n_grid; ++gi) {
    double mean = compensated_mean(diffs[gi]);
    double ss = 0.0;
    for (double d : diffs[gi]) ss += (d - mean) * (d - mean);
    result.diff_mean.push_back(mean);
    result.diff_std.push_back(
        n_reps > 1 ? std::sqrt(ss / static_cast<double>(n_reps - 1)) : 0.0);
  }
  if (is_p && n_grid >= 2) result.linear_fit = fit_line(result.grid, result.diff_mean);
  return result;
}

// ---------------------------------------------------------------------------
// Theorem suites

bool SuiteResult::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed()) return false;
  return true;
}

nlohmann::json SuiteResult::to_json() const {
  nlohmann::json j{{"suite", suite}, {"checks", nlohmann::json::array()}};
  for (std::size_t i = 0; i < checks.size(); ++i) {
    nlohmann::json c = checks[i].to_json();
    c["label"] = labels[i];
    j["checks"].push_back(c);
  }
  j["all_passed"] = all_passed();
  return j;
}

namespace {

struct NamedModel {
  std::string name;
  std::shared_ptr<const GenerativeModel> model;
};

std::vector<NamedModel> synthetic_roster() {
  return {{"gaussians", default_two_gaussians()},
          {"moons", default_moons()},
          {"circles", default_circles()}};
}

RecoursePolicy policy_for(const Classifier& classifier) {
  RecoursePolicy policy;
  policy.searcher.kind = classifier.linear_boundary()
                             ? SearcherSpec::Kind::hyperplane_projection
                             : SearcherSpec::Kind::grid_brute_force;
  return policy;
}

}  // namespace

SuiteResult run_theorem31_suite(std::size_t n, std::uint64_t seed, Exec exec) {
  SuiteResult result;
  result.suite = "T3.1";
  const std::vector<std::pair<std::string, AcceptanceFunction>> acceptances = {
      {"always", AcceptanceFunction::always()},
      {"threshold-0.5", AcceptanceFunction::distance_threshold(0.5)},
      {"kernel-0.5", AcceptanceFunction::gaussian_kernel(0.5)}};

  std::uint64_t lane = 0;
  for (const auto& [model_name, model] : synthetic_roster()) {
    const ClassifierPtr bayes = bayes_classifier(model);
    RngStream rng(seed, 31'000 + lane++);
    const Dataset data = sample(*model, n, rng.fork(0), exec);
    PreparedPolicy prepared(policy_for(*bayes), bayes, data, exec);
    std::uint64_t draw = 1;
    for (const auto& [acc_name, acceptance] : acceptances) {
      const auto policy = prepared.with_acceptance(acceptance);
      for (ResponseCase response_case :
           {ResponseCase::defiant, ResponseCase::compliant}) {
        const ResponseModel response =
            response_case == ResponseCase::defiant ? ResponseModel::defiant()
                                                   : ResponseModel::compliant();
        const auto samples = apply_recourse(policy, *model, response, data,
                                            rng.fork(draw++), exec);
        result.checks.push_back(
            check_theorem31_identity(response_case, data, samples, *bayes));
        result.labels.push_back(model_name + " " + acc_name + " " +
                                case_name(response_case));
      }
    }
  }
  return result;
}

SuiteResult run_theorem41_suite(std::size_t n_train, std::size_t n_test,
                                std::uint64_t seed, Exec exec) {
  SuiteResult result;
  result.suite = "T4.1";
  std::vector<ClassifierSpec> roster;
  for (const char* family :
       {"logistic-regression", "gaussian-nb", "qda", "decision-tree", "mlp"}) {
    ClassifierSpec spec;
    spec.train.family = TrainConfig::family_from_name(family);
    spec.display_name = family;
    roster.push_back(spec);
  }

  std::uint64_t lane = 0;
  for (const auto& [model_name, model] : synthetic_roster()) {
    for (const auto& spec : roster) {
      RngStream rng(seed, 41'000 + lane++);
      TrainConfig train = spec.train;
      train.seed = seed + lane;
      const Dataset train_data = sample(*model, n_train, rng.fork(0), exec);
      const Dataset test_data = sample(*model, n_test, rng.fork(1), exec);
      const ClassifierPtr classifier = fit(train, train_data);

      RecoursePolicy policy;
      policy.searcher.kind = SearcherSpec::Kind::grid_brute_force;
      policy.acceptance = AcceptanceFunction::gaussian_kernel(0.5);
      PreparedPolicy prepared(policy, classifier, train_data, exec);

      const auto defiant_samples =
          apply_recourse(prepared, *model, ResponseModel::defiant(), test_data,
                         rng.fork(2), exec);
      result.checks.push_back(
          check_theorem41_defiant(test_data, defiant_samples, *classifier));
      result.labels.push_back(model_name + " " + spec.display_name +
                              " defiant");

      if (!classifier->continuous()) continue;
      const auto compliant_samples =
          apply_recourse(prepared, *model, ResponseModel::compliant(),
                         test_data, rng.fork(3), exec);
      double eps_sum = 0.0;
      std::size_t eps_n = 0;
      for (const auto& s : compliant_samples)
        if (s.b) {
          eps_sum += std::abs(0.5 - model->posterior(s.x));
          ++eps_n;
        }
      const double epsilon =
          eps_n > 0 ? std::min(eps_sum / static_cast<double>(eps_n), 0.5) : 0.0;
      result.checks.push_back(check_theorem41_compliant(
          test_data, compliant_samples, *classifier, epsilon));
      result.labels.push_back(model_name + " " + spec.display_name +
                              " compliant eps=" + std::to_string(epsilon));
    }
  }
  return result;
}

SuiteResult run_theorem42_suite(int instances, std::size_t n,
                                std::uint64_t seed, Exec exec) {
  SuiteResult result;
  result.suite = "T4.2";
  const auto roster = synthetic_roster();
  for (int k = 0; k < instances; ++k) {
    RngStream rng(seed, 42'000 + static_cast<std::uint64_t>(k));
    const auto& [model_name, model] = roster[static_cast<std::size_t>(k) % 3];

    // Random logistic classifier: direction, temperature, offset. Negating
    // the direction covers anti-calibrated scorers.
    const double angle = rng.next_double() * 2.0 * std::numbers::pi;
    const double temperature = std::exp(std::log(0.5) +
                                        rng.next_double() *
                                            (std::log(8.0) - std::log(0.5)));
    const double offset = -1.0 + 2.0 * rng.next_double();
    LinearModel lin;
    lin.theta = temperature *
                make_point({std::cos(angle), std::sin(angle)});
    lin.theta0 = temperature * offset;
    const ClassifierPtr classifier = std::make_shared<LogisticRegression>(
        lin, nlohmann::json{{"randomized", true}});

    AcceptanceFunction acceptance = AcceptanceFunction::always();
    switch (k % 4) {
      case 0: break;
      case 1:
        acceptance = AcceptanceFunction::distance_threshold(
            0.3 + 1.2 * rng.next_double());
        break;
      case 2:
        acceptance =
            AcceptanceFunction::gaussian_kernel(0.2 + 1.8 * rng.next_double());
        break;
      case 3:
        acceptance =
            AcceptanceFunction::constant_p(0.3 + 0.7 * rng.next_double());
        break;
    }
    const ResponseModel response =
        (k % 2 == 0) ? ResponseModel::compliant() : ResponseModel::defiant();

    const Dataset data = sample(*model, n, rng.fork(0), exec);
    RecoursePolicy policy;
    policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;
    policy.acceptance = acceptance;
    PreparedPolicy prepared(policy, classifier, data, exec);
    const auto samples =
        apply_recourse(prepared, *model, response, data, rng.fork(1), exec);

    // Skip degenerate draws with an empty conditioning event.
    bool any = false;
    for (std::size_t i = 0; i < samples.size() && !any; ++i)
      any = samples[i].b && classifier->predict(data[i].first) == Label::negative;
    if (!any) {
      continue;
    }
    result.checks.push_back(
        theorem42_check(*classifier, Loss::cross_entropy(), data, samples));
    std::ostringstream label;
    label << "instance " << k << " " << model_name << " temp=" << temperature;
    result.labels.push_back(label.str());
  }
  return result;
}

SuiteResult run_strategic_suite(std::size_t n, std::uint64_t seed, Exec exec) {
  SuiteResult result;
  result.suite = "strategic";
  const auto model = default_two_gaussians();
  const Loss loss = Loss::zero_one();
  for (double width : {0.5, 1.0}) {
    const InvariantFamily family(FamilyKind::linear_threshold_shift, width);
    result.checks.push_back(verify_defiant_equality(
        family, *model, loss, n, RngStream(seed, 51), {}, exec));
    result.labels.push_back("T5.1 D=" + std::to_string(width));

    result.checks.push_back(verify_compliant_bound(
        family, *model, loss, n, RngStream(seed, 53), {}, exec));
    result.labels.push_back("T5.3 D=" + std::to_string(width));

    const DeltaReport delta =
        estimate_delta(family, *model, loss, n, RngStream(seed, 55), {}, exec);
    TheoremCheck positive;
    positive.theorem_id = "Delta>0";
    positive.lhs = delta.delta;
    positive.rhs_lower = 0.0;
    positive.rhs_upper = 0.0;
    positive.diff = delta.delta;
    positive.diff_stderr = delta.stderr_;
    positive.tolerance = 3.0;
    positive.condition_holds = delta.delta > 3.0 * delta.stderr_;
    positive.verdict = positive.condition_holds
                           ? TheoremCheck::Verdict::holds
                           : TheoremCheck::Verdict::fails;
    positive.details = delta.to_json();
    result.checks.push_back(positive);
    result.labels.push_back("Delta>0 D=" + std::to_string(width));
  }
  return result;
}

SuiteResult run_verify(const ExperimentConfig& config, Exec exec) {
  const std::string suite = config.verify ? config.verify->suite : "all";
  SuiteResult combined;
  combined.suite = suite;
  auto append = [&](SuiteResult&& r) {
    for (std::size_t i = 0; i < r.checks.size(); ++i) {
      combined.checks.push_back(std::move(r.checks[i]));
      combined.labels.push_back(r.suite + ": " + r.labels[i]);
    }
  };
  if (suite == "T3.1" || suite == "all")
    append(run_theorem31_suite(config.n_test, config.seed, exec));
  if (suite == "T4.1" || suite == "all")
    append(run_theorem41_suite(config.n_train, config.n_test, config.seed,
                               exec));
  if (suite == "T4.2" || suite == "all")
    append(run_theorem42_suite(60, config.n_test, config.seed, exec));
  if (suite == "T5.1" || suite == "T5.3" || suite == "strategic" ||
      suite == "all")
    append(run_strategic_suite(config.n_test, config.seed, exec));
  if (combined.checks.empty())
    throw std::invalid_argument("verify: unknown suite '" + suite + "'");
  return combined;
}

// ---------------------------------------------------------------------------
// Output helpers

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<double>& x,
                          const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("svg chart: empty or misaligned series");
  const double width = 640, height = 420;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  double x_lo = x.front(), x_hi = x.front(), y_lo = y.front(), y_hi = y.front();
  for (double v : x) {
    x_lo = std::min(x_lo, v);
    x_hi = std::max(x_hi, v);
  }
  for (double v : y) {
    y_lo = std::min(y_lo, v);
    y_hi = std::max(y_hi, v);
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;
  auto px = [&](double v) {
    return ml + (v - x_lo) / (x_hi - x_lo) * (width - ml - mr);
  };
  auto py = [&](double v) {
    return height - mb - (v - y_lo) / (y_hi - y_lo) * (height - mt - mb);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        "font-size=\"16\">" << title << "</text>\n";
  // Axes
  os << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
     << width - mr << "\" y2=\"" << height - mb
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
     << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x_lo + t * (x_hi - x_lo) / 4;
    const double yv = y_lo + t * (y_hi - y_lo) / 4;
    os << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << xv << "</text>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << yv << "</text>\n";
  }
  os << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (mt + height - mb) / 2 << ")\">" << y_label << "</text>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" "
        "points=\"";
  for (std::size_t i = 0; i < x.size(); ++i)
    os << px(x[i]) << ',' << py(y[i]) << ' ';
  os << "\"/>\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    os << "<circle cx=\"" << px(x[i]) << "\" cy=\"" << py(y[i])
       << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  os << "</svg>\n";
  write_text_file(path, os.str());
}

// ---------------------------------------------------------------------------
// CLI entry points

namespace {

void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

nlohmann::json config_echo(const ExperimentConfig& config) {
  // Determinism: the archive embeds the effective seed, sizes, and policy.
  return {{"seed", config.seed},
          {"replicates", config.replicates},
          {"n_train", config.n_train},
          {"n_test", config.n_test},
          {"response_alpha", config.response.alpha},
          {"searcher", SearcherSpec::kind_name(config.policy.searcher.kind)}};
}

}  // namespace

int command_run(const ExperimentConfig& config, const std::string& out_dir,
                Exec exec) {
  ensure_dir(out_dir);
  ResultsArchive archive = run(config, exec);
  archive.config_echo = config_echo(config);
  if (archive.extra.contains("split_manifests")) {
    write_text_file(out_dir + "/manifest.json",
                    archive.extra.at("split_manifests").dump(2) + "\n");
    archive.extra.erase("split_manifests");
  }
  write_text_file(out_dir + "/results.csv", archive.to_csv());
  write_text_file(out_dir + "/archive.json", archive.to_json().dump(2) + "\n");
  std::cout << archive.to_csv();
  return 0;
}

int command_sweep(const ExperimentConfig& config, const std::string& out_dir,
                  Exec exec) {
  ensure_dir(out_dir);
  const SweepResult result = sweep(config, exec);
  const bool is_p =
      config.sweep && config.sweep->parameter == SweepSpec::Parameter::p;
  const std::string param = is_p ? "p" : "sigma2";
  write_text_file(out_dir + "/sweep.csv", result.to_csv(param));
  nlohmann::json archive{{"config", config_echo(config)},
                         {"parameter", param},
                         {"sweep", result.to_json()}};
  write_text_file(out_dir + "/archive.json", archive.dump(2) + "\n");
  write_svg_line_chart(out_dir + "/sweep.svg", "risk difference vs " + param,
                       param, "R_Q - R_P", result.grid, result.diff_mean);
  std::cout << result.to_csv(param);
  return 0;
}

int command_verify(const ExperimentConfig& config, const std::string& out_dir,
                   Exec exec) {
  ensure_dir(out_dir);
  const SuiteResult result = run_verify(config, exec);
  int failures = 0;
  for (std::size_t i = 0; i < result.checks.size(); ++i) {
    const auto& check = result.checks[i];
    const bool ok = check.passed();
    failures += ok ? 0 : 1;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << check.theorem_id << " "
              << result.labels[i] << "  lhs=" << check.lhs
              << " rhs=[" << check.rhs_lower << "," << check.rhs_upper << "]"
              << " diff=" << check.diff << " (3sigma="
              << 3.0 * check.diff_stderr << ") verdict="
              << verdict_name(check.verdict) << "\n";
  }
  nlohmann::json archive{{"config", config_echo(config)},
                         {"verify", result.to_json()}};
  write_text_file(out_dir + "/verify.json", archive.dump(2) + "\n");
  std::cout << (failures == 0 ? "all checks passed\n"
                              : std::to_string(failures) + " checks failed\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace recsim
