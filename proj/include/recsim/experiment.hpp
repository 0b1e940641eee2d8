#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "recsim/classifiers.hpp"
#include "recsim/gen_models.hpp"
#include "recsim/realdata.hpp"
#include "recsim/recourse.hpp"
#include "recsim/risk.hpp"
#include "recsim/strategic.hpp"

namespace recsim {

// Canonical synthetic setups used across the verification suites.
std::shared_ptr<TwoGaussians> default_two_gaussians();
std::shared_ptr<MoonsModel> default_moons();
std::shared_ptr<CirclesModel> default_circles();

// --------------------------------------------------------------------------
// Configuration (single JSON document; unknown keys are rejected)

struct ClassifierSpec {
  bool bayes = false;
  TrainConfig train;
  std::string display_name;
};

struct DatasetSpec {
  enum class Kind { two_gaussians, moons, circles, discrete_grid, csv };
  Kind kind = Kind::two_gaussians;
  std::shared_ptr<const GenerativeModel> model;  // synthetic kinds
  std::string csv_path, label_column, positive_value;
  SplitPlan plan;  // csv kind
};

struct SweepSpec {
  enum class Parameter { p, sigma2 };
  Parameter parameter = Parameter::p;
  std::vector<double> grid;
};

struct VerifySpec {
  std::string suite = "all";  // T3.1 | T4.1 | T4.2 | T5.1 | T5.3 | all
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int replicates = 1;
  std::size_t n_train = 5000;
  std::size_t n_test = 1000;
  Loss::Kind loss = Loss::Kind::zero_one;
  DatasetSpec dataset;
  std::vector<ClassifierSpec> classifiers;
  RecoursePolicy policy;
  ResponseModel response = ResponseModel::compliant();
  std::optional<SweepSpec> sweep;
  std::optional<VerifySpec> verify;
  std::string output_dir = "out";
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

// --------------------------------------------------------------------------
// Results

struct ClassifierResults {
  std::string name;
  std::vector<RiskReport> replicates;
  nlohmann::json classifier_metadata;  // from the first replicate's fit
  double r_p_mean = 0.0, r_p_std = 0.0;
  double r_q_mean = 0.0, r_q_std = 0.0;
  std::string bold;  // "P", "Q", or "both" (overlapping intervals)
};

struct ResultsArchive {
  nlohmann::json config_echo;
  std::vector<ClassifierResults> classifiers;
  nlohmann::json extra;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct ReplicateResult {
  RiskReport report;
  nlohmann::json classifier_metadata;
};

// Full pipeline for one synthetic replicate: train (unless Bayes), estimate
// R_P on fresh test data, apply recourse, estimate R_Q.
ReplicateResult run_replicate(const GenerativeModel& model,
                              const ClassifierSpec& classifier_spec,
                              const RecoursePolicy& policy,
                              const ResponseModel& response, const Loss& loss,
                              std::size_t n_train, std::size_t n_test,
                              RngStream rng, Exec exec = default_exec());

ResultsArchive run(const ExperimentConfig& config, Exec exec = default_exec());

struct SweepResult {
  std::vector<double> grid;
  std::vector<double> diff_mean;  // R_Q - R_P
  std::vector<double> diff_std;
  std::optional<LineFit> linear_fit;  // p sweeps only
  nlohmann::json to_json() const;
  std::string to_csv(const std::string& parameter_name) const;
};

SweepResult sweep(const ExperimentConfig& config, Exec exec = default_exec());

// --------------------------------------------------------------------------
// Theorem verification suites (also exercised by the acceptance tests)

struct SuiteResult {
  std::string suite;
  std::vector<TheoremCheck> checks;
  std::vector<std::string> labels;  // aligned with checks

  bool all_passed() const;
  nlohmann::json to_json() const;
};

// Exact risk identities for Bayes classifiers on the three synthetic models
// under the three acceptance kinds, both response cases.
SuiteResult run_theorem31_suite(std::size_t n, std::uint64_t seed,
                                Exec exec = default_exec());

// Defiant exact identity for each trained family on each synthetic model
// and the measured-epsilon interval bounds (compliant, continuous families).
SuiteResult run_theorem41_suite(std::size_t n_train, std::size_t n_test,
                                std::uint64_t seed, Exec exec = default_exec());

// Surrogate-loss iff on randomized (classifier, policy, model) instances.
SuiteResult run_theorem42_suite(int instances, std::size_t n,
                                std::uint64_t seed, Exec exec = default_exec());

// Strategic results: defiant equality (5.1) and compliant bound (5.3) on the
// Gaussian example for recourse widths 0.5 and 1, plus Delta sign.
SuiteResult run_strategic_suite(std::size_t n, std::uint64_t seed,
                                Exec exec = default_exec());

SuiteResult run_verify(const ExperimentConfig& config,
                       Exec exec = default_exec());

// --------------------------------------------------------------------------
// Output helpers

void write_text_file(const std::string& path, const std::string& content);
void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<double>& x,
                          const std::vector<double>& y);

// Entry points used by the CLI tool; return a process exit code.
int command_run(const ExperimentConfig& config, const std::string& out_dir,
                Exec exec = default_exec());
int command_sweep(const ExperimentConfig& config, const std::string& out_dir,
                  Exec exec = default_exec());
int command_verify(const ExperimentConfig& config, const std::string& out_dir,
                   Exec exec = default_exec());

}  // namespace recsim
