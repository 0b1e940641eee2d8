#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "recsim/classifiers.hpp"
#include "recsim/recourse.hpp"
#include "recsim/risk.hpp"
#include "recsim/types.hpp"

namespace recsim {

// Delimited numeric table after one-hot handling, min-max normalized to
// [0,1] per feature, labels in {-1,+1}.
struct TabularDataset {
  std::vector<std::string> feature_names;
  Dataset rows;

  struct Provenance {
    std::string source_path;
    std::string label_column;
    std::string positive_value;
    std::vector<double> feature_min;  // pre-normalization, per expanded feature
    std::vector<double> feature_max;
    std::size_t dropped_rows = 0;
    std::vector<std::string> warnings;
  } provenance;

  std::size_t size() const { return rows.size(); }
  double negative_rate() const;
  // Class -1 rarer than 10%: risk estimates carry high variance.
  bool imbalanced() const { return negative_rate() < 0.10; }

  nlohmann::json provenance_json() const;
};

// Comma-separated, header row, UTF-8. Non-numeric columns are one-hot
// encoded (then normalized like everything else); rows with missing values
// are dropped and counted.
TabularDataset load_csv(const std::string& path,
                        const std::string& label_column,
                        const std::string& positive_value);

struct SplitPlan {
  std::size_t n_cond_train = 0;
  std::size_t n_cond_calib = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

struct Splits {
  std::vector<std::size_t> cond_train, cond_calib, train, test;
};

// Disjoint index slices drawn from a seeded shuffle of the dataset.
Splits make_splits(std::size_t dataset_size, const SplitPlan& plan);

Dataset take_rows(const TabularDataset& dataset,
                  const std::vector<std::size_t>& indices);

// Manifest for bit-exact reruns: split indices + normalization parameters.
nlohmann::json split_manifest(const TabularDataset& dataset,
                              const SplitPlan& plan, const Splits& splits);

// --------------------------------------------------------------------------
// From-scratch gradient-boosted trees with log-loss (the conditional oracle's
// base learner).

struct GbtConfig {
  double learning_rate = 0.1;
  int n_estimators = 60;
  double subsample = 1.0;
  int max_depth = 3;
  std::uint64_t seed = 0;
};

class GradientBoostedTrees final : public Classifier {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };
  struct Tree {
    std::vector<Node> nodes;
    double eval(const Point& x) const;
  };

  GradientBoostedTrees(double bias, std::vector<Tree> trees, GbtConfig config)
      : bias_(bias), trees_(std::move(trees)), config_(config) {}

  double predict_proba(const Point& x) const override;
  double score(const Point& x) const override;  // raw additive score
  std::string family() const override { return "gbt"; }
  bool continuous() const override { return false; }
  nlohmann::json metadata() const override;

 private:
  double bias_;
  std::vector<Tree> trees_;
  GbtConfig config_;
};

ClassifierPtr fit_gbt(const GbtConfig& config, const Dataset& data);

// --------------------------------------------------------------------------
// Conditional oracle: grid-searched GBT, Platt-calibrated.

struct OracleSearchGrid {
  std::vector<double> learning_rates = {0.05, 0.15};
  std::vector<int> n_estimators = {10, 20, 60};
  std::vector<double> subsamples = {0.8, 0.9, 1.0};
  std::vector<int> max_depths = {1, 2, 3};
  int cv_folds = 5;
};

struct ConditionalOracle {
  ClassifierPtr model;  // calibrated
  nlohmann::json provenance;
};

ConditionalOracle train_oracle(const TabularDataset& dataset,
                               const SplitPlan& plan,
                               const OracleSearchGrid& grid = {},
                               Exec exec = default_exec());

// Adapter so the oracle can relabel moved points in place of the unknown
// true posterior.
class OraclePosterior final : public PosteriorModel {
 public:
  OraclePosterior(ClassifierPtr model, int dim)
      : model_(std::move(model)), dim_(dim) {}
  int dim() const override { return dim_; }
  double posterior(const Point& x) const override {
    return model_->predict_proba(x);
  }

 private:
  ClassifierPtr model_;
  int dim_;
};

// --------------------------------------------------------------------------

struct ReplayReport {
  RiskReport risks;
  bool high_variance_flag = false;  // class imbalance guard
  nlohmann::json oracle_provenance;
  nlohmann::json classifier_metadata;

  nlohmann::json to_json() const;
};

// Full real-data protocol: train the oracle on the conditioning slices,
// train the classifier on the train slice, estimate R_P on the test slice,
// apply recourse with oracle-based relabeling, estimate R_Q.
ReplayReport replay_experiment(const TabularDataset& dataset,
                               const SplitPlan& plan,
                               const TrainConfig& classifier_config,
                               const RecoursePolicy& policy,
                               const ResponseModel& response, RngStream rng,
                               Exec exec = default_exec());

}  // namespace recsim
