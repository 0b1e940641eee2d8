#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "recsim/gen_models.hpp"
#include "recsim/loss.hpp"
#include "recsim/rng.hpp"
#include "recsim/types.hpp"

namespace recsim {

// Hyperplane x' theta + theta0 = 0; points on it classify +1.
struct LinearModel {
  Eigen::VectorXd theta;
  double theta0 = 0.0;

  double margin(const Point& x) const { return x.dot(theta) + theta0; }
  Label decide(const Point& x) const { return label_of_sign(margin(x)); }
};

// Probabilistic classifier g : X -> [0,1]; the binary rule is
// f(x) = sign(g(x) - 1/2) with sign(0) = +1.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual double predict_proba(const Point& x) const = 0;
  Label predict(const Point& x) const {
    return threshold_label(predict_proba(x));
  }

  // Real-valued score used by Platt scaling; logit scale by default.
  virtual double score(const Point& x) const {
    const double p = Loss::clamp_prob(predict_proba(x));
    return std::log(p / (1.0 - p));
  }

  virtual std::string family() const = 0;
  virtual bool continuous() const { return true; }

  // Non-null when the decision boundary is an explicit hyperplane.
  virtual const LinearModel* linear_boundary() const { return nullptr; }

  virtual nlohmann::json metadata() const;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

// g(x) = P(Y=+1 | X0=x); thresholding gives the Bayes rule. For a
// TwoGaussians model the boundary is exposed as a hyperplane.
class BayesClassifier final : public Classifier {
 public:
  explicit BayesClassifier(std::shared_ptr<const PosteriorModel> model);

  double predict_proba(const Point& x) const override {
    return model_->posterior(x);
  }
  std::string family() const override { return "bayes"; }
  bool continuous() const override { return continuous_; }
  const LinearModel* linear_boundary() const override {
    return has_linear_ ? &linear_ : nullptr;
  }
  nlohmann::json metadata() const override;

 private:
  std::shared_ptr<const PosteriorModel> model_;
  bool continuous_ = true;
  bool has_linear_ = false;
  LinearModel linear_;
};

ClassifierPtr bayes_classifier(std::shared_ptr<const PosteriorModel> model);

// Training configuration for the desk-scale roster.
struct TrainConfig {
  enum class Family {
    logistic_regression,
    gaussian_nb,
    qda,
    decision_tree,
    mlp,
  };

  Family family = Family::logistic_regression;
  std::uint64_t seed = 0;

  // logistic regression
  int lr_max_iters = 10000;
  double lr_grad_tol = 1e-6;
  double lr_l2 = 0.0;
  bool class_balanced = true;  // also applies to trees

  // NB / QDA covariance floor
  double cov_regularization = 1e-6;

  // decision tree
  int tree_max_depth = 4;

  // mlp
  std::vector<int> mlp_hidden = {8, 16};
  double mlp_learning_rate = 1e-3;
  int mlp_epochs = 200;
  int mlp_batch = 32;
  double mlp_momentum = 0.9;

  static Family family_from_name(const std::string& name);
  static std::string family_name(Family f);
};

// Deterministic given (config.seed, data).
ClassifierPtr fit(const TrainConfig& config, const Dataset& data);

// Returns g'(x) = sigmoid(a * score(x) + b) with (a, b) minimizing
// cross-entropy on the calibration set.
ClassifierPtr platt_calibrate(ClassifierPtr base, const Dataset& calib_data);

// Monte Carlo estimate of the average posterior deviation from 1/2 at the
// counterfactual images of negatively classified points.
double boundary_epsilon(const PosteriorModel& model,
                        std::span<const Point> negatives,
                        const std::function<Point(const Point&)>& recourse_map);

// Concrete families ------------------------------------------------------

class LogisticRegression final : public Classifier {
 public:
  LogisticRegression(LinearModel lin, nlohmann::json fit_info)
      : lin_(std::move(lin)), fit_info_(std::move(fit_info)) {}

  double predict_proba(const Point& x) const override;
  double score(const Point& x) const override { return lin_.margin(x); }
  std::string family() const override { return "logistic-regression"; }
  const LinearModel* linear_boundary() const override { return &lin_; }
  nlohmann::json metadata() const override;

  const LinearModel& linear() const { return lin_; }

 private:
  LinearModel lin_;
  nlohmann::json fit_info_;
};

// Deterministic linear rule used by the strategic module; g is the 0/1
// indicator of the positive halfspace.
class HardLinearClassifier final : public Classifier {
 public:
  explicit HardLinearClassifier(LinearModel lin) : lin_(std::move(lin)) {}

  double predict_proba(const Point& x) const override {
    return lin_.margin(x) >= 0.0 ? 1.0 : 0.0;
  }
  std::string family() const override { return "hard-linear"; }
  bool continuous() const override { return false; }
  const LinearModel* linear_boundary() const override { return &lin_; }

 private:
  LinearModel lin_;
};

class GaussianNaiveBayes final : public Classifier {
 public:
  struct ClassStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
    double log_prior = 0.0;
  };
  GaussianNaiveBayes(ClassStats pos, ClassStats neg)
      : pos_(std::move(pos)), neg_(std::move(neg)) {}

  double predict_proba(const Point& x) const override;
  std::string family() const override { return "gaussian-nb"; }
  nlohmann::json metadata() const override;

 private:
  double log_density(const ClassStats& s, const Point& x) const;
  ClassStats pos_, neg_;
};

class Qda final : public Classifier {
 public:
  struct ClassStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov_inverse;
    double log_det = 0.0;
    double log_prior = 0.0;
  };
  Qda(ClassStats pos, ClassStats neg, bool regularized)
      : pos_(std::move(pos)), neg_(std::move(neg)), regularized_(regularized) {}

  double predict_proba(const Point& x) const override;
  std::string family() const override { return "qda"; }
  nlohmann::json metadata() const override;

 private:
  ClassStats pos_, neg_;
  bool regularized_;
};

class DecisionTree final : public Classifier {
 public:
  struct Node {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0;  // go left if x[feature] <= threshold
    int left = -1, right = -1;
    double prob_positive = 0.5;
  };
  DecisionTree(std::vector<Node> nodes, int max_depth)
      : nodes_(std::move(nodes)), max_depth_(max_depth) {}

  double predict_proba(const Point& x) const override;
  std::string family() const override { return "decision-tree"; }
  bool continuous() const override { return false; }
  nlohmann::json metadata() const override;

 private:
  std::vector<Node> nodes_;
  int max_depth_;
};

class Mlp final : public Classifier {
 public:
  struct Layer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
  };
  Mlp(std::vector<Layer> layers, nlohmann::json fit_info)
      : layers_(std::move(layers)), fit_info_(std::move(fit_info)) {}

  double predict_proba(const Point& x) const override;
  std::string family() const override { return "mlp"; }
  nlohmann::json metadata() const override;

 private:
  std::vector<Layer> layers_;
  nlohmann::json fit_info_;
};

class PlattCalibrated final : public Classifier {
 public:
  PlattCalibrated(ClassifierPtr base, double a, double b)
      : base_(std::move(base)), a_(a), b_(b) {}

  double predict_proba(const Point& x) const override;
  double score(const Point& x) const override {
    return a_ * base_->score(x) + b_;
  }
  std::string family() const override { return base_->family() + "+platt"; }
  bool continuous() const override { return base_->continuous(); }
  nlohmann::json metadata() const override;

  double slope() const { return a_; }
  double offset() const { return b_; }

 private:
  ClassifierPtr base_;
  double a_, b_;
};

}  // namespace recsim
