#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsim/classifiers.hpp"
#include "recsim/gen_models.hpp"
#include "recsim/parallel.hpp"
#include "recsim/rng.hpp"
#include "recsim/types.hpp"

namespace recsim {

// Raised when no positive point exists within a searcher's budget; recourse
// is undefined there and the experiment must abort rather than silently
// treating the point as non-recoursed.
class InfeasibleRecourse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// c(x0, z); zero at z = x0 and monotone along rays from x0.
class CostFunction {
 public:
  enum class Kind { euclidean, weighted_euclidean };

  static CostFunction euclidean() { return CostFunction(Kind::euclidean, {}); }
  static CostFunction weighted_euclidean(Eigen::VectorXd weights);

  Kind kind() const { return kind_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  double operator()(const Point& x0, const Point& z) const {
    return std::sqrt(squared(x0, z));
  }

  // Same ordering as operator(), cheaper in scan loops.
  double squared(const Point& x0, const Point& z) const {
    if (kind_ == Kind::euclidean) return (x0 - z).squaredNorm();
    return (x0 - z).cwiseAbs2().dot(weights_);
  }

 private:
  CostFunction(Kind kind, Eigen::VectorXd w)
      : kind_(kind), weights_(std::move(w)) {}
  Kind kind_;
  Eigen::VectorXd weights_;
};

// Probability that a negatively classified user receives and implements
// recourse, as a function of the distance to the counterfactual.
class AcceptanceFunction {
 public:
  enum class Kind { always, distance_threshold, gaussian_kernel, constant_p };

  static AcceptanceFunction always() { return {Kind::always, 0.0}; }
  static AcceptanceFunction distance_threshold(double d);
  static AcceptanceFunction gaussian_kernel(double sigma2);
  static AcceptanceFunction constant_p(double p);

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }

  double operator()(const Point& x0, const Point& cf) const;

 private:
  AcceptanceFunction(Kind kind, double param) : kind_(kind), param_(param) {}
  Kind kind_;
  double param_;
};

double accept_prob(const AcceptanceFunction& r, const Point& x0,
                   const Point& cf);

// Counterfactual searcher bound to one classifier: returns a point z with
// f(z) = +1 that minimizes the cost among the candidates it examines, and
// returns x0 unchanged when f(x0) = +1 already.
class CounterfactualSearcher {
 public:
  virtual ~CounterfactualSearcher() = default;
  virtual Point find(const Point& x0, RngStream* rng) const = 0;
  virtual std::string kind() const = 0;
};

struct SearcherSpec {
  enum class Kind {
    hyperplane_projection,
    grid_brute_force,
    growing_spheres,
    penalty_gradient,
    candidate_set,
  };

  Kind kind = Kind::grid_brute_force;

  // grid-brute-force
  int grid_resolution = 400;
  double bbox_inflation = 0.10;

  // growing-spheres
  double gs_initial_radius = 0.05;
  double gs_growth = 1.2;
  int gs_samples_per_annulus = 200;
  int gs_max_annuli = 50;
  int gs_refinement_rounds = 8;

  // penalty-gradient (Wachter-style)
  double pg_lambda_init = 1.0;
  int pg_inner_steps = 100;
  int pg_bisections = 20;

  // candidate-set (exhaustive scan of an explicit list, e.g. a model grid)
  std::vector<Point> candidates;

  static Kind kind_from_name(const std::string& name);
  static std::string kind_name(Kind k);
};

// Prepares a searcher for one classifier. Grid search precomputes the
// classifier's decisions over the lattice spanned by `domain` (empirical
// bounding box inflated by bbox_inflation), so preparation can be reused
// across many queries.
std::unique_ptr<CounterfactualSearcher> build_searcher(
    const SearcherSpec& spec, ClassifierPtr classifier, CostFunction cost,
    std::span<const Point> domain, Exec exec = default_exec());

Point counterfactual(const CounterfactualSearcher& searcher, const Point& x0,
                     RngStream* rng = nullptr);

// Full policy: cost + searcher + acceptance.
struct RecoursePolicy {
  CostFunction cost = CostFunction::euclidean();
  SearcherSpec searcher;
  AcceptanceFunction acceptance = AcceptanceFunction::always();
};

// Policy bound to a classifier and a data domain.
class PreparedPolicy {
 public:
  PreparedPolicy(const RecoursePolicy& policy, ClassifierPtr classifier,
                 std::span<const DataPoint> domain, Exec exec = default_exec());

  const Classifier& classifier() const { return *classifier_; }
  ClassifierPtr classifier_ptr() const { return classifier_; }
  const CostFunction& cost() const { return cost_; }
  const AcceptanceFunction& acceptance() const { return acceptance_; }
  const CounterfactualSearcher& searcher() const { return *searcher_; }

  Point counterfactual(const Point& x0, RngStream* rng = nullptr) const {
    return searcher_->find(x0, rng);
  }
  double accept_prob(const Point& x0, const Point& cf) const {
    return acceptance_(x0, cf);
  }

  // Same classifier and prepared searcher, different acceptance rule; used
  // for sweeps over acceptance parameters.
  PreparedPolicy with_acceptance(AcceptanceFunction acceptance) const {
    PreparedPolicy copy(*this);
    copy.acceptance_ = std::move(acceptance);
    return copy;
  }

 private:
  ClassifierPtr classifier_;
  CostFunction cost_;
  AcceptanceFunction acceptance_;
  std::shared_ptr<const CounterfactualSearcher> searcher_;
};

// For each negatively classified x0 draws B ~ Bernoulli(r(x0)); accepted
// points move to their counterfactual and are relabeled through the response
// model; everything else keeps its features and its original label. The
// defiant case retains the originally drawn label (identical in law, lower
// variance in paired comparisons). Point i consumes only the fork(i)
// substream, so results do not depend on the execution policy.
std::vector<Sample> apply_recourse(const PreparedPolicy& policy,
                                   const PosteriorModel& model,
                                   const ResponseModel& response,
                                   std::span<const DataPoint> data,
                                   RngStream rng, Exec exec = default_exec());

// One-shot variant that prepares the policy on the data's own domain.
std::vector<Sample> apply_recourse(const RecoursePolicy& policy,
                                   ClassifierPtr classifier,
                                   const PosteriorModel& model,
                                   const ResponseModel& response,
                                   std::span<const DataPoint> data,
                                   RngStream rng, Exec exec = default_exec());

}  // namespace recsim
