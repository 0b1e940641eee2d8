#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <vector>

#include "recsim/parallel.hpp"
#include "recsim/rng.hpp"
#include "recsim/types.hpp"

namespace recsim {

// Anything that can answer P(Y = +1 | X0 = x). Synthetic models answer it
// exactly; on real data a calibrated oracle stands in.
class PosteriorModel {
 public:
  virtual ~PosteriorModel() = default;
  virtual int dim() const = 0;
  virtual double posterior(const Point& x) const = 0;
};

// Joint distribution over (X0, Y) with an exact, queryable posterior.
class GenerativeModel : public PosteriorModel {
 public:
  virtual DataPoint draw(RngStream& rng) const = 0;
};

// n i.i.d. pairs; point i is drawn from the fork(i) substream so the result
// is independent of the execution policy.
Dataset sample(const GenerativeModel& model, std::size_t n, RngStream rng,
               Exec exec = Exec::serial);

// Two Gaussian classes N(mu, Sigma) and N(nu, Sigma) with shared covariance.
// The posterior is the closed logistic form sigma(x' theta + theta0) with
// theta = Sigma^{-1} (mu - nu).
class TwoGaussians final : public GenerativeModel {
 public:
  TwoGaussians(Point mu, Point nu, Eigen::MatrixXd sigma,
               double class_prior = 0.5);

  int dim() const override { return static_cast<int>(mu_.size()); }
  DataPoint draw(RngStream& rng) const override;
  double posterior(const Point& x) const override;

  const Point& mu() const { return mu_; }
  const Point& nu() const { return nu_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  double class_prior() const { return prior_pos_; }

  // Bayes boundary parameters: f*(x) = sign(x' theta + theta0).
  const Eigen::VectorXd& theta() const { return theta_; }
  double theta0() const { return theta0_; }

 private:
  Point mu_, nu_;
  Eigen::MatrixXd sigma_;
  double prior_pos_;
  Eigen::MatrixXd chol_lower_;
  Eigen::VectorXd theta_;
  double theta0_;
  double log_prior_odds_;
};

// Exact Bayes risk Phi(-1/2 ||mu - nu||_{Sigma^{-1}}) for equal class priors.
double gaussian_bayes_risk(const TwoGaussians& model);

// Two translated semi-circle arcs with isotropic Gaussian noise. The class
// densities are arc integrals evaluated by a midpoint Riemann sum.
class MoonsModel final : public GenerativeModel {
 public:
  explicit MoonsModel(double noise_sigma = 0.2, int arc_resolution = 1000);

  int dim() const override { return 2; }
  DataPoint draw(RngStream& rng) const override;
  double posterior(const Point& x) const override;

  double noise_sigma() const { return sigma_; }
  int arc_resolution() const { return resolution_; }

 private:
  double sigma_;
  int resolution_;
  std::vector<Point> arc_pos_, arc_neg_;
};

// Two nested circles: class +1 on the inner circle of radius lambda, class
// -1 on the unit circle, both with Gaussian noise.
class CirclesModel final : public GenerativeModel {
 public:
  explicit CirclesModel(double noise_sigma = 0.2, double lambda = 0.6,
                        int arc_resolution = 1000);

  int dim() const override { return 2; }
  DataPoint draw(RngStream& rng) const override;
  double posterior(const Point& x) const override;

  double noise_sigma() const { return sigma_; }
  double lambda() const { return lambda_; }
  int arc_resolution() const { return resolution_; }

 private:
  double sigma_;
  double lambda_;
  int resolution_;
  std::vector<Point> arc_pos_, arc_neg_;
};

// Finite joint table P(x, y) over a fixed list of points; everything about
// it can be enumerated exactly, which makes it the brute-force oracle.
class DiscreteGridModel final : public GenerativeModel {
 public:
  // probs[i] = { P(x_i, Y=-1), P(x_i, Y=+1) }; must sum to 1.
  DiscreteGridModel(std::vector<Point> grid_points,
                    std::vector<std::array<double, 2>> joint_probs);

  int dim() const override { return dim_; }
  DataPoint draw(RngStream& rng) const override;
  double posterior(const Point& x) const override;

  std::size_t size() const { return grid_.size(); }
  const Point& point(std::size_t i) const { return grid_[i]; }
  const std::vector<Point>& points() const { return grid_; }
  double joint(std::size_t i, Label y) const {
    return probs_[i][y == Label::positive ? 1 : 0];
  }
  double point_mass(std::size_t i) const {
    return probs_[i][0] + probs_[i][1];
  }
  double posterior_at(std::size_t i) const;

  // Exact coordinate match; throws if x is not a grid point.
  std::size_t index_of(const Point& x) const;

 private:
  int dim_;
  std::vector<Point> grid_;
  std::vector<std::array<double, 2>> probs_;
  std::vector<double> cumulative_;
};

}  // namespace recsim
