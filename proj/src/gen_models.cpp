#include "recsim/gen_models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "recsim/stats.hpp"

namespace recsim {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Posterior from two vectors of log-kernel exponents, shifted by the common
// maximum so points far from both classes still resolve to a finite ratio.
double posterior_from_exponents(const std::vector<double>& pos,
                                const std::vector<double>& neg) {
  double m = -std::numeric_limits<double>::infinity();
  for (double e : pos) m = std::max(m, e);
  for (double e : neg) m = std::max(m, e);
  if (!std::isfinite(m)) return 0.5;
  double sp = 0.0, sn = 0.0;
  for (double e : pos) sp += std::exp(e - m);
  for (double e : neg) sn += std::exp(e - m);
  return sp / (sp + sn);
}

std::vector<Point> arc_points(int n, double span, double offset,
                              const std::function<Point(double)>& curve) {
  std::vector<Point> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double u = offset + (i + 0.5) * span / n;
    pts.push_back(curve(u));
  }
  return pts;
}

}  // namespace

Dataset sample(const GenerativeModel& model, std::size_t n, RngStream rng,
               Exec exec) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  Dataset out(n);
  parallel_for(exec, n, [&](std::size_t i) {
    RngStream local = rng.fork(i);
    out[i] = model.draw(local);
  });
  return out;
}

// ---------------------------------------------------------------------------
// TwoGaussians

TwoGaussians::TwoGaussians(Point mu, Point nu, Eigen::MatrixXd sigma,
                           double class_prior)
    : mu_(std::move(mu)),
      nu_(std::move(nu)),
      sigma_(std::move(sigma)),
      prior_pos_(class_prior) {
  if (mu_.size() != nu_.size() || sigma_.rows() != mu_.size() ||
      sigma_.cols() != mu_.size())
    throw std::invalid_argument("TwoGaussians: dimension mismatch");
  if (prior_pos_ <= 0.0 || prior_pos_ >= 1.0)
    throw std::invalid_argument("TwoGaussians: class prior outside (0,1)");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("TwoGaussians: covariance not positive definite");
  chol_lower_ = llt.matrixL();
  const Eigen::VectorXd si_mu = llt.solve(mu_);
  const Eigen::VectorXd si_nu = llt.solve(nu_);
  theta_ = si_mu - si_nu;
  theta0_ = -0.5 * (mu_.dot(si_mu) - nu_.dot(si_nu));
  log_prior_odds_ = std::log(prior_pos_ / (1.0 - prior_pos_));
}

DataPoint TwoGaussians::draw(RngStream& rng) const {
  const Label y = rng.bernoulli(prior_pos_) ? Label::positive : Label::negative;
  Eigen::VectorXd z(mu_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.next_gaussian();
  const Point& mean = (y == Label::positive) ? mu_ : nu_;
  return {mean + chol_lower_ * z, y};
}

double TwoGaussians::posterior(const Point& x) const {
  return sigmoid(x.dot(theta_) + theta0_ + log_prior_odds_);
}

double gaussian_bayes_risk(const TwoGaussians& model) {
  if (model.class_prior() != 0.5)
    throw std::invalid_argument(
        "gaussian_bayes_risk: closed form requires equal class priors");
  const Eigen::VectorXd diff = model.mu() - model.nu();
  Eigen::LLT<Eigen::MatrixXd> llt(model.sigma());
  const double mahal_sq = diff.dot(llt.solve(diff));
  return normal_cdf(-0.5 * std::sqrt(mahal_sq));
}

// ---------------------------------------------------------------------------
// MoonsModel

namespace {
Point moons_upper(double u) { return make_point({std::cos(u), std::sin(u)}); }
Point moons_lower(double u) {
  return make_point({1.0 - std::cos(u), 0.5 - std::sin(u)});
}
}  // namespace

MoonsModel::MoonsModel(double noise_sigma, int arc_resolution)
    : sigma_(noise_sigma), resolution_(arc_resolution) {
  if (sigma_ <= 0.0) throw std::invalid_argument("MoonsModel: sigma must be > 0");
  if (resolution_ < 1)
    throw std::invalid_argument("MoonsModel: arc_resolution must be >= 1");
  arc_pos_ = arc_points(resolution_, std::numbers::pi, 0.0, moons_upper);
  arc_neg_ = arc_points(resolution_, std::numbers::pi, 0.0, moons_lower);
}

DataPoint MoonsModel::draw(RngStream& rng) const {
  const Label y = rng.bernoulli(0.5) ? Label::positive : Label::negative;
  const double u = rng.next_double() * std::numbers::pi;
  Point x = (y == Label::positive) ? moons_upper(u) : moons_lower(u);
  x[0] += sigma_ * rng.next_gaussian();
  x[1] += sigma_ * rng.next_gaussian();
  return {x, y};
}

double MoonsModel::posterior(const Point& x) const {
  const double inv2s2 = 1.0 / (2.0 * sigma_ * sigma_);
  std::vector<double> ep(arc_pos_.size()), en(arc_neg_.size());
  for (std::size_t i = 0; i < arc_pos_.size(); ++i)
    ep[i] = -(x - arc_pos_[i]).squaredNorm() * inv2s2;
  for (std::size_t i = 0; i < arc_neg_.size(); ++i)
    en[i] = -(x - arc_neg_[i]).squaredNorm() * inv2s2;
  return posterior_from_exponents(ep, en);
}

// ---------------------------------------------------------------------------
// CirclesModel

CirclesModel::CirclesModel(double noise_sigma, double lambda,
                           int arc_resolution)
    : sigma_(noise_sigma), lambda_(lambda), resolution_(arc_resolution) {
  if (sigma_ <= 0.0) throw std::invalid_argument("CirclesModel: sigma must be > 0");
  if (lambda_ <= 0.0 || lambda_ >= 1.0)
    throw std::invalid_argument("CirclesModel: lambda must be in (0,1)");
  if (resolution_ < 1)
    throw std::invalid_argument("CirclesModel: arc_resolution must be >= 1");
  const double two_pi = 2.0 * std::numbers::pi;
  arc_pos_ = arc_points(resolution_, two_pi, 0.0, [this](double u) {
    return make_point({lambda_ * std::cos(u), lambda_ * std::sin(u)});
  });
  arc_neg_ = arc_points(resolution_, two_pi, 0.0, [](double u) {
    return make_point({std::cos(u), std::sin(u)});
  });
}

DataPoint CirclesModel::draw(RngStream& rng) const {
  const Label y = rng.bernoulli(0.5) ? Label::positive : Label::negative;
  const double u = rng.next_double() * 2.0 * std::numbers::pi;
  const double r = (y == Label::positive) ? lambda_ : 1.0;
  Point x = make_point({r * std::cos(u), r * std::sin(u)});
  x[0] += sigma_ * rng.next_gaussian();
  x[1] += sigma_ * rng.next_gaussian();
  return {x, y};
}

double CirclesModel::posterior(const Point& x) const {
  const double inv2s2 = 1.0 / (2.0 * sigma_ * sigma_);
  std::vector<double> ep(arc_pos_.size()), en(arc_neg_.size());
  for (std::size_t i = 0; i < arc_pos_.size(); ++i)
    ep[i] = -(x - arc_pos_[i]).squaredNorm() * inv2s2;
  for (std::size_t i = 0; i < arc_neg_.size(); ++i)
    en[i] = -(x - arc_neg_[i]).squaredNorm() * inv2s2;
  return posterior_from_exponents(ep, en);
}

// ---------------------------------------------------------------------------
// DiscreteGridModel

DiscreteGridModel::DiscreteGridModel(
    std::vector<Point> grid_points,
    std::vector<std::array<double, 2>> joint_probs)
    : grid_(std::move(grid_points)), probs_(std::move(joint_probs)) {
  if (grid_.empty() || grid_.size() != probs_.size())
    throw std::invalid_argument("DiscreteGridModel: grid/probs size mismatch");
  dim_ = static_cast<int>(grid_.front().size());
  double total = 0.0;
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (grid_[i].size() != dim_)
      throw std::invalid_argument("DiscreteGridModel: inconsistent dimension");
    if (probs_[i][0] < 0.0 || probs_[i][1] < 0.0)
      throw std::invalid_argument("DiscreteGridModel: negative probability");
    total += probs_[i][0] + probs_[i][1];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("DiscreteGridModel: probabilities must sum to 1");
  cumulative_.reserve(grid_.size() * 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    acc += probs_[i][0];
    cumulative_.push_back(acc);
    acc += probs_[i][1];
    cumulative_.push_back(acc);
  }
  cumulative_.back() = 1.0;
}

DataPoint DiscreteGridModel::draw(RngStream& rng) const {
  const double u = rng.next_double();
  const auto it =
      std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t cell = static_cast<std::size_t>(it - cumulative_.begin());
  if (cell >= cumulative_.size()) cell = cumulative_.size() - 1;
  const std::size_t i = cell / 2;
  const Label y = (cell % 2 == 1) ? Label::positive : Label::negative;
  return {grid_[i], y};
}

double DiscreteGridModel::posterior_at(std::size_t i) const {
  const double mass = point_mass(i);
  if (mass == 0.0) return 0.5;  // unreachable point; any value is consistent
  return probs_[i][1] / mass;
}

double DiscreteGridModel::posterior(const Point& x) const {
  return posterior_at(index_of(x));
}

std::size_t DiscreteGridModel::index_of(const Point& x) const {
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (grid_[i].size() == x.size() && grid_[i] == x) return i;
  }
  throw std::invalid_argument("DiscreteGridModel: point is not on the grid");
}

}  // namespace recsim
