#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "recsim/classifiers.hpp"
#include "recsim/experiment.hpp"
#include "recsim/risk.hpp"
#include "recsim/stats.hpp"

using namespace recsim;

namespace {

Dataset two_clusters(double separation, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Dataset data;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = rng.bernoulli(0.5);
    const double cx = pos ? separation : -separation;
    data.push_back({make_point({cx + 0.5 * rng.next_gaussian(),
                                0.5 * rng.next_gaussian()}),
                    pos ? Label::positive : Label::negative});
  }
  return data;
}

double training_error(const Classifier& c, const Dataset& data) {
  std::size_t wrong = 0;
  for (const auto& [x, y] : data) wrong += c.predict(x) != y;
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

// Weighted cross-entropy objective replicated independently of the trainer,
// for finite-difference checks.
double lr_objective(const Dataset& data, const Eigen::VectorXd& theta,
                    double theta0) {
  std::size_t n_pos = 0;
  for (const auto& [x, y] : data) n_pos += y == Label::positive;
  const std::size_t n = data.size();
  double acc = 0.0, wsum = 0.0;
  for (const auto& [x, y] : data) {
    const bool pos = y == Label::positive;
    const double w = static_cast<double>(n) /
                     (2.0 * static_cast<double>(pos ? n_pos : n - n_pos));
    const double m = x.dot(theta) + theta0;
    const double softplus =
        std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m)));
    acc += w * (softplus - (pos ? m : 0.0));
    wsum += w;
  }
  return acc / wsum;
}

// Slope of the reliability diagram over 10 equal-width probability bins.
double reliability_slope(const Classifier& c, const Dataset& data) {
  std::vector<double> sum_pred(10, 0.0), sum_pos(10, 0.0), count(10, 0.0);
  for (const auto& [x, y] : data) {
    const double p = c.predict_proba(x);
    int bin = static_cast<int>(p * 10.0);
    bin = std::min(std::max(bin, 0), 9);
    sum_pred[bin] += p;
    sum_pos[bin] += y == Label::positive ? 1.0 : 0.0;
    count[bin] += 1.0;
  }
  std::vector<double> xs, ys;
  for (int b = 0; b < 10; ++b)
    if (count[b] >= 25.0) {
      xs.push_back(sum_pred[b] / count[b]);
      ys.push_back(sum_pos[b] / count[b]);
    }
  return fit_line(xs, ys).slope;
}

class ScaledScore final : public Classifier {
 public:
  ScaledScore(ClassifierPtr base, double factor)
      : base_(std::move(base)), factor_(factor) {}
  double predict_proba(const Point& x) const override {
    const double s = score(x);
    return 1.0 / (1.0 + std::exp(-s));
  }
  double score(const Point& x) const override {
    return factor_ * base_->score(x);
  }
  std::string family() const override { return "scaled"; }

 private:
  ClassifierPtr base_;
  double factor_;
};

}  // namespace

TEST_CASE("logistic regression separates linearly separated clusters") {
  const Dataset data = two_clusters(3.0, 2000, 11);
  TrainConfig config;
  config.family = TrainConfig::Family::logistic_regression;
  const auto model = fit(config, data);
  CHECK(training_error(*model, data) <= 0.01);
}

TEST_CASE("gaussian nb is well specified for an isotropic mixture") {
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2, 2);
  const TwoGaussians model(make_point({1.0, 0.0}), make_point({-1.0, 0.0}),
                           identity);
  const Dataset train = sample(model, 5000, RngStream(12, 0));
  const Dataset test = sample(model, 20000, RngStream(12, 1));
  TrainConfig config;
  config.family = TrainConfig::Family::gaussian_nb;
  const auto nb = fit(config, train);
  const double risk = training_error(*nb, test);
  CHECK(std::abs(risk - 0.15865525393145707) < 0.02);
}

TEST_CASE("logistic regression reaches a stationary point of the objective") {
  const auto model = default_two_gaussians();
  const Dataset data = sample(*model, 2000, RngStream(13, 0));
  TrainConfig config;
  config.family = TrainConfig::Family::logistic_regression;
  const auto fitted = fit(config, data);
  const auto* lr = dynamic_cast<const LogisticRegression*>(fitted.get());
  REQUIRE(lr != nullptr);

  const Eigen::VectorXd theta = lr->linear().theta;
  const double theta0 = lr->linear().theta0;
  const double h = 1e-6;
  double grad_norm_sq = 0.0;
  for (int j = 0; j < 3; ++j) {
    Eigen::VectorXd tp = theta, tm = theta;
    double t0p = theta0, t0m = theta0;
    if (j < 2) {
      tp[j] += h;
      tm[j] -= h;
    } else {
      t0p += h;
      t0m -= h;
    }
    const double g =
        (lr_objective(data, tp, t0p) - lr_objective(data, tm, t0m)) / (2 * h);
    grad_norm_sq += g * g;
  }
  CHECK(std::sqrt(grad_norm_sq) < 1e-4);
}

TEST_CASE("fitting is deterministic given (seed, data)") {
  const auto model = default_moons();
  const Dataset data = sample(*model, 800, RngStream(14, 0));
  const std::vector<TrainConfig::Family> families = {
      TrainConfig::Family::logistic_regression,
      TrainConfig::Family::gaussian_nb, TrainConfig::Family::qda,
      TrainConfig::Family::decision_tree, TrainConfig::Family::mlp};
  RngStream probe_rng(14, 1);
  std::vector<Point> probes;
  for (int i = 0; i < 64; ++i)
    probes.push_back(make_point(
        {4.0 * probe_rng.next_double() - 2.0, 4.0 * probe_rng.next_double() - 2.0}));
  for (const auto family : families) {
    TrainConfig config;
    config.family = family;
    config.seed = 99;
    config.mlp_epochs = 20;
    const auto a = fit(config, data);
    const auto b = fit(config, data);
    for (const auto& p : probes)
      CHECK(a->predict_proba(p) == b->predict_proba(p));  // bitwise
  }
}

TEST_CASE("predict_proba stays in [0,1] for every family") {
  const auto model = default_moons();
  const Dataset data = sample(*model, 600, RngStream(15, 0));
  std::vector<ClassifierPtr> fitted;
  for (const auto family :
       {TrainConfig::Family::logistic_regression, TrainConfig::Family::gaussian_nb,
        TrainConfig::Family::qda, TrainConfig::Family::decision_tree,
        TrainConfig::Family::mlp}) {
    TrainConfig config;
    config.family = family;
    config.mlp_epochs = 20;
    fitted.push_back(fit(config, data));
  }
  RngStream rng(15, 1);
  for (int i = 0; i < 10000; ++i) {
    const Point x = make_point(
        {20.0 * rng.next_double() - 10.0, 20.0 * rng.next_double() - 10.0});
    for (const auto& c : fitted) {
      const double p = c->predict_proba(x);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("threshold rule classifies g = 1/2 as +1") {
  LinearModel lin;
  lin.theta = make_point({1.0, 0.0});
  lin.theta0 = 0.0;
  const LogisticRegression lr(lin, {});
  CHECK(lr.predict_proba(make_point({0.0, 5.0})) == 0.5);
  CHECK(lr.predict(make_point({0.0, 5.0})) == Label::positive);
}

TEST_CASE("platt scaling is a near fixed point for a calibrated model") {
  const auto model = default_two_gaussians();
  const Dataset calib = sample(*model, 5000, RngStream(16, 0));
  const auto bayes = bayes_classifier(model);
  const auto calibrated = platt_calibrate(bayes, calib);
  const auto* platt = dynamic_cast<const PlattCalibrated*>(calibrated.get());
  REQUIRE(platt != nullptr);
  CHECK(std::abs(platt->slope() - 1.0) < 0.1);
  CHECK(std::abs(platt->offset() - 0.0) < 0.1);
}

TEST_CASE("platt scaling undoes an overconfident scorer") {
  const auto model = default_two_gaussians();
  const Dataset calib = sample(*model, 20000, RngStream(17, 0));
  const auto overconfident =
      std::make_shared<ScaledScore>(bayes_classifier(model), 10.0);
  const auto calibrated = platt_calibrate(overconfident, calib);
  const auto* platt = dynamic_cast<const PlattCalibrated*>(calibrated.get());
  REQUIRE(platt != nullptr);
  CHECK(std::abs(platt->slope() - 0.1) < 0.02);

  const Dataset held_out = sample(*model, 20000, RngStream(17, 1));
  CHECK(std::abs(reliability_slope(*calibrated, held_out) - 1.0) < 0.1);
}

TEST_CASE("platt scaling rejects one-class calibration data") {
  const auto model = default_two_gaussians();
  Dataset one_class;
  for (int i = 0; i < 50; ++i)
    one_class.push_back({make_point({1.0, 1.0}), Label::positive});
  CHECK_THROWS_AS(platt_calibrate(bayes_classifier(model), one_class),
                  std::invalid_argument);
}

TEST_CASE("qda regularizes a degenerate class covariance") {
  Dataset data;
  for (int i = 0; i < 30; ++i)
    data.push_back({make_point({1.0, 1.0}), Label::positive});  // zero spread
  RngStream rng(18, 0);
  for (int i = 0; i < 30; ++i)
    data.push_back({make_point({-1.0 + 0.3 * rng.next_gaussian(),
                                -1.0 + 0.3 * rng.next_gaussian()}),
                    Label::negative});
  TrainConfig config;
  config.family = TrainConfig::Family::qda;
  const auto qda = fit(config, data);
  CHECK(qda->metadata().at("regularized").get<bool>());
  const double p = qda->predict_proba(make_point({0.0, 0.0}));
  CHECK(std::isfinite(p));
}

TEST_CASE("boundary epsilon vanishes for the bayes rule with projection") {
  const auto model = default_two_gaussians();
  const auto bayes = bayes_classifier(model);
  const LinearModel* lin = bayes->linear_boundary();
  REQUIRE(lin != nullptr);
  const Dataset data = sample(*model, 20000, RngStream(19, 0));
  std::vector<Point> negatives;
  for (const auto& [x, y] : data)
    if (bayes->predict(x) == Label::negative) negatives.push_back(x);
  auto project = [&](const Point& x) {
    return Point(x - (lin->margin(x) / lin->theta.squaredNorm()) * lin->theta);
  };
  CHECK(boundary_epsilon(*model, negatives, project) < 0.01);
}

TEST_CASE("boundary epsilon grows as the boundary shifts off bayes") {
  const auto model = default_two_gaussians();
  const Dataset data = sample(*model, 20000, RngStream(20, 0));
  const Eigen::VectorXd theta = model->theta();
  double last = -1.0;
  for (double shift : {0.0, 0.5, 1.0}) {
    LinearModel lin{theta, -shift * theta.norm()};
    std::vector<Point> negatives;
    for (const auto& [x, y] : data)
      if (lin.decide(x) == Label::negative) negatives.push_back(x);
    auto project = [&](const Point& x) {
      return Point(x - (lin.margin(x) / lin.theta.squaredNorm()) * lin.theta);
    };
    const double eps = boundary_epsilon(*model, negatives, project);
    CHECK(eps > last);
    last = eps;
  }
}

TEST_CASE("boundary epsilon matches an exact summation on a uniform grid") {
  // Uniform masses make the equal-weight average equal the conditional
  // expectation.
  std::vector<Point> points{make_point({0.0}), make_point({1.0}),
                            make_point({2.0}), make_point({3.0})};
  std::vector<std::array<double, 2>> probs{
      {0.20, 0.05}, {0.15, 0.10}, {0.05, 0.20}, {0.10, 0.15}};
  const auto model = std::make_shared<DiscreteGridModel>(points, probs);
  std::vector<Point> negatives{points[0], points[1]};
  auto map_right = [&](const Point&) { return points[2]; };
  const double expected = std::abs(0.5 - 0.8);  // posterior at x=2 is 0.8
  CHECK(boundary_epsilon(*model, negatives, map_right) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(boundary_epsilon(*model, {}, map_right),
                  std::invalid_argument);
}

TEST_CASE("fit validates inputs") {
  TrainConfig config;
  CHECK_THROWS_AS(fit(config, {}), std::invalid_argument);
  Dataset one_class{{make_point({0.0, 0.0}), Label::positive},
                    {make_point({1.0, 0.0}), Label::positive}};
  CHECK_THROWS_AS(fit(config, one_class), std::invalid_argument);

  Dataset tiny{{make_point({0.0, 0.0}), Label::positive},
               {make_point({1.0, 0.0}), Label::negative}};
  TrainConfig bad_tree;
  bad_tree.family = TrainConfig::Family::decision_tree;
  bad_tree.tree_max_depth = 0;
  CHECK_THROWS_AS(fit(bad_tree, tiny), std::invalid_argument);
}
