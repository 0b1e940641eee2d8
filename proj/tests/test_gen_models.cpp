#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "recsim/classifiers.hpp"
#include "recsim/experiment.hpp"
#include "recsim/gen_models.hpp"
#include "recsim/recourse.hpp"
#include "recsim/risk.hpp"
#include "recsim/stats.hpp"

using namespace recsim;

namespace {

// Independent posterior oracle for two equal-prior Gaussians: explicit
// density ratio with a hand-rolled 2x2 inverse, no logistic shortcut.
double density_ratio_posterior(const Point& x, const Point& mu,
                               const Point& nu, const Eigen::MatrixXd& sigma) {
  const double det = sigma(0, 0) * sigma(1, 1) - sigma(0, 1) * sigma(1, 0);
  Eigen::MatrixXd inv(2, 2);
  inv << sigma(1, 1) / det, -sigma(0, 1) / det, -sigma(1, 0) / det,
      sigma(0, 0) / det;
  auto dens = [&](const Point& mean) {
    const Eigen::VectorXd c = x - mean;
    return std::exp(-0.5 * c.dot(inv * c));
  };
  const double dp = dens(mu), dn = dens(nu);
  return dp / (dp + dn);
}

std::shared_ptr<DiscreteGridModel> two_point_model() {
  // x- at 0 with P(Y=+1|x-)=0.1, x+ at 2 with P(Y=+1|x+)=0.9, equal masses.
  std::vector<Point> points{make_point({0.0}), make_point({2.0})};
  std::vector<std::array<double, 2>> probs{{0.45, 0.05}, {0.05, 0.45}};
  return std::make_shared<DiscreteGridModel>(points, probs);
}

std::shared_ptr<DiscreteGridModel> three_point_model() {
  // Adds a boundary point with posterior exactly 1/2 between the two, so the
  // counterfactual target satisfies the theorem hypotheses.
  std::vector<Point> points{make_point({0.0}), make_point({1.0}),
                            make_point({2.0})};
  std::vector<std::array<double, 2>> probs{
      {0.36, 0.04}, {0.10, 0.10}, {0.04, 0.36}};
  return std::make_shared<DiscreteGridModel>(points, probs);
}

PreparedPolicy grid_policy(const std::shared_ptr<DiscreteGridModel>& model,
                           ClassifierPtr classifier,
                           AcceptanceFunction acceptance) {
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::candidate_set;
  policy.searcher.candidates = model->points();
  policy.acceptance = acceptance;
  Dataset domain;
  for (const auto& p : model->points()) domain.push_back({p, Label::positive});
  return PreparedPolicy(policy, std::move(classifier), domain, Exec::serial);
}

}  // namespace

TEST_CASE("gaussian posterior: symmetry point and logistic form") {
  const auto model = default_two_gaussians();
  CHECK(model->posterior(make_point({0.0, 0.0})) == doctest::Approx(0.5));
  CHECK(model->posterior(make_point({1.0, 1.0})) ==
        doctest::Approx(0.935030830871336).epsilon(1e-9));
  CHECK(model->theta()[0] == doctest::Approx(4.0 / 3.0));
  CHECK(model->theta()[1] == doctest::Approx(4.0 / 3.0));
  CHECK(model->theta0() == doctest::Approx(0.0));
}

TEST_CASE("gaussian logistic posterior agrees with the density ratio") {
  const auto model = default_two_gaussians();
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      const Point x = make_point({-3.0 + 6.0 * i / 19.0, -3.0 + 6.0 * j / 19.0});
      const double expected = density_ratio_posterior(
          x, model->mu(), model->nu(), model->sigma());
      CHECK(model->posterior(x) == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("gaussian bayes risk closed form") {
  CHECK(gaussian_bayes_risk(*default_two_gaussians()) ==
        doctest::Approx(0.12410653949496181).epsilon(1e-9));

  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2, 2);
  const TwoGaussians same(make_point({1.0, 1.0}), make_point({1.0, 1.0}),
                          identity);
  CHECK(gaussian_bayes_risk(same) == doctest::Approx(0.5));

  const TwoGaussians split(make_point({1.0, 0.0}), make_point({-1.0, 0.0}),
                           identity);
  CHECK(gaussian_bayes_risk(split) ==
        doctest::Approx(0.15865525393145707).epsilon(1e-9));
}

TEST_CASE("non positive-definite covariance is rejected") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(
      TwoGaussians(make_point({1.0, 0.0}), make_point({-1.0, 0.0}), bad),
      std::invalid_argument);
}

TEST_CASE("sampling: class balance and moons arc centroid") {
  const auto gaussians = default_two_gaussians();
  const Dataset g = sample(*gaussians, 100000, RngStream(5, 0));
  std::size_t pos = 0;
  for (const auto& [x, y] : g) pos += y == Label::positive;
  CHECK(std::abs(static_cast<double>(pos) / 100000.0 - 0.5) < 0.005);

  const auto moons = default_moons();
  const Dataset m = sample(*moons, 5000, RngStream(5, 1));
  double sx = 0.0, sy = 0.0;
  std::size_t n_pos = 0;
  for (const auto& [x, y] : m)
    if (y == Label::positive) {
      sx += x[0];
      sy += x[1];
      ++n_pos;
    }
  CHECK(std::abs(sx / n_pos - 0.0) < 0.05);
  CHECK(std::abs(sy / n_pos - 0.6366197723675814) < 0.05);
}

TEST_CASE("degenerate discrete model yields constant samples") {
  std::vector<Point> points{make_point({1.5, -2.0})};
  std::vector<std::array<double, 2>> probs{{0.0, 1.0}};
  const DiscreteGridModel model(points, probs);
  RngStream rng(3, 0);
  for (int i = 0; i < 50; ++i) {
    const auto [x, y] = model.draw(rng);
    CHECK(x == points[0]);
    CHECK(y == Label::positive);
  }
}

TEST_CASE("moons posterior: symmetry point, stability, resolution") {
  const auto moons = default_moons();
  // The involution (x, y) -> (1-x, 1/2-y) swaps the two arcs, so its fixed
  // point has posterior exactly 1/2.
  CHECK(std::abs(moons->posterior(make_point({0.5, 0.25})) - 0.5) < 1e-3);
  // Far from both arcs the ratio must still be finite and inside [0,1].
  const double far = moons->posterior(make_point({800.0, -900.0}));
  CHECK(far >= 0.0);
  CHECK(far <= 1.0);

  const MoonsModel fine(0.2, 2000);
  const CirclesModel circles_base(0.2, 0.6, 1000), circles_fine(0.2, 0.6, 2000);
  RngStream rng(6, 0);
  for (int i = 0; i < 50; ++i) {
    const Point x = make_point(
        {4.0 * rng.next_double() - 1.5, 3.0 * rng.next_double() - 1.0});
    CHECK(std::abs(moons->posterior(x) - fine.posterior(x)) < 1e-4);
    CHECK(std::abs(circles_base.posterior(x) - circles_fine.posterior(x)) <
          1e-4);
  }
}

TEST_CASE("circles posterior at the center follows the closed ratio") {
  const auto circles = default_circles();
  // All inner-arc points are at distance lambda, all outer at 1; the ratio
  // collapses to sigma((1 - lambda^2) / (2 sigma^2)).
  CHECK(circles->posterior(make_point({0.0, 0.0})) ==
        doctest::Approx(0.9996646498695336).epsilon(1e-9));
}

TEST_CASE("monte carlo risk of the bayes rule matches the closed form") {
  const auto model = default_two_gaussians();
  const auto bayes = bayes_classifier(model);
  const Dataset data = sample(*model, 100000, RngStream(8, 0));
  const RiskEstimate est = estimate_risk(*bayes, Loss::zero_one(), data);
  const double truth = gaussian_bayes_risk(*model);
  CHECK(std::abs(est.value - truth) <
        3.0 * std::sqrt(truth * (1.0 - truth) / 100000.0));
}

TEST_CASE("discrete posterior is a table lookup and rejects off-grid points") {
  const auto model = two_point_model();
  CHECK(model->posterior(make_point({0.0})) == doctest::Approx(0.1));
  CHECK(model->posterior(make_point({2.0})) == doctest::Approx(0.9));
  CHECK_THROWS_AS(model->posterior(make_point({1.0})), std::invalid_argument);
}

TEST_CASE("exact risks: no recourse means R_Q equals R_P") {
  const auto model = three_point_model();
  const auto bayes = bayes_classifier(model);
  const auto policy =
      grid_policy(model, bayes, AcceptanceFunction::constant_p(0.0));
  const ExactRisks risks = exact_risks_discrete(
      *model, *bayes, policy, ResponseModel::compliant(), Loss::zero_one());
  CHECK(risks.r_q == doctest::Approx(risks.r_p).epsilon(1e-15));
}

TEST_CASE("exact risks: defiant two-point enumeration by hand") {
  const auto model = two_point_model();
  const auto bayes = bayes_classifier(model);
  const auto policy = grid_policy(model, bayes, AcceptanceFunction::always());
  const ExactRisks risks = exact_risks_discrete(
      *model, *bayes, policy, ResponseModel::defiant(), Loss::zero_one());
  // R_P = P(x-,+1) + P(x+,-1) = 0.1. Moving x- to x+ leaves its label law
  // Bernoulli(0.1), so the moved mass contributes 0.45 and R_Q = 0.5.
  CHECK(risks.r_p == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(risks.r_q == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(theorem31_rhs(ResponseCase::defiant, risks.decomposition, risks.r_p) ==
        doctest::Approx(risks.r_q).epsilon(1e-12));
}

TEST_CASE("exact risks: compliant case matches the closed identity") {
  const auto model = three_point_model();
  const auto bayes = bayes_classifier(model);
  const auto policy = grid_policy(model, bayes, AcceptanceFunction::always());
  const ExactRisks risks = exact_risks_discrete(
      *model, *bayes, policy, ResponseModel::compliant(), Loss::zero_one());
  CHECK(theorem31_rhs(ResponseCase::compliant, risks.decomposition,
                      risks.r_p) == doctest::Approx(risks.r_q).epsilon(1e-12));
}

TEST_CASE("sample requires n >= 1") {
  CHECK_THROWS_AS(sample(*default_two_gaussians(), 0, RngStream(0, 0)),
                  std::invalid_argument);
}
