#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "recsim/experiment.hpp"
#include "recsim/risk.hpp"

using namespace recsim;

namespace {

class AlwaysPositive final : public Classifier {
 public:
  double predict_proba(const Point&) const override { return 1.0; }
  std::string family() const override { return "always-positive"; }
};

ClassifierPtr logistic_from(const Eigen::VectorXd& theta, double theta0) {
  return std::make_shared<LogisticRegression>(LinearModel{theta, theta0},
                                              nlohmann::json{});
}

// A discrete model whose Bayes classifier maps its single negative point
// onto a posterior-1/2 boundary point; masses chosen so exact expectations
// are short rationals.
std::shared_ptr<DiscreteGridModel> boundary_model() {
  std::vector<Point> points{make_point({0.0}), make_point({1.0}),
                            make_point({2.0})};
  std::vector<std::array<double, 2>> probs{
      {0.36, 0.04}, {0.10, 0.10}, {0.04, 0.36}};
  return std::make_shared<DiscreteGridModel>(points, probs);
}

PreparedPolicy discrete_policy(const std::shared_ptr<DiscreteGridModel>& model,
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

struct GaussianRun {
  Dataset data;
  std::vector<Sample> samples;
  ClassifierPtr bayes;
  std::shared_ptr<TwoGaussians> model;
};

GaussianRun gaussian_run(ResponseCase response_case, std::size_t n,
                         std::uint64_t seed) {
  GaussianRun run;
  run.model = default_two_gaussians();
  run.bayes = bayes_classifier(run.model);
  run.data = sample(*run.model, n, RngStream(seed, 0));
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;
  run.samples = apply_recourse(policy, run.bayes, *run.model,
                               response_case == ResponseCase::defiant
                                   ? ResponseModel::defiant()
                                   : ResponseModel::compliant(),
                               run.data, RngStream(seed, 1));
  return run;
}

}  // namespace

TEST_CASE("estimate_risk: constant +1 rule on balanced labels is 1/2") {
  const auto model = default_two_gaussians();
  const Dataset data = sample(*model, 50000, RngStream(33, 0));
  const AlwaysPositive rule;
  const RiskEstimate est = estimate_risk(rule, Loss::zero_one(), data);
  CHECK(std::abs(est.value - 0.5) < 3.0 * est.stderr_);
  CHECK(est.stderr_ ==
        doctest::Approx(std::sqrt(est.value * (1 - est.value) / 50000.0)));
}

TEST_CASE("theorem31_rhs reproduces the closed gaussian values") {
  // With r == 1 the decomposition is available in closed form:
  // P(f=-1) = 1/2, P(f=-1, Y=+1) = R/2, P(f=-1, Y=-1) = (1-R)/2.
  const double r = 0.12410653949496181;
  Decomposition terms;
  terms.b1_fneg = 0.5;
  terms.b1_fneg_ypos = 0.5 * r;
  terms.b1_fneg_yneg = 0.5 * (1.0 - r);
  CHECK(theorem31_rhs(ResponseCase::defiant, terms, r) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(theorem31_rhs(ResponseCase::compliant, terms, r) ==
        doctest::Approx(0.31205326974748093).epsilon(1e-12));
  // No recourse in the negative class: both cases collapse to R_P.
  Decomposition none;
  CHECK(theorem31_rhs(ResponseCase::defiant, none, r) == doctest::Approx(r));
  CHECK(theorem31_rhs(ResponseCase::compliant, none, r) == doctest::Approx(r));
}

TEST_CASE("theorem 3.1 identity on paired samples, both cases") {
  for (const ResponseCase response_case :
       {ResponseCase::defiant, ResponseCase::compliant}) {
    const GaussianRun run = gaussian_run(response_case, 50000, 34);
    const TheoremCheck check = check_theorem31_identity(
        response_case, run.data, run.samples, *run.bayes);
    CHECK(check.verdict == TheoremCheck::Verdict::holds);
    if (response_case == ResponseCase::defiant) {
      CHECK(check.diff == 0.0);  // per-sample identity with kept labels
      CHECK(std::abs(check.lhs - 0.5) < 0.01);
    } else {
      CHECK(std::abs(check.lhs - 0.31205326974748093) < 0.01);
    }
  }
}

TEST_CASE("theorem41_check: intervals, conditions, and hypotheses") {
  const double r = 0.12410653949496181;
  Decomposition terms;
  terms.b1_fneg = 0.5;
  terms.b1_fneg_ypos = 0.5 * r;
  terms.b1_fneg_yneg = 0.5 * (1.0 - r);
  terms.fpos_yneg = 0.5 * r;  // false positives of the Bayes rule
  const AlwaysPositive dummy;

  // epsilon = 0 collapses to the exact compliant identity.
  const TheoremCheck collapsed =
      theorem41_check(ResponseCase::compliant, dummy, terms, r, 0.0);
  CHECK(collapsed.rhs_lower == doctest::Approx(collapsed.rhs_upper));
  CHECK(collapsed.rhs_lower ==
        doctest::Approx(theorem31_rhs(ResponseCase::compliant, terms, r))
            .epsilon(1e-12));

  const TheoremCheck wide =
      theorem41_check(ResponseCase::compliant, dummy, terms, r, 0.1);
  CHECK(wide.rhs_upper - wide.rhs_lower == doctest::Approx(0.2 * 0.5));
  CHECK(wide.condition_holds);  // P(Y=-1 | B=1, f=-1) = 1-R >= 0.6

  const TheoremCheck defiant =
      theorem41_check(ResponseCase::defiant, dummy, terms, r, 0.0);
  CHECK(defiant.condition_holds);
  CHECK(defiant.rhs_lower == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(
      theorem41_check(ResponseCase::compliant, dummy, terms, r, 0.6),
      std::invalid_argument);
}

TEST_CASE("theorem 4.1 paired checks for an arbitrary trained classifier") {
  const auto model = default_two_gaussians();
  const Dataset train = sample(*model, 3000, RngStream(35, 0));
  const Dataset test = sample(*model, 20000, RngStream(35, 1));
  TrainConfig config;
  config.family = TrainConfig::Family::logistic_regression;
  const ClassifierPtr lr = fit(config, train);

  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;
  policy.acceptance = AcceptanceFunction::gaussian_kernel(0.5);
  PreparedPolicy prepared(policy, lr, train, Exec::serial);

  const auto defiant = apply_recourse(prepared, *model,
                                      ResponseModel::defiant(), test,
                                      RngStream(35, 2));
  const TheoremCheck check_def = check_theorem41_defiant(test, defiant, *lr);
  CHECK(check_def.verdict == TheoremCheck::Verdict::holds);
  CHECK(check_def.condition_holds);  // accurate classifier

  const auto compliant = apply_recourse(prepared, *model,
                                        ResponseModel::compliant(), test,
                                        RngStream(35, 3));
  double eps = 0.0;
  std::size_t moved = 0;
  for (const auto& s : compliant)
    if (s.b) {
      eps += std::abs(0.5 - model->posterior(s.x));
      ++moved;
    }
  eps /= static_cast<double>(moved);
  const TheoremCheck check_comp =
      check_theorem41_compliant(test, compliant, *lr, eps);
  CHECK(check_comp.verdict == TheoremCheck::Verdict::holds);
}

TEST_CASE("inverted classifier: risk decreases and condition flags it") {
  const auto model = default_two_gaussians();
  // Anti-calibrated: predicts the complement of the Bayes posterior.
  const ClassifierPtr inverted = logistic_from(-model->theta(), 0.0);
  const Dataset test = sample(*model, 30000, RngStream(36, 0));
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;
  const auto samples = apply_recourse(policy, inverted, *model,
                                      ResponseModel::defiant(), test,
                                      RngStream(36, 1));
  const TheoremCheck check = check_theorem41_defiant(test, samples, *inverted);
  CHECK(check.verdict == TheoremCheck::Verdict::holds);  // identity still exact
  CHECK_FALSE(check.condition_holds);
  const RiskEstimate r_p = estimate_risk(*inverted, Loss::zero_one(), test);
  const RiskEstimate r_q = estimate_risk_post(*inverted, Loss::zero_one(),
                                              samples);
  CHECK(r_q.value < r_p.value);
}

TEST_CASE("theorem42_check resolves both directions of the iff") {
  const auto model = default_two_gaussians();
  const Dataset test = sample(*model, 30000, RngStream(37, 0));
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;

  // Well-fit scorer: conditional loss below ln 2, risk increases.
  const ClassifierPtr good = logistic_from(model->theta(), 0.0);
  const auto good_samples = apply_recourse(policy, good, *model,
                                           ResponseModel::compliant(), test,
                                           RngStream(37, 1));
  const TheoremCheck good_check =
      theorem42_check(*good, Loss::cross_entropy(), test, good_samples);
  CHECK(good_check.lhs < good_check.rhs_lower);
  CHECK(good_check.condition_holds);
  CHECK(good_check.verdict == TheoremCheck::Verdict::holds);
  CHECK(good_check.diff > 0.0);

  // Anti-calibrated scorer: conditional loss above ln 2, risk decreases.
  const ClassifierPtr bad = logistic_from(-model->theta(), 0.0);
  const auto bad_samples = apply_recourse(policy, bad, *model,
                                          ResponseModel::compliant(), test,
                                          RngStream(37, 2));
  const TheoremCheck bad_check =
      theorem42_check(*bad, Loss::cross_entropy(), test, bad_samples);
  CHECK(bad_check.lhs > bad_check.rhs_lower);
  CHECK_FALSE(bad_check.condition_holds);
  CHECK(bad_check.verdict == TheoremCheck::Verdict::holds);
  CHECK(bad_check.diff < 0.0);
}

TEST_CASE("theorem42_check near the boundary classifier is an equality") {
  // g just below 1/2 on a halfspace; counterfactuals land where g = 1/2.
  const auto model = default_two_gaussians();
  const ClassifierPtr flat = logistic_from(make_point({1e-5, 1e-5}), 0.0);
  const Dataset test = sample(*model, 20000, RngStream(38, 0));
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;
  const auto samples = apply_recourse(policy, flat, *model,
                                      ResponseModel::compliant(), test,
                                      RngStream(38, 1));
  const TheoremCheck check =
      theorem42_check(*flat, Loss::cross_entropy(), test, samples);
  CHECK(check.lhs == doctest::Approx(std::log(2.0)).epsilon(1e-4));
  CHECK(std::abs(check.diff) < 1e-4);
}

TEST_CASE("theorem42_check rejects binary losses and empty events") {
  const auto model = default_two_gaussians();
  const Dataset test = sample(*model, 100, RngStream(39, 0));
  std::vector<Sample> untouched;
  for (const auto& [x, y] : test) untouched.push_back({x, x, y, false});
  const ClassifierPtr good = logistic_from(model->theta(), 0.0);
  CHECK_THROWS_AS(theorem42_check(*good, Loss::zero_one(), test, untouched),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      theorem42_check(*good, Loss::cross_entropy(), test, untouched),
      std::invalid_argument);
}

TEST_CASE("lemma_b1_rhs: r = 0 reduces to the empirical risk") {
  const auto model = default_two_gaussians();
  const auto bayes = bayes_classifier(model);
  const Dataset data = sample(*model, 5000, RngStream(40, 0));
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;
  policy.acceptance = AcceptanceFunction::constant_p(0.0);
  PreparedPolicy prepared(policy, bayes, data, Exec::serial);
  const double rhs = lemma_b1_rhs(ResponseCase::compliant, *bayes,
                                  Loss::zero_one(), *model, data, prepared);
  const RiskEstimate r_p = estimate_risk(*bayes, Loss::zero_one(), data);
  CHECK(rhs == doctest::Approx(r_p.value).epsilon(1e-12));
}

TEST_CASE("lemma_b1_rhs matches the compliant closed form on gaussians") {
  const auto model = default_two_gaussians();
  const auto bayes = bayes_classifier(model);
  const Dataset data = sample(*model, 50000, RngStream(41, 0));
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;
  PreparedPolicy prepared(policy, bayes, data, Exec::serial);
  const double rhs = lemma_b1_rhs(ResponseCase::compliant, *bayes,
                                  Loss::zero_one(), *model, data, prepared);
  CHECK(std::abs(rhs - 0.31205326974748093) < 0.01);

  const double rhs_def = lemma_b1_rhs(ResponseCase::defiant, *bayes,
                                      Loss::zero_one(), *model, data, prepared);
  CHECK(std::abs(rhs_def - 0.5) < 0.01);
}

TEST_CASE("lemma_b1_rhs equals exact enumeration on weighted grid data") {
  const auto model = boundary_model();
  const auto bayes = bayes_classifier(model);
  const auto policy =
      discrete_policy(model, bayes, AcceptanceFunction::always());
  // Data listing each (x, y) cell with multiplicity proportional to its
  // probability turns the Monte Carlo mean into the exact expectation.
  Dataset data;
  const int scale = 50;  // masses are multiples of 0.02
  for (std::size_t i = 0; i < model->size(); ++i) {
    for (int c = 0; c < static_cast<int>(std::round(
                            model->joint(i, Label::negative) * scale));
         ++c)
      data.push_back({model->point(i), Label::negative});
    for (int c = 0; c < static_cast<int>(std::round(
                            model->joint(i, Label::positive) * scale));
         ++c)
      data.push_back({model->point(i), Label::positive});
  }
  REQUIRE(data.size() == 50);
  for (const ResponseCase response_case :
       {ResponseCase::defiant, ResponseCase::compliant}) {
    const ExactRisks exact = exact_risks_discrete(
        *model, *bayes, policy,
        response_case == ResponseCase::defiant ? ResponseModel::defiant()
                                               : ResponseModel::compliant(),
        Loss::zero_one());
    const double rhs = lemma_b1_rhs(response_case, *bayes, Loss::zero_one(),
                                    *model, data, policy);
    CHECK(rhs == doctest::Approx(exact.r_q).epsilon(1e-12));
  }
}

TEST_CASE("monte carlo estimators agree with exact enumeration at 3 sigma") {
  const auto model = boundary_model();
  const auto bayes = bayes_classifier(model);
  const auto policy =
      discrete_policy(model, bayes, AcceptanceFunction::constant_p(0.7));
  const std::size_t n = 200000;
  const Dataset data = sample(*model, n, RngStream(42, 0));
  for (const ResponseCase response_case :
       {ResponseCase::defiant, ResponseCase::compliant}) {
    const ResponseModel response = response_case == ResponseCase::defiant
                                       ? ResponseModel::defiant()
                                       : ResponseModel::compliant();
    const ExactRisks exact = exact_risks_discrete(*model, *bayes, policy,
                                                  response, Loss::zero_one());
    const auto samples =
        apply_recourse(policy, *model, response, data, RngStream(42, 1));
    const RiskEstimate r_p = estimate_risk(*bayes, Loss::zero_one(), data);
    const RiskEstimate r_q =
        estimate_risk_post(*bayes, Loss::zero_one(), samples);
    CHECK(std::abs(r_p.value - exact.r_p) < 3.0 * r_p.stderr_);
    CHECK(std::abs(r_q.value - exact.r_q) < 3.0 * r_q.stderr_);
    const Decomposition d = decompose(data, samples, *bayes);
    CHECK(std::abs(d.b1_fneg - exact.decomposition.b1_fneg) <
          3.0 * binomial_stderr(exact.decomposition.b1_fneg, n));
    CHECK(std::abs(d.b1_fneg_ypos - exact.decomposition.b1_fneg_ypos) <
          3.0 * binomial_stderr(exact.decomposition.b1_fneg_ypos, n));
  }
}

TEST_CASE("linear_in_p_fit: validation and closed-form endpoints") {
  const auto model = default_two_gaussians();
  const auto bayes = bayes_classifier(model);
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::hyperplane_projection;

  CHECK_THROWS_AS(linear_in_p_fit(bayes, *model, policy, {0.0}, 100,
                                  ResponseModel::compliant(), RngStream(43, 0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(linear_in_p_fit(bayes, *model, policy, {0.0, 0.5, 1.5}, 100,
                                  ResponseModel::compliant(), RngStream(43, 0)),
                  std::invalid_argument);

  const LinearPFit fit = linear_in_p_fit(
      bayes, *model, policy, {0.0, 0.25, 0.5, 0.75, 1.0}, 50000,
      ResponseModel::compliant(), RngStream(43, 1));
  CHECK(fit.r_squared > 0.99);
  CHECK(std::abs(fit.slope - 0.18794673025251912) < 0.01);
  // The p = 0 endpoint is the paired R_P estimate exactly.
  CHECK(fit.r_q.front().value == doctest::Approx(fit.r_p_hat.value));
  CHECK(std::abs(fit.intercept - fit.r_p_hat.value) < 0.005);
  CHECK(std::abs(fit.slope - (fit.r_q1_hat.value - fit.r_p_hat.value)) < 0.01);
}

TEST_CASE("decompose validates alignment") {
  const auto model = default_two_gaussians();
  const Dataset data = sample(*model, 10, RngStream(44, 0));
  std::vector<Sample> wrong_size(3);
  const AlwaysPositive rule;
  CHECK_THROWS_AS(decompose(data, wrong_size, rule), std::invalid_argument);
}
