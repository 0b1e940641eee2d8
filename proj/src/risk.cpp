#include "recsim/risk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recsim/gen_models.hpp"

namespace recsim {

namespace {

// Loss of the classifier's prediction at x: thresholded for binary losses,
// probabilistic otherwise.
double point_loss(const Classifier& classifier, const Loss& loss,
                  const Point& x, Label y) {
  if (loss.binary_predictions())
    return loss(static_cast<double>(to_sign(classifier.predict(x))), y);
  return loss(classifier.predict_proba(x), y);
}

RiskEstimate estimate_from_losses(const Loss& loss,
                                  const std::vector<double>& values) {
  const MeanStderr ms = mean_stderr(values);
  RiskEstimate est{ms.mean, ms.stderr_, ms.n};
  if (loss.kind() == Loss::Kind::zero_one)
    est.stderr_ = binomial_stderr(est.value, est.n);
  return est;
}

TheoremCheck identity_check(std::string id, double lhs, double rhs,
                            const std::vector<double>& per_sample_diff) {
  const MeanStderr d = mean_stderr(per_sample_diff);
  TheoremCheck check;
  check.theorem_id = std::move(id);
  check.lhs = lhs;
  check.rhs_lower = rhs;
  check.rhs_upper = rhs;
  check.diff = d.mean;
  check.diff_stderr = d.stderr_;
  check.tolerance = 3.0;
  check.condition_holds = true;
  const double band = std::max(3.0 * d.stderr_, 1e-12);
  check.verdict = std::abs(d.mean) <= band ? TheoremCheck::Verdict::holds
                                           : TheoremCheck::Verdict::fails;
  return check;
}

}  // namespace

nlohmann::json Decomposition::to_json() const {
  return {{"p_b1_fneg", b1_fneg},
          {"p_b1_fneg_yneg", b1_fneg_yneg},
          {"p_b1_fneg_ypos", b1_fneg_ypos},
          {"p_fpos_yneg", fpos_yneg},
          {"p_b0_fneg_ypos", b0_fneg_ypos},
          {"n", n}};
}

nlohmann::json RiskReport::to_json() const {
  return {{"r_p", r_p.value},
          {"r_p_stderr", r_p.stderr_},
          {"r_q", r_q.value},
          {"r_q_stderr", r_q.stderr_},
          {"n", r_p.n},
          {"decomposition", decomposition.to_json()}};
}

const char* verdict_name(TheoremCheck::Verdict v) {
  switch (v) {
    case TheoremCheck::Verdict::holds: return "holds";
    case TheoremCheck::Verdict::fails: return "fails";
    case TheoremCheck::Verdict::inconclusive: return "inconclusive-at-N";
  }
  return "?";
}

nlohmann::json TheoremCheck::to_json() const {
  nlohmann::json j{{"theorem", theorem_id},
                   {"lhs", lhs},
                   {"rhs_lower", rhs_lower},
                   {"rhs_upper", rhs_upper},
                   {"condition_holds", condition_holds},
                   {"diff", diff},
                   {"diff_stderr", diff_stderr},
                   {"tolerance_sigmas", tolerance},
                   {"verdict", verdict_name(verdict)}};
  if (!details.is_null()) j["details"] = details;
  return j;
}

// ---------------------------------------------------------------------------

RiskEstimate estimate_risk(const Classifier& classifier, const Loss& loss,
                           std::span<const DataPoint> data, Exec exec) {
  if (data.empty()) throw std::invalid_argument("estimate_risk: no samples");
  std::vector<double> losses(data.size());
  parallel_for(exec, data.size(), [&](std::size_t i) {
    losses[i] = point_loss(classifier, loss, data[i].first, data[i].second);
  });
  return estimate_from_losses(loss, losses);
}

RiskEstimate estimate_risk_post(const Classifier& classifier, const Loss& loss,
                                std::span<const Sample> samples, Exec exec) {
  if (samples.empty())
    throw std::invalid_argument("estimate_risk_post: no samples");
  std::vector<double> losses(samples.size());
  parallel_for(exec, samples.size(), [&](std::size_t i) {
    losses[i] = point_loss(classifier, loss, samples[i].x, samples[i].y);
  });
  return estimate_from_losses(loss, losses);
}

Decomposition decompose(std::span<const DataPoint> data,
                        std::span<const Sample> samples,
                        const Classifier& classifier) {
  if (data.size() != samples.size())
    throw std::invalid_argument("decompose: data/samples misaligned");
  Decomposition d;
  d.n = data.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& [x0, y] = data[i];
    const bool fneg = classifier.predict(x0) == Label::negative;
    const bool b = samples[i].b;
    const bool ypos = y == Label::positive;
    if (b && fneg) {
      d.b1_fneg += 1.0;
      (ypos ? d.b1_fneg_ypos : d.b1_fneg_yneg) += 1.0;
    }
    if (!fneg && !ypos) d.fpos_yneg += 1.0;
    if (!b && fneg && ypos) d.b0_fneg_ypos += 1.0;
  }
  const double n = static_cast<double>(d.n);
  d.b1_fneg /= n;
  d.b1_fneg_yneg /= n;
  d.b1_fneg_ypos /= n;
  d.fpos_yneg /= n;
  d.b0_fneg_ypos /= n;
  return d;
}

// ---------------------------------------------------------------------------

double theorem31_rhs(ResponseCase response_case, const Decomposition& terms,
                     double r_p) {
  if (response_case == ResponseCase::defiant)
    return terms.b1_fneg_yneg - terms.b1_fneg_ypos + r_p;
  return 0.5 * terms.b1_fneg - terms.b1_fneg_ypos + r_p;
}

TheoremCheck theorem41_check(ResponseCase response_case,
                             const Classifier& classifier,
                             const Decomposition& terms, double r_p,
                             double epsilon) {
  if (epsilon < 0.0 || epsilon > 0.5)
    throw std::invalid_argument(
        "theorem41_check: epsilon outside [0, 1/2] is outside the theorem "
        "hypothesis");
  TheoremCheck check;
  check.tolerance = 3.0;
  check.verdict = TheoremCheck::Verdict::holds;
  const double cond_prob =
      terms.b1_fneg > 0.0 ? terms.b1_fneg_yneg / terms.b1_fneg : 1.0;
  check.details = {{"p_yneg_given_b1_fneg", cond_prob},
                   {"epsilon", epsilon},
                   {"continuous_family", classifier.continuous()}};
  if (!classifier.continuous())
    check.details["note"] =
        "family is not continuous; the theorem's continuity hypothesis is "
        "not met and the numbers are reported for reference";
  if (response_case == ResponseCase::defiant) {
    check.theorem_id = "T4.1a";
    const double rhs = theorem31_rhs(ResponseCase::defiant, terms, r_p);
    check.lhs = rhs;
    check.rhs_lower = rhs;
    check.rhs_upper = rhs;
    check.condition_holds = cond_prob >= 0.5;
  } else {
    check.theorem_id = "T4.1b";
    const double base = terms.fpos_yneg + terms.b0_fneg_ypos;
    check.rhs_lower = (0.5 - epsilon) * terms.b1_fneg + base;
    check.rhs_upper = (0.5 + epsilon) * terms.b1_fneg + base;
    check.lhs = check.rhs();
    check.condition_holds = cond_prob >= 0.5 + epsilon;
  }
  return check;
}

TheoremCheck theorem42_check(const Classifier& g, const Loss& loss,
                             std::span<const DataPoint> data,
                             std::span<const Sample> samples) {
  if (loss.binary_predictions())
    throw std::invalid_argument(
        "theorem42_check: needs a probabilistic loss symmetric at 1/2");
  if (data.size() != samples.size())
    throw std::invalid_argument("theorem42_check: data/samples misaligned");

  const double c = loss.boundary_value();
  std::vector<double> diff(data.size());
  double cond_sum = 0.0;
  std::size_t cond_n = 0;
  std::vector<double> lp(data.size()), lq(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& [x0, y] = data[i];
    lp[i] = loss(g.predict_proba(x0), y);
    lq[i] = loss(g.predict_proba(samples[i].x), samples[i].y);
    diff[i] = lq[i] - lp[i];
    if (samples[i].b && g.predict(x0) == Label::negative) {
      cond_sum += lp[i];
      ++cond_n;
    }
  }
  if (cond_n == 0)
    throw std::invalid_argument(
        "theorem42_check: empty conditioning event {f(X0)=-1, B=1}");

  const double cond_mean = cond_sum / static_cast<double>(cond_n);
  const MeanStderr d = mean_stderr(diff);
  const MeanStderr rp = mean_stderr(lp);
  const MeanStderr rq = mean_stderr(lq);

  TheoremCheck check;
  check.theorem_id = "T4.2";
  check.lhs = cond_mean;
  check.rhs_lower = c;
  check.rhs_upper = c;
  check.condition_holds = cond_mean <= c;
  check.diff = d.mean;
  check.diff_stderr = d.stderr_;
  check.tolerance = 3.0;
  check.details = {{"r_p", rp.mean},
                   {"r_q", rq.mean},
                   {"conditional_loss", cond_mean},
                   {"boundary_value", c},
                   {"n_conditioning", cond_n}};
  if (std::abs(d.mean) > 3.0 * d.stderr_) {
    const bool increased = d.mean > 0.0;
    check.verdict = (increased == check.condition_holds)
                        ? TheoremCheck::Verdict::holds
                        : TheoremCheck::Verdict::fails;
  } else {
    check.verdict = TheoremCheck::Verdict::inconclusive;
  }
  return check;
}

double lemma_b1_rhs(ResponseCase response_case, const Classifier& classifier,
                    const Loss& loss, const PosteriorModel& model,
                    std::span<const DataPoint> data,
                    const PreparedPolicy& policy) {
  if (!loss.binary_predictions())
    throw std::invalid_argument(
        "lemma_b1_rhs: needs a binary-prediction loss with l(y,y)=0");
  const double loss_fp = loss(+1.0, Label::negative);
  std::vector<double> values(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& [x0, y] = data[i];
    const Point cf = policy.counterfactual(x0);
    const double r = policy.accept_prob(x0, cf);
    double first;
    if (response_case == ResponseCase::defiant)
      first = r * (y == Label::negative ? 1.0 : 0.0) * loss_fp;
    else
      first = r * (1.0 - model.posterior(cf)) * loss_fp;
    const double second =
        (1.0 - r) *
        loss(static_cast<double>(to_sign(classifier.predict(x0))), y);
    values[i] = first + second;
  }
  return compensated_mean(values);
}

// ---------------------------------------------------------------------------

TheoremCheck check_theorem31_identity(ResponseCase response_case,
                                      std::span<const DataPoint> data,
                                      std::span<const Sample> samples,
                                      const Classifier& classifier) {
  const Loss loss = Loss::zero_one();
  std::vector<double> diff(data.size());
  std::vector<double> lq(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& [x0, y] = data[i];
    const bool fneg = classifier.predict(x0) == Label::negative;
    const bool b = samples[i].b;
    const double l_p = point_loss(classifier, loss, x0, y);
    lq[i] = point_loss(classifier, loss, samples[i].x, samples[i].y);
    double rhs_i = l_p;
    if (b && fneg) {
      if (response_case == ResponseCase::defiant)
        rhs_i += (y == Label::negative ? 1.0 : -1.0);
      else
        rhs_i += 0.5 - (y == Label::positive ? 1.0 : 0.0);
    }
    diff[i] = lq[i] - rhs_i;
  }
  const double r_q = compensated_mean(lq);
  auto check = identity_check(
      response_case == ResponseCase::defiant ? "T3.1a" : "T3.1b", r_q,
      r_q - mean_stderr(diff).mean, diff);
  return check;
}

TheoremCheck check_theorem41_defiant(std::span<const DataPoint> data,
                                     std::span<const Sample> samples,
                                     const Classifier& classifier) {
  TheoremCheck check = check_theorem31_identity(ResponseCase::defiant, data,
                                                samples, classifier);
  check.theorem_id = "T4.1a";
  const Decomposition terms = decompose(data, samples, classifier);
  const double cond_prob =
      terms.b1_fneg > 0.0 ? terms.b1_fneg_yneg / terms.b1_fneg : 1.0;
  check.condition_holds = cond_prob >= 0.5;
  check.details = {{"p_yneg_given_b1_fneg", cond_prob},
                   {"continuous_family", classifier.continuous()}};
  return check;
}

TheoremCheck check_theorem41_compliant(std::span<const DataPoint> data,
                                       std::span<const Sample> samples,
                                       const Classifier& classifier,
                                       double epsilon) {
  if (epsilon < 0.0 || epsilon > 0.5)
    throw std::invalid_argument("check_theorem41_compliant: bad epsilon");
  const Loss loss = Loss::zero_one();
  std::vector<double> diff(data.size());
  std::vector<double> lq(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& [x0, y] = data[i];
    const bool fneg = classifier.predict(x0) == Label::negative;
    const bool b = samples[i].b;
    const bool ypos = y == Label::positive;
    lq[i] = point_loss(classifier, loss, samples[i].x, samples[i].y);
    double center_i = 0.0;
    if (b && fneg) center_i += 0.5;
    if (!fneg && !ypos) center_i += 1.0;
    if (!b && fneg && ypos) center_i += 1.0;
    diff[i] = lq[i] - center_i;
  }
  const Decomposition terms = decompose(data, samples, classifier);
  const MeanStderr d = mean_stderr(diff);
  const double r_q = compensated_mean(lq);
  const double half_width = epsilon * terms.b1_fneg;

  TheoremCheck check;
  check.theorem_id = "T4.1b";
  check.lhs = r_q;
  check.rhs_lower = r_q - d.mean - half_width;
  check.rhs_upper = r_q - d.mean + half_width;
  check.diff = d.mean;
  check.diff_stderr = d.stderr_;
  check.tolerance = 3.0;
  const double cond_prob =
      terms.b1_fneg > 0.0 ? terms.b1_fneg_yneg / terms.b1_fneg : 1.0;
  check.condition_holds = cond_prob >= 0.5 + epsilon;
  const double slack = half_width + std::max(3.0 * d.stderr_, 1e-12);
  check.verdict = std::abs(d.mean) <= slack ? TheoremCheck::Verdict::holds
                                            : TheoremCheck::Verdict::fails;
  check.details = {{"epsilon", epsilon},
                   {"p_yneg_given_b1_fneg", cond_prob},
                   {"continuous_family", classifier.continuous()}};
  return check;
}

// ---------------------------------------------------------------------------

nlohmann::json LinearPFit::to_json() const {
  nlohmann::json series = nlohmann::json::array();
  for (std::size_t i = 0; i < p_grid.size(); ++i)
    series.push_back({{"p", p_grid[i]},
                      {"r_q", r_q[i].value},
                      {"stderr", r_q[i].stderr_}});
  return {{"intercept", intercept},
          {"slope", slope},
          {"r_squared", r_squared},
          {"r_p", r_p_hat.value},
          {"r_p_stderr", r_p_hat.stderr_},
          {"r_q1", r_q1_hat.value},
          {"r_q1_stderr", r_q1_hat.stderr_},
          {"series", series}};
}

LinearPFit linear_in_p_fit(ClassifierPtr classifier,
                           const GenerativeModel& model,
                           const RecoursePolicy& policy_base,
                           const std::vector<double>& p_grid, std::size_t n,
                           const ResponseModel& response, RngStream rng,
                           Exec exec) {
  std::vector<double> distinct = p_grid;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  if (distinct.size() < 3)
    throw std::invalid_argument(
        "linear_in_p_fit: need >= 3 distinct acceptance probabilities");
  for (double p : p_grid)
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("linear_in_p_fit: p outside [0,1]");

  const Dataset data = sample(model, n, rng.fork(0), exec);
  PreparedPolicy prepared(policy_base, classifier, data, exec);
  const Loss loss = Loss::zero_one();

  LinearPFit out;
  out.p_grid = p_grid;
  out.r_p_hat = estimate_risk(*classifier, loss, data, exec);

  std::vector<double> values;
  bool saw_one = false;
  for (std::size_t k = 0; k < p_grid.size(); ++k) {
    const auto policy =
        prepared.with_acceptance(AcceptanceFunction::constant_p(p_grid[k]));
    const auto samples =
        apply_recourse(policy, model, response, data, rng.fork(1 + k), exec);
    out.r_q.push_back(estimate_risk_post(*classifier, loss, samples, exec));
    values.push_back(out.r_q.back().value);
    if (p_grid[k] == 1.0) {
      out.r_q1_hat = out.r_q.back();
      saw_one = true;
    }
  }
  if (!saw_one) {
    const auto policy =
        prepared.with_acceptance(AcceptanceFunction::constant_p(1.0));
    const auto samples = apply_recourse(policy, model, response, data,
                                        rng.fork(1 + p_grid.size()), exec);
    out.r_q1_hat =
        estimate_risk_post(*classifier, loss, samples, exec);
  }

  const LineFit fit = fit_line(p_grid, values);
  out.intercept = fit.intercept;
  out.slope = fit.slope;
  out.r_squared = fit.r_squared;
  return out;
}

// ---------------------------------------------------------------------------

ExactRisks exact_risks_discrete(const DiscreteGridModel& model,
                                const Classifier& classifier,
                                const PreparedPolicy& policy,
                                const ResponseModel& response,
                                const Loss& loss) {
  auto pred_loss = [&](const Point& x, Label y) {
    return point_loss(classifier, loss, x, y);
  };

  ExactRisks out;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Point& x = model.point(i);
    const double p_neg = model.joint(i, Label::negative);
    const double p_pos = model.joint(i, Label::positive);
    const double mass = p_neg + p_pos;
    const double stay_loss =
        p_neg * pred_loss(x, Label::negative) + p_pos * pred_loss(x, Label::positive);
    out.r_p += stay_loss;

    if (classifier.predict(x) == Label::positive || mass == 0.0) {
      out.r_q += stay_loss;
      if (mass > 0.0) out.decomposition.fpos_yneg += p_neg;
      continue;
    }

    const Point cf = policy.counterfactual(x);
    const std::size_t cf_index = model.index_of(cf);  // off-grid target throws
    const double r = policy.accept_prob(x, cf);

    out.decomposition.b1_fneg += r * mass;
    out.decomposition.b1_fneg_yneg += r * p_neg;
    out.decomposition.b1_fneg_ypos += r * p_pos;
    out.decomposition.b0_fneg_ypos += (1.0 - r) * p_pos;

    const double q_pos = response.positive_prob(model.posterior_at(i),
                                                model.posterior_at(cf_index));
    const double moved_loss = q_pos * pred_loss(cf, Label::positive) +
                              (1.0 - q_pos) * pred_loss(cf, Label::negative);
    out.r_q += (1.0 - r) * stay_loss + r * mass * moved_loss;
  }
  return out;
}

}  // namespace recsim
