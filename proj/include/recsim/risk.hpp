#pragma once

#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "recsim/classifiers.hpp"
#include "recsim/loss.hpp"
#include "recsim/recourse.hpp"
#include "recsim/stats.hpp"
#include "recsim/types.hpp"

namespace recsim {

enum class ResponseCase { defiant, compliant };

inline const char* case_name(ResponseCase c) {
  return c == ResponseCase::defiant ? "defiant" : "compliant";
}

struct RiskEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

// Empirical frequencies of the joint events of (X0, Y, B, f(X0)) that the
// risk identities are phrased in: all measured on pre-recourse labels with
// the same B draws as the paired R_Q estimate.
struct Decomposition {
  double b1_fneg = 0.0;       // P(B=1, f(X0)=-1)
  double b1_fneg_yneg = 0.0;  // P(B=1, f(X0)=-1, Y=-1)
  double b1_fneg_ypos = 0.0;  // P(B=1, f(X0)=-1, Y=+1)
  double fpos_yneg = 0.0;     // P(f(X0)=+1, Y=-1)
  double b0_fneg_ypos = 0.0;  // P(B=0, f(X0)=-1, Y=+1)
  std::size_t n = 0;

  nlohmann::json to_json() const;
};

struct RiskReport {
  RiskEstimate r_p;
  RiskEstimate r_q;
  Decomposition decomposition;

  nlohmann::json to_json() const;
};

// Outcome of one theorem verification. Identities use the paired per-sample
// difference; claims that depend on MC-resolved signs report inconclusive
// when the data cannot distinguish them at 3 sigma.
struct TheoremCheck {
  enum class Verdict { holds, fails, inconclusive };

  std::string theorem_id;
  double lhs = 0.0;
  double rhs_lower = 0.0;
  double rhs_upper = 0.0;
  bool condition_holds = false;
  double diff = 0.0;
  double diff_stderr = 0.0;
  double tolerance = 0.0;
  Verdict verdict = Verdict::inconclusive;
  nlohmann::json details;

  double rhs() const { return 0.5 * (rhs_lower + rhs_upper); }
  bool passed() const { return verdict != Verdict::fails; }
  nlohmann::json to_json() const;
};

const char* verdict_name(TheoremCheck::Verdict v);

// --------------------------------------------------------------------------
// Estimators

// Mean loss of the classifier on pre-recourse pairs (x0, y); binomial
// standard error for 0/1 loss, plug-in otherwise.
RiskEstimate estimate_risk(const Classifier& classifier, const Loss& loss,
                           std::span<const DataPoint> data,
                           Exec exec = default_exec());

// Mean loss on post-recourse samples, evaluated at the realized features x.
RiskEstimate estimate_risk_post(const Classifier& classifier, const Loss& loss,
                                std::span<const Sample> samples,
                                Exec exec = default_exec());

// Joint event frequencies; `samples` must be aligned with `data`.
Decomposition decompose(std::span<const DataPoint> data,
                        std::span<const Sample> samples,
                        const Classifier& classifier);

// --------------------------------------------------------------------------
// Closed identities

// Risk-with-recourse value implied by the exact risk identity for the
// Bayes-optimal classifier (0/1 loss).
double theorem31_rhs(ResponseCase response_case, const Decomposition& terms,
                     double r_p);

// Defiant: exact identity plus the risk-increase condition
// P(Y=-1 | B=1, f=-1) >= 1/2. Compliant: the [lower, upper] interval under
// the measured boundary deviation epsilon plus the condition
// P(Y=-1 | B=1, f=-1) >= 1/2 + epsilon. Requires epsilon <= 1/2.
TheoremCheck theorem41_check(ResponseCase response_case,
                             const Classifier& classifier,
                             const Decomposition& terms, double r_p,
                             double epsilon);

// Surrogate-loss iff: estimates E[l(g(X0),Y) | f(X0)=-1, B=1] and both
// risks; the verdict reports whether sign(R_Q - R_P) agrees with the
// condition whenever the sign is resolved at 3 sigma.
TheoremCheck theorem42_check(const Classifier& g, const Loss& loss,
                             std::span<const DataPoint> data,
                             std::span<const Sample> samples);

// General-loss oracle for the risk with recourse (binary predictions,
// l(y,y) = 0): Monte Carlo evaluation of the closed expectation.
double lemma_b1_rhs(ResponseCase response_case, const Classifier& classifier,
                    const Loss& loss, const PosteriorModel& model,
                    std::span<const DataPoint> data,
                    const PreparedPolicy& policy);

// --------------------------------------------------------------------------
// Identity checks on paired samples (per-sample differences)

// |R_Q_hat - theorem31_rhs| as a paired statistic; holds within 3 sigma.
TheoremCheck check_theorem31_identity(ResponseCase response_case,
                                      std::span<const DataPoint> data,
                                      std::span<const Sample> samples,
                                      const Classifier& classifier);

// Defiant exact identity for arbitrary classifiers.
TheoremCheck check_theorem41_defiant(std::span<const DataPoint> data,
                                     std::span<const Sample> samples,
                                     const Classifier& classifier);

// Interval containment for the compliant case with measured epsilon.
TheoremCheck check_theorem41_compliant(std::span<const DataPoint> data,
                                       std::span<const Sample> samples,
                                       const Classifier& classifier,
                                       double epsilon);

// --------------------------------------------------------------------------
// Linear dependence of R_Q on a constant acceptance probability p.

struct LinearPFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::vector<double> p_grid;
  std::vector<RiskEstimate> r_q;
  RiskEstimate r_p_hat;   // paired estimate of R_P on the same draws
  RiskEstimate r_q1_hat;  // paired estimate of R_Q at p = 1

  nlohmann::json to_json() const;
};

LinearPFit linear_in_p_fit(ClassifierPtr classifier,
                           const GenerativeModel& model,
                           const RecoursePolicy& policy_base,
                           const std::vector<double>& p_grid, std::size_t n,
                           const ResponseModel& response, RngStream rng,
                           Exec exec = default_exec());

// --------------------------------------------------------------------------
// Brute-force oracle: exact risks by exhausting every (x0, B, X, Y) outcome
// of a discrete model. The policy's searcher must be deterministic and must
// return grid points.

struct ExactRisks {
  double r_p = 0.0;
  double r_q = 0.0;
  Decomposition decomposition;  // exact probabilities, n = 0
};

ExactRisks exact_risks_discrete(const DiscreteGridModel& model,
                                const Classifier& classifier,
                                const PreparedPolicy& policy,
                                const ResponseModel& response,
                                const Loss& loss);

}  // namespace recsim
