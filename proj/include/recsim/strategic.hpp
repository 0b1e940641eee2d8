#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <variant>

#include "recsim/gen_models.hpp"
#include "recsim/loss.hpp"
#include "recsim/risk.hpp"
#include "recsim/types.hpp"

namespace recsim {

// Members of the two recourse-invariant families.
struct LinearMember {
  Eigen::VectorXd theta;
  double theta0 = 0.0;
};

// f(x) = +1 iff ||x - center|| >= radius.
struct SphericalMember {
  Eigen::VectorXd center;
  double radius = 0.0;
};

using FamilyMember = std::variant<LinearMember, SphericalMember>;

enum class FamilyKind { linear_threshold_shift, spherical };

// A classifier family that is invariant under the width-D recourse rule:
// negatively classified points strictly within distance D of the decision
// boundary move onto the boundary, everyone else stays. For each member f
// there is a unique member f' whose behavior under recourse reproduces f.
class InvariantFamily {
 public:
  InvariantFamily(FamilyKind kind, double recourse_width);

  FamilyKind kind() const { return kind_; }
  double recourse_width() const { return width_; }

  Label decide(const FamilyMember& f, const Point& x) const;

  // Deterministic acceptance: f(x) = -1 and dist(x, boundary) < D.
  bool moves(const FamilyMember& f, const Point& x) const;

  // phi^r_f: boundary projection for moving points, identity otherwise. The
  // returned point always classifies +1 when it moved.
  Point recourse_map(const FamilyMember& f, const Point& x) const;

  // The unique compensating member f'.
  FamilyMember compensate(const FamilyMember& f) const;

  std::string describe(const FamilyMember& f) const;

 private:
  FamilyKind kind_;
  double width_;
};

FamilyMember compensate(const InvariantFamily& family, const FamilyMember& f);

// Risk reduction induced purely by the distribution shift of recourse under
// the compensating strategy (evaluated for the reference minimizer f-bar).
struct DeltaReport {
  double delta = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::string band_description;

  nlohmann::json to_json() const;
};

struct FamilySearchOptions {
  int angle_grid = 96;
  int offset_grid = 65;
  int refinement_rounds = 3;
};

struct FamilySearchResult {
  FamilyMember member;
  double value = 0.0;
};

// Coarse-to-fine grid search over (angle of theta, theta0) minimizing the
// empirical risk; 2-d linear family only.
FamilySearchResult minimize_risk_p(const InvariantFamily& family,
                                   std::span<const DataPoint> data,
                                   const FamilySearchOptions& options = {},
                                   Exec exec = default_exec());

// Same search for the risk with recourse. Defiant evaluation keeps the drawn
// labels; compliant evaluation integrates the label redraw analytically via
// the model posterior at the moved points.
FamilySearchResult minimize_risk_q(const InvariantFamily& family,
                                   ResponseCase response_case,
                                   std::span<const DataPoint> data,
                                   const PosteriorModel* model,
                                   const FamilySearchOptions& options = {},
                                   Exec exec = default_exec());

// min_f R_Q(f) == min_f R_P(f) for the defiant case (0/1 loss,
// deterministic acceptance).
TheoremCheck verify_defiant_equality(const InvariantFamily& family,
                                     const GenerativeModel& model,
                                     const Loss& loss, std::size_t n,
                                     RngStream rng,
                                     const FamilySearchOptions& options = {},
                                     Exec exec = default_exec());

// Monte Carlo estimate of Delta over the band of points that move under the
// compensating classifier.
DeltaReport estimate_delta(const InvariantFamily& family,
                           const GenerativeModel& model, const Loss& loss,
                           std::size_t n, RngStream rng,
                           const FamilySearchOptions& options = {},
                           Exec exec = default_exec());

// Checks (i) R_Q(f') == min R_P - Delta within 3 sigma and (ii) the family
// minimum of R_Q does not exceed R_Q(f').
TheoremCheck verify_compliant_bound(const InvariantFamily& family,
                                    const GenerativeModel& model,
                                    const Loss& loss, std::size_t n,
                                    RngStream rng,
                                    const FamilySearchOptions& options = {},
                                    Exec exec = default_exec());

// --------------------------------------------------------------------------
// Exact evaluators on a discrete model. Moved points land on family
// boundaries (generally off the grid), so the caller supplies a posterior
// defined everywhere and consistent with the model's table on the grid.

using PosteriorFn = std::function<double(const Point&)>;

double exact_risk_p(const InvariantFamily& family, const FamilyMember& f,
                    const DiscreteGridModel& model);

double exact_risk_q(const InvariantFamily& family, const FamilyMember& f,
                    ResponseCase response_case, const DiscreteGridModel& model,
                    const PosteriorFn& posterior);

double exact_delta(const InvariantFamily& family, const FamilyMember& f_bar,
                   const DiscreteGridModel& model,
                   const PosteriorFn& posterior);

// Exhaustive minimization: all decision rules realizable on the grid from a
// fixed set of directions (every threshold dichotomy per direction).
enum class StrategicObjective { risk_p, risk_q };

FamilySearchResult exact_minimize(const InvariantFamily& family,
                                  StrategicObjective objective,
                                  ResponseCase response_case,
                                  const DiscreteGridModel& model,
                                  const PosteriorFn& posterior,
                                  int angle_resolution = 64);

}  // namespace recsim
