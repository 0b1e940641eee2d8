#include "recsim/strategic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace recsim {

namespace {

const LinearMember& as_linear(const FamilyMember& f) {
  if (const auto* lin = std::get_if<LinearMember>(&f)) return *lin;
  throw std::invalid_argument("expected a linear family member");
}

const SphericalMember& as_spherical(const FamilyMember& f) {
  if (const auto* sph = std::get_if<SphericalMember>(&f)) return *sph;
  throw std::invalid_argument("expected a spherical family member");
}

}  // namespace

InvariantFamily::InvariantFamily(FamilyKind kind, double recourse_width)
    : kind_(kind), width_(recourse_width) {
  if (width_ < 0.0)
    throw std::invalid_argument("InvariantFamily: recourse width must be >= 0");
}

Label InvariantFamily::decide(const FamilyMember& f, const Point& x) const {
  if (kind_ == FamilyKind::linear_threshold_shift) {
    const auto& lin = as_linear(f);
    return label_of_sign(x.dot(lin.theta) + lin.theta0);
  }
  const auto& sph = as_spherical(f);
  return label_of_sign((x - sph.center).norm() - sph.radius);
}

bool InvariantFamily::moves(const FamilyMember& f, const Point& x) const {
  if (decide(f, x) != Label::negative) return false;
  if (kind_ == FamilyKind::linear_threshold_shift) {
    const auto& lin = as_linear(f);
    const double dist =
        -(x.dot(lin.theta) + lin.theta0) / lin.theta.norm();
    return dist < width_;  // strictly within D of the boundary
  }
  const auto& sph = as_spherical(f);
  return sph.radius - (x - sph.center).norm() < width_;
}

Point InvariantFamily::recourse_map(const FamilyMember& f,
                                    const Point& x) const {
  if (!moves(f, x)) return x;
  if (kind_ == FamilyKind::linear_threshold_shift) {
    const auto& lin = as_linear(f);
    const double m = x.dot(lin.theta) + lin.theta0;
    const double inv_norm2 = 1.0 / lin.theta.squaredNorm();
    Point z = x - (m * inv_norm2) * lin.theta;
    for (int k = 0; k < 4 && decide(f, z) != Label::positive; ++k)
      z = x - (m * inv_norm2 * (1.0 + std::ldexp(1.0, -46 + 8 * k))) * lin.theta;
    return z;
  }
  const auto& sph = as_spherical(f);
  Eigen::VectorXd dir = x - sph.center;
  const double norm = dir.norm();
  if (norm == 0.0) {
    dir = Eigen::VectorXd::Zero(x.size());
    dir[0] = 1.0;
  } else {
    dir /= norm;
  }
  Point z = sph.center + sph.radius * dir;
  for (int k = 0; k < 4 && decide(f, z) != Label::positive; ++k)
    z = sph.center + sph.radius * (1.0 + std::ldexp(1.0, -46 + 8 * k)) * dir;
  return z;
}

FamilyMember InvariantFamily::compensate(const FamilyMember& f) const {
  if (kind_ == FamilyKind::linear_threshold_shift) {
    const auto& lin = as_linear(f);
    const double norm = lin.theta.norm();
    if (norm == 0.0)
      throw std::invalid_argument("compensate: theta = 0 has no boundary");
    return LinearMember{lin.theta, lin.theta0 - width_ * norm};
  }
  const auto& sph = as_spherical(f);
  return SphericalMember{sph.center, sph.radius + width_};
}

std::string InvariantFamily::describe(const FamilyMember& f) const {
  std::ostringstream os;
  if (kind_ == FamilyKind::linear_threshold_shift) {
    const auto& lin = as_linear(f);
    os << "linear theta=(";
    for (Eigen::Index j = 0; j < lin.theta.size(); ++j)
      os << (j ? "," : "") << lin.theta[j];
    os << ") theta0=" << lin.theta0;
  } else {
    const auto& sph = as_spherical(f);
    os << "spherical center=(";
    for (Eigen::Index j = 0; j < sph.center.size(); ++j)
      os << (j ? "," : "") << sph.center[j];
    os << ") radius=" << sph.radius;
  }
  return os.str();
}

FamilyMember compensate(const InvariantFamily& family, const FamilyMember& f) {
  return family.compensate(f);
}

nlohmann::json DeltaReport::to_json() const {
  return {{"delta", delta},
          {"stderr", stderr_},
          {"n", n},
          {"band", band_description}};
}

// ---------------------------------------------------------------------------
// Family grid search (2-d linear members)

namespace {

void require_linear_2d(const InvariantFamily& family,
                       std::span<const DataPoint> data) {
  if (family.kind() != FamilyKind::linear_threshold_shift)
    throw std::invalid_argument(
        "family search is implemented for the linear family");
  if (data.empty() || data.front().first.size() != 2)
    throw std::invalid_argument("family search expects 2-d data");
}

// Minimizes objective(member) over theta = (cos a, sin a), theta0 = -t with
// a coarse-to-fine grid; deterministic tie-breaking on scan order.
FamilySearchResult grid_search(
    const std::function<double(const LinearMember&)>& objective,
    std::span<const DataPoint> data, const FamilySearchOptions& options,
    double extra_offset_margin, Exec exec) {
  const int n_angle = std::max(4, options.angle_grid);
  const int n_offset = std::max(5, options.offset_grid);

  // Round 0 spans the full circle; the per-angle offset range comes from
  // the data projections (inflated, plus the caller's margin).
  double angle_lo = 0.0;
  double angle_step = 2.0 * std::numbers::pi / n_angle;
  bool have_t_window = false;
  double t_lo = 0.0, t_hi = 0.0;

  FamilySearchResult best;
  best.value = std::numeric_limits<double>::infinity();
  double best_angle = 0.0, best_t = 0.0, best_t_step = 0.0;

  for (int round = 0; round <= options.refinement_rounds; ++round) {
    std::vector<double> values(
        static_cast<std::size_t>(n_angle) * static_cast<std::size_t>(n_offset));
    std::vector<LinearMember> members(values.size());
    std::vector<double> t_steps(static_cast<std::size_t>(n_angle));

    parallel_for(exec, static_cast<std::size_t>(n_angle), [&](std::size_t ai) {
      const double angle = angle_lo + static_cast<double>(ai) * angle_step;
      Eigen::VectorXd theta(2);
      theta << std::cos(angle), std::sin(angle);
      double lo = t_lo, hi = t_hi;
      if (!have_t_window) {
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        for (const auto& [x, y] : data) {
          const double v = theta.dot(x);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        const double range = std::max(hi - lo, 1e-9);
        lo -= 0.1 * range;
        hi += 0.1 * range + extra_offset_margin;
      }
      t_steps[ai] = (hi - lo) / (n_offset - 1);
      for (int oi = 0; oi < n_offset; ++oi) {
        const double t = lo + oi * t_steps[ai];
        const std::size_t cell =
            ai * static_cast<std::size_t>(n_offset) + static_cast<std::size_t>(oi);
        members[cell] = LinearMember{theta, -t};
        values[cell] = objective(members[cell]);
      }
    });

    std::size_t best_cell = 0;
    for (std::size_t c = 1; c < values.size(); ++c)
      if (values[c] < values[best_cell]) best_cell = c;
    if (values[best_cell] < best.value) {
      best.value = values[best_cell];
      best.member = members[best_cell];
      const std::size_t ai = best_cell / static_cast<std::size_t>(n_offset);
      best_angle = angle_lo + static_cast<double>(ai) * angle_step;
      best_t = -members[best_cell].theta0;
      best_t_step = t_steps[ai];
    }

    // Shrink the search window around the incumbent.
    angle_lo = best_angle - angle_step;
    angle_step = 2.0 * angle_step / (n_angle - 1);
    t_lo = best_t - 2.0 * best_t_step;
    t_hi = best_t + 2.0 * best_t_step;
    have_t_window = true;
  }
  return best;
}

double risk_p_of(const InvariantFamily& family, const LinearMember& member,
                 std::span<const DataPoint> data) {
  const FamilyMember f = member;
  std::size_t errors = 0;
  for (const auto& [x, y] : data)
    if (family.decide(f, x) != y) ++errors;
  return static_cast<double>(errors) / static_cast<double>(data.size());
}

double risk_q_of(const InvariantFamily& family, const LinearMember& member,
                 ResponseCase response_case, std::span<const DataPoint> data,
                 const PosteriorModel* model) {
  const FamilyMember f = member;
  double acc = 0.0;
  for (const auto& [x, y] : data) {
    if (family.moves(f, x)) {
      if (response_case == ResponseCase::defiant) {
        acc += (y == Label::negative) ? 1.0 : 0.0;
      } else {
        acc += 1.0 - model->posterior(family.recourse_map(f, x));
      }
    } else {
      acc += (family.decide(f, x) != y) ? 1.0 : 0.0;
    }
  }
  return acc / static_cast<double>(data.size());
}

}  // namespace

FamilySearchResult minimize_risk_p(const InvariantFamily& family,
                                   std::span<const DataPoint> data,
                                   const FamilySearchOptions& options,
                                   Exec exec) {
  require_linear_2d(family, data);
  return grid_search(
      [&](const LinearMember& m) { return risk_p_of(family, m, data); }, data,
      options, 0.0, exec);
}

FamilySearchResult minimize_risk_q(const InvariantFamily& family,
                                   ResponseCase response_case,
                                   std::span<const DataPoint> data,
                                   const PosteriorModel* model,
                                   const FamilySearchOptions& options,
                                   Exec exec) {
  require_linear_2d(family, data);
  if (response_case == ResponseCase::compliant && model == nullptr)
    throw std::invalid_argument(
        "minimize_risk_q: compliant evaluation needs a posterior model");
  // The Q-optimal threshold sits one recourse width beyond the P-optimal
  // one; widen the searched offset range accordingly.
  return grid_search(
      [&](const LinearMember& m) {
        return risk_q_of(family, m, response_case, data, model);
      },
      data, options, family.recourse_width(), exec);
}

// ---------------------------------------------------------------------------

TheoremCheck verify_defiant_equality(const InvariantFamily& family,
                                     const GenerativeModel& model,
                                     const Loss& loss, std::size_t n,
                                     RngStream rng,
                                     const FamilySearchOptions& options,
                                     Exec exec) {
  if (!loss.binary_predictions())
    throw std::invalid_argument("verify_defiant_equality: requires 0/1 loss");
  const Dataset data = sample(model, n, rng.fork(0), exec);
  const FamilySearchResult min_p = minimize_risk_p(family, data, options, exec);
  const FamilySearchResult min_q = minimize_risk_q(
      family, ResponseCase::defiant, data, nullptr, options, exec);

  TheoremCheck check;
  check.theorem_id = "T5.1";
  check.lhs = min_q.value;
  check.rhs_lower = min_p.value;
  check.rhs_upper = min_p.value;
  check.diff = min_q.value - min_p.value;
  const double se = std::sqrt(std::pow(binomial_stderr(min_p.value, n), 2) +
                              std::pow(binomial_stderr(min_q.value, n), 2));
  check.diff_stderr = se;
  check.tolerance = 3.0;
  check.condition_holds = true;
  check.verdict = std::abs(check.diff) <= std::max(3.0 * se, 1e-12)
                      ? TheoremCheck::Verdict::holds
                      : TheoremCheck::Verdict::fails;
  check.details = {{"min_r_p", min_p.value},
                   {"min_r_q", min_q.value},
                   {"argmin_r_p", family.describe(min_p.member)},
                   {"argmin_r_q", family.describe(min_q.member)},
                   {"recourse_width", family.recourse_width()},
                   {"n", n}};
  return check;
}

namespace {

std::string band_text(const InvariantFamily& family, const FamilyMember& fbar) {
  std::ostringstream os;
  if (family.kind() == FamilyKind::linear_threshold_shift)
    os << "0 <= x.theta + theta0 < D*||theta|| with " << family.describe(fbar)
       << ", D=" << family.recourse_width();
  else
    os << "b < ||x - center|| < b + D with " << family.describe(fbar)
       << ", D=" << family.recourse_width();
  return os.str();
}

}  // namespace

DeltaReport estimate_delta(const InvariantFamily& family,
                           const GenerativeModel& model, const Loss& loss,
                           std::size_t n, RngStream rng,
                           const FamilySearchOptions& options, Exec exec) {
  if (!loss.binary_predictions())
    throw std::invalid_argument("estimate_delta: requires 0/1 loss");
  const Dataset data = sample(model, n, rng.fork(0), exec);
  const FamilySearchResult min_p = minimize_risk_p(family, data, options, exec);
  const FamilyMember f_prime = family.compensate(min_p.member);

  std::vector<double> integrand(data.size(), 0.0);
  parallel_for(exec, data.size(), [&](std::size_t i) {
    const Point& x = data[i].first;
    if (family.moves(f_prime, x)) {
      const Point moved = family.recourse_map(f_prime, x);
      integrand[i] = model.posterior(moved) - model.posterior(x);
      // p_-(x) - p_-(moved) written through the positive posterior.
    }
  });
  const MeanStderr ms = mean_stderr(integrand);

  DeltaReport report;
  report.delta = ms.mean;
  report.stderr_ = ms.stderr_;
  report.n = n;
  report.band_description = band_text(family, min_p.member);
  return report;
}

TheoremCheck verify_compliant_bound(const InvariantFamily& family,
                                    const GenerativeModel& model,
                                    const Loss& loss, std::size_t n,
                                    RngStream rng,
                                    const FamilySearchOptions& options,
                                    Exec exec) {
  if (!loss.binary_predictions())
    throw std::invalid_argument("verify_compliant_bound: requires 0/1 loss");
  const Dataset data = sample(model, n, rng.fork(0), exec);
  const FamilySearchResult min_p = minimize_risk_p(family, data, options, exec);
  const FamilyMember f_bar = min_p.member;
  const FamilyMember f_prime = family.compensate(f_bar);
  RngStream label_rng = rng.fork(1);

  // Paired per-sample statistic for (i): the compliant redraw is simulated
  // honestly at the moved points.
  std::vector<double> diff(data.size());
  std::vector<double> lq(data.size());
  std::vector<double> delta_terms(data.size(), 0.0);
  parallel_for(exec, data.size(), [&](std::size_t i) {
    const auto& [x, y] = data[i];
    const double lp = family.decide(f_bar, x) != y ? 1.0 : 0.0;
    double lq_i;
    if (family.moves(f_prime, x)) {
      const Point moved = family.recourse_map(f_prime, x);
      RngStream local = label_rng.fork(i);
      const Label new_y = local.bernoulli(model.posterior(moved))
                              ? Label::positive
                              : Label::negative;
      // f'(moved point) = +1 by the recourse map's postcondition.
      lq_i = new_y == Label::negative ? 1.0 : 0.0;
      delta_terms[i] = model.posterior(moved) - model.posterior(x);
    } else {
      lq_i = family.decide(f_prime, x) != y ? 1.0 : 0.0;
    }
    lq[i] = lq_i;
    diff[i] = lq_i - lp + delta_terms[i];
  });

  const double r_q_fprime = compensated_mean(lq);
  const double delta_hat = compensated_mean(delta_terms);
  const MeanStderr d = mean_stderr(diff);
  const MeanStderr delta_ms = mean_stderr(delta_terms);

  const FamilySearchResult min_q = minimize_risk_q(
      family, ResponseCase::compliant, data, &model, options, exec);
  const double rq_se = binomial_stderr(r_q_fprime, n);
  const bool equality_ok = std::abs(d.mean) <= std::max(3.0 * d.stderr_, 1e-12);
  const bool minimum_ok = min_q.value <= r_q_fprime + 3.0 * rq_se;

  TheoremCheck check;
  check.theorem_id = "T5.3";
  check.lhs = r_q_fprime;
  check.rhs_lower = min_p.value - delta_hat;
  check.rhs_upper = check.rhs_lower;
  check.diff = d.mean;
  check.diff_stderr = d.stderr_;
  check.tolerance = 3.0;
  check.condition_holds = minimum_ok;
  check.verdict = (equality_ok && minimum_ok) ? TheoremCheck::Verdict::holds
                                              : TheoremCheck::Verdict::fails;
  check.details = {{"min_r_p", min_p.value},
                   {"r_q_fprime", r_q_fprime},
                   {"min_r_q", min_q.value},
                   {"delta", delta_hat},
                   {"delta_stderr", delta_ms.stderr_},
                   {"argmin_r_p", family.describe(f_bar)},
                   {"f_prime", family.describe(f_prime)},
                   {"equality_within_3sigma", equality_ok},
                   {"family_min_below_fprime", minimum_ok},
                   {"n", n}};
  return check;
}

// ---------------------------------------------------------------------------
// Exact evaluators on discrete models

double exact_risk_p(const InvariantFamily& family, const FamilyMember& f,
                    const DiscreteGridModel& model) {
  double acc = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Label pred = family.decide(f, model.point(i));
    acc += model.joint(
        i, pred == Label::positive ? Label::negative : Label::positive);
  }
  return acc;
}

double exact_risk_q(const InvariantFamily& family, const FamilyMember& f,
                    ResponseCase response_case, const DiscreteGridModel& model,
                    const PosteriorFn& posterior) {
  double acc = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Point& x = model.point(i);
    if (family.moves(f, x)) {
      // Moved points are classified +1; only a -1 label costs.
      if (response_case == ResponseCase::defiant) {
        acc += model.joint(i, Label::negative);
      } else {
        if (!posterior)
          throw std::invalid_argument(
              "exact_risk_q: compliant case needs a posterior defined at "
              "moved points");
        acc += model.point_mass(i) *
               (1.0 - posterior(family.recourse_map(f, x)));
      }
    } else {
      const Label pred = family.decide(f, x);
      acc += model.joint(
          i, pred == Label::positive ? Label::negative : Label::positive);
    }
  }
  return acc;
}

double exact_delta(const InvariantFamily& family, const FamilyMember& f_bar,
                   const DiscreteGridModel& model,
                   const PosteriorFn& posterior) {
  const FamilyMember f_prime = family.compensate(f_bar);
  double acc = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Point& x = model.point(i);
    if (!family.moves(f_prime, x)) continue;
    const double p_neg_here = model.point_mass(i) - model.joint(i, Label::positive);
    const double p_neg_moved =
        model.point_mass(i) * (1.0 - posterior(family.recourse_map(f_prime, x)));
    acc += p_neg_here - p_neg_moved;
  }
  return acc;
}

FamilySearchResult exact_minimize(const InvariantFamily& family,
                                  StrategicObjective objective,
                                  ResponseCase response_case,
                                  const DiscreteGridModel& model,
                                  const PosteriorFn& posterior,
                                  int angle_resolution) {
  if (family.kind() != FamilyKind::linear_threshold_shift)
    throw std::invalid_argument("exact_minimize: linear family only");
  const int d = model.dim();
  if (d != 1 && d != 2)
    throw std::invalid_argument("exact_minimize: 1-d or 2-d grids only");

  std::vector<Eigen::VectorXd> directions;
  if (d == 1) {
    directions.push_back(make_point({1.0}));
    directions.push_back(make_point({-1.0}));
  } else {
    for (int k = 0; k < angle_resolution; ++k) {
      const double a = 2.0 * std::numbers::pi * k / angle_resolution;
      directions.push_back(make_point({std::cos(a), std::sin(a)}));
    }
  }

  auto evaluate = [&](const LinearMember& m) {
    if (objective == StrategicObjective::risk_p)
      return exact_risk_p(family, m, model);
    return exact_risk_q(family, m, response_case, model, posterior);
  };

  FamilySearchResult best;
  best.value = std::numeric_limits<double>::infinity();
  const double width = family.recourse_width();
  for (const auto& u : directions) {
    std::vector<double> v;
    v.reserve(model.size());
    for (std::size_t i = 0; i < model.size(); ++i)
      v.push_back(u.dot(model.point(i)));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());

    // Thresholds realizing every dichotomy of {u.x >= t}, plus the shifted
    // copies that realize every effective rule under width-D recourse.
    std::vector<double> thresholds;
    thresholds.push_back(v.front() - 1.0);
    for (std::size_t k = 0; k < v.size(); ++k) {
      thresholds.push_back(v[k]);
      if (k + 1 < v.size()) thresholds.push_back(0.5 * (v[k] + v[k + 1]));
    }
    thresholds.push_back(v.back() + 1.0);
    if (width > 0.0) {
      const std::size_t base = thresholds.size();
      for (std::size_t k = 0; k < base; ++k)
        thresholds.push_back(thresholds[k] + width);
    }

    for (double t : thresholds) {
      const LinearMember m{u, -t};
      const double value = evaluate(m);
      if (value < best.value) {
        best.value = value;
        best.member = m;
      }
    }
  }
  return best;
}

}  // namespace recsim
