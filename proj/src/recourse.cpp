#include "recsim/recourse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "recsim/loss.hpp"
#include "recsim/response.hpp"

namespace recsim {

CostFunction CostFunction::weighted_euclidean(Eigen::VectorXd weights) {
  if (weights.size() == 0 || (weights.array() <= 0.0).any())
    throw std::invalid_argument("weighted-euclidean: weights must be positive");
  return CostFunction(Kind::weighted_euclidean, std::move(weights));
}

AcceptanceFunction AcceptanceFunction::distance_threshold(double d) {
  if (d < 0.0) throw std::invalid_argument("distance-threshold: D must be >= 0");
  return {Kind::distance_threshold, d};
}

AcceptanceFunction AcceptanceFunction::gaussian_kernel(double sigma2) {
  if (sigma2 <= 0.0)
    throw std::invalid_argument("gaussian-kernel: sigma^2 must be > 0");
  return {Kind::gaussian_kernel, sigma2};
}

AcceptanceFunction AcceptanceFunction::constant_p(double p) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("constant-p: p must be in [0,1]");
  return {Kind::constant_p, p};
}

double AcceptanceFunction::operator()(const Point& x0, const Point& cf) const {
  switch (kind_) {
    case Kind::always:
      return 1.0;
    case Kind::distance_threshold:
      return (x0 - cf).norm() <= param_ ? 1.0 : 0.0;  // inclusive boundary
    case Kind::gaussian_kernel:
      return std::exp(-(x0 - cf).squaredNorm() / (2.0 * param_));
    case Kind::constant_p:
      return param_;
  }
  return 0.0;  // unreachable
}

double accept_prob(const AcceptanceFunction& r, const Point& x0,
                   const Point& cf) {
  return r(x0, cf);
}

// ---------------------------------------------------------------------------
// Searchers

namespace {

class HyperplaneProjection final : public CounterfactualSearcher {
 public:
  HyperplaneProjection(ClassifierPtr classifier, CostFunction cost)
      : classifier_(std::move(classifier)), cost_(std::move(cost)) {
    const LinearModel* lin = classifier_->linear_boundary();
    if (!lin)
      throw std::invalid_argument(
          "hyperplane-projection requires a linear decision boundary");
    if (lin->theta.squaredNorm() == 0.0)
      throw InfeasibleRecourse("hyperplane-projection: theta is zero");
    lin_ = *lin;
    // Direction of the (cost-)orthogonal projection onto the hyperplane.
    if (cost_.kind() == CostFunction::Kind::weighted_euclidean)
      direction_ = lin_.theta.cwiseQuotient(cost_.weights());
    else
      direction_ = lin_.theta;
    scale_ = 1.0 / lin_.theta.dot(direction_);
  }

  Point find(const Point& x0, RngStream*) const override {
    if (classifier_->predict(x0) == Label::positive) return x0;
    const double m = lin_.margin(x0);
    Point z = x0 - (m * scale_) * direction_;
    // A rounding error can leave z a hair inside the negative side; nudge
    // just across.
    for (int k = 0; k < 4 && classifier_->predict(z) != Label::positive; ++k)
      z = x0 - (m * scale_ * (1.0 + std::ldexp(1.0, -46 + 8 * k))) * direction_;
    if (classifier_->predict(z) != Label::positive)
      throw InfeasibleRecourse("hyperplane-projection: projection not positive");
    return z;
  }

  std::string kind() const override { return "hyperplane-projection"; }

 private:
  ClassifierPtr classifier_;
  CostFunction cost_;
  LinearModel lin_;
  Eigen::VectorXd direction_;
  double scale_ = 0.0;
};

// Exhaustive scan of an explicit candidate list (used with discrete models).
class CandidateSetSearcher final : public CounterfactualSearcher {
 public:
  CandidateSetSearcher(ClassifierPtr classifier, CostFunction cost,
                       std::vector<Point> candidates)
      : classifier_(std::move(classifier)), cost_(std::move(cost)) {
    for (auto& c : candidates)
      if (classifier_->predict(c) == Label::positive)
        positives_.push_back(std::move(c));
    if (positives_.empty())
      throw InfeasibleRecourse("candidate-set: no positive candidate");
  }

  Point find(const Point& x0, RngStream*) const override {
    if (classifier_->predict(x0) == Label::positive) return x0;
    double best = std::numeric_limits<double>::infinity();
    const Point* best_point = nullptr;
    for (const Point& z : positives_) {
      const double c = cost_.squared(x0, z);
      if (c < best) {
        best = c;
        best_point = &z;
      }
    }
    return *best_point;
  }

  std::string kind() const override { return "candidate-set"; }

 private:
  ClassifierPtr classifier_;
  CostFunction cost_;
  std::vector<Point> positives_;
};

// Dense axis-aligned lattice over the inflated bounding box of the domain.
// Classifier decisions are precomputed once; each query scans the positive
// cells. Ties in cost keep the lexicographically first grid index.
class GridBruteForce final : public CounterfactualSearcher {
 public:
  GridBruteForce(ClassifierPtr classifier, CostFunction cost,
                 std::span<const Point> domain, int resolution,
                 double inflation, Exec exec)
      : classifier_(std::move(classifier)), cost_(std::move(cost)) {
    if (domain.empty())
      throw std::invalid_argument("grid-brute-force: empty domain sample");
    if (resolution < 2)
      throw std::invalid_argument("grid-brute-force: resolution must be >= 2");
    const Eigen::Index d = domain.front().size();
    Eigen::VectorXd lo = domain.front(), hi = domain.front();
    for (const Point& p : domain) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      double range = hi[j] - lo[j];
      if (range <= 0.0) range = 1.0;
      lo[j] -= 0.5 * inflation * range;
      hi[j] += 0.5 * inflation * range;
    }

    double cells = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) cells *= resolution;
    if (cells > 5e7)
      throw std::invalid_argument(
          "grid-brute-force: lattice too large; use growing-spheres or "
          "penalty-gradient in higher dimensions");
    const std::size_t total = static_cast<std::size_t>(cells);

    axes_.resize(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
      axes_[static_cast<std::size_t>(j)].resize(resolution);
      for (int k = 0; k < resolution; ++k)
        axes_[static_cast<std::size_t>(j)][k] =
            lo[j] + k * (hi[j] - lo[j]) / (resolution - 1);
    }

    std::vector<char> positive(total);
    parallel_for(exec, total, [&](std::size_t cell) {
      Point z(d);
      std::size_t rem = cell;
      for (Eigen::Index j = d - 1; j >= 0; --j) {
        z[j] = axes_[static_cast<std::size_t>(j)]
                    [rem % static_cast<std::size_t>(resolution)];
        rem /= static_cast<std::size_t>(resolution);
      }
      positive[cell] = classifier_->predict(z) == Label::positive;
    });

    dim_ = static_cast<int>(d);
    for (std::size_t cell = 0; cell < total; ++cell) {
      if (!positive[cell]) continue;
      std::size_t rem = cell;
      Point z(d);
      for (Eigen::Index j = d - 1; j >= 0; --j) {
        z[j] = axes_[static_cast<std::size_t>(j)]
                    [rem % static_cast<std::size_t>(resolution)];
        rem /= static_cast<std::size_t>(resolution);
      }
      for (Eigen::Index j = 0; j < d; ++j) coords_.push_back(z[j]);
    }
    if (coords_.empty())
      throw InfeasibleRecourse(
          "grid-brute-force: classifier has no positive point on the lattice");
  }

  Point find(const Point& x0, RngStream*) const override {
    if (classifier_->predict(x0) == Label::positive) return x0;
    const std::size_t d = static_cast<std::size_t>(dim_);
    const std::size_t n = coords_.size() / d;
    const bool weighted = cost_.kind() == CostFunction::Kind::weighted_euclidean;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    const double* c = coords_.data();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = c[i * d + j] - x0[static_cast<Eigen::Index>(j)];
        acc += weighted ? cost_.weights()[static_cast<Eigen::Index>(j)] * diff * diff
                        : diff * diff;
      }
      if (acc < best) {
        best = acc;
        best_i = i;
      }
    }
    Point z(dim_);
    for (std::size_t j = 0; j < d; ++j)
      z[static_cast<Eigen::Index>(j)] = c[best_i * d + j];
    return z;
  }

  std::string kind() const override { return "grid-brute-force"; }

 private:
  ClassifierPtr classifier_;
  CostFunction cost_;
  int dim_ = 0;
  std::vector<std::vector<double>> axes_;
  std::vector<double> coords_;  // positive cells, row-major, grid-index order
};

// Uniform samples in expanding annuli around x0 until positives appear,
// then zooms into the successful annulus to tighten the cheapest find.
class GrowingSpheres final : public CounterfactualSearcher {
 public:
  GrowingSpheres(ClassifierPtr classifier, CostFunction cost,
                 const SearcherSpec& spec)
      : classifier_(std::move(classifier)),
        cost_(std::move(cost)),
        r0_(spec.gs_initial_radius),
        growth_(spec.gs_growth),
        samples_(spec.gs_samples_per_annulus),
        max_annuli_(spec.gs_max_annuli),
        refinements_(spec.gs_refinement_rounds) {}

  Point find(const Point& x0, RngStream* rng) const override {
    if (classifier_->predict(x0) == Label::positive) return x0;
    if (!rng)
      throw std::invalid_argument("growing-spheres: needs an RNG stream");

    double inner = 0.0, outer = r0_;
    double best = std::numeric_limits<double>::infinity();
    Point best_point;
    for (int a = 0; a < max_annuli_; ++a) {
      scan_annulus(x0, inner, outer, *rng, best, best_point);
      if (best < std::numeric_limits<double>::infinity()) break;
      inner = outer;
      outer *= growth_;
    }
    if (best == std::numeric_limits<double>::infinity())
      throw InfeasibleRecourse(
          "growing-spheres: no positive point within budget");

    // Zoom: resample between the last empty radius and the incumbent.
    for (int round = 0; round < refinements_; ++round) {
      const double upper = (best_point - x0).norm();
      if (upper <= inner * (1.0 + 1e-12)) break;
      scan_annulus(x0, inner, upper, *rng, best, best_point);
    }
    return best_point;
  }

  std::string kind() const override { return "growing-spheres"; }

 private:
  void scan_annulus(const Point& x0, double inner, double outer,
                    RngStream& rng, double& best, Point& best_point) const {
    const Eigen::Index d = x0.size();
    const double dd = static_cast<double>(d);
    for (int s = 0; s < samples_; ++s) {
      Point dir(d);
      double norm2 = 0.0;
      do {
        for (Eigen::Index j = 0; j < d; ++j) dir[j] = rng.next_gaussian();
        norm2 = dir.squaredNorm();
      } while (norm2 == 0.0);
      dir /= std::sqrt(norm2);
      // Radius density proportional to r^(d-1): uniform in volume.
      const double u = rng.next_double();
      const double rad = std::pow(
          std::pow(inner, dd) + u * (std::pow(outer, dd) - std::pow(inner, dd)),
          1.0 / dd);
      Point z = x0 + rad * dir;
      if (classifier_->predict(z) == Label::positive) {
        const double c = cost_.squared(x0, z);
        if (c < best) {
          best = c;
          best_point = std::move(z);
        }
      }
    }
  }

  ClassifierPtr classifier_;
  CostFunction cost_;
  double r0_, growth_;
  int samples_, max_annuli_, refinements_;
};

// Wachter-style: minimize l(g(z), +1) + lambda c(x0, z), halving lambda from
// its initial value until the solution is positive, then bisecting toward
// the largest lambda that still crosses the boundary.
class PenaltyGradient final : public CounterfactualSearcher {
 public:
  PenaltyGradient(ClassifierPtr classifier, CostFunction cost,
                  const SearcherSpec& spec)
      : classifier_(std::move(classifier)),
        cost_(std::move(cost)),
        lambda_init_(spec.pg_lambda_init),
        inner_steps_(spec.pg_inner_steps),
        bisections_(spec.pg_bisections) {}

  Point find(const Point& x0, RngStream*) const override {
    if (classifier_->predict(x0) == Label::positive) return x0;

    // Locate a crossing pair: the largest lambda whose solution is positive
    // and a neighboring lambda whose solution is not. When the initial
    // lambda is too large it is halved until the loss term wins; when it
    // already crosses, it is grown until the cost term wins.
    Point best_z;
    double best_cost = std::numeric_limits<double>::infinity();
    double lambda_pos = -1.0, lambda_neg = -1.0;
    auto try_lambda = [&](double lambda) {
      Point z = minimize(x0, lambda);
      const bool positive = classifier_->predict(z) == Label::positive;
      if (positive) {
        lambda_pos = std::max(lambda_pos, lambda);
        const double c = cost_.squared(x0, z);
        if (c < best_cost) {
          best_cost = c;
          best_z = std::move(z);
        }
      }
      return positive;
    };

    double lambda = lambda_init_;
    if (try_lambda(lambda)) {
      for (int k = 0; k < 40 && lambda_neg < 0.0; ++k) {
        lambda *= 2.0;
        if (!try_lambda(lambda)) lambda_neg = lambda;
      }
    } else {
      lambda_neg = lambda;
      for (int k = 0; k < 40 && lambda_pos < 0.0; ++k) {
        lambda *= 0.5;
        if (!try_lambda(lambda))
          lambda_neg = lambda;
      }
    }
    if (lambda_pos < 0.0)
      throw InfeasibleRecourse("penalty-gradient: no positive point found");

    if (lambda_neg > 0.0) {
      double lo = std::min(lambda_pos, lambda_neg);
      double hi = std::max(lambda_pos, lambda_neg);
      const bool positive_side_low = lambda_pos < lambda_neg;
      for (int b = 0; b < bisections_; ++b) {
        const double mid = 0.5 * (lo + hi);
        const bool positive = try_lambda(mid);
        // Shrink toward the boundary between feasible and infeasible lambda.
        if (positive == positive_side_low)
          lo = mid;
        else
          hi = mid;
      }
    }
    return best_z;
  }

  std::string kind() const override { return "penalty-gradient"; }

 private:
  double objective(const Point& x0, const Point& z, double lambda) const {
    const double g = Loss::clamp_prob(classifier_->predict_proba(z));
    return -std::log(g) + lambda * cost_(x0, z);
  }

  Point minimize(const Point& x0, double lambda) const {
    Point z = x0;
    double step = 0.1;
    double j_cur = objective(x0, z, lambda);
    const Eigen::Index d = x0.size();
    for (int it = 0; it < inner_steps_; ++it) {
      Eigen::VectorXd grad(d);
      const double h = 1e-5 * (1.0 + z.norm());
      for (Eigen::Index j = 0; j < d; ++j) {
        Point zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        grad[j] = (objective(x0, zp, lambda) - objective(x0, zm, lambda)) /
                  (2.0 * h);
      }
      const double gn = grad.norm();
      if (gn < 1e-10) break;
      bool accepted = false;
      for (int bt = 0; bt < 30; ++bt) {
        Point z_new = z - step * grad;
        const double j_new = objective(x0, z_new, lambda);
        if (j_new < j_cur) {
          z = std::move(z_new);
          j_cur = j_new;
          step *= 1.3;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
    }
    return z;
  }

  ClassifierPtr classifier_;
  CostFunction cost_;
  double lambda_init_;
  int inner_steps_;
  int bisections_;
};

}  // namespace

SearcherSpec::Kind SearcherSpec::kind_from_name(const std::string& name) {
  if (name == "hyperplane-projection") return Kind::hyperplane_projection;
  if (name == "grid-brute-force") return Kind::grid_brute_force;
  if (name == "growing-spheres") return Kind::growing_spheres;
  if (name == "penalty-gradient") return Kind::penalty_gradient;
  if (name == "candidate-set") return Kind::candidate_set;
  throw std::invalid_argument("unknown searcher kind: " + name);
}

std::string SearcherSpec::kind_name(Kind k) {
  switch (k) {
    case Kind::hyperplane_projection: return "hyperplane-projection";
    case Kind::grid_brute_force: return "grid-brute-force";
    case Kind::growing_spheres: return "growing-spheres";
    case Kind::penalty_gradient: return "penalty-gradient";
    case Kind::candidate_set: return "candidate-set";
  }
  return "?";
}

std::unique_ptr<CounterfactualSearcher> build_searcher(
    const SearcherSpec& spec, ClassifierPtr classifier, CostFunction cost,
    std::span<const Point> domain, Exec exec) {
  switch (spec.kind) {
    case SearcherSpec::Kind::hyperplane_projection:
      return std::make_unique<HyperplaneProjection>(std::move(classifier),
                                                    std::move(cost));
    case SearcherSpec::Kind::grid_brute_force:
      return std::make_unique<GridBruteForce>(std::move(classifier),
                                              std::move(cost), domain,
                                              spec.grid_resolution,
                                              spec.bbox_inflation, exec);
    case SearcherSpec::Kind::growing_spheres:
      return std::make_unique<GrowingSpheres>(std::move(classifier),
                                              std::move(cost), spec);
    case SearcherSpec::Kind::penalty_gradient:
      return std::make_unique<PenaltyGradient>(std::move(classifier),
                                               std::move(cost), spec);
    case SearcherSpec::Kind::candidate_set:
      return std::make_unique<CandidateSetSearcher>(
          std::move(classifier), std::move(cost), spec.candidates);
  }
  throw std::logic_error("build_searcher: unhandled kind");
}

Point counterfactual(const CounterfactualSearcher& searcher, const Point& x0,
                     RngStream* rng) {
  return searcher.find(x0, rng);
}

// ---------------------------------------------------------------------------

PreparedPolicy::PreparedPolicy(const RecoursePolicy& policy,
                               ClassifierPtr classifier,
                               std::span<const DataPoint> domain, Exec exec)
    : classifier_(std::move(classifier)),
      cost_(policy.cost),
      acceptance_(policy.acceptance) {
  std::vector<Point> pts;
  pts.reserve(domain.size());
  for (const auto& [x, y] : domain) pts.push_back(x);
  searcher_ = build_searcher(policy.searcher, classifier_, cost_, pts, exec);
}

std::vector<Sample> apply_recourse(const PreparedPolicy& policy,
                                   const PosteriorModel& model,
                                   const ResponseModel& response,
                                   std::span<const DataPoint> data,
                                   RngStream rng, Exec exec) {
  std::vector<Sample> out(data.size());
  std::mutex error_mutex;
  std::exception_ptr error;

  parallel_for(exec, data.size(), [&](std::size_t i) {
    {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (error) return;
    }
    try {
      const auto& [x0, y] = data[i];
      Sample s;
      s.x0 = x0;
      s.x = x0;
      s.y = y;
      s.b = false;
      if (policy.classifier().predict(x0) == Label::negative) {
        RngStream point_rng = rng.fork(i);
        RngStream search_rng = point_rng.fork(1);
        const Point cf = policy.counterfactual(x0, &search_rng);
        const double r = policy.accept_prob(x0, cf);
        if (point_rng.bernoulli(r)) {
          s.b = true;
          s.x = cf;
          if (!response.is_defiant()) {
            s.y = respond(response, model.posterior(x0), model.posterior(cf),
                          point_rng);
          }
        }
      }
      out[i] = std::move(s);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  });

  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<Sample> apply_recourse(const RecoursePolicy& policy,
                                   ClassifierPtr classifier,
                                   const PosteriorModel& model,
                                   const ResponseModel& response,
                                   std::span<const DataPoint> data,
                                   RngStream rng, Exec exec) {
  PreparedPolicy prepared(policy, std::move(classifier), data, exec);
  return apply_recourse(prepared, model, response, data, rng, exec);
}

}  // namespace recsim
