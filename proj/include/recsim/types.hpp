#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace recsim {

// Feature vector x in a closed convex domain of R^d.
using Point = Eigen::VectorXd;

enum class Label : std::int8_t { negative = -1, positive = +1 };

inline int to_sign(Label y) { return static_cast<int>(y); }
inline Label label_of_sign(double s) {
  // sign(0) = +1 throughout.
  return s >= 0.0 ? Label::positive : Label::negative;
}

// Thresholds a probabilistic prediction g(x) at 1/2; g = 1/2 maps to +1.
inline Label threshold_label(double g) { return label_of_sign(g - 0.5); }

// Pre-recourse draw (x0, y).
using DataPoint = std::pair<Point, Label>;
using Dataset = std::vector<DataPoint>;

// One individual after the recourse stage. If b = 0 then x = x0; points
// predicted +1 before recourse never move.
struct Sample {
  Point x0;
  Point x;
  Label y;
  bool b = false;
};

// Label-response rule producing Q(Y | X0, X): alpha = 1 is the compliant
// case (label law follows the new features), alpha = 0 the defiant case
// (label law stays at the original features).
struct ResponseModel {
  double alpha = 1.0;

  static ResponseModel compliant() { return {1.0}; }
  static ResponseModel defiant() { return {0.0}; }
  static ResponseModel mixture(double a) { return {a}; }

  bool is_compliant() const { return alpha == 1.0; }
  bool is_defiant() const { return alpha == 0.0; }

  // P(Y = +1) for a moved individual, mixing the posteriors at the new and
  // original features. Mixing posteriors is distributionally identical to
  // coin-flipping between the two regimes.
  double positive_prob(double posterior_at_x0, double posterior_at_x) const {
    return alpha * posterior_at_x + (1.0 - alpha) * posterior_at_x0;
  }
};

inline Point make_point(std::initializer_list<double> coords) {
  Point p(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (double c : coords) p[i++] = c;
  return p;
}

}  // namespace recsim
