#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "recsim/types.hpp"

namespace recsim {

// Loss over (prediction, label). Zero-one operates on binary predictions in
// {-1,+1}; cross-entropy and custom symmetric losses operate on
// probabilistic predictions in [0,1]. All symmetric losses satisfy
// l(1/2,-1) = l(1/2,+1) = boundary_value().
class Loss {
 public:
  enum class Kind { zero_one, cross_entropy, custom_symmetric };

  static Loss zero_one() { return Loss(Kind::zero_one, 0.0, nullptr); }

  static Loss cross_entropy() {
    return Loss(Kind::cross_entropy, std::log(2.0), nullptr);
  }

  // fn(prediction, y_sign) must satisfy fn(0.5,-1) == fn(0.5,+1) == c.
  static Loss custom_symmetric(std::function<double(double, int)> fn,
                               double c) {
    if (!fn) throw std::invalid_argument("custom loss requires a function");
    if (std::abs(fn(0.5, -1) - c) > 1e-12 || std::abs(fn(0.5, +1) - c) > 1e-12)
      throw std::invalid_argument("custom loss is not symmetric at 1/2");
    return Loss(Kind::custom_symmetric, c, std::move(fn));
  }

  Kind kind() const { return kind_; }

  // Value of l(1/2, y) for either label.
  double boundary_value() const { return boundary_; }

  bool binary_predictions() const { return kind_ == Kind::zero_one; }

  double operator()(double prediction, Label y) const {
    const int ys = to_sign(y);
    switch (kind_) {
      case Kind::zero_one:
        if (prediction != -1.0 && prediction != 1.0)
          throw std::invalid_argument(
              "zero-one loss requires a prediction in {-1,+1}, got " +
              std::to_string(prediction));
        return prediction == static_cast<double>(ys) ? 0.0 : 1.0;
      case Kind::cross_entropy: {
        if (prediction < 0.0 || prediction > 1.0)
          throw std::invalid_argument("cross-entropy prediction outside [0,1]");
        // Clamp before the log; the perturbation is far below MC noise.
        const double p = clamp_prob(prediction);
        return ys > 0 ? -std::log(p) : -std::log(1.0 - p);
      }
      case Kind::custom_symmetric:
        if (prediction < 0.0 || prediction > 1.0)
          throw std::invalid_argument("prediction outside [0,1]");
        return custom_(prediction, ys);
    }
    return 0.0;  // unreachable
  }

  static double clamp_prob(double p) {
    const double eps = 1e-12;
    return p < eps ? eps : (p > 1.0 - eps ? 1.0 - eps : p);
  }

 private:
  Loss(Kind kind, double boundary, std::function<double(double, int)> fn)
      : kind_(kind), boundary_(boundary), custom_(std::move(fn)) {}

  Kind kind_;
  double boundary_;
  std::function<double(double, int)> custom_;
};

inline double loss_eval(const Loss& loss, double prediction, Label y) {
  return loss(prediction, y);
}

}  // namespace recsim
