#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "recsim/parallel.hpp"

namespace recsim {

// Standard normal CDF.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

// Sample mean with plug-in standard error (compensated summation, fixed
// order, so the result is independent of how the buffer was filled).
inline MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  out.n = values.size();
  if (values.empty()) return out;
  out.mean = compensated_mean(values);
  if (values.size() < 2) return out;
  double ss = 0.0, carry = 0.0;
  for (double v : values) {
    const double d = v - out.mean;
    const double y = d * d - carry;
    const double t = ss + y;
    carry = (t - ss) - y;
    ss = t;
  }
  const double var = ss / static_cast<double>(values.size() - 1);
  out.stderr_ = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

// Binomial standard error sqrt(r(1-r)/n) for a frequency r.
inline double binomial_stderr(double rate, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(rate * (1.0 - rate) / static_cast<double>(n));
}

// Ordinary least squares fit of y = a + b x; also reports R^2.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 1.0;
};

inline LineFit fit_line(const std::vector<double>& x,
                        const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line needs >= 2 paired values");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate x grid");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - (f.intercept + f.slope * x[i]);
      ss_res += r * r;
    }
    f.r_squared = 1.0 - ss_res / syy;
  }
  return f;
}

}  // namespace recsim
