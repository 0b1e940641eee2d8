#pragma once

#include <stdexcept>

#include "recsim/rng.hpp"
#include "recsim/types.hpp"

namespace recsim {

// Draws the post-recourse label: Y = +1 with probability
// alpha * P(Y=+1|X=x) + (1-alpha) * P(Y=+1|X0=x0).
inline Label respond(const ResponseModel& model, double posterior_at_x0,
                     double posterior_at_x, RngStream& rng) {
  if (posterior_at_x0 < 0.0 || posterior_at_x0 > 1.0 || posterior_at_x < 0.0 ||
      posterior_at_x > 1.0)
    throw std::invalid_argument("respond: posterior outside [0,1]");
  const double p = model.positive_prob(posterior_at_x0, posterior_at_x);
  return rng.bernoulli(p) ? Label::positive : Label::negative;
}

}  // namespace recsim
