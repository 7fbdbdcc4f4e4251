#pragma once

// Anything that can turn (document, position) into a click probability.
// Implemented by the simulator's ground-truth model and by the learned
// CTR nets, so downstream consumers (utility tables, matching weights,
// evaluation) don't care which one they were handed.

#include "urank/letor.hpp"

namespace urank {

class ClickModel {
 public:
  virtual ~ClickModel() = default;

  // P(click) for `item` shown at 1-based `position`. Positions past
  // max_position() are never shown; implementations reject them.
  virtual double click_prob(const Item& item, int position) const = 0;

  virtual int max_position() const = 0;
};

}  // namespace urank
