#pragma once

#include <functional>
#include <vector>

#include "volskin/tensor.hpp"

namespace volskin::ad {

// Scalar-valued function of one tensor, built on the given tape. grad_check
// compares the tape gradient against central differences per coordinate.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  int worst_coord = -1;
  // Coordinates where f evaluated non-finite at a probe point.
  std::vector<int> nonfinite_coords;
};

// max over coordinates of |autodiff - central difference| / max(1, |cd|).
GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double eps);

}  // namespace volskin::ad
