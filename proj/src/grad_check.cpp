#include "volskin/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace volskin::ad {

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

  Tape tape;
  Tensor xt = tape.leaf(x);
  Tensor y = f(tape, xt);
  GradientMap grads = tape.backward(y);
  Tensor g = grads.grad_of(xt);

  auto probe = [&](const Tensor& xp) {
    Tape scratch;
    Tensor leaf = scratch.leaf(xp);
    return f(scratch, leaf).value();
  };

  GradCheckReport report;
  const int n = x.numel();
  for (int i = 0; i < n; ++i) {
    Tensor xp(x.shape(), std::vector<double>(x.data(), x.data() + n));
    xp.data()[i] = x.at(i) + eps;
    double fp = probe(xp);
    xp.data()[i] = x.at(i) - eps;
    double fm = probe(xp);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      report.nonfinite_coords.push_back(i);
      continue;
    }
    double cd = (fp - fm) / (2.0 * eps);
    double rel = std::fabs(g.at(i) - cd) / std::max(1.0, std::fabs(cd));
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_coord = i;
    }
  }
  return report;
}

}  // namespace volskin::ad
