#include "volskin/render.hpp"

#include <cmath>
#include <stdexcept>

namespace volskin {

void RaySamples::validate() const {
  const size_t n = tau.size();
  if (sigma.size() != n || color.size() != n || delta.size() != n)
    throw std::invalid_argument("RaySamples: field lengths disagree");
  for (size_t j = 0; j + 1 < n; ++j)
    if (tau[j + 1] <= tau[j]) throw std::invalid_argument("RaySamples: tau not increasing");
  for (double s : sigma)
    if (s < 0.0 || !std::isfinite(s)) throw std::invalid_argument("RaySamples: bad density");
}

std::vector<double> sample_stratified(const Ray& ray, int count, RngState* rng) {
  if (count < 2) throw std::invalid_argument("sample_stratified: need at least 2 samples");
  const double bin = (ray.far - ray.near) / count;
  std::vector<double> tau(count);
  for (int j = 0; j < count; ++j) {
    const double u = rng ? rng->uniform() : 0.5;
    tau[j] = ray.near + (j + u) * bin;
  }
  return tau;
}

std::vector<double> deltas_from(const std::vector<double>& tau, double far) {
  std::vector<double> delta(tau.size());
  for (size_t j = 0; j + 1 < tau.size(); ++j) delta[j] = tau[j + 1] - tau[j];
  if (!tau.empty()) delta.back() = far - tau.back();
  return delta;
}

CompositeResult composite(const RaySamples& s) {
  CompositeResult out;
  double optical_depth = 0.0;
  for (int j = 0; j < s.count(); ++j) {
    const double transmittance = std::exp(-optical_depth);
    const double alpha = 1.0 - std::exp(-s.sigma[j] * s.delta[j]);
    const double w = transmittance * alpha;
    out.color += w * s.color[j];
    out.depth += w * s.tau[j];
    out.opacity += w;
    optical_depth += s.sigma[j] * s.delta[j];
  }
  return out;
}

CompositeTensors composite_batch(const ad::Tensor& sigma, const ad::Tensor& colors,
                                 const ad::Tensor& tau, const ad::Tensor& delta) {
  const int rays = sigma.rows(), samples = sigma.cols();
  if (tau.shape() != sigma.shape() || delta.shape() != sigma.shape())
    throw ShapeError("composite_batch: tau/delta shape " + tau.shape_str() + " vs sigma " +
                     sigma.shape_str());
  if (colors.rows() != rays * samples || colors.cols() != 3)
    throw ShapeError("composite_batch: colors " + colors.shape_str() + " do not match sigma " +
                     sigma.shape_str());
  ad::Tensor optical = ad::mul(sigma, delta);
  ad::Tensor transmittance = ad::exp(ad::neg(ad::cumsum_exclusive_rows(optical)));
  ad::Tensor alpha = ad::add_scalar(ad::neg(ad::exp(ad::neg(optical))), 1.0);
  ad::Tensor weights = ad::mul(transmittance, alpha);  // [R x J]
  CompositeTensors out;
  ad::Tensor wflat = ad::reshape(weights, {rays * samples});
  out.color = ad::group_sum_rows(ad::mul_colvec(colors, wflat), samples);
  out.depth = ad::sum_axis1(ad::mul(weights, tau));
  out.opacity = ad::sum_axis1(weights);
  return out;
}

Vec3 surface_point(const Ray& ray, double depth, int* clamp_counter) {
  double d = depth;
  if (d < ray.near || d > ray.far) {
    d = std::clamp(d, ray.near, ray.far);
    if (clamp_counter) ++*clamp_counter;
  }
  return ray.origin + d * ray.dir;
}

std::optional<Vec3> density_normal_fd(const std::function<double(const Vec3&)>& density,
                                      const Vec3& x, double h, double grad_eps) {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (density(xp) - density(xm)) / (2.0 * h);
  }
  const double n = g.norm();
  if (!(n > grad_eps)) return std::nullopt;
  return Vec3(-g / n);
}

}  // namespace volskin
