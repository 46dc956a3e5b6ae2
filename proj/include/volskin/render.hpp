#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "volskin/camera.hpp"
#include "volskin/common.hpp"
#include "volskin/tensor.hpp"

namespace volskin {

// Samples along one ray. tau strictly increasing; deltas[j] = tau[j+1]-tau[j]
// with the last spacing taken to the far bound.
struct RaySamples {
  std::vector<double> tau;
  std::vector<double> sigma;
  std::vector<Vec3> color;
  std::vector<double> delta;
  int count() const { return static_cast<int>(tau.size()); }
  void validate() const;
};

// One uniform draw per equal bin of [near, far]; nullptr rng takes midpoints.
std::vector<double> sample_stratified(const Ray& ray, int count, RngState* rng);
std::vector<double> deltas_from(const std::vector<double>& tau, double far);

struct CompositeResult {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  double opacity = 0.0;  // accumulated alpha; < background threshold means miss
};

// Piecewise-constant quadrature along one ray (reference path, plain loops).
CompositeResult composite(const RaySamples& s);

// Batched tape-recorded quadrature: sigma [R x J], colors [(R*J) x 3],
// tau/delta untracked [R x J]. Gradients flow into sigma and colors.
struct CompositeTensors {
  ad::Tensor color;    // [R x 3]
  ad::Tensor depth;    // [R]
  ad::Tensor opacity;  // [R]
};
CompositeTensors composite_batch(const ad::Tensor& sigma, const ad::Tensor& colors,
                                 const ad::Tensor& tau, const ad::Tensor& delta);

// Ray-surface point o + depth * d. Depth outside [near, far] is clamped and
// counted (counter optional).
Vec3 surface_point(const Ray& ray, double depth, int* clamp_counter = nullptr);

// Unit normal opposing the density gradient, estimated by central differences
// of `density` with step h. Returns nullopt when |grad| <= grad_eps (the
// caller excludes such pixels from the normal loss).
std::optional<Vec3> density_normal_fd(const std::function<double(const Vec3&)>& density,
                                      const Vec3& x, double h = 1e-3, double grad_eps = 1e-8);

}  // namespace volskin
