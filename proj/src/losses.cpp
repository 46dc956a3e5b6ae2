#include "volskin/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace volskin {

void LossWeights::validate() const {
  if (depth < 0 || normal < 0 || surface < 0)
    throw std::invalid_argument("loss weights must be nonnegative");
}

void ViewPerturbation::validate() const {
  if (sigma_noise < 0) throw std::invalid_argument("perturbation sigma must be nonnegative");
}

ad::Tensor photometric_loss(const ad::Tensor& pred, const ad::Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("photometric_loss: " + pred.shape_str() + " vs " + target.shape_str());
  return ad::sum(ad::rowwise_norm(ad::sub(pred, target)));
}

DepthLossResult depth_loss(const ad::Tensor& pred, const ad::Tensor& target, double mean_eps) {
  if (pred.shape() != target.shape())
    throw ShapeError("depth_loss: " + pred.shape_str() + " vs " + target.shape_str());
  DepthLossResult out;
  if (pred.numel() == 0) {
    out.loss = ad::Tensor::scalar(0.0);
    out.skipped = true;
    return out;
  }
  ad::Tensor pred_mean = ad::mean(pred);
  ad::Tensor target_mean = ad::mean(target);
  if (pred_mean.value() < mean_eps || target_mean.value() < mean_eps) {
    out.loss = ad::Tensor::scalar(0.0);
    out.skipped = true;
    return out;
  }
  ad::Tensor a = ad::scale_by(pred, ad::reciprocal(pred_mean));
  ad::Tensor b = ad::scale_by(target, ad::reciprocal(target_mean));
  out.loss = ad::sum(ad::abs(ad::sub(a, b)));
  return out;
}

ad::Tensor normal_loss(const ad::Tensor& pred, const ad::Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("normal_loss: " + pred.shape_str() + " vs " + target.shape_str());
  const int rows = pred.rows(), cols = pred.cols();
  for (const ad::Tensor* t : {&pred, &target}) {
    for (int r = 0; r < rows; ++r) {
      double n2 = 0.0;
      for (int c = 0; c < cols; ++c) n2 += t->at(r, c) * t->at(r, c);
      if (std::fabs(std::sqrt(n2) - 1.0) > 1e-4)
        throw std::invalid_argument("normal_loss: row " + std::to_string(r) +
                                    " is not a unit vector");
    }
  }
  ad::Tensor cos_sim = ad::sum_axis1(ad::mul(pred, target));
  return ad::mean(ad::add_scalar(ad::neg(cos_sim), 1.0));
}

ad::Tensor surface_loss(const ad::Tensor& alpha) {
  for (int i = 0; i < alpha.numel(); ++i)
    if (alpha.at(i) < -1e-9 || alpha.at(i) > 1.0 + 1e-9)
      throw std::invalid_argument("surface_loss: opacity outside [0,1]");
  return ad::mean(ad::square(ad::add_scalar(ad::neg(alpha), 1.0)));
}

ad::Tensor total_loss(const ad::Tensor& photo, const ad::Tensor& weight, const ad::Tensor& depth,
                      const ad::Tensor& normal, const ad::Tensor& surface, const LossWeights& w) {
  w.validate();
  const ad::Tensor* parts[] = {&photo, &weight, &depth, &normal, &surface};
  const char* names[] = {"photo", "weight", "depth", "normal", "surface"};
  for (int i = 0; i < 5; ++i)
    if (!std::isfinite(parts[i]->value()))
      throw DivergenceError(names[i],
                            std::string("total_loss: component ") + names[i] + " is not finite");
  ad::Tensor base = ad::add(photo, weight);
  ad::Tensor geo = ad::add(ad::scale(depth, w.depth),
                           ad::add(ad::scale(normal, w.normal), ad::scale(surface, w.surface)));
  return ad::add(base, geo);
}

Vec3 perturb_view_direction(const Vec3& d, const ViewPerturbation& policy, bool training,
                            RngState& rng) {
  policy.validate();
  if (!policy.active(training) || policy.placement != ViewPerturbation::Placement::BeforeEncoding)
    return d;
  Vec3 noisy = d;
  for (int i = 0; i < 3; ++i) noisy[i] += rng.normal(policy.mu, policy.sigma_noise);
  const double n = noisy.norm();
  return n > 1e-12 ? Vec3(noisy / n) : d;
}

void perturb_encoded_direction(std::span<double> encoded, const ViewPerturbation& policy,
                               bool training, RngState& rng) {
  policy.validate();
  if (!policy.active(training) || policy.placement != ViewPerturbation::Placement::AfterEncoding)
    return;
  for (double& v : encoded) v += rng.normal(policy.mu, policy.sigma_noise);
}

}  // namespace volskin
