#pragma once

#include <span>

#include "volskin/common.hpp"
#include "volskin/tensor.hpp"

namespace volskin {

struct LossWeights {
  double depth = 1.0;
  double normal = 0.01;
  double surface = 0.01;
  void validate() const;  // all >= 0
};

// Training-time Gaussian noise on the view-direction input of the radiance
// head. Placement selects whether the noise lands on the raw direction
// (renormalized afterwards) or on its encoding (left unnormalized).
struct ViewPerturbation {
  bool enabled = false;
  enum class Placement { BeforeEncoding, AfterEncoding };
  Placement placement = Placement::AfterEncoding;
  double mu = 0.2;
  double sigma_noise = 0.5;
  bool active_at_test = false;
  void validate() const;  // sigma_noise >= 0
  bool active(bool training) const { return enabled && (training || active_at_test); }
};

// Sum over rays of the Euclidean norm of the rgb error. pred/target [R x 3].
ad::Tensor photometric_loss(const ad::Tensor& pred, const ad::Tensor& target);

// Sum over rays of |pred/mean(pred) - target/mean(target)|. Batches whose
// mean falls below mean_eps are skipped (skipped flag set, loss zero);
// callers count those as all-background batches.
struct DepthLossResult {
  ad::Tensor loss;
  bool skipped = false;
};
DepthLossResult depth_loss(const ad::Tensor& pred, const ad::Tensor& target,
                           double mean_eps = 1e-6);

// Mean of 1 - cos(pred, target) over the batch; rejects non-unit rows.
ad::Tensor normal_loss(const ad::Tensor& pred, const ad::Tensor& target);

// Mean of (1 - alpha)^2 over surface-point opacities in [0, 1].
ad::Tensor surface_loss(const ad::Tensor& alpha);

// base (photo + weight) + weighted geometric/prior components; throws
// DivergenceError naming the first non-finite component.
ad::Tensor total_loss(const ad::Tensor& photo, const ad::Tensor& weight, const ad::Tensor& depth,
                      const ad::Tensor& normal, const ad::Tensor& surface, const LossWeights& w);

// Perturbs a raw unit view direction per policy (identity when inactive).
Vec3 perturb_view_direction(const Vec3& d, const ViewPerturbation& policy, bool training,
                            RngState& rng);
// Adds noise to an encoded direction row in place when the policy is active
// with AfterEncoding placement.
void perturb_encoded_direction(std::span<double> encoded, const ViewPerturbation& policy,
                               bool training, RngState& rng);

}  // namespace volskin
