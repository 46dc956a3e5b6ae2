#pragma once

#include <filesystem>
#include <vector>

#include "volskin/common.hpp"
#include "volskin/field.hpp"
#include "volskin/tensor.hpp"

namespace volskin {

struct CapsuleSkeleton;

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
};

// Per-joint rigid transforms for one frame, canonical -> posed.
struct JointTransformSet {
  int frame = 0;
  std::vector<RigidTransform> joints;
  int num_joints() const { return static_cast<int>(joints.size()); }
  // Rotations must be orthonormal with determinant +1 (tolerance 1e-5).
  void validate() const;
};

// x_canonical = (sum_k w_k G_k)^-1 x_posed. Throws DegeneratePoseError when
// the blended linear part has condition estimate above cond_limit.
Vec3 deform_to_canonical(const Vec3& x_posed, const JointTransformSet& pose,
                         const Eigen::VectorXd& weights, double cond_limit = 1e8);
Vec3 blend_forward(const Vec3& x_canonical, const JointTransformSet& pose,
                   const Eigen::VectorXd& weights);

// Analytic posed-space blend weights: inverse squared distance to each posed
// capsule segment, normalized to sum 1.
Eigen::VectorXd posed_blend_weights(const CapsuleSkeleton& s, const JointTransformSet& pose,
                                    const Vec3& x);

// L1 difference between weight rows, summed over the batch (both [P x K]).
ad::Tensor weight_consistency_loss(const ad::Tensor& posed_weights,
                                   const ad::Tensor& canonical_weights);

// Learned canonical blend-weight field: an MLP over the encoded canonical
// position plus a per-frame latent code, softmax over joints.
class BlendWeightNet {
 public:
  explicit BlendWeightNet(FieldConfig cfg) : cfg_(cfg) {}
  // Registers bw.* parameters plus the per-frame code table `code_table`.
  void init_params(ParamStore& store, RngState& rng, const std::string& code_table,
                   int num_codes) const;
  // enc_pos [N x enc_pos_dim], code_row [1 x latent] -> weights [N x K].
  ad::Tensor forward(const ParamView& p, const ad::Tensor& enc_pos,
                     const ad::Tensor& code_row) const;

 private:
  FieldConfig cfg_;
};

// Plain-text pose file: one record per frame — frame index, K, then K rows of
// 12 reals (row-major rotation, translation).
void save_poses(const std::filesystem::path& path, const std::vector<JointTransformSet>& poses);
std::vector<JointTransformSet> load_poses(const std::filesystem::path& path);

}  // namespace volskin
