#pragma once

#include <utility>

#include "volskin/common.hpp"
#include "volskin/encoding.hpp"
#include "volskin/mlp.hpp"
#include "volskin/tensor.hpp"

namespace volskin {

struct FieldConfig {
  // Density trunk; skip_layer re-concatenates the encoded position at that
  // layer's input (no skip when >= trunk_depth).
  int trunk_depth = 8;
  int trunk_width = 256;
  int skip_layer = 4;
  int color_width = 128;
  int pos_frequencies = 6;
  int dir_frequencies = 4;
  int latent_dim = 128;
  int num_frames = 1;
  // Canonical blend-weight field.
  int num_joints = 4;
  int bw_depth = 4;
  int bw_width = 64;

  PositionalEncoding pos_encoding() const { return {pos_frequencies, true}; }
  PositionalEncoding dir_encoding() const { return {dir_frequencies, true}; }
  int enc_pos_dim() const { return pos_encoding().output_dim(3); }
  int enc_dir_dim() const { return dir_encoding().output_dim(3); }
};

// Canonical-space radiance field: density + feature from encoded position
// only, radiance from (feature, encoded view direction, per-frame appearance
// code). The density path never sees the view direction.
class CanonicalField {
 public:
  explicit CanonicalField(FieldConfig cfg) : cfg_(cfg) {}
  const FieldConfig& config() const { return cfg_; }

  // Registers field.* parameters plus the appearance-code table.
  void init_params(ParamStore& store, RngState& rng) const;

  // enc_pos [N x enc_pos_dim] -> (sigma [N] after softplus, feature [N x W]).
  std::pair<ad::Tensor, ad::Tensor> density(const ParamView& p, const ad::Tensor& enc_pos) const;
  ad::Tensor density_only(const ParamView& p, const ad::Tensor& enc_pos) const;

  // feature [N x W], enc_dir [N x enc_dir_dim], app_row [1 x latent] -> rgb [N x 3].
  ad::Tensor color(const ParamView& p, const ad::Tensor& feature, const ad::Tensor& enc_dir,
                   const ad::Tensor& app_row) const;

  // Single-point evaluation; rejects non-unit view directions.
  std::pair<double, Vec3> eval(const ParamStore& store, const Vec3& x_canonical,
                               const Vec3& d_view, int frame) const;

 private:
  FieldConfig cfg_;
};

}  // namespace volskin
