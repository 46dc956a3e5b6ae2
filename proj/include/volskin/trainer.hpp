#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "volskin/pipeline.hpp"

namespace volskin {

// Standard bias-corrected Adam state for one tensor.
struct AdamState {
  ad::Tensor m, v;
  long step = 0;
};

// One update in place; moments and parameters are quantized to float32 after
// the step so persisted state round-trips bit-exactly.
void adam_step(ad::Tensor& param, const ad::Tensor& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Adam over a selected subset of a ParamStore. Non-finite gradients skip the
// whole step (incident counted and logged).
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1, double beta2, double eps);
  void attach(const ParamStore& store, std::vector<int> trainable);
  // tracked runs parallel to the store; returns false when the step was
  // skipped because of a non-finite gradient.
  bool step(ParamStore& store, const std::vector<ad::Tensor>& tracked,
            const ad::GradientMap& grads, double lr_override = -1.0);
  long steps_taken() const { return t_; }
  int incidents() const { return incidents_; }
  const std::vector<int>& trainable() const { return trainable_; }
  const ad::Tensor& moment1(int store_index) const;
  const ad::Tensor& moment2(int store_index) const;

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  int incidents_ = 0;
  std::vector<int> trainable_;
  std::vector<ad::Tensor> m_, v_;  // parallel to trainable_
};

// Foreground-biased pixel batch: round(batch * fg_fraction) draws from the
// mask-true pool, the rest from the dilated band (foreground when the band is
// empty). Draws are with replacement.
std::vector<int> compose_ray_batch(const std::vector<int>& fg, const std::vector<int>& band,
                                   int batch, double fg_fraction, RngState& rng);

struct StepStats {
  int step = 0;
  double photo = 0, weight = 0, depth = 0, normal = 0, surface = 0, total = 0;
  double batch_mse = 0;  // photometric mean squared error over the ray batch
  bool depth_skipped = false;
  int normal_rays = 0;
};

struct StageResult {
  std::vector<StepStats> trace;
  int skipped_depth_batches = 0;
  int surface_clamp_count = 0;
};

class Trainer {
 public:
  // Trains on every camera except the dataset's held-out test camera.
  Trainer(const Dataset& ds, TrainConfig cfg);

  // Canonical network, blend-weight field and both code tables learn; emits
  // a comma-separated loss trace ("step,photo,weight,depth,normal,surface,
  // total") when trace_out is given, plus periodic checkpoints under out_dir.
  StageResult train_stage1(const std::filesystem::path& out_dir = {},
                           std::ostream* trace_out = nullptr);

  // Novel-pose blend-weight codes learn against the analytic posed weights;
  // everything else stays untouched.
  StageResult train_stage2(std::ostream* trace_out = nullptr);

  ModelState& model() { return model_; }
  const ModelState& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

  void save_checkpoint(const std::filesystem::path& path) const;
  void save_optimizer(const std::filesystem::path& path) const;

 private:
  StepStats run_stage1_step(int step);
  StepStats run_stage2_step(int step);
  double stage_lr(int step, int total_steps) const;

  const Dataset& data_;
  TrainConfig cfg_;
  ModelState model_;
  std::vector<int> train_records_;  // indices into data_.records
  std::vector<std::vector<int>> fg_pixels_;
  std::vector<std::vector<int>> band_pixels_;
  std::vector<Aabb> pose_bounds_;
  std::vector<Aabb> novel_bounds_;
  RngState rng_;
  AdamOptimizer opt_;
  StageResult* active_result_ = nullptr;
};

}  // namespace volskin
