#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "volskin/common.hpp"
#include "volskin/dataset.hpp"
#include "volskin/field.hpp"
#include "volskin/losses.hpp"

namespace volskin {

// Plain-text key=value store ('#' starts a comment). Keys sort canonically
// for serialization, which makes the config hash order-independent.
class KeyValues {
 public:
  KeyValues() = default;
  static KeyValues parse_file(const std::filesystem::path& path);
  static KeyValues parse_text(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long long value);
  void set_bool(const std::string& key, bool value);

  std::string serialize() const;  // sorted key=value lines

 private:
  std::map<std::string, std::string> entries_;
};

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_rays = 1024;
  int samples_per_ray = 64;
  int steps_stage1 = 5000;
  int steps_stage2 = 1000;
  uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights weights;        // lambda_depth, lambda_normal, lambda_surface
  ViewPerturbation perturb;   // view-direction noise policy
  int box_samples = 1024;     // per-step draws for the blend-weight loss
  double fg_fraction = 0.8;   // foreground share of each ray batch
  int band_dilation = 3;      // pixels; background band around the mask
  double opacity_threshold = 0.1;
  double normal_fd_step = 1e-3;
  bool surface_loss_raw_sigma = false;
  double lr_decay = 0.0;      // exponential decay to lr*decay over stage 1; 0 = off
  int checkpoint_every = 0;   // steps; 0 = final checkpoint only
  // Negative-control knobs; both degrade geometry severely when nonzero.
  double ray_dir_noise = 0.0;
  double ray_origin_noise = 0.0;
  Vec3 background = Vec3(0.2, 0.2, 0.2);
  FieldConfig field;

  void validate() const;
};

// Desk-scale defaults used by the acceptance runs: 4 x 64 trunk with the skip
// at layer 2, 64-wide color branch, small ray batches.
TrainConfig desk_scale_config();

TrainConfig train_config_from(const KeyValues& kv);
KeyValues to_keyvalues(const TrainConfig& cfg);
SceneConfig scene_config_from(const KeyValues& kv);

// FNV-1a over the canonical serialization.
std::string config_hash(const TrainConfig& cfg);

// Named configuration rows for the ablation sweep. The default grid walks
// {baseline, +depth, +normal, +depth+normal, +vnoise, +dmax, +all}, taking
// component magnitudes (lambdas, perturbation policy) from `base`.
struct AblationRow {
  std::string name;
  TrainConfig config;
};
std::vector<AblationRow> ablation_grid(const std::string& grid_name, const TrainConfig& base);

}  // namespace volskin
