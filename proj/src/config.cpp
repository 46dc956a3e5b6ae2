#include "volskin/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace volskin {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

KeyValues KeyValues::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

KeyValues KeyValues::parse_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + " is not key=value");
    kv.entries_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

bool KeyValues::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValues::get_str(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : std::stod(it->second);
}

int KeyValues::get_int(const std::string& key, int fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : std::stoi(it->second);
}

uint64_t KeyValues::get_u64(const std::string& key, uint64_t fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : std::stoull(it->second);
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config: key " + key + " is not a boolean");
}

void KeyValues::set(const std::string& key, const std::string& value) { entries_[key] = value; }
void KeyValues::set_double(const std::string& key, double value) {
  entries_[key] = fmt_double(value);
}
void KeyValues::set_int(const std::string& key, long long value) {
  entries_[key] = std::to_string(value);
}
void KeyValues::set_bool(const std::string& key, bool value) {
  entries_[key] = value ? "true" : "false";
}

std::string KeyValues::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << "=" << v << "\n";
  return os.str();
}

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw std::invalid_argument("config: learning_rate must be positive");
  if (batch_rays < 1) throw std::invalid_argument("config: batch_rays must be >= 1");
  if (samples_per_ray < 2) throw std::invalid_argument("config: samples_per_ray must be >= 2");
  weights.validate();
  perturb.validate();
}

TrainConfig desk_scale_config() {
  TrainConfig cfg;
  cfg.field.trunk_depth = 4;
  cfg.field.trunk_width = 64;
  cfg.field.skip_layer = 2;
  cfg.field.color_width = 64;
  cfg.batch_rays = 64;
  cfg.box_samples = 256;
  return cfg;
}

TrainConfig train_config_from(const KeyValues& kv) {
  TrainConfig d;
  TrainConfig c;
  c.learning_rate = kv.get_double("train.learning_rate", d.learning_rate);
  c.batch_rays = kv.get_int("train.batch_rays", d.batch_rays);
  c.samples_per_ray = kv.get_int("train.samples_per_ray", d.samples_per_ray);
  c.steps_stage1 = kv.get_int("train.steps_stage1", d.steps_stage1);
  c.steps_stage2 = kv.get_int("train.steps_stage2", d.steps_stage2);
  c.seed = kv.get_u64("train.seed", d.seed);
  c.adam_beta1 = kv.get_double("train.adam_beta1", d.adam_beta1);
  c.adam_beta2 = kv.get_double("train.adam_beta2", d.adam_beta2);
  c.adam_eps = kv.get_double("train.adam_eps", d.adam_eps);
  c.weights.depth = kv.get_double("train.lambda_depth", d.weights.depth);
  c.weights.normal = kv.get_double("train.lambda_normal", d.weights.normal);
  c.weights.surface = kv.get_double("train.lambda_surface", d.weights.surface);
  c.perturb.enabled = kv.get_bool("train.perturb.enabled", d.perturb.enabled);
  const std::string placement = kv.get_str("train.perturb.placement", "after_encoding");
  if (placement == "before_encoding")
    c.perturb.placement = ViewPerturbation::Placement::BeforeEncoding;
  else if (placement == "after_encoding")
    c.perturb.placement = ViewPerturbation::Placement::AfterEncoding;
  else
    throw std::runtime_error("config: unknown perturbation placement " + placement);
  c.perturb.mu = kv.get_double("train.perturb.mu", d.perturb.mu);
  c.perturb.sigma_noise = kv.get_double("train.perturb.sigma", d.perturb.sigma_noise);
  c.perturb.active_at_test = kv.get_bool("train.perturb.active_at_test", d.perturb.active_at_test);
  c.box_samples = kv.get_int("train.box_samples", d.box_samples);
  c.fg_fraction = kv.get_double("train.fg_fraction", d.fg_fraction);
  c.band_dilation = kv.get_int("train.band_dilation", d.band_dilation);
  c.opacity_threshold = kv.get_double("train.opacity_threshold", d.opacity_threshold);
  c.normal_fd_step = kv.get_double("train.normal_fd_step", d.normal_fd_step);
  c.surface_loss_raw_sigma = kv.get_bool("train.surface_loss_raw_sigma", d.surface_loss_raw_sigma);
  c.lr_decay = kv.get_double("train.lr_decay", d.lr_decay);
  c.checkpoint_every = kv.get_int("train.checkpoint_every", d.checkpoint_every);
  c.ray_dir_noise = kv.get_double("train.ray_dir_noise", d.ray_dir_noise);
  c.ray_origin_noise = kv.get_double("train.ray_origin_noise", d.ray_origin_noise);
  c.background.x() = kv.get_double("render.background_r", d.background.x());
  c.background.y() = kv.get_double("render.background_g", d.background.y());
  c.background.z() = kv.get_double("render.background_b", d.background.z());
  c.field.trunk_depth = kv.get_int("field.trunk_depth", d.field.trunk_depth);
  c.field.trunk_width = kv.get_int("field.trunk_width", d.field.trunk_width);
  c.field.skip_layer = kv.get_int("field.skip_layer", d.field.skip_layer);
  c.field.color_width = kv.get_int("field.color_width", d.field.color_width);
  c.field.pos_frequencies = kv.get_int("field.pos_frequencies", d.field.pos_frequencies);
  c.field.dir_frequencies = kv.get_int("field.dir_frequencies", d.field.dir_frequencies);
  c.field.latent_dim = kv.get_int("field.latent_dim", d.field.latent_dim);
  c.field.num_joints = kv.get_int("field.num_joints", d.field.num_joints);
  c.field.bw_depth = kv.get_int("field.bw_depth", d.field.bw_depth);
  c.field.bw_width = kv.get_int("field.bw_width", d.field.bw_width);
  c.validate();
  return c;
}

KeyValues to_keyvalues(const TrainConfig& c) {
  KeyValues kv;
  kv.set_double("train.learning_rate", c.learning_rate);
  kv.set_int("train.batch_rays", c.batch_rays);
  kv.set_int("train.samples_per_ray", c.samples_per_ray);
  kv.set_int("train.steps_stage1", c.steps_stage1);
  kv.set_int("train.steps_stage2", c.steps_stage2);
  kv.set_int("train.seed", static_cast<long long>(c.seed));
  kv.set_double("train.adam_beta1", c.adam_beta1);
  kv.set_double("train.adam_beta2", c.adam_beta2);
  kv.set_double("train.adam_eps", c.adam_eps);
  kv.set_double("train.lambda_depth", c.weights.depth);
  kv.set_double("train.lambda_normal", c.weights.normal);
  kv.set_double("train.lambda_surface", c.weights.surface);
  kv.set_bool("train.perturb.enabled", c.perturb.enabled);
  kv.set("train.perturb.placement",
         c.perturb.placement == ViewPerturbation::Placement::BeforeEncoding ? "before_encoding"
                                                                            : "after_encoding");
  kv.set_double("train.perturb.mu", c.perturb.mu);
  kv.set_double("train.perturb.sigma", c.perturb.sigma_noise);
  kv.set_bool("train.perturb.active_at_test", c.perturb.active_at_test);
  kv.set_int("train.box_samples", c.box_samples);
  kv.set_double("train.fg_fraction", c.fg_fraction);
  kv.set_int("train.band_dilation", c.band_dilation);
  kv.set_double("train.opacity_threshold", c.opacity_threshold);
  kv.set_double("train.normal_fd_step", c.normal_fd_step);
  kv.set_bool("train.surface_loss_raw_sigma", c.surface_loss_raw_sigma);
  kv.set_double("train.lr_decay", c.lr_decay);
  kv.set_int("train.checkpoint_every", c.checkpoint_every);
  kv.set_double("train.ray_dir_noise", c.ray_dir_noise);
  kv.set_double("train.ray_origin_noise", c.ray_origin_noise);
  kv.set_double("render.background_r", c.background.x());
  kv.set_double("render.background_g", c.background.y());
  kv.set_double("render.background_b", c.background.z());
  kv.set_int("field.trunk_depth", c.field.trunk_depth);
  kv.set_int("field.trunk_width", c.field.trunk_width);
  kv.set_int("field.skip_layer", c.field.skip_layer);
  kv.set_int("field.color_width", c.field.color_width);
  kv.set_int("field.pos_frequencies", c.field.pos_frequencies);
  kv.set_int("field.dir_frequencies", c.field.dir_frequencies);
  kv.set_int("field.latent_dim", c.field.latent_dim);
  kv.set_int("field.num_joints", c.field.num_joints);
  kv.set_int("field.bw_depth", c.field.bw_depth);
  kv.set_int("field.bw_width", c.field.bw_width);
  return kv;
}

SceneConfig scene_config_from(const KeyValues& kv) {
  SceneConfig d;
  SceneConfig c;
  c.width = kv.get_int("scene.width", d.width);
  c.height = kv.get_int("scene.height", d.height);
  c.num_cameras = kv.get_int("scene.cameras", d.num_cameras);
  c.num_poses = kv.get_int("scene.poses", d.num_poses);
  c.noise_sigma = kv.get_double("scene.noise_sigma", d.noise_sigma);
  c.seed = kv.get_u64("scene.seed", d.seed);
  c.camera_radius = kv.get_double("scene.camera_radius", d.camera_radius);
  c.focal = kv.get_double("scene.focal", d.focal);
  return c;
}

std::string config_hash(const TrainConfig& cfg) {
  return hex64(fnv1a(to_keyvalues(cfg).serialize()));
}

std::vector<AblationRow> ablation_grid(const std::string& grid_name, const TrainConfig& base) {
  if (grid_name != "default")
    throw std::invalid_argument("ablate: unknown grid " + grid_name);
  const double ld = base.weights.depth > 0 ? base.weights.depth : 1.0;
  const double ln = base.weights.normal > 0 ? base.weights.normal : 0.01;
  const double ls = base.weights.surface > 0 ? base.weights.surface : 0.01;
  auto row = [&](const std::string& name, double d, double n, double s, bool vnoise) {
    TrainConfig c = base;
    c.weights.depth = d;
    c.weights.normal = n;
    c.weights.surface = s;
    c.perturb.enabled = vnoise;
    return AblationRow{name, c};
  };
  return {
      row("baseline", 0, 0, 0, false),
      row("+depth", ld, 0, 0, false),
      row("+normal", 0, ln, 0, false),
      row("+depth+normal", ld, ln, 0, false),
      row("+vnoise", 0, 0, 0, true),
      row("+dmax", 0, 0, ls, false),
      row("+all", ld, ln, ls, true),
  };
}

}  // namespace volskin
