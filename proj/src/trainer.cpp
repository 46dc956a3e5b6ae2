#include "volskin/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <ostream>

namespace volskin {

namespace {

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

void quantize_tensor(ad::Tensor& t) {
  for (int i = 0; i < t.numel(); ++i) t.data()[i] = quantize(t.at(i));
}

}  // namespace

void adam_step(ad::Tensor& param, const ad::Tensor& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (param.shape() != grad.shape())
    throw ShapeError("adam_step: grad " + grad.shape_str() + " vs param " + param.shape_str());
  if (!grad.all_finite()) throw std::invalid_argument("adam_step: non-finite gradient");
  if (!state.m.defined()) {
    state.m = ad::Tensor(param.shape());
    state.v = ad::Tensor(param.shape());
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (int i = 0; i < param.numel(); ++i) {
    const double g = grad.at(i);
    const double m = beta1 * state.m.at(i) + (1.0 - beta1) * g;
    const double v = beta2 * state.v.at(i) + (1.0 - beta2) * g * g;
    state.m.data()[i] = quantize(m);
    state.v.data()[i] = quantize(v);
    const double update = lr * (m / c1) / (std::sqrt(v / c2) + eps);
    param.data()[i] = quantize(param.at(i) - update);
  }
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::attach(const ParamStore& store, std::vector<int> trainable) {
  trainable_ = std::move(trainable);
  m_.clear();
  v_.clear();
  for (int idx : trainable_) {
    m_.emplace_back(store.value(idx).shape());
    v_.emplace_back(store.value(idx).shape());
  }
  t_ = 0;
}

const ad::Tensor& AdamOptimizer::moment1(int store_index) const {
  for (size_t i = 0; i < trainable_.size(); ++i)
    if (trainable_[i] == store_index) return m_[i];
  throw std::out_of_range("optimizer: parameter not attached");
}

const ad::Tensor& AdamOptimizer::moment2(int store_index) const {
  for (size_t i = 0; i < trainable_.size(); ++i)
    if (trainable_[i] == store_index) return v_[i];
  throw std::out_of_range("optimizer: parameter not attached");
}

bool AdamOptimizer::step(ParamStore& store, const std::vector<ad::Tensor>& tracked,
                         const ad::GradientMap& grads, double lr_override) {
  std::vector<ad::Tensor> pending;
  pending.reserve(trainable_.size());
  for (int idx : trainable_) {
    ad::Tensor g = grads.grad_of(tracked[idx]);
    if (!g.all_finite()) {
      ++incidents_;
      std::cerr << "adam: skipping step, non-finite gradient for " << store.name(idx) << "\n";
      return false;
    }
    pending.push_back(std::move(g));
  }
  ++t_;
  const double lr = lr_override > 0.0 ? lr_override : lr_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t k = 0; k < trainable_.size(); ++k) {
    ad::Tensor& param = store.value(trainable_[k]);
    const ad::Tensor& g = pending[k];
    for (int i = 0; i < param.numel(); ++i) {
      const double m = beta1_ * m_[k].at(i) + (1.0 - beta1_) * g.at(i);
      const double v = beta2_ * v_[k].at(i) + (1.0 - beta2_) * g.at(i) * g.at(i);
      m_[k].data()[i] = quantize(m);
      v_[k].data()[i] = quantize(v);
      const double update = lr * (m / c1) / (std::sqrt(v / c2) + eps_);
      param.data()[i] = quantize(param.at(i) - update);
    }
  }
  return true;
}

std::vector<int> compose_ray_batch(const std::vector<int>& fg, const std::vector<int>& band,
                                   int batch, double fg_fraction, RngState& rng) {
  if (fg.empty()) throw std::invalid_argument("compose_ray_batch: no foreground pixels");
  const int n_fg = static_cast<int>(std::lround(batch * fg_fraction));
  std::vector<int> pixels;
  pixels.reserve(batch);
  for (int i = 0; i < batch; ++i) {
    const std::vector<int>& pool = (i < n_fg || band.empty()) ? fg : band;
    pixels.push_back(pool[rng.uniform_int(static_cast<int>(pool.size()))]);
  }
  return pixels;
}

Trainer::Trainer(const Dataset& ds, TrainConfig cfg)
    : data_(ds),
      cfg_(std::move(cfg)),
      model_(build_model(cfg_.field, ds.skeleton, static_cast<int>(ds.poses.size()),
                         static_cast<int>(ds.novel_poses.size()), cfg_.seed)),
      rng_(cfg_.seed * 0x9e3779b97f4a7c15ull + 1),
      opt_(cfg_.learning_rate, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps) {
  cfg_.validate();
  if (ds.cameras.size() < 2)
    throw std::invalid_argument("trainer: need a train camera besides the test camera");
  const int test_cam = data_.test_camera();
  bool any_fg = false;
  for (size_t i = 0; i < data_.records.size(); ++i) {
    const FrameRecord& rec = data_.records[i];
    if (rec.camera == test_cam) continue;
    train_records_.push_back(static_cast<int>(i));
    // Foreground pixels plus a dilated band just outside the silhouette.
    std::vector<int> fg, band;
    const ImageMask& mask = rec.mask;
    const int rdil = cfg_.band_dilation;
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        if (mask.at(x, y)) {
          fg.push_back(y * mask.width + x);
          continue;
        }
        bool near = false;
        for (int dy = -rdil; dy <= rdil && !near; ++dy) {
          for (int dx = -rdil; dx <= rdil && !near; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx >= 0 && nx < mask.width && ny >= 0 && ny < mask.height && mask.at(nx, ny))
              near = true;
          }
        }
        if (near) band.push_back(y * mask.width + x);
      }
    }
    any_fg = any_fg || !fg.empty();
    fg_pixels_.push_back(std::move(fg));
    band_pixels_.push_back(std::move(band));
  }
  if (!any_fg) throw std::invalid_argument("trainer: no foreground pixels in the training views");
  for (const auto& pose : data_.poses) pose_bounds_.push_back(posed_bounds(ds.skeleton, pose, 0.1));
  for (const auto& pose : data_.novel_poses)
    novel_bounds_.push_back(posed_bounds(ds.skeleton, pose, 0.1));
}

double Trainer::stage_lr(int step, int total_steps) const {
  if (cfg_.lr_decay <= 0.0 || cfg_.lr_decay >= 1.0 || total_steps <= 1) return cfg_.learning_rate;
  const double frac = static_cast<double>(step) / (total_steps - 1);
  return cfg_.learning_rate * std::pow(cfg_.lr_decay, frac);
}

StepStats Trainer::run_stage1_step(int step) {
  // train_records_ and the pixel caches run parallel by construction.
  int local = rng_.uniform_int(static_cast<int>(train_records_.size()));
  while (fg_pixels_[local].empty())
    local = rng_.uniform_int(static_cast<int>(train_records_.size()));
  const FrameRecord& rec = data_.records[train_records_[local]];
  const Aabb& bounds = pose_bounds_[rec.frame];

  const std::vector<int> pixels = compose_ray_batch(fg_pixels_[local], band_pixels_[local],
                                                    cfg_.batch_rays, cfg_.fg_fraction, rng_);

  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (int px : pixels) {
    Ray ray = make_ray(rec.cam, px % rec.cam.width, px / rec.cam.width, rec.frame);
    set_ray_bounds(ray, bounds.center(), bounds.bounding_radius());
    rays.push_back(ray);
  }

  ad::Tape tape;
  ParamView params(model_.params, tape);
  BatchGraph graph = run_ray_batch(model_, params, rays, rec.pose, rec.frame, bounds, cfg_,
                                   /*training=*/true, &rng_, &rng_);

  const int num_rays = static_cast<int>(rays.size());
  ad::Tensor target({num_rays, 3});
  for (int r = 0; r < num_rays; ++r) {
    const float* px = rec.rgb.pix.data() + static_cast<size_t>(pixels[r]) * 3;
    for (int i = 0; i < 3; ++i) target.data()[r * 3 + i] = px[i];
  }
  ad::Tensor photo = photometric_loss(graph.color, target);

  StepStats stats;
  stats.step = step;
  {
    double acc = 0.0;
    for (int i = 0; i < num_rays * 3; ++i) {
      const double d = graph.color.at(i) - target.at(i);
      acc += d * d;
    }
    stats.batch_mse = acc / (num_rays * 3);
  }

  // Geometry losses see foreground rays whose rendered opacity is solid.
  std::vector<int> geo_rows;
  for (int r = 0; r < num_rays; ++r)
    if (rec.mask.pix[pixels[r]] && graph.opacity.at(r) >= cfg_.opacity_threshold)
      geo_rows.push_back(r);

  ad::Tensor depth_term = ad::Tensor::scalar(0.0);
  ad::Tensor normal_term = ad::Tensor::scalar(0.0);
  ad::Tensor surface_term = ad::Tensor::scalar(0.0);
  bool need_geometry =
      cfg_.weights.depth > 0 || cfg_.weights.normal > 0 || cfg_.weights.surface > 0;
  if (need_geometry && !geo_rows.empty()) {
    if (cfg_.weights.depth > 0) {
      ad::Tensor pred = ad::gather_rows(ad::reshape(graph.depth, {num_rays, 1}), geo_rows);
      ad::Tensor gt({static_cast<int>(geo_rows.size()), 1});
      for (size_t k = 0; k < geo_rows.size(); ++k)
        gt.data()[k] = rec.depth.pix[pixels[geo_rows[k]]];
      DepthLossResult dl = depth_loss(pred, gt);
      stats.depth_skipped = dl.skipped;
      if (dl.skipped && active_result_) ++active_result_->skipped_depth_batches;
      depth_term = dl.loss;
    }

    // Ray-surface points from the rendered depth values (positions enter the
    // graph as constants; density gradients still reach the parameters).
    std::vector<Vec3> surface_pts(geo_rows.size());
    double mean_delta = 0.0;
    for (size_t k = 0; k < geo_rows.size(); ++k) {
      const Ray& ray = rays[geo_rows[k]];
      int clamps = 0;
      surface_pts[k] = surface_point(ray, graph.depth.at(geo_rows[k]), &clamps);
      if (clamps && active_result_) active_result_->surface_clamp_count += clamps;
      mean_delta += (ray.far - ray.near) / cfg_.samples_per_ray;
    }
    mean_delta /= static_cast<double>(geo_rows.size());

    if (cfg_.weights.normal > 0) {
      NormalGraph ng = density_normals_on_tape(model_, params, rec.pose, surface_pts,
                                               cfg_.normal_fd_step);
      stats.normal_rays = static_cast<int>(ng.kept.size());
      if (!ng.kept.empty()) {
        ad::Tensor gt({static_cast<int>(ng.kept.size()), 3});
        for (size_t k = 0; k < ng.kept.size(); ++k) {
          const float* n = rec.normal.pix.data() +
                           static_cast<size_t>(pixels[geo_rows[ng.kept[k]]]) * 3;
          for (int i = 0; i < 3; ++i) gt.data()[k * 3 + i] = n[i];
        }
        normal_term = normal_loss(ng.normals, gt);
      }
    }

    if (cfg_.weights.surface > 0) {
      ad::Tensor enc = encode_rows(model_.cfg.pos_encoding(),
                                   deform_points(model_, rec.pose, surface_pts));
      ad::Tensor sigma_s = model_.field().density_only(params, enc);
      if (cfg_.surface_loss_raw_sigma) {
        surface_term = ad::mean(ad::square(ad::add_scalar(ad::neg(sigma_s), 1.0)));
      } else {
        ad::Tensor alpha =
            ad::add_scalar(ad::neg(ad::exp(ad::scale(sigma_s, -mean_delta))), 1.0);
        surface_term = surface_loss(alpha);
      }
    }
  }

  // Blend-weight consistency over box samples of this frame.
  ad::Tensor weight_term = ad::Tensor::scalar(0.0);
  if (cfg_.box_samples > 0) {
    std::vector<Vec3> box_pts(cfg_.box_samples);
    ad::Tensor posed_w({cfg_.box_samples, model_.cfg.num_joints});
    for (int i = 0; i < cfg_.box_samples; ++i) {
      Vec3 p;
      for (int a = 0; a < 3; ++a) p[a] = rng_.uniform(bounds.lo[a], bounds.hi[a]);
      box_pts[i] = p;
      const Eigen::VectorXd w = posed_blend_weights(model_.skeleton, rec.pose, p);
      for (int k = 0; k < model_.cfg.num_joints; ++k)
        posed_w.data()[i * model_.cfg.num_joints + k] = w[k];
    }
    ad::Tensor enc = encode_rows(model_.cfg.pos_encoding(),
                                 deform_points(model_, rec.pose, box_pts));
    ad::Tensor canon_w = model_.bw_net().forward(
        params, enc, ad::take_row(params.get("bw_codes"), rec.frame));
    weight_term = weight_consistency_loss(posed_w, canon_w);
  }

  ad::Tensor total =
      total_loss(photo, weight_term, depth_term, normal_term, surface_term, cfg_.weights);

  stats.photo = photo.value();
  stats.weight = weight_term.value();
  stats.depth = depth_term.value();
  stats.normal = normal_term.value();
  stats.surface = surface_term.value();
  stats.total = total.value();

  ad::GradientMap grads = tape.backward(total);
  std::vector<ad::Tensor> tracked;
  tracked.reserve(model_.params.size());
  for (int i = 0; i < model_.params.size(); ++i) tracked.push_back(params.get(i));
  opt_.step(model_.params, tracked, grads, stage_lr(step, cfg_.steps_stage1));
  return stats;
}

StageResult Trainer::train_stage1(const std::filesystem::path& out_dir, std::ostream* trace_out) {
  StageResult result;
  active_result_ = &result;
  std::vector<int> all(model_.params.size());
  for (int i = 0; i < model_.params.size(); ++i) all[i] = i;
  // Novel-pose codes wait for stage 2.
  const int novel_idx = model_.params.index_of("bw_codes_novel");
  if (novel_idx >= 0) all.erase(all.begin() + novel_idx);
  opt_.attach(model_.params, all);

  double guard_reference = -1.0;
  for (int step = 0; step < cfg_.steps_stage1; ++step) {
    StepStats stats = run_stage1_step(step);
    if (trace_out)
      *trace_out << stats.step << "," << stats.photo << "," << stats.weight << "," << stats.depth
                 << "," << stats.normal << "," << stats.surface << "," << stats.total << "\n";
    if (step == 100) guard_reference = stats.total;
    if (guard_reference > 0.0 && stats.total > 10.0 * guard_reference)
      throw DivergenceError("total", "divergence guard: step " + std::to_string(step) +
                                         " total " + std::to_string(stats.total) + " exceeds 10x "
                                         "the step-100 value " +
                                         std::to_string(guard_reference));
    result.trace.push_back(stats);
    if (!out_dir.empty() && cfg_.checkpoint_every > 0 && (step + 1) % cfg_.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06d.bin", step + 1);
      save_checkpoint(out_dir / name);
    }
  }
  if (!out_dir.empty()) {
    save_checkpoint(out_dir / "checkpoint_final.bin");
    save_optimizer(out_dir / "checkpoint_final.opt");
  }
  active_result_ = nullptr;
  return result;
}

StepStats Trainer::run_stage2_step(int step) {
  const int local = rng_.uniform_int(static_cast<int>(data_.novel_poses.size()));
  const JointTransformSet& pose = data_.novel_poses[local];
  const Aabb& bounds = novel_bounds_[local];

  ad::Tape tape;
  ParamView params(model_.params, tape);
  std::vector<Vec3> box_pts(cfg_.box_samples);
  ad::Tensor posed_w({cfg_.box_samples, model_.cfg.num_joints});
  for (int i = 0; i < cfg_.box_samples; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = rng_.uniform(bounds.lo[a], bounds.hi[a]);
    box_pts[i] = p;
    const Eigen::VectorXd w = posed_blend_weights(model_.skeleton, pose, p);
    for (int k = 0; k < model_.cfg.num_joints; ++k)
      posed_w.data()[i * model_.cfg.num_joints + k] = w[k];
  }
  ad::Tensor enc = encode_rows(model_.cfg.pos_encoding(), deform_points(model_, pose, box_pts));
  ad::Tensor canon_w =
      model_.bw_net().forward(params, enc, ad::take_row(params.get("bw_codes_novel"), local));
  ad::Tensor loss = weight_consistency_loss(posed_w, canon_w);

  StepStats stats;
  stats.step = step;
  stats.weight = loss.value();
  stats.total = loss.value();
  if (!std::isfinite(stats.total))
    throw DivergenceError("weight", "stage 2: weight loss is not finite");

  ad::GradientMap grads = tape.backward(loss);
  std::vector<ad::Tensor> tracked;
  tracked.reserve(model_.params.size());
  for (int i = 0; i < model_.params.size(); ++i) tracked.push_back(params.get(i));
  opt_.step(model_.params, tracked, grads);
  return stats;
}

StageResult Trainer::train_stage2(std::ostream* trace_out) {
  StageResult result;
  if (data_.novel_poses.empty() || cfg_.steps_stage2 <= 0) return result;
  const int novel_idx = model_.params.index_of("bw_codes_novel");
  if (novel_idx < 0) throw std::logic_error("stage 2: model has no novel-pose code table");
  opt_.attach(model_.params, {novel_idx});
  for (int step = 0; step < cfg_.steps_stage2; ++step) {
    StepStats stats = run_stage2_step(step);
    if (trace_out)
      *trace_out << stats.step << "," << stats.photo << "," << stats.weight << "," << stats.depth
                 << "," << stats.normal << "," << stats.surface << "," << stats.total << "\n";
    result.trace.push_back(stats);
  }
  return result;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  save_model(model_, path,
             {{"config_hash", config_hash(cfg_)}, {"seed", std::to_string(cfg_.seed)}});
}

void Trainer::save_optimizer(const std::filesystem::path& path) const {
  TensorFile file;
  file.magic = kOptimizerMagic;
  file.meta = {{"steps", std::to_string(opt_.steps_taken())}};
  for (int idx : opt_.trainable()) {
    file.tensors.emplace_back("m." + model_.params.name(idx), opt_.moment1(idx));
    file.tensors.emplace_back("v." + model_.params.name(idx), opt_.moment2(idx));
  }
  save_tensor_file(path, file);
}

}  // namespace volskin
