#include "volskin/pipeline.hpp"

#include <cmath>
#include <stdexcept>

namespace volskin {

ModelState build_model(FieldConfig cfg, const CapsuleSkeleton& skeleton, int num_train_frames,
                       int num_novel_frames, uint64_t seed) {
  cfg.num_frames = num_train_frames;
  cfg.num_joints = skeleton.num_joints();
  ModelState m;
  m.cfg = cfg;
  m.skeleton = skeleton;
  m.num_train_frames = num_train_frames;
  m.num_novel_frames = num_novel_frames;
  RngState rng(seed);
  CanonicalField(cfg).init_params(m.params, rng);
  BlendWeightNet(cfg).init_params(m.params, rng, "bw_codes", num_train_frames);
  if (num_novel_frames > 0)
    m.params.add("bw_codes_novel", ad::Tensor({num_novel_frames, cfg.latent_dim}));
  return m;
}

void save_model(const ModelState& m, const std::filesystem::path& path,
                std::vector<std::pair<std::string, std::string>> extra_meta) {
  std::vector<std::pair<std::string, std::string>> meta;
  auto put = [&](const std::string& k, long long v) { meta.emplace_back(k, std::to_string(v)); };
  put("trunk_depth", m.cfg.trunk_depth);
  put("trunk_width", m.cfg.trunk_width);
  put("skip_layer", m.cfg.skip_layer);
  put("color_width", m.cfg.color_width);
  put("pos_frequencies", m.cfg.pos_frequencies);
  put("dir_frequencies", m.cfg.dir_frequencies);
  put("latent_dim", m.cfg.latent_dim);
  put("num_joints", m.cfg.num_joints);
  put("bw_depth", m.cfg.bw_depth);
  put("bw_width", m.cfg.bw_width);
  put("num_train_frames", m.num_train_frames);
  put("num_novel_frames", m.num_novel_frames);
  for (auto& kv : extra_meta) meta.push_back(std::move(kv));
  save_tensor_file(path, checkpoint_from(m.params, std::move(meta)));
}

ModelState load_model(const std::filesystem::path& path) {
  TensorFile file = load_tensor_file(path, kCheckpointMagic);
  auto geti = [&](const char* k) { return std::stoi(file.meta_value(k, "0")); };
  FieldConfig cfg;
  cfg.trunk_depth = geti("trunk_depth");
  cfg.trunk_width = geti("trunk_width");
  cfg.skip_layer = geti("skip_layer");
  cfg.color_width = geti("color_width");
  cfg.pos_frequencies = geti("pos_frequencies");
  cfg.dir_frequencies = geti("dir_frequencies");
  cfg.latent_dim = geti("latent_dim");
  cfg.bw_depth = geti("bw_depth");
  cfg.bw_width = geti("bw_width");
  ModelState m =
      build_model(cfg, default_skeleton(), geti("num_train_frames"), geti("num_novel_frames"), 0);
  restore_into(m.params, file);
  return m;
}

ad::Tensor deform_points(const ModelState& m, const JointTransformSet& pose,
                         const std::vector<Vec3>& posed) {
  ad::Tensor out({static_cast<int>(posed.size()), 3});
  double* po = out.data();
#pragma omp parallel for schedule(static) if (posed.size() > 2048)
  for (size_t i = 0; i < posed.size(); ++i) {
    const Eigen::VectorXd w = posed_blend_weights(m.skeleton, pose, posed[i]);
    const Vec3 xc = deform_to_canonical(posed[i], pose, w);
    po[i * 3 + 0] = xc.x();
    po[i * 3 + 1] = xc.y();
    po[i * 3 + 2] = xc.z();
  }
  return out;
}

BatchGraph run_ray_batch(const ModelState& m, const ParamView& params, std::vector<Ray> rays,
                         const JointTransformSet& pose, int code_row, const Aabb& bounds,
                         const TrainConfig& tc, bool training, RngState* sample_rng,
                         RngState* perturb_rng) {
  const int num_rays = static_cast<int>(rays.size());
  const int samples = tc.samples_per_ray;
  const CanonicalField field = m.field();

  // Negative-control perturbations of the marching geometry itself.
  if (training && perturb_rng && (tc.ray_dir_noise > 0.0 || tc.ray_origin_noise > 0.0)) {
    for (Ray& ray : rays) {
      if (tc.ray_origin_noise > 0.0)
        for (int i = 0; i < 3; ++i) ray.origin[i] += perturb_rng->normal(0.0, tc.ray_origin_noise);
      if (tc.ray_dir_noise > 0.0) {
        Vec3 d = ray.dir;
        for (int i = 0; i < 3; ++i) d[i] += perturb_rng->normal(0.0, tc.ray_dir_noise);
        const double n = d.norm();
        if (n > 1e-12) ray.dir = d / n;
      }
      set_ray_bounds(ray, bounds.center(), bounds.bounding_radius());
    }
  }

  // Stratified depths and posed sample positions.
  ad::Tensor tau({num_rays, samples});
  ad::Tensor delta({num_rays, samples});
  std::vector<Vec3> points(static_cast<size_t>(num_rays) * samples);
  for (int r = 0; r < num_rays; ++r) {
    const std::vector<double> taus = sample_stratified(rays[r], samples, sample_rng);
    const std::vector<double> deltas = deltas_from(taus, rays[r].far);
    for (int j = 0; j < samples; ++j) {
      tau.data()[r * samples + j] = taus[j];
      delta.data()[r * samples + j] = deltas[j];
      points[static_cast<size_t>(r) * samples + j] = rays[r].origin + taus[j] * rays[r].dir;
    }
  }

  // View directions; the perturbation policy touches only this color input.
  const PositionalEncoding dir_enc = m.cfg.dir_encoding();
  const int dd = m.cfg.enc_dir_dim();
  ad::Tensor enc_dir({num_rays * samples, dd});
  {
    std::vector<double> row(dd);
    RngState dummy(0);
    RngState& prng = perturb_rng ? *perturb_rng : dummy;
    for (int r = 0; r < num_rays; ++r) {
      const Vec3 d = perturb_view_direction(rays[r].dir, tc.perturb, training, prng);
      encode_into(dir_enc, d.data(), 3, row.data());
      perturb_encoded_direction(row, tc.perturb, training, prng);
      for (int j = 0; j < samples; ++j)
        std::copy(row.begin(), row.end(),
                  enc_dir.data() + (static_cast<size_t>(r) * samples + j) * dd);
    }
  }

  ad::Tensor enc_pos = encode_rows(m.cfg.pos_encoding(), deform_points(m, pose, points));
  auto [sigma_flat, feature] = field.density(params, enc_pos);
  ad::Tensor app_row = ad::take_row(params.get("app_codes"), code_row);
  ad::Tensor colors = field.color(params, feature, enc_dir, app_row);
  ad::Tensor sigma = ad::reshape(sigma_flat, {num_rays, samples});

  CompositeTensors comp = composite_batch(sigma, colors, tau, delta);

  // Composite over the configured background.
  ad::Tensor bg_mat({num_rays, 3});
  for (int r = 0; r < num_rays; ++r)
    for (int i = 0; i < 3; ++i) bg_mat.data()[r * 3 + i] = tc.background[i];
  ad::Tensor miss = ad::add_scalar(ad::neg(comp.opacity), 1.0);
  BatchGraph out;
  out.color = ad::add(comp.color, ad::mul_colvec(bg_mat, miss));
  out.depth = comp.depth;
  out.opacity = comp.opacity;
  return out;
}

double density_at(const ModelState& m, const ParamView& params, const JointTransformSet& pose,
                  const Vec3& x_posed) {
  ad::Tensor enc = encode_rows(m.cfg.pos_encoding(), deform_points(m, pose, {x_posed}));
  return m.field().density_only(params, enc).at(0);
}

std::optional<Vec3> density_normal(const ModelState& m, const ParamView& params,
                                   const JointTransformSet& pose, const Vec3& x_posed, double h,
                                   double grad_eps) {
  return density_normal_fd(
      [&](const Vec3& x) { return density_at(m, params, pose, x); }, x_posed, h, grad_eps);
}

NormalGraph density_normals_on_tape(const ModelState& m, const ParamView& params,
                                    const JointTransformSet& pose,
                                    const std::vector<Vec3>& surface_points, double h,
                                    double grad_eps) {
  NormalGraph out;
  const int count = static_cast<int>(surface_points.size());
  if (count == 0) {
    out.normals = ad::Tensor({0, 3});
    return out;
  }
  // Probe layout per point: +x, -x, +y, -y, +z, -z.
  std::vector<Vec3> probes;
  probes.reserve(static_cast<size_t>(count) * 6);
  for (const Vec3& s : surface_points) {
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 p = s, q = s;
      p[axis] += h;
      q[axis] -= h;
      probes.push_back(p);
      probes.push_back(q);
    }
  }
  ad::Tensor enc = encode_rows(m.cfg.pos_encoding(), deform_points(m, pose, probes));
  ad::Tensor sigma = m.field().density_only(params, enc);          // [6*count]
  ad::Tensor probe_mat = ad::reshape(sigma, {count, 6});
  // Central difference as a constant linear map of the probe densities.
  ad::Tensor diff({6, 3});
  const double inv = 1.0 / (2.0 * h);
  diff.data()[0 * 3 + 0] = inv;
  diff.data()[1 * 3 + 0] = -inv;
  diff.data()[2 * 3 + 1] = inv;
  diff.data()[3 * 3 + 1] = -inv;
  diff.data()[4 * 3 + 2] = inv;
  diff.data()[5 * 3 + 2] = -inv;
  ad::Tensor grad = ad::matmul(probe_mat, diff);  // [count x 3]
  for (int r = 0; r < count; ++r) {
    const double gx = grad.at(r, 0), gy = grad.at(r, 1), gz = grad.at(r, 2);
    if (std::sqrt(gx * gx + gy * gy + gz * gz) > grad_eps) out.kept.push_back(r);
  }
  if (static_cast<int>(out.kept.size()) != count) grad = ad::gather_rows(grad, out.kept);
  out.normals = ad::rowwise_normalize(ad::neg(grad));
  return out;
}

RenderedView render_view(const ModelState& m, const TrainConfig& tc, const Camera& cam,
                         const JointTransformSet& pose, int code_row, int chunk_rays) {
  RenderedView view;
  view.rgb = Image3F(cam.width, cam.height);
  view.depth = Image1F(cam.width, cam.height);
  view.normal = Image3F(cam.width, cam.height);
  view.mask = ImageMask(cam.width, cam.height);

  const Aabb bounds = posed_bounds(m.skeleton, pose, 0.1);
  ParamView params(m.params);
  const bool perturb_at_test = tc.perturb.enabled && tc.perturb.active_at_test;
  RngState perturb_rng(tc.seed ^ 0x7e57ab1eull ^ static_cast<uint64_t>(pose.frame));

  std::vector<Ray> all_rays;
  all_rays.reserve(static_cast<size_t>(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      Ray ray = make_ray(cam, x, y, pose.frame);
      set_ray_bounds(ray, bounds.center(), bounds.bounding_radius());
      all_rays.push_back(ray);
    }

  std::vector<Vec3> surface_pts;
  std::vector<int> surface_px;
  for (size_t start = 0; start < all_rays.size(); start += chunk_rays) {
    const size_t end = std::min(all_rays.size(), start + chunk_rays);
    std::vector<Ray> chunk(all_rays.begin() + start, all_rays.begin() + end);
    BatchGraph g = run_ray_batch(m, params, chunk, pose, code_row, bounds, tc,
                                 /*training=*/false, /*sample_rng=*/nullptr,
                                 perturb_at_test ? &perturb_rng : nullptr);
    for (size_t r = 0; r < chunk.size(); ++r) {
      const size_t px = start + r;
      const int x = static_cast<int>(px) % cam.width;
      const int y = static_cast<int>(px) / cam.width;
      float* rgb = view.rgb.at(x, y);
      for (int i = 0; i < 3; ++i) rgb[i] = static_cast<float>(g.color.at(static_cast<int>(r), i));
      view.depth.at(x, y) = static_cast<float>(g.depth.at(static_cast<int>(r)));
      if (g.opacity.at(static_cast<int>(r)) >= tc.opacity_threshold) {
        view.mask.at(x, y) = 1;
        int clamp_counter = 0;
        surface_pts.push_back(
            surface_point(chunk[r], g.depth.at(static_cast<int>(r)), &clamp_counter));
        surface_px.push_back(static_cast<int>(px));
      }
    }
  }

  for (size_t i = 0; i < surface_pts.size(); ++i) {
    const auto n = density_normal(m, params, pose, surface_pts[i], tc.normal_fd_step);
    if (!n) continue;
    const int x = surface_px[i] % cam.width;
    const int y = surface_px[i] / cam.width;
    float* np = view.normal.at(x, y);
    for (int c = 0; c < 3; ++c) np[c] = static_cast<float>((*n)[c]);
  }
  return view;
}

MetricsReport evaluate(const ModelState& m, const TrainConfig& tc, const Dataset& ds, int camera) {
  if (camera < 0 || camera >= static_cast<int>(ds.cameras.size()))
    throw std::out_of_range("evaluate: camera index out of range");
  MetricsReport report;
  report.revision = revision();
  report.config_hash = config_hash(tc);
  report.seed = tc.seed;
  for (size_t p = 0; p < ds.poses.size(); ++p) {
    const FrameRecord& gt = ds.record(static_cast<int>(p), camera);
    const int code_row = std::min(static_cast<int>(p), m.num_train_frames - 1);
    RenderedView view = render_view(m, tc, gt.cam, gt.pose, code_row);
    ViewMetrics vm;
    vm.frame = static_cast<int>(p);
    vm.camera = camera;
    const PsnrResult pr = mse_psnr(view.rgb, gt.rgb);
    vm.mse = pr.mse;
    vm.psnr = pr.psnr;
    vm.ssim = ssim(view.rgb, gt.rgb);
    vm.depth_err = depth_error(view.depth, gt.depth, gt.mask);
    report.views.push_back(vm);
  }
  return report;
}

}  // namespace volskin
