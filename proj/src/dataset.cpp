#include "volskin/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace volskin {

namespace fs = std::filesystem;

Vec3 dataset_background() { return Vec3(0.2, 0.2, 0.2); }

void FrameRecord::validate() const {
  const int w = rgb.width, h = rgb.height;
  if (depth.width != w || depth.height != h || normal.width != w || normal.height != h ||
      mask.width != w || mask.height != h)
    throw std::invalid_argument("frame record: image dimensions disagree");
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool fg = mask.at(x, y) != 0;
      const float d = depth.at(x, y);
      const float* n = normal.at(x, y);
      const double nn = std::sqrt(double(n[0]) * n[0] + double(n[1]) * n[1] + double(n[2]) * n[2]);
      if (fg != (d > 0.f))
        throw std::invalid_argument("frame record: mask and depth disagree");
      if (fg != (nn > 0.5))
        throw std::invalid_argument("frame record: mask and normal disagree");
      if (fg && std::fabs(nn - 1.0) > 1e-4)
        throw std::invalid_argument("frame record: non-unit foreground normal");
    }
  }
}

const FrameRecord& Dataset::record(int pose, int camera) const {
  for (const FrameRecord& r : records)
    if (r.frame == pose && r.camera == camera) return r;
  throw std::out_of_range("dataset: no record for pose " + std::to_string(pose) + " camera " +
                          std::to_string(camera));
}

std::vector<Camera> ring_cameras(const SceneConfig& cfg) {
  std::vector<Camera> cams;
  for (int i = 0; i < cfg.num_cameras; ++i) {
    const double angle = 2.0 * M_PI * i / cfg.num_cameras;
    Camera cam;
    cam.width = cfg.width;
    cam.height = cfg.height;
    cam.fx = cam.fy = cfg.focal;
    cam.cx = cfg.width / 2.0;
    cam.cy = cfg.height / 2.0;
    cam.position = Vec3(cfg.camera_radius * std::sin(angle), 0.0,
                        cfg.camera_radius * std::cos(angle));
    const Vec3 forward = (-cam.position).normalized();
    const Vec3 down(0, 1, 0);  // world y points down, aligned with image rows
    const Vec3 y = (down - down.dot(forward) * forward).normalized();
    const Vec3 x = y.cross(forward);
    cam.rotation.col(0) = x;
    cam.rotation.col(1) = y;
    cam.rotation.col(2) = forward;
    cam.validate();
    cams.push_back(cam);
  }
  return cams;
}

Dataset generate_dataset(const CapsuleSkeleton& skeleton,
                         const std::vector<JointTransformSet>& poses,
                         const std::vector<Camera>& cameras, double noise_sigma, uint64_t seed) {
  if (cameras.empty() || poses.empty())
    throw std::invalid_argument("generate_dataset: need at least one camera and one pose");
  skeleton.validate(1e-6);
  Dataset ds;
  ds.skeleton = skeleton;
  ds.cameras = cameras;
  ds.poses = poses;
  ds.noise_sigma = noise_sigma;
  ds.seed = seed;
  const Vec3 bg = dataset_background();
  for (size_t p = 0; p < poses.size(); ++p) {
    const Aabb bounds = posed_bounds(skeleton, poses[p], 0.1);
    for (size_t c = 0; c < cameras.size(); ++c) {
      const Camera& cam = cameras[c];
      FrameRecord rec;
      rec.frame = static_cast<int>(p);
      rec.camera = static_cast<int>(c);
      rec.cam = cam;
      rec.pose = poses[p];
      rec.rgb = Image3F(cam.width, cam.height);
      rec.depth = Image1F(cam.width, cam.height);
      rec.normal = Image3F(cam.width, cam.height);
      rec.mask = ImageMask(cam.width, cam.height);
      for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
          Ray ray = make_ray(cam, x, y, static_cast<int>(p));
          set_ray_bounds(ray, bounds.center(), bounds.bounding_radius());
          const TraceResult hit = raymarch_gt(skeleton, poses[p], ray);
          float* px = rec.rgb.at(x, y);
          if (hit.hit) {
            rec.mask.at(x, y) = 1;
            rec.depth.at(x, y) = static_cast<float>(hit.depth);
            float* n = rec.normal.at(x, y);
            for (int i = 0; i < 3; ++i) {
              n[i] = static_cast<float>(hit.normal[i]);
              px[i] = static_cast<float>(hit.shaded[i]);
            }
          } else {
            for (int i = 0; i < 3; ++i) px[i] = static_cast<float>(bg[i]);
          }
        }
      }
      ds.records.push_back(std::move(rec));
    }
  }
  if (noise_sigma > 0.0) {
    RngState rng(seed ^ 0x9e3779b97f4a7c15ull);
    for (FrameRecord& rec : ds.records)
      for (float& v : rec.rgb.pix)
        v = std::clamp(v + static_cast<float>(rng.normal(0.0, noise_sigma)), 0.f, 1.f);
  }
  return ds;
}

Dataset generate_dataset(const SceneConfig& cfg) {
  const CapsuleSkeleton skeleton = default_skeleton();
  Dataset ds = generate_dataset(skeleton, pose_sequence(skeleton, cfg.num_poses),
                                ring_cameras(cfg), cfg.noise_sigma, cfg.seed);
  // Stage-2 sequence: smaller swing, quarter-period phase shift.
  ds.novel_poses = pose_sequence(skeleton, cfg.num_poses, 0.42, M_PI / 2.0);
  for (auto& pose : ds.novel_poses) pose.frame += cfg.num_poses;
  return ds;
}

void save_cameras(const fs::path& path, const std::vector<Camera>& cams) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_cameras: cannot open " + path.string());
  out.precision(17);
  for (size_t i = 0; i < cams.size(); ++i) {
    const Camera& c = cams[i];
    out << i << " " << c.width << " " << c.height << " " << c.fx << " " << c.fy << " " << c.cx
        << " " << c.cy;
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) out << " " << c.rotation(r, col);
    out << " " << c.position.x() << " " << c.position.y() << " " << c.position.z() << "\n";
  }
}

std::vector<Camera> load_cameras(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_cameras: cannot open " + path.string());
  std::vector<Camera> cams;
  int idx;
  while (in >> idx) {
    Camera c;
    in >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy;
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) in >> c.rotation(r, col);
    in >> c.position.x() >> c.position.y() >> c.position.z();
    if (!in) throw std::runtime_error("load_cameras: truncated record in " + path.string());
    c.validate();
    cams.push_back(c);
  }
  return cams;
}

namespace {

std::string frame_name(int pose, int camera, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d_cam%d.%s", pose, camera, ext);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  for (const char* sub : {"frames", "depth", "normal", "mask"})
    fs::create_directories(dir / sub);
  for (const FrameRecord& rec : ds.records) {
    write_png(dir / "frames" / frame_name(rec.frame, rec.camera, "png"), rec.rgb);
    write_pfm(dir / "depth" / frame_name(rec.frame, rec.camera, "pfm"), rec.depth);
    write_pfm(dir / "normal" / frame_name(rec.frame, rec.camera, "pfm"), rec.normal);
    write_png_mask(dir / "mask" / frame_name(rec.frame, rec.camera, "png"), rec.mask);
  }
  save_poses(dir / "poses.txt", ds.poses);
  save_poses(dir / "novel_poses.txt", ds.novel_poses);
  save_cameras(dir / "cameras.txt", ds.cameras);
  std::ofstream manifest(dir / "manifest.txt");
  manifest << "poses=" << ds.poses.size() << "\n";
  manifest << "cameras=" << ds.cameras.size() << "\n";
  manifest << "records=" << ds.records.size() << "\n";
  manifest << "joints=" << ds.skeleton.num_joints() << "\n";
  manifest << "seed=" << ds.seed << "\n";
  manifest << "noise_sigma=" << ds.noise_sigma << "\n";
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.txt"))
    throw std::runtime_error("load_dataset: missing manifest in " + dir.string());
  Dataset ds;
  ds.skeleton = default_skeleton();
  ds.cameras = load_cameras(dir / "cameras.txt");
  ds.poses = load_poses(dir / "poses.txt");
  if (fs::exists(dir / "novel_poses.txt")) ds.novel_poses = load_poses(dir / "novel_poses.txt");
  std::ifstream manifest(dir / "manifest.txt");
  std::string line;
  while (std::getline(manifest, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "seed") ds.seed = std::stoull(val);
    if (key == "noise_sigma") ds.noise_sigma = std::stod(val);
  }
  for (size_t p = 0; p < ds.poses.size(); ++p) {
    for (size_t c = 0; c < ds.cameras.size(); ++c) {
      FrameRecord rec;
      rec.frame = static_cast<int>(p);
      rec.camera = static_cast<int>(c);
      rec.cam = ds.cameras[c];
      rec.pose = ds.poses[p];
      rec.rgb = read_png(dir / "frames" / frame_name(rec.frame, rec.camera, "png"));
      rec.depth = read_pfm_1(dir / "depth" / frame_name(rec.frame, rec.camera, "pfm"));
      rec.normal = read_pfm_3(dir / "normal" / frame_name(rec.frame, rec.camera, "pfm"));
      rec.mask = read_png_mask(dir / "mask" / frame_name(rec.frame, rec.camera, "png"));
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

}  // namespace volskin
