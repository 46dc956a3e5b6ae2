#pragma once

#include <filesystem>
#include <vector>

#include "volskin/camera.hpp"
#include "volskin/capsule.hpp"
#include "volskin/image.hpp"
#include "volskin/skinning.hpp"

namespace volskin {

// Rendered color observed through camera space: the oracle composites the
// background color wherever rays miss the body.
Vec3 dataset_background();

// One multi-view training sample. Depth stores the ray parameter at the
// surface (0 on background); normals are world-frame unit vectors.
struct FrameRecord {
  int frame = 0;   // pose index
  int camera = 0;  // camera index
  Camera cam;
  JointTransformSet pose;
  Image3F rgb;
  Image1F depth;
  Image3F normal;
  ImageMask mask;

  // mask <=> depth > 0 <=> normal defined; normals unit where defined.
  void validate() const;
};

struct SceneConfig {
  int width = 64, height = 64;
  int num_cameras = 4;  // the last camera is the held-out test view
  int num_poses = 30;
  double noise_sigma = 0.0;
  uint64_t seed = 0;
  double camera_radius = 2.2;
  double focal = 80.0;  // pixels at the configured resolution
};

struct Dataset {
  CapsuleSkeleton skeleton;
  std::vector<Camera> cameras;
  std::vector<JointTransformSet> poses;
  std::vector<JointTransformSet> novel_poses;  // stage-2 sequence
  std::vector<FrameRecord> records;            // ordered by (pose, camera)
  double noise_sigma = 0.0;
  uint64_t seed = 0;

  int test_camera() const { return static_cast<int>(cameras.size()) - 1; }
  const FrameRecord& record(int pose, int camera) const;
};

std::vector<Camera> ring_cameras(const SceneConfig& cfg);

// One record per (pose, camera); rgb optionally corrupted with clamped
// per-pixel Gaussian noise, geometry ground truth always clean.
Dataset generate_dataset(const CapsuleSkeleton& skeleton,
                         const std::vector<JointTransformSet>& poses,
                         const std::vector<Camera>& cameras, double noise_sigma, uint64_t seed);
Dataset generate_dataset(const SceneConfig& cfg);

// Directory layout: frames/%04d_cam%d.png, depth/%04d_cam%d.pfm,
// normal/%04d_cam%d.pfm, mask/%04d_cam%d.png, poses.txt, novel_poses.txt,
// cameras.txt, manifest.txt.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams);
std::vector<Camera> load_cameras(const std::filesystem::path& path);

}  // namespace volskin
