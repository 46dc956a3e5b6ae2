#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "volskin/dataset.hpp"

using namespace volskin;

namespace {

SceneConfig small_scene() {
  SceneConfig cfg;
  cfg.width = 32;
  cfg.height = 32;
  cfg.num_cameras = 4;
  cfg.num_poses = 6;
  cfg.focal = 40.0;
  return cfg;
}

}  // namespace

TEST_CASE("capsule sdf basics") {
  CapsuleSkeleton one;
  one.segments = {{Vec3(0, 0, 0), Vec3(0, 1, 0), 0.25, Vec3(1, 1, 1)}};
  const JointTransformSet pose = identity_pose(1);
  CHECK(skeleton_sdf(one, pose, Vec3(0, 0.5, 0)) == doctest::Approx(-0.25));
  CHECK(skeleton_sdf(one, pose, Vec3(0.25, 0.5, 0)) == doctest::Approx(0.0));
  CHECK(skeleton_sdf(one, pose, Vec3(0, 2.0, 0)) == doctest::Approx(0.75));
}

TEST_CASE("union sdf is bounded by each capsule sdf") {
  const CapsuleSkeleton skeleton = default_skeleton();
  const JointTransformSet pose = identity_pose(skeleton.num_joints());
  RngState rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const Vec3 x(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    const double d = skeleton_sdf(skeleton, pose, x);
    for (const Capsule& c : skeleton.segments) CHECK(d <= capsule_sdf(c, x) + 1e-12);
  }
}

TEST_CASE("skeleton validation catches bad shapes") {
  CapsuleSkeleton bad = default_skeleton();
  bad.segments[0].radius = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CapsuleSkeleton split = default_skeleton();
  split.segments[1].a += Vec3(5, 0, 0);
  split.segments[1].b += Vec3(5, 0, 0);
  CHECK_THROWS_AS(split.validate(), std::invalid_argument);

  CHECK_NOTHROW(default_skeleton().validate());
}

TEST_CASE("sphere tracing a degenerate capsule (a sphere)") {
  CapsuleSkeleton sphere;
  sphere.segments = {{Vec3(0, 0, 0), Vec3(0, 0, 0), 1.0, Vec3(0.8, 0.2, 0.2)}};
  const JointTransformSet pose = identity_pose(1);
  Ray ray;
  ray.origin = Vec3(0, 0, -3);
  ray.dir = Vec3(0, 0, 1);
  ray.near = 0.1;
  ray.far = 6.0;
  const TraceResult hit = raymarch_gt(sphere, pose, ray);
  REQUIRE(hit.hit);
  CHECK(hit.depth == doctest::Approx(2.0).epsilon(1e-4));
  CHECK((hit.normal - Vec3(0, 0, -1)).norm() < 1e-3);

  RngState rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    Ray r2;
    const Vec3 dir = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    r2.origin = -3.0 * dir;
    r2.dir = dir;
    r2.near = 0.1;
    r2.far = 6.0;
    const TraceResult h2 = raymarch_gt(sphere, pose, r2);
    REQUIRE(h2.hit);
    const Vec3 p = r2.origin + h2.depth * r2.dir;
    CHECK((h2.normal - p.normalized()).norm() < 1e-3);  // radial normal
  }

  Ray miss;
  miss.origin = Vec3(0, 5, -3);
  miss.dir = Vec3(0, 0, 1);
  miss.near = 0.1;
  miss.far = 6.0;
  const TraceResult none = raymarch_gt(sphere, pose, miss);
  CHECK_FALSE(none.hit);
  CHECK(none.depth == 0.0);
}

TEST_CASE("dataset generation is deterministic and counts records") {
  SceneConfig cfg = small_scene();
  cfg.width = 16;
  cfg.height = 16;
  cfg.num_cameras = 3;
  cfg.num_poses = 100;
  const Dataset a = generate_dataset(cfg);
  CHECK(a.records.size() == 300);

  const Dataset b = generate_dataset(cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i)
    CHECK(a.records[i].rgb.pix == b.records[i].rgb.pix);
}

TEST_CASE("noise level matches the half-normal mean") {
  SceneConfig clean = small_scene();
  clean.width = 64;
  clean.height = 64;
  clean.num_cameras = 2;
  clean.num_poses = 2;
  SceneConfig noisy = clean;
  noisy.noise_sigma = 0.05;
  const Dataset base = generate_dataset(clean);
  const Dataset corrupted = generate_dataset(noisy);
  double acc = 0.0;
  long n = 0;
  for (size_t r = 0; r < base.records.size(); ++r) {
    for (size_t i = 0; i < base.records[r].rgb.pix.size(); ++i) {
      acc += std::fabs(double(corrupted.records[r].rgb.pix[i]) - double(base.records[r].rgb.pix[i]));
      ++n;
    }
    // Geometry ground truth stays clean.
    CHECK(corrupted.records[r].depth.pix == base.records[r].depth.pix);
    CHECK(corrupted.records[r].normal.pix == base.records[r].normal.pix);
  }
  const double expected = 0.05 * std::sqrt(2.0 / M_PI);
  CHECK(acc / n == doctest::Approx(expected).epsilon(0.08));
}

TEST_CASE("mask, depth and normal are tri-consistent on every frame") {
  const Dataset ds = generate_dataset(small_scene());
  for (const FrameRecord& rec : ds.records) CHECK_NOTHROW(rec.validate());
}

TEST_CASE("surface points recomputed from depth lie on the zero level set") {
  const Dataset ds = generate_dataset(small_scene());
  double worst = 0.0;
  for (const FrameRecord& rec : ds.records) {
    for (int y = 0; y < rec.rgb.height; y += 3) {
      for (int x = 0; x < rec.rgb.width; x += 3) {
        if (!rec.mask.at(x, y)) continue;
        const Ray ray = make_ray(rec.cam, x, y, rec.frame);
        const Vec3 p = ray.origin + double(rec.depth.at(x, y)) * ray.dir;
        worst = std::max(worst, std::fabs(skeleton_sdf(ds.skeleton, rec.pose, p)));
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("two cameras agree on the normal of a shared surface point") {
  const Dataset ds = generate_dataset(small_scene());
  int tested = 0;
  for (int pose = 0; pose < 2; ++pose) {
    const FrameRecord& a = ds.record(pose, 0);
    const FrameRecord& b = ds.record(pose, 1);
    for (int y = 0; y < a.rgb.height; y += 2) {
      for (int x = 0; x < a.rgb.width; x += 2) {
        if (!a.mask.at(x, y)) continue;
        const Ray ray_a = make_ray(a.cam, x, y, pose);
        const Vec3 p = ray_a.origin + double(a.depth.at(x, y)) * ray_a.dir;
        // Trace the matching ray from camera B; skip occluded points.
        Ray ray_b;
        ray_b.origin = b.cam.position;
        ray_b.dir = (p - b.cam.position).normalized();
        ray_b.near = 0.05;
        ray_b.far = (p - b.cam.position).norm() + 0.5;
        const TraceResult hit = raymarch_gt(ds.skeleton, b.pose, ray_b);
        if (!hit.hit) continue;
        const Vec3 q = ray_b.origin + hit.depth * ray_b.dir;
        if ((q - p).norm() > 1e-3) continue;
        const Vec3 na = skeleton_sdf_normal(ds.skeleton, a.pose, p);
        CHECK((na - hit.normal).norm() < 1e-3);
        ++tested;
      }
    }
  }
  CHECK(tested > 50);
}
