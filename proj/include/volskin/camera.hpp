#pragma once

#include <vector>

#include "volskin/common.hpp"

namespace volskin {

// Pinhole camera. `rotation`/`position` form the world-from-camera pose;
// camera space looks along +z with y down (image rows grow downward).
struct Camera {
  int width = 0, height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();

  void validate() const;  // focal lengths > 0, rotation orthonormal det +1
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::Zero();  // unit
  double near = 0.0, far = 0.0;
  int px = 0, py = 0;
  int frame = 0;
};

// Ray through the center of pixel (u, v); throws on out-of-bounds pixels.
Ray make_ray(const Camera& cam, int u, int v, int frame);
std::vector<Ray> generate_rays(const Camera& cam, const std::vector<std::pair<int, int>>& pixels,
                               int frame);

// Intersects the ray with a bounding sphere to set [near, far]. Rays that
// miss get a window around the closest approach so sampling stays valid; they
// see empty space either way. near is clamped to min_near.
void set_ray_bounds(Ray& ray, const Vec3& center, double radius, double min_near = 0.05);

}  // namespace volskin
