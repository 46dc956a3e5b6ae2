#include "volskin/camera.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace volskin {

void Camera::validate() const {
  if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: empty resolution");
  Mat3 should_be_identity = rotation * rotation.transpose();
  if ((should_be_identity - Mat3::Identity()).norm() > 1e-5 ||
      std::fabs(rotation.determinant() - 1.0) > 1e-5)
    throw std::invalid_argument("camera: rotation is not a proper rotation");
}

Ray make_ray(const Camera& cam, int u, int v, int frame) {
  if (u < 0 || u >= cam.width || v < 0 || v >= cam.height)
    throw std::out_of_range("make_ray: pixel (" + std::to_string(u) + "," + std::to_string(v) +
                            ") outside " + std::to_string(cam.width) + "x" +
                            std::to_string(cam.height));
  Vec3 dir_cam((u + 0.5 - cam.cx) / cam.fx, (v + 0.5 - cam.cy) / cam.fy, 1.0);
  Ray ray;
  ray.origin = cam.position;
  ray.dir = (cam.rotation * dir_cam).normalized();
  ray.px = u;
  ray.py = v;
  ray.frame = frame;
  return ray;
}

std::vector<Ray> generate_rays(const Camera& cam, const std::vector<std::pair<int, int>>& pixels,
                               int frame) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const auto& [u, v] : pixels) rays.push_back(make_ray(cam, u, v, frame));
  return rays;
}

void set_ray_bounds(Ray& ray, const Vec3& center, double radius, double min_near) {
  const Vec3 oc = center - ray.origin;
  const double mid = oc.dot(ray.dir);  // closest approach along the ray
  const double h2 = radius * radius - (oc - mid * ray.dir).squaredNorm();
  double lo, hi;
  if (h2 > 0.0) {
    const double h = std::sqrt(h2);
    lo = mid - h;
    hi = mid + h;
  } else {
    lo = mid - radius;
    hi = mid + radius;
  }
  ray.near = std::max(lo, min_near);
  ray.far = std::max(hi, ray.near + 1e-3);
}

}  // namespace volskin
