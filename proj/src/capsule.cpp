#include "volskin/capsule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace volskin {

namespace {
const Vec3 kLightDir = Vec3(0.4, -0.75, 0.5).normalized();  // y points down in camera space
constexpr double kAmbient = 0.35;
constexpr double kDiffuse = 0.65;
}  // namespace

void CapsuleSkeleton::validate(double tol) const {
  if (segments.empty()) throw std::invalid_argument("skeleton: no segments");
  for (const Capsule& c : segments)
    if (c.radius <= 0.0) throw std::invalid_argument("skeleton: non-positive capsule radius");
  // Connectivity through shared endpoints: flood fill over segments.
  const int k = num_joints();
  std::vector<bool> reached(k, false);
  std::vector<int> stack{0};
  reached[0] = true;
  auto touches = [&](const Capsule& x, const Capsule& y) {
    for (const Vec3& p : {x.a, x.b})
      for (const Vec3& q : {y.a, y.b})
        if ((p - q).norm() <= tol) return true;
    return false;
  };
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < k; ++j)
      if (!reached[j] && touches(segments[i], segments[j])) {
        reached[j] = true;
        stack.push_back(j);
      }
  }
  if (!std::all_of(reached.begin(), reached.end(), [](bool b) { return b; }))
    throw std::invalid_argument("skeleton: segments are not connected in the rest pose");
}

CapsuleSkeleton default_skeleton() {
  const Vec3 neck(0.0, -0.25, 0.0);  // y down: the neck sits above the torso center
  CapsuleSkeleton s;
  s.segments = {
      {neck, Vec3(0.0, 0.45, 0.0), 0.22, Vec3(0.30, 0.45, 0.80)},    // torso
      {neck, Vec3(0.0, -0.50, 0.0), 0.15, Vec3(0.85, 0.65, 0.45)},   // head
      {neck, Vec3(-0.45, -0.10, 0.0), 0.10, Vec3(0.80, 0.30, 0.30)}, // left arm
      {neck, Vec3(0.45, -0.10, 0.0), 0.10, Vec3(0.30, 0.70, 0.35)},  // right arm
  };
  return s;
}

double segment_distance(const Vec3& a, const Vec3& b, const Vec3& x) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (x - a).norm();
  double t = (x - a).dot(ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return (x - (a + t * ab)).norm();
}

double capsule_sdf(const Capsule& c, const Vec3& x) {
  return segment_distance(c.a, c.b, x) - c.radius;
}

double skeleton_sdf(const CapsuleSkeleton& s, const JointTransformSet& pose, const Vec3& x) {
  double d = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < s.segments.size(); ++k) {
    const RigidTransform& g = pose.joints[k];
    // Posed capsule k is the rest capsule pushed through G_k.
    const Vec3 a = g.apply(s.segments[k].a);
    const Vec3 b = g.apply(s.segments[k].b);
    d = std::min(d, segment_distance(a, b, x) - s.segments[k].radius);
  }
  return d;
}

Vec3 skeleton_sdf_normal(const CapsuleSkeleton& s, const JointTransformSet& pose, const Vec3& x,
                         double h) {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 dp = x, dm = x;
    dp[i] += h;
    dm[i] -= h;
    g[i] = skeleton_sdf(s, pose, dp) - skeleton_sdf(s, pose, dm);
  }
  const double n = g.norm();
  return n > 0.0 ? Vec3(g / n) : Vec3(0, 0, 0);
}

TraceResult raymarch_gt(const CapsuleSkeleton& s, const JointTransformSet& pose, const Ray& ray,
                        int max_iters, double tol) {
  TraceResult out;
  double t = ray.near;
  for (int it = 0; it < max_iters && t <= ray.far; ++it) {
    const Vec3 p = ray.origin + t * ray.dir;
    const double d = skeleton_sdf(s, pose, p);
    if (std::fabs(d) < tol) {
      out.hit = true;
      out.depth = t;
      out.normal = skeleton_sdf_normal(s, pose, p);
      // Albedo of the closest capsule at the hit point.
      double best = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < s.segments.size(); ++k) {
        const RigidTransform& g = pose.joints[k];
        const double dk =
            segment_distance(g.apply(s.segments[k].a), g.apply(s.segments[k].b), p) -
            s.segments[k].radius;
        if (dk < best) {
          best = dk;
          out.albedo = s.segments[k].albedo;
        }
      }
      const double lambert = std::max(0.0, out.normal.dot(kLightDir));
      out.shaded = (kAmbient + kDiffuse * lambert) * out.albedo;
      return out;
    }
    t += d;
  }
  return out;  // miss
}

JointTransformSet identity_pose(int num_joints) {
  JointTransformSet pose;
  pose.joints.resize(num_joints);
  return pose;
}

std::vector<JointTransformSet> pose_sequence(const CapsuleSkeleton& s, int num_frames,
                                             double amplitude, double phase) {
  // Arms (segments 2 and 3) rotate about z through the shared neck pivot.
  const Vec3 pivot = s.segments.size() > 2 ? s.segments[2].a : Vec3::Zero();
  std::vector<JointTransformSet> poses;
  poses.reserve(num_frames);
  for (int f = 0; f < num_frames; ++f) {
    JointTransformSet pose = identity_pose(s.num_joints());
    pose.frame = f;
    const double theta = amplitude * std::sin(2.0 * M_PI * f / std::max(1, num_frames) + phase);
    auto swing = [&](int k, double angle) {
      if (k >= s.num_joints()) return;
      Mat3 r = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
      pose.joints[k].rotation = r;
      pose.joints[k].translation = pivot - r * pivot;
    };
    swing(2, theta);
    swing(3, -theta);
    poses.push_back(std::move(pose));
  }
  return poses;
}

Aabb posed_bounds(const CapsuleSkeleton& s, const JointTransformSet& pose, double inflate) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (size_t k = 0; k < s.segments.size(); ++k) {
    const RigidTransform& g = pose.joints[k];
    for (const Vec3& e : {g.apply(s.segments[k].a), g.apply(s.segments[k].b)}) {
      lo = lo.cwiseMin(e - Vec3::Constant(s.segments[k].radius));
      hi = hi.cwiseMax(e + Vec3::Constant(s.segments[k].radius));
    }
  }
  const Vec3 pad = inflate * 0.5 * (hi - lo);
  return Aabb{lo - pad, hi + pad};
}

}  // namespace volskin
