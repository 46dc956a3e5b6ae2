#pragma once

#include <vector>

#include "volskin/camera.hpp"
#include "volskin/common.hpp"
#include "volskin/skinning.hpp"

namespace volskin {

struct Capsule {
  Vec3 a, b;      // segment endpoints, rest pose
  double radius;  // > 0
  Vec3 albedo;
};

// Articulated stand-in body: a union of capsules, one rigid transform per
// capsule. Rest-pose segments must form a connected graph through shared
// endpoints.
struct CapsuleSkeleton {
  std::vector<Capsule> segments;
  int num_joints() const { return static_cast<int>(segments.size()); }
  // Throws when radii are non-positive or segments are not connected through
  // endpoints within `tol`.
  void validate(double tol = 1e-6) const;
};

// Four joints: torso, head and two arms sharing the neck pivot. Arms swing
// about z in pose_sequence.
CapsuleSkeleton default_skeleton();

double segment_distance(const Vec3& a, const Vec3& b, const Vec3& x);
double capsule_sdf(const Capsule& c, const Vec3& x);

// Union SDF of the rigidly posed skeleton (capsule k goes through joints[k]).
double skeleton_sdf(const CapsuleSkeleton& s, const JointTransformSet& pose, const Vec3& x);
// Central-difference gradient of the SDF, normalized.
Vec3 skeleton_sdf_normal(const CapsuleSkeleton& s, const JointTransformSet& pose, const Vec3& x,
                         double h = 1e-4);

struct TraceResult {
  bool hit = false;
  double depth = 0.0;  // ray parameter at the surface
  Vec3 normal = Vec3::Zero();
  Vec3 albedo = Vec3::Zero();
  Vec3 shaded = Vec3::Zero();  // albedo * (ambient + diffuse * max(0, n.l))
};

// Sphere-traces the posed skeleton from ray.near to ray.far. Hitting means
// |sdf| < tol before the iteration budget runs out.
TraceResult raymarch_gt(const CapsuleSkeleton& s, const JointTransformSet& pose, const Ray& ray,
                        int max_iters = 256, double tol = 1e-5);

// Sinusoidal arm swing, anti-phase between the two arms; frame 0 matches the
// rest pose phase. amplitude in radians.
std::vector<JointTransformSet> pose_sequence(const CapsuleSkeleton& s, int num_frames,
                                             double amplitude = 0.6, double phase = 0.0);
JointTransformSet identity_pose(int num_joints);

struct Aabb {
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  Vec3 center() const { return 0.5 * (lo + hi); }
  double bounding_radius() const { return 0.5 * (hi - lo).norm(); }
};

// Axis-aligned bounds of the posed skeleton surface, inflated by `inflate`
// (fractional, e.g. 0.1 widens each half-extent by 10%).
Aabb posed_bounds(const CapsuleSkeleton& s, const JointTransformSet& pose, double inflate = 0.0);

}  // namespace volskin
