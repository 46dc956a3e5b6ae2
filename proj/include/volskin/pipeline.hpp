#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "volskin/capsule.hpp"
#include "volskin/checkpoint.hpp"
#include "volskin/config.hpp"
#include "volskin/dataset.hpp"
#include "volskin/field.hpp"
#include "volskin/metrics.hpp"
#include "volskin/render.hpp"

namespace volskin {

// Trainable state: canonical field, blend-weight field, per-frame codes, plus
// the skeleton that defines the analytic posed weights.
struct ModelState {
  FieldConfig cfg;
  CapsuleSkeleton skeleton;
  ParamStore params;
  int num_train_frames = 0;
  int num_novel_frames = 0;

  CanonicalField field() const { return CanonicalField(cfg); }
  BlendWeightNet bw_net() const { return BlendWeightNet(cfg); }
};

ModelState build_model(FieldConfig cfg, const CapsuleSkeleton& skeleton, int num_train_frames,
                       int num_novel_frames, uint64_t seed);

void save_model(const ModelState& m, const std::filesystem::path& path,
                std::vector<std::pair<std::string, std::string>> extra_meta = {});
ModelState load_model(const std::filesystem::path& path);

// Inverse-LBS of a posed-point batch using the analytic posed weights;
// returns canonical positions as an untracked [N x 3] tensor.
ad::Tensor deform_points(const ModelState& m, const JointTransformSet& pose,
                         const std::vector<Vec3>& posed);

// Forward graph for one ray batch of a single frame. With a tracked ParamView
// the graph is recorded for backward; untracked views evaluate plainly.
struct BatchGraph {
  ad::Tensor color;    // [R x 3], composited over the background
  ad::Tensor depth;    // [R]
  ad::Tensor opacity;  // [R]
};
BatchGraph run_ray_batch(const ModelState& m, const ParamView& params, std::vector<Ray> rays,
                         const JointTransformSet& pose, int code_row, const Aabb& bounds,
                         const TrainConfig& tc, bool training, RngState* sample_rng,
                         RngState* perturb_rng);

// Density at a posed point through the full deformation + field path.
double density_at(const ModelState& m, const ParamView& params, const JointTransformSet& pose,
                  const Vec3& x_posed);

// Unit normal opposing the density gradient at a posed point (central
// differences through the deformation); nullopt when the gradient vanishes.
std::optional<Vec3> density_normal(const ModelState& m, const ParamView& params,
                                   const JointTransformSet& pose, const Vec3& x_posed,
                                   double h = 1e-3, double grad_eps = 1e-8);

// Tape-recorded variant over a batch of surface points: the six probe
// densities per point enter the graph, the central difference is a linear
// combination of them, and the normal re-enters the loss as a tracked value.
// Rows whose gradient norm is at or below grad_eps are dropped; `kept` maps
// surviving rows back to input indices.
struct NormalGraph {
  ad::Tensor normals;  // [M' x 3]
  std::vector<int> kept;
};
NormalGraph density_normals_on_tape(const ModelState& m, const ParamView& params,
                                    const JointTransformSet& pose,
                                    const std::vector<Vec3>& surface_points, double h,
                                    double grad_eps = 1e-8);

struct RenderedView {
  Image3F rgb;
  Image1F depth;
  Image3F normal;  // zero where undefined
  ImageMask mask;  // opacity >= threshold
};

// Deterministic full-frame render (midpoint sampling). Test-time view
// perturbation applies only when the policy says so; it draws from a seeded
// stream so repeated renders are identical.
RenderedView render_view(const ModelState& m, const TrainConfig& tc, const Camera& cam,
                         const JointTransformSet& pose, int code_row, int chunk_rays = 1024);

// Renders every pose of `camera` and scores it against the dataset records.
MetricsReport evaluate(const ModelState& m, const TrainConfig& tc, const Dataset& ds, int camera);

}  // namespace volskin
