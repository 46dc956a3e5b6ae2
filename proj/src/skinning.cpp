#include "volskin/skinning.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "volskin/capsule.hpp"

namespace volskin {

void JointTransformSet::validate() const {
  for (const RigidTransform& g : joints) {
    if ((g.rotation * g.rotation.transpose() - Mat3::Identity()).norm() > 1e-5 ||
        std::fabs(g.rotation.determinant() - 1.0) > 1e-5)
      throw std::invalid_argument("pose: joint rotation is not a proper rotation");
  }
}

namespace {

// Blended affine map sum_k w_k G_k as (linear, translation).
void blended_transform(const JointTransformSet& pose, const Eigen::VectorXd& weights, Mat3& lin,
                       Vec3& trans) {
  if (pose.num_joints() != weights.size())
    throw std::invalid_argument("blend: weight count does not match joint count");
  lin.setZero();
  trans.setZero();
  for (int k = 0; k < pose.num_joints(); ++k) {
    lin += weights[k] * pose.joints[k].rotation;
    trans += weights[k] * pose.joints[k].translation;
  }
}

}  // namespace

Vec3 blend_forward(const Vec3& x_canonical, const JointTransformSet& pose,
                   const Eigen::VectorXd& weights) {
  Mat3 lin;
  Vec3 trans;
  blended_transform(pose, weights, lin, trans);
  return lin * x_canonical + trans;
}

Vec3 deform_to_canonical(const Vec3& x_posed, const JointTransformSet& pose,
                         const Eigen::VectorXd& weights, double cond_limit) {
  Mat3 lin;
  Vec3 trans;
  blended_transform(pose, weights, lin, trans);
  const double det = lin.determinant();
  Mat3 inv;
  bool invertible = false;
  lin.computeInverseWithCheck(inv, invertible, 1e-12);
  // Frobenius condition estimate; exact enough for a degeneracy guard.
  if (!invertible || std::fabs(det) < 1e-12 || lin.norm() * inv.norm() > cond_limit)
    throw DegeneratePoseError("deform_to_canonical: blended transform is near-singular (cond > " +
                              std::to_string(cond_limit) + ")");
  return inv * (x_posed - trans);
}

Eigen::VectorXd posed_blend_weights(const CapsuleSkeleton& s, const JointTransformSet& pose,
                                    const Vec3& x) {
  const int k = s.num_joints();
  Eigen::VectorXd w(k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    const RigidTransform& g = pose.joints[i];
    const double d = segment_distance(g.apply(s.segments[i].a), g.apply(s.segments[i].b), x);
    w[i] = 1.0 / (d * d + 1e-8);
    total += w[i];
  }
  return w / total;
}

ad::Tensor weight_consistency_loss(const ad::Tensor& posed_weights,
                                   const ad::Tensor& canonical_weights) {
  return ad::sum(ad::abs(ad::sub(posed_weights, canonical_weights)));
}

void BlendWeightNet::init_params(ParamStore& store, RngState& rng, const std::string& code_table,
                                 int num_codes) const {
  const int dx = cfg_.enc_pos_dim(), w = cfg_.bw_width;
  const int in_full = dx + cfg_.latent_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_full));
  ad::Tensor w_pos({dx, w});
  for (int i = 0; i < w_pos.numel(); ++i) w_pos.data()[i] = rng.uniform(-bound, bound);
  store.add("bw.in.W", std::move(w_pos));
  ad::Tensor w_code({cfg_.latent_dim, w});
  for (int i = 0; i < w_code.numel(); ++i) w_code.data()[i] = rng.uniform(-bound, bound);
  store.add("bw.in.Wc", std::move(w_code));
  store.add("bw.in.b", ad::Tensor({w}));
  for (int i = 1; i < cfg_.bw_depth; ++i)
    init_linear(store, rng, "bw.h" + std::to_string(i), w, w);
  init_linear(store, rng, "bw.out", w, cfg_.num_joints);
  store.add(code_table, ad::Tensor({num_codes, cfg_.latent_dim}));
}

ad::Tensor BlendWeightNet::forward(const ParamView& p, const ad::Tensor& enc_pos,
                                   const ad::Tensor& code_row) const {
  ad::Tensor code = ad::reshape(ad::matmul(code_row, p.get("bw.in.Wc")), {cfg_.bw_width});
  ad::Tensor h = ad::matmul(enc_pos, p.get("bw.in.W"));
  h = ad::add_rowvec(h, code);
  h = ad::relu(ad::add_rowvec(h, p.get("bw.in.b")));
  for (int i = 1; i < cfg_.bw_depth; ++i)
    h = ad::relu(linear(p, "bw.h" + std::to_string(i), h));
  return ad::softmax_rows(linear(p, "bw.out", h));
}

void save_poses(const std::filesystem::path& path, const std::vector<JointTransformSet>& poses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_poses: cannot open " + path.string());
  out.precision(17);
  for (const JointTransformSet& pose : poses) {
    out << pose.frame << " " << pose.num_joints() << "\n";
    for (const RigidTransform& g : pose.joints) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out << g.rotation(r, c) << " ";
      out << g.translation.x() << " " << g.translation.y() << " " << g.translation.z() << "\n";
    }
  }
}

std::vector<JointTransformSet> load_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_poses: cannot open " + path.string());
  std::vector<JointTransformSet> poses;
  int frame, k;
  while (in >> frame >> k) {
    JointTransformSet pose;
    pose.frame = frame;
    pose.joints.resize(k);
    for (int i = 0; i < k; ++i) {
      RigidTransform& g = pose.joints[i];
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) in >> g.rotation(r, c);
      in >> g.translation.x() >> g.translation.y() >> g.translation.z();
    }
    if (!in) throw std::runtime_error("load_poses: truncated record in " + path.string());
    pose.validate();
    poses.push_back(std::move(pose));
  }
  return poses;
}

}  // namespace volskin
