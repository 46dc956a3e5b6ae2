#include "volskin/field.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace volskin {

namespace {

std::string trunk_name(int i) { return "field.trunk" + std::to_string(i); }

// One weight matrix of a layer whose logical input is a concatenation;
// fan-in for the init bound is the full concatenated width.
void init_block(ParamStore& store, RngState& rng, const std::string& name, int rows, int cols,
                int fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  ad::Tensor w({rows, cols});
  for (int i = 0; i < w.numel(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  store.add(name, std::move(w));
}

}  // namespace

void CanonicalField::init_params(ParamStore& store, RngState& rng) const {
  const int dx = cfg_.enc_pos_dim(), dd = cfg_.enc_dir_dim();
  const int w = cfg_.trunk_width, wc = cfg_.color_width;
  for (int i = 0; i < cfg_.trunk_depth; ++i) {
    int in = i == 0 ? dx : (i == cfg_.skip_layer ? w + dx : w);
    init_linear(store, rng, trunk_name(i), in, w);
  }
  init_linear(store, rng, "field.sigma", w, 1);
  init_linear(store, rng, "field.feature", w, w);
  // Color layer over the concatenation (feature, enc_dir, appearance code),
  // stored as per-block matrices so the frame code multiplies once per batch.
  const int color_in = w + dd + cfg_.latent_dim;
  init_block(store, rng, "field.color.Wf", w, wc, color_in);
  init_block(store, rng, "field.color.Wd", dd, wc, color_in);
  init_block(store, rng, "field.color.Wa", cfg_.latent_dim, wc, color_in);
  store.add("field.color.b", ad::Tensor({wc}));
  init_linear(store, rng, "field.rgb", wc, 3);
  store.add("app_codes", ad::Tensor({cfg_.num_frames, cfg_.latent_dim}));
}

std::pair<ad::Tensor, ad::Tensor> CanonicalField::density(const ParamView& p,
                                                          const ad::Tensor& enc_pos) const {
  ad::Tensor h = enc_pos;
  for (int i = 0; i < cfg_.trunk_depth; ++i) {
    if (i == cfg_.skip_layer && i > 0) h = ad::concat_cols(h, enc_pos);
    h = ad::relu(linear(p, trunk_name(i), h));
  }
  ad::Tensor sigma = ad::softplus(ad::reshape(linear(p, "field.sigma", h), {h.rows()}));
  ad::Tensor feature = linear(p, "field.feature", h);
  return {std::move(sigma), std::move(feature)};
}

ad::Tensor CanonicalField::density_only(const ParamView& p, const ad::Tensor& enc_pos) const {
  ad::Tensor h = enc_pos;
  for (int i = 0; i < cfg_.trunk_depth; ++i) {
    if (i == cfg_.skip_layer && i > 0) h = ad::concat_cols(h, enc_pos);
    h = ad::relu(linear(p, trunk_name(i), h));
  }
  return ad::softplus(ad::reshape(linear(p, "field.sigma", h), {h.rows()}));
}

ad::Tensor CanonicalField::color(const ParamView& p, const ad::Tensor& feature,
                                 const ad::Tensor& enc_dir, const ad::Tensor& app_row) const {
  ad::Tensor pre = ad::add(ad::matmul(feature, p.get("field.color.Wf")),
                           ad::matmul(enc_dir, p.get("field.color.Wd")));
  ad::Tensor app = ad::reshape(ad::matmul(app_row, p.get("field.color.Wa")), {cfg_.color_width});
  pre = ad::add_rowvec(pre, app);
  pre = ad::add_rowvec(pre, p.get("field.color.b"));
  ad::Tensor hidden = ad::relu(pre);
  return ad::sigmoid(linear(p, "field.rgb", hidden));
}

std::pair<double, Vec3> CanonicalField::eval(const ParamStore& store, const Vec3& x_canonical,
                                             const Vec3& d_view, int frame) const {
  if (std::fabs(d_view.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("eval_field: view direction is not unit length");
  if (frame < 0 || frame >= cfg_.num_frames)
    throw std::invalid_argument("eval_field: frame index out of range");
  ParamView p(store);
  ad::Tensor pos({1, 3}, {x_canonical.x(), x_canonical.y(), x_canonical.z()});
  ad::Tensor dir({1, 3}, {d_view.x(), d_view.y(), d_view.z()});
  auto [sigma, feature] = density(p, encode_rows(cfg_.pos_encoding(), pos));
  ad::Tensor rgb = color(p, feature, encode_rows(cfg_.dir_encoding(), dir),
                         ad::take_row(p.get("app_codes"), frame));
  return {sigma.at(0), Vec3(rgb.at(0), rgb.at(1), rgb.at(2))};
}

}  // namespace volskin
