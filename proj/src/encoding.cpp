#include "volskin/encoding.hpp"

#include <cmath>
#include <stdexcept>

#include "volskin/common.hpp"

namespace volskin {

void encode_into(const PositionalEncoding& enc, const double* v, int dim, double* out) {
  int o = 0;
  for (int i = 0; i < dim; ++i)
    if (!std::isfinite(v[i])) throw std::invalid_argument("encode: non-finite input coordinate");
  if (enc.include_input)
    for (int i = 0; i < dim; ++i) out[o++] = v[i];
  double freq = M_PI;
  for (int l = 0; l < enc.num_frequencies; ++l) {
    for (int i = 0; i < dim; ++i) out[o++] = std::sin(freq * v[i]);
    for (int i = 0; i < dim; ++i) out[o++] = std::cos(freq * v[i]);
    freq *= 2.0;
  }
}

Eigen::VectorXd encode_vector(const PositionalEncoding& enc, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(enc.output_dim(static_cast<int>(v.size())));
  encode_into(enc, v.data(), static_cast<int>(v.size()), out.data());
  return out;
}

ad::Tensor encode_rows(const PositionalEncoding& enc, const ad::Tensor& points) {
  const int rows = points.rows(), dim = points.cols();
  const int out_dim = enc.output_dim(dim);
  ad::Tensor out({rows, out_dim});
#pragma omp parallel for schedule(static) if (rows > 1024)
  for (int r = 0; r < rows; ++r)
    encode_into(enc, points.data() + static_cast<size_t>(r) * dim, dim,
                out.data() + static_cast<size_t>(r) * out_dim);
  return out;
}

}  // namespace volskin
