#pragma once

#include <Eigen/Dense>

#include "volskin/tensor.hpp"

namespace volskin {

// Multi-frequency sinusoidal encoding. Layout: the raw input block (when
// include_input) followed by interleaved sin/cos blocks per octave,
// sin(2^l pi v), cos(2^l pi v) for l = 0..L-1, each block input_dim wide.
struct PositionalEncoding {
  int num_frequencies = 0;
  bool include_input = true;

  int output_dim(int input_dim) const {
    return input_dim * (2 * num_frequencies + (include_input ? 1 : 0));
  }
};

// Writes output_dim(dim) values to out. Rejects non-finite input.
void encode_into(const PositionalEncoding& enc, const double* v, int dim, double* out);

Eigen::VectorXd encode_vector(const PositionalEncoding& enc, const Eigen::VectorXd& v);

// Row-wise encoding of an untracked [N x d] tensor -> [N x output_dim(d)].
ad::Tensor encode_rows(const PositionalEncoding& enc, const ad::Tensor& points);

}  // namespace volskin
