#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace volskin::ad {

class Tape;
class GradientMap;

// Dense real-valued array with optional tape tracking. Storage is shared and
// immutable once an op has produced it; copies are cheap handles. Compute is
// double precision in memory; persisted artifacts are single precision.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor vector(std::initializer_list<double> v);

  const std::vector<int>& shape() const { return shape_; }
  int numel() const;
  // Rank-2 view: a rank-1 tensor of length n reads as [n x 1].
  int rows() const;
  int cols() const;

  bool defined() const { return store_ != nullptr; }
  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  double* data() { return store_->data(); }
  const double* data() const { return store_->data(); }
  double at(int i) const { return (*store_)[i]; }
  double at(int r, int c) const { return (*store_)[static_cast<size_t>(r) * cols() + c]; }
  double value() const;  // numel() == 1
  bool all_finite() const;

  std::string shape_str() const;
  Tensor detached() const;  // same storage, no tape
  std::shared_ptr<const std::vector<double>> storage() const { return store_; }

 private:
  std::shared_ptr<std::vector<double>> store_;
  std::vector<int> shape_;
  Tape* tape_ = nullptr;
  int node_ = -1;

  friend class Tape;
  friend Tensor make_node(Tensor out, Tape* tape, int node);
};

// Accumulation buffers for one backward pass, indexed by node id. Buffers are
// materialized lazily; an absent buffer reads as zero.
class GradientMap {
 public:
  Tensor grad_of(const Tensor& t) const;  // zeros when no path reached t
  bool reached(const Tensor& t) const;
  double* accumulate(int node);  // allocates on first touch

 private:
  friend class Tape;
  explicit GradientMap(const Tape* tape) : tape_(tape) {}
  const Tape* tape_;
  std::vector<std::vector<double>> buffers_;
};

// Reverse-mode tape. Nodes are recorded in execution order, so parents always
// precede children and one reverse sweep visits each node exactly once. A
// tape is single-owner while recording; rebuild one per training step.
class Tape {
 public:
  using BackwardFn = std::function<void(const double* upstream, GradientMap& grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a tracked copy of `value` (shares storage).
  Tensor leaf(const Tensor& value);

  // Root must be scalar and tracked on this tape.
  GradientMap backward(const Tensor& root);

  int size() const { return static_cast<int>(numel_.size()); }
  int record(const std::vector<int>& parents, int numel, BackwardFn fn);
  int node_numel(int node) const { return numel_[node]; }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<int> numel_;
};

// ---- forward operations -------------------------------------------------
// Every op computes values eagerly and records itself when an input is
// tracked. Mixing tensors from two different tapes is an error.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);
// t * s with s a tracked or untracked scalar tensor.
Tensor scale_by(const Tensor& t, const Tensor& s);
Tensor reciprocal(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor mul_colvec(const Tensor& m, const Tensor& col);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor take_row(const Tensor& m, int row);
Tensor gather_rows(const Tensor& m, const std::vector<int>& idx);
Tensor reshape(const Tensor& t, std::vector<int> shape);

Tensor exp(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis1(const Tensor& m);                    // [R x C] -> [R]
Tensor group_sum_rows(const Tensor& m, int group);    // [(R*g) x C] -> [R x C]
Tensor cumsum_exclusive_rows(const Tensor& m);        // per row
Tensor softmax_rows(const Tensor& m);
Tensor rowwise_norm(const Tensor& m);                 // [R x C] -> [R]
Tensor rowwise_normalize(const Tensor& m);

}  // namespace volskin::ad
