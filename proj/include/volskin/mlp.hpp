#pragma once

#include <string>
#include <vector>

#include "volskin/common.hpp"
#include "volskin/tensor.hpp"

namespace volskin {

// Ordered collection of named master parameters (untracked tensors). Order is
// insertion order and fixed, which pins optimizer-state layout, checkpoint
// layout, and update determinism.
class ParamStore {
 public:
  int add(const std::string& name, ad::Tensor value);
  bool has(const std::string& name) const;
  int index_of(const std::string& name) const;  // -1 when absent
  ad::Tensor& value(int index) { return values_[index]; }
  const ad::Tensor& value(int index) const { return values_[index]; }
  const std::string& name(int index) const { return names_[index]; }
  int size() const { return static_cast<int>(values_.size()); }

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> values_;
};

// Per-evaluation view over a ParamStore. With a tape, every parameter is
// registered as a tracked leaf; without one, parameters evaluate untracked.
class ParamView {
 public:
  explicit ParamView(const ParamStore& store);
  ParamView(const ParamStore& store, ad::Tape& tape);

  const ad::Tensor& get(const std::string& name) const;
  const ad::Tensor& get(int index) const { return tensors_[index]; }
  int size() const { return static_cast<int>(tensors_.size()); }

 private:
  const ParamStore* store_;
  std::vector<ad::Tensor> tensors_;
};

// W is stored [in x out]; init draws uniform +-1/sqrt(in), bias zero.
void init_linear(ParamStore& store, RngState& rng, const std::string& prefix, int in, int out);

// x [N x in] -> x W + b
ad::Tensor linear(const ParamView& params, const std::string& prefix, const ad::Tensor& x);

}  // namespace volskin
