#include "volskin/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace volskin {

int ParamStore::add(const std::string& name, ad::Tensor value) {
  if (has(name)) throw std::logic_error("ParamStore: duplicate parameter " + name);
  names_.push_back(name);
  values_.push_back(std::move(value));
  return size() - 1;
}

bool ParamStore::has(const std::string& name) const { return index_of(name) >= 0; }

int ParamStore::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (names_[i] == name) return i;
  return -1;
}

ParamView::ParamView(const ParamStore& store) : store_(&store) {
  tensors_.reserve(store.size());
  for (int i = 0; i < store.size(); ++i) tensors_.push_back(store.value(i));
}

ParamView::ParamView(const ParamStore& store, ad::Tape& tape) : store_(&store) {
  tensors_.reserve(store.size());
  for (int i = 0; i < store.size(); ++i) tensors_.push_back(tape.leaf(store.value(i)));
}

const ad::Tensor& ParamView::get(const std::string& name) const {
  int idx = store_->index_of(name);
  if (idx < 0) throw std::logic_error("ParamView: unknown parameter " + name);
  return tensors_[idx];
}

void init_linear(ParamStore& store, RngState& rng, const std::string& prefix, int in, int out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  ad::Tensor w({in, out});
  for (int i = 0; i < w.numel(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  store.add(prefix + ".W", std::move(w));
  store.add(prefix + ".b", ad::Tensor({out}));
}

ad::Tensor linear(const ParamView& params, const std::string& prefix, const ad::Tensor& x) {
  return ad::add_rowvec(ad::matmul(x, params.get(prefix + ".W")), params.get(prefix + ".b"));
}

}  // namespace volskin
