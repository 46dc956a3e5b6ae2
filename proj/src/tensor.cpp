#include "volskin/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "volskin/common.hpp"
#include "volskin/gemm.hpp"

namespace volskin::ad {

namespace {

int shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shapes_msg(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << a.shape_str() << " vs " << b.shape_str();
  return os.str();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError(shapes_msg(op, a, b));
}

// Tape for the result of an op over the given inputs; null when all inputs
// are untracked. Inputs tracked on two different tapes are rejected.
Tape* result_tape(const char* op, std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (tape && tape != t->tape())
      throw std::logic_error(std::string(op) + ": inputs recorded on different tapes");
    tape = t->tape();
  }
  return tape;
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape)
    : store_(std::make_shared<std::vector<double>>(shape_numel(shape), 0.0)),
      shape_(std::move(shape)) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : store_(std::make_shared<std::vector<double>>(std::move(values))), shape_(std::move(shape)) {
  if (shape_numel(shape_) != static_cast<int>(store_->size()))
    throw ShapeError("Tensor: " + shape_str() + " does not match " +
                     std::to_string(store_->size()) + " values");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::initializer_list<double> v) {
  return Tensor({static_cast<int>(v.size())}, std::vector<double>(v));
}

int Tensor::numel() const { return store_ ? static_cast<int>(store_->size()) : 0; }

int Tensor::rows() const { return shape_.empty() ? 0 : shape_[0]; }

int Tensor::cols() const {
  if (shape_.size() <= 1) return shape_.empty() ? 0 : 1;
  int c = 1;
  for (size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return c;
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeError("value(): tensor " + shape_str() + " is not scalar");
  return (*store_)[0];
}

bool Tensor::all_finite() const {
  for (double v : *store_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << "]";
  return os.str();
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = -1;
  return t;
}

Tensor make_node(Tensor out, Tape* tape, int node) {
  out.tape_ = tape;
  out.node_ = node;
  return out;
}

// ---- Tape / GradientMap -----------------------------------------------------

int Tape::record(const std::vector<int>& parents, int numel, BackwardFn fn) {
  nodes_.push_back(Node{parents, std::move(fn)});
  numel_.push_back(numel);
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::leaf(const Tensor& value) {
  int id = record({}, value.numel(), nullptr);
  return make_node(value, this, id);
}

GradientMap Tape::backward(const Tensor& root) {
  if (!root.tracked() || root.tape() != this)
    throw std::logic_error("backward: root is not tracked on this tape");
  if (root.numel() != 1)
    throw ShapeError("backward: root " + root.shape_str() + " is not scalar");
  GradientMap grads(this);
  grads.buffers_.resize(nodes_.size());
  grads.accumulate(root.node())[0] = 1.0;
  for (int i = root.node(); i >= 0; --i) {
    if (grads.buffers_[i].empty()) continue;
    if (nodes_[i].backward) nodes_[i].backward(grads.buffers_[i].data(), grads);
  }
  return grads;
}

double* GradientMap::accumulate(int node) {
  auto& buf = buffers_[node];
  if (buf.empty()) buf.assign(tape_->node_numel(node), 0.0);
  return buf.data();
}

bool GradientMap::reached(const Tensor& t) const {
  return t.tracked() && !buffers_[t.node()].empty();
}

Tensor GradientMap::grad_of(const Tensor& t) const {
  if (!t.tracked()) throw std::logic_error("grad_of: tensor is not tracked");
  const auto& buf = buffers_[t.node()];
  if (buf.empty()) return Tensor(t.shape());
  return Tensor(t.shape(), buf);
}

// ---- op helpers -------------------------------------------------------------

namespace {

// Records an elementwise-style node when needed. `fn` receives upstream and
// the gradient map; parent ids are captured by the closure.
Tensor finish(Tensor out, Tape* tape, const std::vector<int>& parents, Tape::BackwardFn fn) {
  if (!tape) return out;
  int id = tape->record(parents, out.numel(), std::move(fn));
  return make_node(std::move(out), tape, id);
}

// Keeps forward values alive for backward closures.
using Store = std::shared_ptr<const std::vector<double>>;

Store store_of(const Tensor& t) { return t.storage(); }

}  // namespace

// Elementwise binary with per-element local gradients captured as lambdas.
template <class FwdFn, class DaFn, class DbFn>
static Tensor binary_ew(const char* name, const Tensor& a, const Tensor& b, FwdFn fwd, DaFn da,
                        DbFn db) {
  require_same_shape(name, a, b);
  const int n = a.numel();
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
  Tape* tape = result_tape(name, {&a, &b});
  if (!tape) return out;
  const int na = a.node(), nb = b.node();
  Store sa = store_of(a), sb = store_of(b);
  return finish(std::move(out), tape, {na, nb},
                [na, nb, n, sa, sb, da, db](const double* up, GradientMap& g) {
                  if (na >= 0) {
                    double* ga = g.accumulate(na);
                    for (int i = 0; i < n; ++i) ga[i] += up[i] * da((*sa)[i], (*sb)[i]);
                  }
                  if (nb >= 0) {
                    double* gb = g.accumulate(nb);
                    for (int i = 0; i < n; ++i) gb[i] += up[i] * db((*sa)[i], (*sb)[i]);
                  }
                });
}

template <class FwdFn, class DFn>
static Tensor unary_ew(const char* name, const Tensor& a, FwdFn fwd, DFn dfn) {
  const int n = a.numel();
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i) po[i] = fwd(pa[i]);
  Tape* tape = result_tape(name, {&a});
  if (!tape) return out;
  const int na = a.node();
  Store sa = store_of(a);
  return finish(std::move(out), tape, {na}, [na, n, sa, dfn](const double* up, GradientMap& g) {
    double* ga = g.accumulate(na);
    for (int i = 0; i < n; ++i) ga[i] += up[i] * dfn((*sa)[i]);
  });
}

// ---- arithmetic -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_ew(
      "add_scalar", a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Tensor scale(const Tensor& a, double c) {
  return unary_ew(
      "scale", a, [c](double x) { return c * x; }, [c](double) { return c; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale_by(const Tensor& t, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("scale_by: scale " + s.shape_str() + " is not scalar");
  const int n = t.numel();
  const double sv = s.at(0);
  Tensor out(t.shape());
  const double* pt = t.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i) po[i] = pt[i] * sv;
  Tape* tape = result_tape("scale_by", {&t, &s});
  if (!tape) return out;
  const int nt = t.node(), ns = s.node();
  Store st = store_of(t);
  return finish(std::move(out), tape, {nt, ns},
                [nt, ns, n, sv, st](const double* up, GradientMap& g) {
                  if (nt >= 0) {
                    double* gt = g.accumulate(nt);
                    for (int i = 0; i < n; ++i) gt[i] += up[i] * sv;
                  }
                  if (ns >= 0) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i) acc += up[i] * (*st)[i];
                    g.accumulate(ns)[0] += acc;
                  }
                });
}

Tensor reciprocal(const Tensor& a) {
  return unary_ew(
      "reciprocal", a,
      [](double x) {
        if (std::fabs(x) < 1e-300) throw std::domain_error("reciprocal: division by zero");
        return 1.0 / x;
      },
      [](double x) { return -1.0 / (x * x); });
}

// ---- structured ops ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError(shapes_msg("matmul", a, b));
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out({m, n});
  matmul_forward(a.data(), b.data(), out.data(), m, k, n);
  Tape* tape = result_tape("matmul", {&a, &b});
  if (!tape) return out;
  const int na = a.node(), nb = b.node();
  Store sa = store_of(a), sb = store_of(b);
  return finish(std::move(out), tape, {na, nb},
                [na, nb, m, k, n, sa, sb](const double* up, GradientMap& g) {
                  if (na >= 0) matmul_grad_a(up, sb->data(), g.accumulate(na), m, k, n);
                  if (nb >= 0) matmul_grad_b(sa->data(), up, g.accumulate(nb), m, k, n);
                });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  const int rows = m.rows(), cols = m.cols();
  if (v.numel() != cols) throw ShapeError(shapes_msg("add_rowvec", m, v));
  Tensor out(m.shape());
  const double* pm = m.data();
  const double* pv = v.data();
  double* po = out.data();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) po[r * cols + c] = pm[r * cols + c] + pv[c];
  Tape* tape = result_tape("add_rowvec", {&m, &v});
  if (!tape) return out;
  const int nm = m.node(), nv = v.node();
  return finish(std::move(out), tape, {nm, nv},
                [nm, nv, rows, cols](const double* up, GradientMap& g) {
                  if (nm >= 0) {
                    double* gm = g.accumulate(nm);
                    for (int i = 0; i < rows * cols; ++i) gm[i] += up[i];
                  }
                  if (nv >= 0) {
                    double* gv = g.accumulate(nv);
                    for (int c = 0; c < cols; ++c) {
                      double acc = 0.0;
                      for (int r = 0; r < rows; ++r) acc += up[r * cols + c];
                      gv[c] += acc;
                    }
                  }
                });
}

Tensor mul_colvec(const Tensor& m, const Tensor& col) {
  const int rows = m.rows(), cols = m.cols();
  if (col.numel() != rows) throw ShapeError(shapes_msg("mul_colvec", m, col));
  Tensor out(m.shape());
  const double* pm = m.data();
  const double* pc = col.data();
  double* po = out.data();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) po[r * cols + c] = pm[r * cols + c] * pc[r];
  Tape* tape = result_tape("mul_colvec", {&m, &col});
  if (!tape) return out;
  const int nm = m.node(), nc = col.node();
  Store sm = store_of(m), sc = store_of(col);
  return finish(std::move(out), tape, {nm, nc},
                [nm, nc, rows, cols, sm, sc](const double* up, GradientMap& g) {
                  if (nm >= 0) {
                    double* gm = g.accumulate(nm);
                    for (int r = 0; r < rows; ++r)
                      for (int c = 0; c < cols; ++c)
                        gm[r * cols + c] += up[r * cols + c] * (*sc)[r];
                  }
                  if (nc >= 0) {
                    double* gc = g.accumulate(nc);
                    for (int r = 0; r < rows; ++r) {
                      double acc = 0.0;
                      for (int c = 0; c < cols; ++c) acc += up[r * cols + c] * (*sm)[r * cols + c];
                      gc[r] += acc;
                    }
                  }
                });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw ShapeError(shapes_msg("concat_cols", a, b));
  const int rows = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out({rows, ca + cb});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int r = 0; r < rows; ++r) {
    std::memcpy(po + r * (ca + cb), pa + r * ca, sizeof(double) * ca);
    std::memcpy(po + r * (ca + cb) + ca, pb + r * cb, sizeof(double) * cb);
  }
  Tape* tape = result_tape("concat_cols", {&a, &b});
  if (!tape) return out;
  const int na = a.node(), nb = b.node();
  return finish(std::move(out), tape, {na, nb},
                [na, nb, rows, ca, cb](const double* up, GradientMap& g) {
                  if (na >= 0) {
                    double* ga = g.accumulate(na);
                    for (int r = 0; r < rows; ++r)
                      for (int c = 0; c < ca; ++c) ga[r * ca + c] += up[r * (ca + cb) + c];
                  }
                  if (nb >= 0) {
                    double* gb = g.accumulate(nb);
                    for (int r = 0; r < rows; ++r)
                      for (int c = 0; c < cb; ++c) gb[r * cb + c] += up[r * (ca + cb) + ca + c];
                  }
                });
}

Tensor take_row(const Tensor& m, int row) {
  const int rows = m.rows(), cols = m.cols();
  if (row < 0 || row >= rows)
    throw ShapeError("take_row: row " + std::to_string(row) + " out of " + m.shape_str());
  Tensor out({1, cols});
  std::memcpy(out.data(), m.data() + static_cast<size_t>(row) * cols, sizeof(double) * cols);
  Tape* tape = result_tape("take_row", {&m});
  if (!tape) return out;
  const int nm = m.node();
  return finish(std::move(out), tape, {nm}, [nm, row, cols](const double* up, GradientMap& g) {
    double* gm = g.accumulate(nm);
    for (int c = 0; c < cols; ++c) gm[static_cast<size_t>(row) * cols + c] += up[c];
  });
}

Tensor gather_rows(const Tensor& m, const std::vector<int>& idx) {
  const int rows = m.rows(), cols = m.cols();
  Tensor out({static_cast<int>(idx.size()), cols});
  double* po = out.data();
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= rows)
      throw ShapeError("gather_rows: index " + std::to_string(idx[k]) + " out of " + m.shape_str());
    std::memcpy(po + k * cols, m.data() + static_cast<size_t>(idx[k]) * cols,
                sizeof(double) * cols);
  }
  Tape* tape = result_tape("gather_rows", {&m});
  if (!tape) return out;
  const int nm = m.node();
  auto indices = idx;
  return finish(std::move(out), tape, {nm},
                [nm, indices, cols](const double* up, GradientMap& g) {
                  double* gm = g.accumulate(nm);
                  for (size_t k = 0; k < indices.size(); ++k)
                    for (int c = 0; c < cols; ++c)
                      gm[static_cast<size_t>(indices[k]) * cols + c] += up[k * cols + c];
                });
}

Tensor reshape(const Tensor& t, std::vector<int> shape) {
  if (shape_numel(shape) != t.numel())
    throw ShapeError("reshape: " + t.shape_str() + " has " + std::to_string(t.numel()) +
                     " elements");
  Tensor out(std::move(shape), std::vector<double>(t.data(), t.data() + t.numel()));
  Tape* tape = result_tape("reshape", {&t});
  if (!tape) return out;
  const int nt = t.node();
  const int n = t.numel();
  return finish(std::move(out), tape, {nt}, [nt, n](const double* up, GradientMap& g) {
    double* gt = g.accumulate(nt);
    for (int i = 0; i < n; ++i) gt[i] += up[i];
  });
}

// ---- elementwise nonlinearities ---------------------------------------------

Tensor exp(const Tensor& a) {
  return unary_ew(
      "exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Tensor sin(const Tensor& a) {
  return unary_ew(
      "sin", a, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary_ew(
      "cos", a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); });
}

Tensor relu(const Tensor& a) {
  return unary_ew(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

static double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

static double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor softplus(const Tensor& a) {
  return unary_ew("softplus", a, stable_softplus, stable_sigmoid);
}

Tensor sigmoid(const Tensor& a) {
  return unary_ew("sigmoid", a, stable_sigmoid, [](double x) {
    double s = stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

Tensor abs(const Tensor& a) {
  return unary_ew(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary_ew(
      "square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

// ---- reductions ----------------------------------------------------------------

Tensor sum(const Tensor& a) {
  const int n = a.numel();
  double acc = 0.0;
  const double* pa = a.data();
  for (int i = 0; i < n; ++i) acc += pa[i];
  Tensor out = Tensor::scalar(acc);
  Tape* tape = result_tape("sum", {&a});
  if (!tape) return out;
  const int na = a.node();
  return finish(std::move(out), tape, {na}, [na, n](const double* up, GradientMap& g) {
    double* ga = g.accumulate(na);
    for (int i = 0; i < n; ++i) ga[i] += up[0];
  });
}

Tensor mean(const Tensor& a) {
  const int n = a.numel();
  if (n == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  const double* pa = a.data();
  for (int i = 0; i < n; ++i) acc += pa[i];
  Tensor out = Tensor::scalar(acc / n);
  Tape* tape = result_tape("mean", {&a});
  if (!tape) return out;
  const int na = a.node();
  return finish(std::move(out), tape, {na}, [na, n](const double* up, GradientMap& g) {
    double* ga = g.accumulate(na);
    const double w = up[0] / n;
    for (int i = 0; i < n; ++i) ga[i] += w;
  });
}

Tensor sum_axis1(const Tensor& m) {
  const int rows = m.rows(), cols = m.cols();
  Tensor out({rows});
  const double* pm = m.data();
  double* po = out.data();
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += pm[r * cols + c];
    po[r] = acc;
  }
  Tape* tape = result_tape("sum_axis1", {&m});
  if (!tape) return out;
  const int nm = m.node();
  return finish(std::move(out), tape, {nm}, [nm, rows, cols](const double* up, GradientMap& g) {
    double* gm = g.accumulate(nm);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) gm[r * cols + c] += up[r];
  });
}

Tensor group_sum_rows(const Tensor& m, int group) {
  const int rows = m.rows(), cols = m.cols();
  if (group <= 0 || rows % group != 0)
    throw ShapeError("group_sum_rows: " + m.shape_str() + " not divisible into groups of " +
                     std::to_string(group));
  const int out_rows = rows / group;
  Tensor out({out_rows, cols});
  const double* pm = m.data();
  double* po = out.data();
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int j = 0; j < group; ++j) acc += pm[(static_cast<size_t>(r) * group + j) * cols + c];
      po[r * cols + c] = acc;
    }
  }
  Tape* tape = result_tape("group_sum_rows", {&m});
  if (!tape) return out;
  const int nm = m.node();
  return finish(std::move(out), tape, {nm},
                [nm, out_rows, cols, group](const double* up, GradientMap& g) {
                  double* gm = g.accumulate(nm);
                  for (int r = 0; r < out_rows; ++r)
                    for (int j = 0; j < group; ++j)
                      for (int c = 0; c < cols; ++c)
                        gm[(static_cast<size_t>(r) * group + j) * cols + c] += up[r * cols + c];
                });
}

Tensor cumsum_exclusive_rows(const Tensor& m) {
  const int rows = m.rows(), cols = m.cols();
  Tensor out(m.shape());
  const double* pm = m.data();
  double* po = out.data();
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) {
      po[r * cols + c] = acc;
      acc += pm[r * cols + c];
    }
  }
  Tape* tape = result_tape("cumsum_exclusive_rows", {&m});
  if (!tape) return out;
  const int nm = m.node();
  return finish(std::move(out), tape, {nm}, [nm, rows, cols](const double* up, GradientMap& g) {
    // d out[j'] / d in[j] = 1 for j < j', so grad_in[j] = sum_{j' > j} up[j'].
    double* gm = g.accumulate(nm);
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int c = cols - 1; c >= 0; --c) {
        gm[r * cols + c] += acc;
        acc += up[r * cols + c];
      }
    }
  });
}

Tensor softmax_rows(const Tensor& m) {
  const int rows = m.rows(), cols = m.cols();
  Tensor out(m.shape());
  const double* pm = m.data();
  double* po = out.data();
  for (int r = 0; r < rows; ++r) {
    double mx = pm[r * cols];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, pm[r * cols + c]);
    double z = 0.0;
    for (int c = 0; c < cols; ++c) {
      double e = std::exp(pm[r * cols + c] - mx);
      po[r * cols + c] = e;
      z += e;
    }
    for (int c = 0; c < cols; ++c) po[r * cols + c] /= z;
  }
  Tape* tape = result_tape("softmax_rows", {&m});
  if (!tape) return out;
  const int nm = m.node();
  Store so = store_of(out);
  return finish(std::move(out), tape, {nm},
                [nm, rows, cols, so](const double* up, GradientMap& g) {
                  double* gm = g.accumulate(nm);
                  for (int r = 0; r < rows; ++r) {
                    const double* s = so->data() + static_cast<size_t>(r) * cols;
                    const double* u = up + static_cast<size_t>(r) * cols;
                    double dot = 0.0;
                    for (int c = 0; c < cols; ++c) dot += u[c] * s[c];
                    for (int c = 0; c < cols; ++c) gm[r * cols + c] += s[c] * (u[c] - dot);
                  }
                });
}

Tensor rowwise_norm(const Tensor& m) {
  const int rows = m.rows(), cols = m.cols();
  Tensor out({rows});
  const double* pm = m.data();
  double* po = out.data();
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += pm[r * cols + c] * pm[r * cols + c];
    po[r] = std::sqrt(acc);
  }
  Tape* tape = result_tape("rowwise_norm", {&m});
  if (!tape) return out;
  const int nm = m.node();
  Store sm = store_of(m);
  Store so = store_of(out);
  return finish(std::move(out), tape, {nm},
                [nm, rows, cols, sm, so](const double* up, GradientMap& g) {
                  double* gm = g.accumulate(nm);
                  for (int r = 0; r < rows; ++r) {
                    const double denom = std::max((*so)[r], 1e-12);
                    for (int c = 0; c < cols; ++c)
                      gm[r * cols + c] += up[r] * (*sm)[r * cols + c] / denom;
                  }
                });
}

Tensor rowwise_normalize(const Tensor& m) {
  const int rows = m.rows(), cols = m.cols();
  Tensor out(m.shape());
  const double* pm = m.data();
  double* po = out.data();
  std::vector<double> norms(rows);
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += pm[r * cols + c] * pm[r * cols + c];
    double nv = std::sqrt(acc);
    norms[r] = nv;
    const double inv = nv < 1e-12 ? 0.0 : 1.0 / nv;
    for (int c = 0; c < cols; ++c) po[r * cols + c] = pm[r * cols + c] * inv;
  }
  Tape* tape = result_tape("rowwise_normalize", {&m});
  if (!tape) return out;
  const int nm = m.node();
  Store so = store_of(out);
  auto nrm = std::make_shared<std::vector<double>>(std::move(norms));
  return finish(std::move(out), tape, {nm},
                [nm, rows, cols, so, nrm](const double* up, GradientMap& g) {
                  // d n / d x = (I - n n^T) / |x|
                  double* gm = g.accumulate(nm);
                  for (int r = 0; r < rows; ++r) {
                    const double* nr = so->data() + static_cast<size_t>(r) * cols;
                    const double* u = up + static_cast<size_t>(r) * cols;
                    const double inv = (*nrm)[r] < 1e-12 ? 0.0 : 1.0 / (*nrm)[r];
                    double dot = 0.0;
                    for (int c = 0; c < cols; ++c) dot += u[c] * nr[c];
                    for (int c = 0; c < cols; ++c)
                      gm[r * cols + c] += (u[c] - dot * nr[c]) * inv;
                  }
                });
}

}  // namespace volskin::ad
