#pragma once

// Dense row-major tensors with dynamic-graph reverse-mode differentiation.
// Every operation records a node holding its inputs and a backward closure;
// backward() runs the closures in reverse topological order. Gradients only
// flow through nodes whose requires_grad flag is set (parameter leaves and
// anything derived from them).

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vg3d/common.hpp"

namespace vg3d {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::runtime_error("tensor: extents must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Boolean mask companion to a tensor of the same shape (not differentiable).
struct BoolMask {
  Shape shape;
  std::vector<std::uint8_t> v;

  static BoolMask full(Shape s, bool val) {
    BoolMask m;
    m.v.assign(static_cast<std::size_t>(shape_numel(s)), val ? 1 : 0);
    m.shape = std::move(s);
    return m;
  }
};

template <class Real>
struct NodeT {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // allocated when requires_grad
  std::vector<std::shared_ptr<NodeT>> parents;
  std::function<void(NodeT&)> backfn;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Real(0));
  }
};

template <class Real>
using NodePtr = std::shared_ptr<NodeT<Real>>;

template <class Real>
class TensorT {
 public:
  TensorT() = default;
  explicit TensorT(NodePtr<Real> n) : n_(std::move(n)) {}

  static TensorT constant(Shape shape, Real fill = Real(0)) {
    auto n = std::make_shared<NodeT<Real>>();
    n->value.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
    n->shape = std::move(shape);
    return TensorT(std::move(n));
  }

  static TensorT from_data(Shape shape, std::vector<Real> data) {
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
      throw std::runtime_error("tensor: data length does not match shape " + shape_str(shape));
    auto n = std::make_shared<NodeT<Real>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return TensorT(std::move(n));
  }

  static TensorT scalar(Real v) { return from_data({1}, {v}); }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(n_->value.size()); }

  const std::vector<Real>& values() const { return n_->value; }
  Real value_at(std::int64_t i) const { return n_->value[static_cast<std::size_t>(i)]; }
  Real scalar_value() const {
    if (numel() != 1) throw std::runtime_error("tensor: scalar_value on non-scalar");
    return n_->value[0];
  }

  // Direct mutation is reserved for leaves (parameters, constants).
  std::vector<Real>& leaf_values() {
    if (!n_->parents.empty()) throw std::runtime_error("tensor: mutating a non-leaf");
    return n_->value;
  }

  const std::vector<Real>& grad() const { return n_->grad; }
  std::vector<Real>& mutable_grad() { return n_->grad; }

  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool b) {
    n_->requires_grad = b;
    if (b) n_->ensure_grad();
  }

  NodePtr<Real> node() const { return n_; }

 private:
  NodePtr<Real> n_;
};

using Tensor = TensorT<double>;

namespace detail {

template <class Real>
NodePtr<Real> make_node(Shape shape, std::vector<NodePtr<Real>> parents) {
  auto n = std::make_shared<NodeT<Real>>();
  n->value.assign(static_cast<std::size_t>(shape_numel(shape)), Real(0));
  n->shape = std::move(shape);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  n->parents = std::move(parents);
  return n;
}

// Right-aligned NumPy-style broadcast of two shapes.
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  Shape out;
  int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
  int r = std::max(ra, rb);
  out.resize(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    int da = i < ra ? a[static_cast<std::size_t>(ra - 1 - i)] : 1;
    int db = i < rb ? b[static_cast<std::size_t>(rb - 1 - i)] : 1;
    if (da != db && da != 1 && db != 1)
      throw std::runtime_error("tensor: shapes not broadcastable " + shape_str(a) + " vs " + shape_str(b));
    out[static_cast<std::size_t>(r - 1 - i)] = std::max(da, db);
  }
  return out;
}

// Strides of `in` laid out against the broadcast result shape (0 on broadcast axes).
inline std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  int ri = static_cast<int>(in.size()), ro = static_cast<int>(out.size());
  std::vector<std::int64_t> strides(static_cast<std::size_t>(ro), 0);
  std::int64_t s = 1;
  for (int i = 0; i < ri; ++i) {
    int axis = ri - 1 - i;
    int oaxis = ro - 1 - i;
    strides[static_cast<std::size_t>(oaxis)] = (in[static_cast<std::size_t>(axis)] == 1) ? 0 : s;
    s *= in[static_cast<std::size_t>(axis)];
  }
  return strides;
}

// Walks every flat index of `out` yielding the flat indices into two
// broadcast operands. fn(iout, ia, ib).
template <class Fn>
void broadcast_walk(const Shape& out, const std::vector<std::int64_t>& sa,
                    const std::vector<std::int64_t>& sb, Fn&& fn) {
  std::int64_t n = shape_numel(out);
  int r = static_cast<int>(out.size());
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (int ax = r - 1; ax >= 0; --ax) {
      auto a = static_cast<std::size_t>(ax);
      ++idx[a];
      ia += sa[a];
      ib += sb[a];
      if (idx[a] < out[a]) break;
      ia -= sa[a] * out[a];
      ib -= sb[a] * out[a];
      idx[a] = 0;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops with broadcasting.

template <class Real, class Fwd, class Back>
TensorT<Real> binary_op(const TensorT<Real>& a, const TensorT<Real>& b, Fwd fwd, Back back) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) {
    auto n = detail::make_node<Real>(sa, {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) n->value[i] = fwd(av[i], bv[i]);
    if (n->requires_grad)
      n->backfn = [back](NodeT<Real>& o) {
        auto& pa = *o.parents[0];
        auto& pb = *o.parents[1];
        bool ga = pa.requires_grad, gb = pb.requires_grad;
        if (ga) pa.ensure_grad();
        if (gb) pb.ensure_grad();
        for (std::size_t i = 0; i < o.value.size(); ++i) {
          Real da, db;
          back(pa.value[i], pb.value[i], o.value[i], da, db);
          if (ga) pa.grad[i] += o.grad[i] * da;
          if (gb) pb.grad[i] += o.grad[i] * db;
        }
      };
    return TensorT<Real>(n);
  }
  Shape os = detail::broadcast_shape(sa, sb);
  auto stra = detail::broadcast_strides(sa, os);
  auto strb = detail::broadcast_strides(sb, os);
  auto n = detail::make_node<Real>(os, {a.node(), b.node()});
  const auto& av = a.values();
  const auto& bv = b.values();
  detail::broadcast_walk(os, stra, strb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
    n->value[static_cast<std::size_t>(i)] =
        fwd(av[static_cast<std::size_t>(ia)], bv[static_cast<std::size_t>(ib)]);
  });
  if (n->requires_grad)
    n->backfn = [back, os, stra, strb](NodeT<Real>& o) {
      auto& pa = *o.parents[0];
      auto& pb = *o.parents[1];
      bool ga = pa.requires_grad, gb = pb.requires_grad;
      if (ga) pa.ensure_grad();
      if (gb) pb.ensure_grad();
      detail::broadcast_walk(os, stra, strb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
        Real da, db;
        back(pa.value[static_cast<std::size_t>(ia)], pb.value[static_cast<std::size_t>(ib)],
             o.value[static_cast<std::size_t>(i)], da, db);
        if (ga) pa.grad[static_cast<std::size_t>(ia)] += o.grad[static_cast<std::size_t>(i)] * da;
        if (gb) pb.grad[static_cast<std::size_t>(ib)] += o.grad[static_cast<std::size_t>(i)] * db;
      });
    };
  return TensorT<Real>(n);
}

template <class Real>
TensorT<Real> add(const TensorT<Real>& a, const TensorT<Real>& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x + y; },
      [](Real, Real, Real, Real& da, Real& db) { da = 1; db = 1; });
}

template <class Real>
TensorT<Real> sub(const TensorT<Real>& a, const TensorT<Real>& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x - y; },
      [](Real, Real, Real, Real& da, Real& db) { da = 1; db = -1; });
}

template <class Real>
TensorT<Real> mul(const TensorT<Real>& a, const TensorT<Real>& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x * y; },
      [](Real x, Real y, Real, Real& da, Real& db) { da = y; db = x; });
}

template <class Real>
TensorT<Real> div(const TensorT<Real>& a, const TensorT<Real>& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x / y; },
      [](Real x, Real y, Real, Real& da, Real& db) {
        da = Real(1) / y;
        db = -x / (y * y);
      });
}

template <class Real>
TensorT<Real> minimum(const TensorT<Real>& a, const TensorT<Real>& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x < y ? x : y; },
      [](Real x, Real y, Real, Real& da, Real& db) {
        da = x <= y ? Real(1) : Real(0);
        db = x <= y ? Real(0) : Real(1);
      });
}

template <class Real>
TensorT<Real> maximum(const TensorT<Real>& a, const TensorT<Real>& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x > y ? x : y; },
      [](Real x, Real y, Real, Real& da, Real& db) {
        da = x >= y ? Real(1) : Real(0);
        db = x >= y ? Real(0) : Real(1);
      });
}

// ---------------------------------------------------------------------------
// Elementwise unary ops.

template <class Real, class Fwd, class Back>
TensorT<Real> unary_op(const TensorT<Real>& a, Fwd fwd, Back back) {
  auto n = detail::make_node<Real>(a.shape(), {a.node()});
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) n->value[i] = fwd(av[i]);
  if (n->requires_grad)
    n->backfn = [back](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::size_t i = 0; i < o.value.size(); ++i)
        p.grad[i] += o.grad[i] * back(p.value[i], o.value[i]);
    };
  return TensorT<Real>(n);
}

template <class Real>
TensorT<Real> neg(const TensorT<Real>& a) {
  return unary_op(a, [](Real x) { return -x; }, [](Real, Real) { return Real(-1); });
}

template <class Real>
TensorT<Real> add_scalar(const TensorT<Real>& a, Real c) {
  return unary_op(a, [c](Real x) { return x + c; }, [](Real, Real) { return Real(1); });
}

template <class Real>
TensorT<Real> mul_scalar(const TensorT<Real>& a, Real c) {
  return unary_op(a, [c](Real x) { return x * c; }, [c](Real, Real) { return c; });
}

template <class Real>
TensorT<Real> exp_t(const TensorT<Real>& a) {
  return unary_op(a, [](Real x) { return std::exp(x); }, [](Real, Real y) { return y; });
}

template <class Real>
TensorT<Real> log_t(const TensorT<Real>& a) {
  return unary_op(a, [](Real x) { return std::log(x); },
                  [](Real x, Real) { return Real(1) / x; });
}

template <class Real>
TensorT<Real> abs_t(const TensorT<Real>& a) {
  return unary_op(a, [](Real x) { return std::abs(x); },
                  [](Real x, Real) { return x >= 0 ? Real(1) : Real(-1); });
}

template <class Real>
TensorT<Real> relu(const TensorT<Real>& a) {
  return unary_op(a, [](Real x) { return x > 0 ? x : Real(0); },
                  [](Real x, Real) { return x > 0 ? Real(1) : Real(0); });
}

template <class Real>
Real sigmoid_scalar(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  Real e = std::exp(x);
  return e / (Real(1) + e);
}

template <class Real>
TensorT<Real> sigmoid_t(const TensorT<Real>& a) {
  return unary_op(a, [](Real x) { return sigmoid_scalar(x); },
                  [](Real, Real y) { return y * (Real(1) - y); });
}

// Exact gelu: x * Phi(x).
template <class Real>
TensorT<Real> gelu(const TensorT<Real>& a) {
  return unary_op(
      a,
      [](Real x) {
        return Real(0.5) * x * (Real(1) + std::erf(x / std::sqrt(Real(2))));
      },
      [](Real x, Real) {
        Real phi = Real(0.5) * (Real(1) + std::erf(x / std::sqrt(Real(2))));
        Real pdf = std::exp(-Real(0.5) * x * x) / std::sqrt(Real(2) * Real(kPi));
        return phi + x * pdf;
      });
}

template <class Real>
TensorT<Real> clamp_t(const TensorT<Real>& a, Real lo, Real hi) {
  return unary_op(
      a, [lo, hi](Real x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](Real x, Real) { return (x > lo && x < hi) ? Real(1) : Real(0); });
}

// Stable elementwise binary cross-entropy with logits; targets are constant.
template <class Real>
TensorT<Real> bce_with_logits(const TensorT<Real>& logits, const TensorT<Real>& targets) {
  if (logits.shape() != targets.shape())
    throw std::runtime_error("bce_with_logits: shape mismatch");
  const auto& tv = targets.values();
  auto n = detail::make_node<Real>(logits.shape(), {logits.node()});
  const auto& xv = logits.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    Real x = xv[i], t = tv[i];
    n->value[i] = std::max(x, Real(0)) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  if (n->requires_grad) {
    std::vector<Real> tcopy = tv;
    n->backfn = [tcopy](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::size_t i = 0; i < o.value.size(); ++i)
        p.grad[i] += o.grad[i] * (sigmoid_scalar(p.value[i]) - tcopy[i]);
    };
  }
  return TensorT<Real>(n);
}

// ---------------------------------------------------------------------------
// Shape ops.

template <class Real>
TensorT<Real> reshape(const TensorT<Real>& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw std::runtime_error("reshape: numel mismatch " + shape_str(a.shape()) + " -> " + shape_str(shape));
  auto n = detail::make_node<Real>(shape, {a.node()});
  n->value = a.values();
  if (n->requires_grad)
    n->backfn = [](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::size_t i = 0; i < o.value.size(); ++i) p.grad[i] += o.grad[i];
    };
  return TensorT<Real>(n);
}

template <class Real>
TensorT<Real> transpose(const TensorT<Real>& a) {
  if (a.ndim() != 2) throw std::runtime_error("transpose: expects 2-d tensor");
  int r = a.dim(0), c = a.dim(1);
  auto n = detail::make_node<Real>({c, r}, {a.node()});
  const auto& av = a.values();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      n->value[static_cast<std::size_t>(j) * r + i] = av[static_cast<std::size_t>(i) * c + j];
  if (n->requires_grad)
    n->backfn = [r, c](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          p.grad[static_cast<std::size_t>(i) * c + j] +=
              o.grad[static_cast<std::size_t>(j) * r + i];
    };
  return TensorT<Real>(n);
}

// Concatenate along axis 0. All trailing dims must agree.
template <class Real>
TensorT<Real> concat0(const std::vector<TensorT<Real>>& parts) {
  if (parts.empty()) throw std::runtime_error("concat0: no inputs");
  Shape tail = parts[0].shape();
  int rows = 0;
  std::int64_t rowsz = parts[0].numel() / parts[0].dim(0);
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != tail.size()) throw std::runtime_error("concat0: rank mismatch");
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i] != tail[i]) throw std::runtime_error("concat0: trailing shape mismatch");
    rows += s[0];
  }
  Shape os = tail;
  os[0] = rows;
  std::vector<NodePtr<Real>> pn;
  pn.reserve(parts.size());
  for (const auto& p : parts) pn.push_back(p.node());
  auto n = detail::make_node<Real>(os, pn);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.values();
    std::copy(pv.begin(), pv.end(), n->value.begin() + static_cast<std::ptrdiff_t>(off));
    off += pv.size();
  }
  if (n->requires_grad)
    n->backfn = [rowsz](NodeT<Real>& o) {
      std::size_t off2 = 0;
      (void)rowsz;
      for (auto& pp : o.parents) {
        auto& p = *pp;
        if (p.requires_grad) {
          p.ensure_grad();
          for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += o.grad[off2 + i];
        }
        off2 += p.value.size();
      }
    };
  return TensorT<Real>(n);
}

template <class Real>
TensorT<Real> slice0(const TensorT<Real>& a, int r0, int r1) {
  if (a.ndim() < 1 || r0 < 0 || r1 > a.dim(0) || r0 >= r1)
    throw std::runtime_error("slice0: bad range");
  Shape os = a.shape();
  os[0] = r1 - r0;
  std::int64_t rowsz = a.numel() / a.dim(0);
  auto n = detail::make_node<Real>(os, {a.node()});
  const auto& av = a.values();
  std::copy(av.begin() + r0 * rowsz, av.begin() + r1 * rowsz, n->value.begin());
  if (n->requires_grad)
    n->backfn = [r0, rowsz](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      std::size_t base = static_cast<std::size_t>(r0 * rowsz);
      for (std::size_t i = 0; i < o.value.size(); ++i) p.grad[base + i] += o.grad[i];
    };
  return TensorT<Real>(n);
}

// Row gather with duplicate-friendly scatter-add backward.
template <class Real>
TensorT<Real> gather0(const TensorT<Real>& a, const std::vector<std::int64_t>& idx) {
  if (a.ndim() < 1) throw std::runtime_error("gather0: rank 0");
  std::int64_t rows = a.dim(0);
  std::int64_t rowsz = a.numel() / rows;
  for (auto i : idx)
    if (i < 0 || i >= rows) throw std::runtime_error("gather0: index out of range");
  Shape os = a.shape();
  os[0] = static_cast<int>(idx.size());
  auto n = detail::make_node<Real>(os, {a.node()});
  const auto& av = a.values();
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy(av.begin() + idx[r] * rowsz, av.begin() + (idx[r] + 1) * rowsz,
              n->value.begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(rowsz)));
  if (n->requires_grad) {
    auto idxc = idx;
    n->backfn = [idxc, rowsz](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::size_t r = 0; r < idxc.size(); ++r) {
        std::size_t src = r * static_cast<std::size_t>(rowsz);
        std::size_t dst = static_cast<std::size_t>(idxc[r] * rowsz);
        for (std::int64_t j = 0; j < rowsz; ++j) p.grad[dst + static_cast<std::size_t>(j)] += o.grad[src + static_cast<std::size_t>(j)];
      }
    };
  }
  return TensorT<Real>(n);
}

// ---------------------------------------------------------------------------
// Reductions.

template <class Real>
TensorT<Real> sum_all(const TensorT<Real>& a) {
  auto n = detail::make_node<Real>({1}, {a.node()});
  Real s = 0;
  for (Real v : a.values()) s += v;
  n->value[0] = s;
  if (n->requires_grad)
    n->backfn = [](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += o.grad[0];
    };
  return TensorT<Real>(n);
}

template <class Real>
TensorT<Real> mean_all(const TensorT<Real>& a) {
  return mul_scalar(sum_all(a), Real(1) / static_cast<Real>(a.numel()));
}

// Sum over one axis (axis removed from the shape).
template <class Real>
TensorT<Real> sum_axis(const TensorT<Real>& a, int axis) {
  int r = a.ndim();
  if (axis < 0 || axis >= r) throw std::runtime_error("sum_axis: bad axis");
  Shape os;
  for (int i = 0; i < r; ++i)
    if (i != axis) os.push_back(a.dim(i));
  if (os.empty()) os.push_back(1);
  std::int64_t outer = 1, mid = a.dim(axis), inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  for (int i = axis + 1; i < r; ++i) inner *= a.dim(i);
  auto n = detail::make_node<Real>(os, {a.node()});
  const auto& av = a.values();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t m = 0; m < mid; ++m)
      for (std::int64_t i = 0; i < inner; ++i)
        n->value[static_cast<std::size_t>(o * inner + i)] +=
            av[static_cast<std::size_t>((o * mid + m) * inner + i)];
  if (n->requires_grad)
    n->backfn = [outer, mid, inner](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::int64_t ou = 0; ou < outer; ++ou)
        for (std::int64_t m = 0; m < mid; ++m)
          for (std::int64_t i = 0; i < inner; ++i)
            p.grad[static_cast<std::size_t>((ou * mid + m) * inner + i)] +=
                o.grad[static_cast<std::size_t>(ou * inner + i)];
    };
  return TensorT<Real>(n);
}

// ---------------------------------------------------------------------------
// Linear algebra.

template <class Real>
TensorT<Real> matmul(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw std::runtime_error("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  int m = a.dim(0), k = a.dim(1), nn = b.dim(1);
  auto n = detail::make_node<Real>({m, nn}, {a.node(), b.node()});
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < k; ++l) {
      Real x = av[static_cast<std::size_t>(i) * k + l];
      if (x == Real(0)) continue;
      const Real* brow = bv.data() + static_cast<std::size_t>(l) * nn;
      Real* crow = n->value.data() + static_cast<std::size_t>(i) * nn;
      for (int j = 0; j < nn; ++j) crow[j] += x * brow[j];
    }
  if (n->requires_grad)
    n->backfn = [m, k, nn](NodeT<Real>& o) {
      auto& pa = *o.parents[0];
      auto& pb = *o.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        // dA = dC * B^T
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            Real s = 0;
            const Real* grow = o.grad.data() + static_cast<std::size_t>(i) * nn;
            const Real* brow = pb.value.data() + static_cast<std::size_t>(l) * nn;
            for (int j = 0; j < nn; ++j) s += grow[j] * brow[j];
            pa.grad[static_cast<std::size_t>(i) * k + l] += s;
          }
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        // dB = A^T * dC
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            Real x = pa.value[static_cast<std::size_t>(i) * k + l];
            if (x == Real(0)) continue;
            const Real* grow = o.grad.data() + static_cast<std::size_t>(i) * nn;
            Real* brow = pb.grad.data() + static_cast<std::size_t>(l) * nn;
            for (int j = 0; j < nn; ++j) brow[j] += x * grow[j];
          }
      }
    };
  return TensorT<Real>(n);
}

// x[..., din] * W[din, dout] + b[dout]; leading dims preserved.
template <class Real>
TensorT<Real> linear(const TensorT<Real>& x, const TensorT<Real>& w, const TensorT<Real>* b = nullptr) {
  if (w.ndim() != 2) throw std::runtime_error("linear: weight must be 2-d");
  int din = w.dim(0), dout = w.dim(1);
  if (x.dim(x.ndim() - 1) != din) throw std::runtime_error("linear: input dim mismatch");
  if (b && (b->ndim() != 1 || b->dim(0) != dout)) throw std::runtime_error("linear: bias dim mismatch");
  std::int64_t rows = x.numel() / din;
  Shape os = x.shape();
  os.back() = dout;
  std::vector<NodePtr<Real>> parents = {x.node(), w.node()};
  if (b) parents.push_back(b->node());
  auto n = detail::make_node<Real>(os, parents);
  const auto& xv = x.values();
  const auto& wv = w.values();
  if (b) {
    const auto& bv = b->values();
    for (std::int64_t r = 0; r < rows; ++r)
      std::copy(bv.begin(), bv.end(), n->value.begin() + static_cast<std::ptrdiff_t>(r * dout));
  }
  for (std::int64_t r = 0; r < rows; ++r) {
    const Real* xr = xv.data() + r * din;
    Real* orow = n->value.data() + r * dout;
    for (int l = 0; l < din; ++l) {
      Real xx = xr[l];
      if (xx == Real(0)) continue;
      const Real* wrow = wv.data() + static_cast<std::size_t>(l) * dout;
      for (int j = 0; j < dout; ++j) orow[j] += xx * wrow[j];
    }
  }
  if (n->requires_grad)
    n->backfn = [rows, din, dout](NodeT<Real>& o) {
      auto& px = *o.parents[0];
      auto& pw = *o.parents[1];
      if (px.requires_grad) {
        px.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
          const Real* grow = o.grad.data() + r * dout;
          Real* xg = px.grad.data() + r * din;
          for (int l = 0; l < din; ++l) {
            Real s = 0;
            const Real* wrow = pw.value.data() + static_cast<std::size_t>(l) * dout;
            for (int j = 0; j < dout; ++j) s += grow[j] * wrow[j];
            xg[l] += s;
          }
        }
      }
      if (pw.requires_grad) {
        pw.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
          const Real* xr = px.value.data() + r * din;
          const Real* grow = o.grad.data() + r * dout;
          for (int l = 0; l < din; ++l) {
            Real xx = xr[l];
            if (xx == Real(0)) continue;
            Real* wg = pw.grad.data() + static_cast<std::size_t>(l) * dout;
            for (int j = 0; j < dout; ++j) wg[j] += xx * grow[j];
          }
        }
      }
      if (o.parents.size() > 2 && o.parents[2]->requires_grad) {
        auto& pb = *o.parents[2];
        pb.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
          const Real* grow = o.grad.data() + r * dout;
          for (int j = 0; j < dout; ++j) pb.grad[static_cast<std::size_t>(j)] += grow[j];
        }
      }
    };
  return TensorT<Real>(n);
}

// ---------------------------------------------------------------------------
// Softmax family.

// Softmax along the last axis, with an optional keep mask of the same shape.
// Masked-out entries are exactly 0 and kept entries sum to 1. A row whose keep
// mask is entirely false ignores the mask and yields the uniform distribution
// over all entries of that row.
template <class Real>
TensorT<Real> masked_softmax(const TensorT<Real>& x, const BoolMask* keep = nullptr) {
  if (keep && keep->shape != x.shape())
    throw std::runtime_error("masked_softmax: mask shape mismatch");
  int last = x.dim(x.ndim() - 1);
  std::int64_t rows = x.numel() / last;
  auto n = detail::make_node<Real>(x.shape(), {x.node()});
  const auto& xv = x.values();
  std::vector<std::uint8_t> uniform_row(static_cast<std::size_t>(rows), 0);
  for (std::int64_t r = 0; r < rows; ++r) {
    const Real* xr = xv.data() + r * last;
    Real* orow = n->value.data() + r * last;
    const std::uint8_t* kr = keep ? keep->v.data() + r * last : nullptr;
    int kept = 0;
    if (kr) {
      for (int j = 0; j < last; ++j) kept += kr[j] ? 1 : 0;
    }
    if (kr && kept == 0) {
      uniform_row[static_cast<std::size_t>(r)] = 1;
      for (int j = 0; j < last; ++j) orow[j] = Real(1) / static_cast<Real>(last);
      continue;
    }
    Real mx = -std::numeric_limits<Real>::infinity();
    for (int j = 0; j < last; ++j)
      if (!kr || kr[j]) mx = std::max(mx, xr[j]);
    Real s = 0;
    for (int j = 0; j < last; ++j) {
      if (!kr || kr[j]) {
        orow[j] = std::exp(xr[j] - mx);
        s += orow[j];
      } else {
        orow[j] = 0;
      }
    }
    for (int j = 0; j < last; ++j) orow[j] /= s;
  }
  if (n->requires_grad)
    n->backfn = [rows, last, uniform_row](NodeT<Real>& o) {
      auto& p = *o.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        if (uniform_row[static_cast<std::size_t>(r)]) continue;  // constant output
        const Real* y = o.value.data() + r * last;
        const Real* gy = o.grad.data() + r * last;
        Real dot = 0;
        for (int j = 0; j < last; ++j) dot += y[j] * gy[j];
        Real* gx = p.grad.data() + r * last;
        for (int j = 0; j < last; ++j) gx[j] += y[j] * (gy[j] - dot);
      }
    };
  return TensorT<Real>(n);
}

template <class Real>
TensorT<Real> softmax(const TensorT<Real>& x) {
  return masked_softmax<Real>(x, nullptr);
}

// Layer normalization along the last axis with learned affine.
template <class Real>
TensorT<Real> layer_norm(const TensorT<Real>& x, const TensorT<Real>& gamma,
                         const TensorT<Real>& beta, Real eps = Real(1e-5)) {
  int d = x.dim(x.ndim() - 1);
  if (eps <= 0) throw std::runtime_error("layer_norm: eps must be positive");
  if (gamma.ndim() != 1 || gamma.dim(0) != d || beta.ndim() != 1 || beta.dim(0) != d)
    throw std::runtime_error("layer_norm: affine shape mismatch");
  std::int64_t rows = x.numel() / d;
  auto n = detail::make_node<Real>(x.shape(), {x.node(), gamma.node(), beta.node()});
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (std::int64_t r = 0; r < rows; ++r) {
    const Real* xr = xv.data() + r * d;
    Real* orow = n->value.data() + r * d;
    Real mean = 0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<Real>(d);
    Real var = 0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<Real>(d);
    Real inv = Real(1) / std::sqrt(var + eps);
    for (int j = 0; j < d; ++j) orow[j] = gv[static_cast<std::size_t>(j)] * (xr[j] - mean) * inv + bv[static_cast<std::size_t>(j)];
  }
  if (n->requires_grad)
    n->backfn = [rows, d, eps](NodeT<Real>& o) {
      auto& px = *o.parents[0];
      auto& pg = *o.parents[1];
      auto& pb = *o.parents[2];
      bool gx = px.requires_grad, gg = pg.requires_grad, gb = pb.requires_grad;
      if (gx) px.ensure_grad();
      if (gg) pg.ensure_grad();
      if (gb) pb.ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        const Real* xr = px.value.data() + r * d;
        const Real* gy = o.grad.data() + r * d;
        Real mean = 0;
        for (int j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<Real>(d);
        Real var = 0;
        for (int j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<Real>(d);
        Real inv = Real(1) / std::sqrt(var + eps);
        if (gg || gb) {
          for (int j = 0; j < d; ++j) {
            Real xhat = (xr[j] - mean) * inv;
            if (gg) pg.grad[static_cast<std::size_t>(j)] += gy[j] * xhat;
            if (gb) pb.grad[static_cast<std::size_t>(j)] += gy[j];
          }
        }
        if (gx) {
          // dl/dx = inv * (g∘gy − mean(g∘gy) − xhat·mean(g∘gy∘xhat))
          Real m1 = 0, m2 = 0;
          for (int j = 0; j < d; ++j) {
            Real ggy = pg.value[static_cast<std::size_t>(j)] * gy[j];
            Real xhat = (xr[j] - mean) * inv;
            m1 += ggy;
            m2 += ggy * xhat;
          }
          m1 /= static_cast<Real>(d);
          m2 /= static_cast<Real>(d);
          Real* gxr = px.grad.data() + r * d;
          for (int j = 0; j < d; ++j) {
            Real ggy = pg.value[static_cast<std::size_t>(j)] * gy[j];
            Real xhat = (xr[j] - mean) * inv;
            gxr[j] += inv * (ggy - m1 - xhat * m2);
          }
        }
      }
    };
  return TensorT<Real>(n);
}

// ---------------------------------------------------------------------------
// Attention and MLP.

// Scaled-dot-product multi-head attention over already-projected q/k/v.
// additive_bias, when present, has shape [heads, a, b] and is added to the
// pre-softmax logits; keep, when present, has shape [a, b] and is applied per
// head through masked_softmax.
template <class Real>
TensorT<Real> attention(const TensorT<Real>& q, const TensorT<Real>& k, const TensorT<Real>& v,
                        int heads, const TensorT<Real>* additive_bias = nullptr,
                        const BoolMask* keep = nullptr) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
    throw std::runtime_error("attention: q/k/v must be 2-d");
  int a = q.dim(0), d = q.dim(1), b = k.dim(0);
  if (k.dim(1) != d || v.dim(0) != b || v.dim(1) != d)
    throw std::runtime_error("attention: shape mismatch");
  if (heads <= 0 || d % heads != 0) throw std::runtime_error("attention: heads must divide dim");
  if (additive_bias && additive_bias->shape() != Shape{heads, a, b})
    throw std::runtime_error("attention: bias shape mismatch");
  if (keep && keep->shape != Shape{a, b}) throw std::runtime_error("attention: keep shape mismatch");
  int dh = d / heads;
  Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));
  TensorT<Real> bias2d;
  if (additive_bias) bias2d = reshape(*additive_bias, {heads * a, b});
  std::vector<TensorT<Real>> head_outs;
  head_outs.reserve(static_cast<std::size_t>(heads));
  // Column-slice per head via gather on the transposed matrix.
  TensorT<Real> qt = transpose(q), kt = transpose(k), vt = transpose(v);
  for (int h = 0; h < heads; ++h) {
    TensorT<Real> qh = transpose(slice0(qt, h * dh, (h + 1) * dh));
    TensorT<Real> kh = transpose(slice0(kt, h * dh, (h + 1) * dh));
    TensorT<Real> vh = transpose(slice0(vt, h * dh, (h + 1) * dh));
    TensorT<Real> logits = mul_scalar(matmul(qh, transpose(kh)), scale);
    if (additive_bias) logits = add(logits, slice0(bias2d, h * a, (h + 1) * a));
    TensorT<Real> w = masked_softmax(logits, keep);
    head_outs.push_back(matmul(w, vh));  // [a, dh]
  }
  // Reassemble [a, d] from per-head [a, dh] blocks.
  std::vector<TensorT<Real>> cols;
  cols.reserve(static_cast<std::size_t>(heads));
  for (auto& ho : head_outs) cols.push_back(transpose(ho));
  return transpose(concat0(cols));
}

enum class Activation { kGelu, kRelu, kNone };

template <class Real>
struct MlpWeights {
  std::vector<TensorT<Real>> w;  // each [din, dout]
  std::vector<TensorT<Real>> b;  // each [dout]
};

// affine -> activation -> affine -> ... (activation between layers only).
template <class Real>
TensorT<Real> mlp(const TensorT<Real>& x, const MlpWeights<Real>& weights,
                  Activation act = Activation::kGelu) {
  if (weights.w.empty() || weights.w.size() != weights.b.size())
    throw std::runtime_error("mlp: inconsistent weights");
  TensorT<Real> h = x;
  for (std::size_t i = 0; i < weights.w.size(); ++i) {
    h = linear(h, weights.w[i], &weights.b[i]);
    if (i + 1 < weights.w.size()) {
      if (act == Activation::kGelu) h = gelu(h);
      else if (act == Activation::kRelu) h = relu(h);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Reverse pass.

template <class Real>
void backward(const TensorT<Real>& loss) {
  if (loss.numel() != 1) throw std::runtime_error("backward: loss must be scalar");
  if (!loss.requires_grad()) return;
  // Iterative post-order DFS restricted to the requires_grad subgraph.
  std::vector<NodeT<Real>*> order;
  std::unordered_set<NodeT<Real>*> done;
  std::unordered_set<NodeT<Real>*> in_progress;
  struct Frame {
    NodeT<Real>* n;
    std::size_t next_child;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  in_progress.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < f.n->parents.size()) {
      NodeT<Real>* c = f.n->parents[f.next_child++].get();
      if (!c->requires_grad || done.count(c)) continue;
      if (in_progress.count(c)) throw std::runtime_error("backward: graph cycle detected");
      in_progress.insert(c);
      stack.push_back({c, 0});
    } else {
      order.push_back(f.n);
      done.insert(f.n);
      in_progress.erase(f.n);
      stack.pop_back();
    }
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT<Real>* n = *it;
    if (n->grad.empty()) n->ensure_grad();
    if (n->backfn) n->backfn(*n);
  }
}

}  // namespace vg3d
