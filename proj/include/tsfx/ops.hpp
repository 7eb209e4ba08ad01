#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <utility>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "tsfx/autograd.hpp"
#include "tsfx/tensor.hpp"

namespace tsfx {

// Training allocates and frees multi-megabyte activation buffers every
// batch; keeping them on the heap instead of mmap avoids page-fault and
// syscall churn.
inline void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, -1);
    return true;
  }();
  (void)done;
#endif
}

// Bias value standing in for -inf inside attention masks; exp() of any
// logit shifted by it underflows to exactly 0.
inline constexpr double kMaskedBias = -1e30;
// Entries at or below this are treated as masked.
inline constexpr double kMaskCut = -1e29;

namespace detail {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

// Below this many multiply-adds the per-call cost of Eigen's blocked GEMM
// dominates; plain loops win for the tiny per-head attention products.
inline constexpr std::size_t kSmallGemm = 32768;

inline void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n, bool accumulate = false) {
  if (m * k * n <= kSmallGemm) {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + i * n;
      if (!accumulate)
        for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
      const double* ai = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        double av = ai[p];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
    return;
  }
  CMap A(a, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  CMap B(b, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  MMap C(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

// C(m,n) = A(m,k) * B(n,k)^T
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate = false) {
  if (m * k * n <= kSmallGemm) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a + i * k;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] = accumulate ? ci[j] + s : s;
      }
    }
    return;
  }
  CMap A(a, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  CMap B(b, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  MMap C(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

// C(k,n) = A(m,k)^T * B(m,n)
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate = false) {
  if (m * k * n <= kSmallGemm) {
    if (!accumulate)
      for (std::size_t i = 0; i < k * n; ++i) c[i] = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      const double* ap = a + p * k;
      const double* bp = b + p * n;
      for (std::size_t i = 0; i < k; ++i) {
        double av = ap[i];
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
    return;
  }
  CMap A(a, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  CMap B(b, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  MMap C(c, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1)
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                       " do not broadcast");
    out[i] = std::max(ea, eb);
  }
  return out;
}

// Strides of `s` left-padded to `rank`, with 0 on broadcast (extent 1) axes.
inline std::vector<std::size_t> broadcast_strides(const Shape& s, std::size_t rank) {
  std::vector<std::size_t> st(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    st[rank - s.size() + i] = (s[i] == 1) ? 0 : stride;
    stride *= s[i];
  }
  return st;
}

inline bool is_shape_suffix(const Shape& s, const Shape& t) {
  if (s.size() > t.size() || s.empty()) return false;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] != t[t.size() - s.size() + i]) return false;
  return true;
}

template <typename F>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, F f, const char* op) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    const double* pa = a.raw();
    const double* pb = b.raw();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i], pb[i]);
    return Tensor(a.shape(), std::move(out));
  }
  if (is_shape_suffix(b.shape(), a.shape())) {  // e.g. bias over trailing axes
    std::size_t tail = b.numel();
    std::vector<double> out(a.numel());
    const double* pa = a.raw();
    const double* pb = b.raw();
    for (std::size_t base = 0; base < out.size(); base += tail)
      for (std::size_t i = 0; i < tail; ++i) out[base + i] = f(pa[base + i], pb[i]);
    return Tensor(a.shape(), std::move(out));
  }
  if (is_shape_suffix(a.shape(), b.shape())) {
    std::size_t tail = a.numel();
    std::vector<double> out(b.numel());
    const double* pa = a.raw();
    const double* pb = b.raw();
    for (std::size_t base = 0; base < out.size(); base += tail)
      for (std::size_t i = 0; i < tail; ++i) out[base + i] = f(pa[i], pb[base + i]);
    return Tensor(b.shape(), std::move(out));
  }
  Shape os = broadcast_shape(a.shape(), b.shape(), op);
  std::size_t rank = os.size();
  auto sa = broadcast_strides(a.shape(), rank);
  auto sb = broadcast_strides(b.shape(), rank);
  std::vector<double> out(shape_numel(os));
  std::vector<std::size_t> idx(rank, 0);
  const double* pa = a.raw();
  const double* pb = b.raw();
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f(pa[oa], pb[ob]);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      oa += sa[ax];
      ob += sb[ax];
      if (idx[ax] < os[ax]) break;
      idx[ax] = 0;
      oa -= sa[ax] * os[ax];
      ob -= sb[ax] * os[ax];
    }
  }
  return Tensor(std::move(os), std::move(out));
}

}  // namespace detail

// Sums `g` down to `target` along broadcast axes (inverse of broadcasting).
inline Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  if (detail::is_shape_suffix(target, g.shape())) {
    std::size_t tail = shape_numel(target);
    std::vector<double> out(tail, 0.0);
    const double* pg = g.raw();
    for (std::size_t base = 0; base < g.numel(); base += tail)
      for (std::size_t i = 0; i < tail; ++i) out[i] += pg[base + i];
    return Tensor(target, std::move(out));
  }
  std::size_t rank = g.rank();
  auto st = detail::broadcast_strides(target, rank);
  std::vector<double> out(shape_numel(target), 0.0);
  std::vector<std::size_t> idx(rank, 0);
  const double* pg = g.raw();
  const Shape& gs = g.shape();
  std::size_t ot = 0;
  for (std::size_t i = 0; i < g.numel(); ++i) {
    out[ot] += pg[i];
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      ot += st[ax];
      if (idx[ax] < gs[ax]) break;
      idx[ax] = 0;
      ot -= st[ax] * gs[ax];
    }
  }
  return Tensor(target, std::move(out));
}

namespace detail {

// Records a node when a tape is active and any input is tracked; the
// closure receives flags telling it which inputs need gradients.
template <typename MakeBackward>
void maybe_record(const Tensor& out, std::initializer_list<const Tensor*> inputs,
                  MakeBackward make_backward) {
  Tape* tape = Tape::current();
  if (!tape) return;
  bool any = false;
  std::vector<bool> need;
  need.reserve(inputs.size());
  for (const Tensor* t : inputs) {
    tape->touch_input(*t);
    bool tr = tape->tracked(*t);
    need.push_back(tr);
    any = any || tr;
  }
  if (any) tape->record(out, make_backward(need));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic (NumPy-style trailing-axis broadcasting)
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = detail::broadcast_binary(a, b, [](double x, double y) { return x + y; }, "add");
  detail::maybe_record(out, {&a, &b}, [&](const std::vector<bool>& need) {
    auto as = a.shape();
    auto bs = b.shape();
    auto aid = a.id();
    auto bid = b.id();
    return [=](const Tensor& g, GradientMap& sink) {
      if (need[0]) sink.accumulate(aid, reduce_to_shape(g, as));
      if (need[1]) sink.accumulate(bid, reduce_to_shape(g, bs));
    };
  });
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out = detail::broadcast_binary(a, b, [](double x, double y) { return x - y; }, "sub");
  detail::maybe_record(out, {&a, &b}, [&](const std::vector<bool>& need) {
    auto as = a.shape();
    auto bs = b.shape();
    auto aid = a.id();
    auto bid = b.id();
    return [=](const Tensor& g, GradientMap& sink) {
      if (need[0]) sink.accumulate(aid, reduce_to_shape(g, as));
      if (need[1]) {
        Tensor r = reduce_to_shape(g, bs);
        std::vector<double> neg(r.data());
        for (double& v : neg) v = -v;
        sink.accumulate(bid, Tensor(bs, std::move(neg)));
      }
    };
  });
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  Tensor out = detail::broadcast_binary(a, b, [](double x, double y) { return x * y; }, "mul");
  detail::maybe_record(out, {&a, &b}, [&](const std::vector<bool>& need) {
    Tensor av = a.detached();
    Tensor bv = b.detached();
    auto aid = a.id();
    auto bid = b.id();
    return [=](const Tensor& g, GradientMap& sink) {
      if (need[0]) {
        Tensor gb = detail::broadcast_binary(g, bv, [](double x, double y) { return x * y; }, "mul");
        sink.accumulate(aid, reduce_to_shape(gb, av.shape()));
      }
      if (need[1]) {
        Tensor ga = detail::broadcast_binary(g, av, [](double x, double y) { return x * y; }, "mul");
        sink.accumulate(bid, reduce_to_shape(ga, bv.shape()));
      }
    };
  });
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data());
  for (double& v : out) v *= s;
  Tensor t(a.shape(), std::move(out));
  detail::maybe_record(t, {&a}, [&](const std::vector<bool>&) {
    auto aid = a.id();
    return [=](const Tensor& g, GradientMap& sink) {
      std::vector<double> gv(g.data());
      for (double& v : gv) v *= s;
      sink.accumulate(aid, Tensor(g.shape(), std::move(gv)));
    };
  });
  return t;
}

inline Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data());
  for (double& v : out) v += s;
  Tensor t(a.shape(), std::move(out));
  detail::maybe_record(t, {&a}, [&](const std::vector<bool>&) {
    auto aid = a.id();
    return [=](const Tensor& g, GradientMap& sink) { sink.accumulate(aid, g); };
  });
  return t;
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& a, Shape shape) {
  Tensor out = a.reshaped(std::move(shape));
  detail::maybe_record(out, {&a}, [&](const std::vector<bool>&) {
    auto as = a.shape();
    auto aid = a.id();
    return [=](const Tensor& g, GradientMap& sink) { sink.accumulate(aid, g.reshaped(as)); };
  });
  return out;
}

inline std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& axes) {
  std::vector<std::size_t> inv(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) inv[axes[i]] = i;
  return inv;
}

namespace detail {
inline Tensor permute_values(const Tensor& a, const std::vector<std::size_t>& axes) {
  const Shape& as = a.shape();
  std::size_t rank = as.size();
  Shape os(rank);
  for (std::size_t i = 0; i < rank; ++i) os[i] = as[axes[i]];
  if (rank == 4 && axes[0] == 0 && axes[1] == 2 && axes[2] == 1 && axes[3] == 3) {
    // (A, B, C, D) -> (A, C, B, D): the attention head/axis swap hot path
    std::size_t A = as[0], B = as[1], C = as[2], D = as[3];
    std::vector<double> out(a.numel());
    const double* pa = a.raw();
    for (std::size_t x = 0; x < A; ++x)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t b = 0; b < B; ++b)
          std::memcpy(out.data() + (((x * C + c) * B) + b) * D,
                      pa + (((x * B + b) * C) + c) * D, D * sizeof(double));
    return Tensor(std::move(os), std::move(out));
  }
  auto in_strides = row_strides(as);
  std::vector<std::size_t> step(rank);
  for (std::size_t i = 0; i < rank; ++i) step[i] = in_strides[axes[i]];
  std::vector<double> out(a.numel());
  std::vector<std::size_t> idx(rank, 0);
  const double* pa = a.raw();
  std::size_t off = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = pa[off];
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      off += step[ax];
      if (idx[ax] < os[ax]) break;
      idx[ax] = 0;
      off -= step[ax] * os[ax];
    }
  }
  return Tensor(std::move(os), std::move(out));
}
}  // namespace detail

inline Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  if (axes.size() != a.rank())
    throw ShapeError("permute: axes rank " + std::to_string(axes.size()) + " vs tensor " +
                     shape_str(a.shape()));
  Tensor out = detail::permute_values(a, axes);
  detail::maybe_record(out, {&a}, [&](const std::vector<bool>&) {
    auto inv = inverse_permutation(axes);
    auto aid = a.id();
    return [=](const Tensor& g, GradientMap& sink) {
      sink.accumulate(aid, detail::permute_values(g, inv));
    };
  });
  return out;
}

// Contiguous slab [start, start+len) along one axis.
inline Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  const Shape& as = a.shape();
  if (axis >= as.size() || start + len > as[axis])
    throw ShapeError("slice: axis " + std::to_string(axis) + " range [" + std::to_string(start) +
                     "," + std::to_string(start + len) + ") out of " + shape_str(as));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= as[i];
  for (std::size_t i = axis + 1; i < as.size(); ++i) inner *= as[i];
  Shape os(as);
  os[axis] = len;
  std::vector<double> out(outer * len * inner);
  const double* pa = a.raw();
  for (std::size_t o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * len * inner, pa + (o * as[axis] + start) * inner,
                len * inner * sizeof(double));
  Tensor t(std::move(os), std::move(out));
  detail::maybe_record(t, {&a}, [&](const std::vector<bool>&) {
    auto aid = a.id();
    auto ashape = as;
    return [=](const Tensor& g, GradientMap& sink) {
      std::vector<double> back(shape_numel(ashape), 0.0);
      const double* pg = g.raw();
      for (std::size_t o = 0; o < outer; ++o)
        std::memcpy(back.data() + (o * ashape[axis] + start) * inner, pg + o * len * inner,
                    len * inner * sizeof(double));
      sink.accumulate(aid, Tensor(ashape, std::move(back)));
    };
  });
  return t;
}

// ---------------------------------------------------------------------------
// Matrix products (Eigen GEMM kernels behind the shape contract)
// ---------------------------------------------------------------------------

namespace detail {
[[noreturn]] inline void matmul_shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " x " + shape_str(b) +
                   " do not conform");
}
}  // namespace detail

// matmul(a, b): rank-2 x rank-2, rank-3 x rank-3 (equal or 1-broadcast
// batch), or rank-3 x rank-2 (rhs shared across the batch).
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  Tensor out;

  if (as.size() == 2 && bs.size() == 2) {
    if (as[1] != bs[0]) detail::matmul_shape_error("matmul", as, bs);
    std::vector<double> c(as[0] * bs[1]);
    detail::gemm(a.raw(), b.raw(), c.data(), as[0], as[1], bs[1]);
    out = Tensor({as[0], bs[1]}, std::move(c));
  } else if (as.size() == 3 && bs.size() == 2) {
    if (as[2] != bs[0]) detail::matmul_shape_error("matmul", as, bs);
    std::vector<double> c(as[0] * as[1] * bs[1]);
    detail::gemm(a.raw(), b.raw(), c.data(), as[0] * as[1], as[2], bs[1]);
    out = Tensor({as[0], as[1], bs[1]}, std::move(c));
  } else if (as.size() == 3 && bs.size() == 3) {
    std::size_t ba = as[0], bb = bs[0];
    if (as[2] != bs[1] || (ba != bb && ba != 1 && bb != 1))
      detail::matmul_shape_error("matmul", as, bs);
    std::size_t batch = std::max(ba, bb);
    std::size_t m = as[1], k = as[2], n = bs[2];
    std::vector<double> c(batch * m * n);
    for (std::size_t i = 0; i < batch; ++i)
      detail::gemm(a.raw() + (ba == 1 ? 0 : i) * m * k, b.raw() + (bb == 1 ? 0 : i) * k * n,
                   c.data() + i * m * n, m, k, n);
    out = Tensor({batch, m, n}, std::move(c));
  } else {
    detail::matmul_shape_error("matmul", as, bs);
  }

  detail::maybe_record(out, {&a, &b}, [&](const std::vector<bool>& need) {
    Tensor av = a.detached();
    Tensor bv = b.detached();
    auto aid = a.id();
    auto bid = b.id();
    return [=](const Tensor& g, GradientMap& sink) {
      const Shape& ash = av.shape();
      const Shape& bsh = bv.shape();
      if (ash.size() == 2 && bsh.size() == 2) {
        if (need[0]) {
          std::vector<double> da(av.numel());
          detail::gemm_nt(g.raw(), bv.raw(), da.data(), ash[0], bsh[1], ash[1]);
          sink.accumulate(aid, Tensor(ash, std::move(da)));
        }
        if (need[1]) {
          std::vector<double> db(bv.numel());
          detail::gemm_tn(av.raw(), g.raw(), db.data(), ash[0], ash[1], bsh[1]);
          sink.accumulate(bid, Tensor(bsh, std::move(db)));
        }
      } else if (ash.size() == 3 && bsh.size() == 2) {
        std::size_t rows = ash[0] * ash[1];
        if (need[0]) {
          std::vector<double> da(av.numel());
          detail::gemm_nt(g.raw(), bv.raw(), da.data(), rows, bsh[1], ash[2]);
          sink.accumulate(aid, Tensor(ash, std::move(da)));
        }
        if (need[1]) {
          std::vector<double> db(bv.numel());
          detail::gemm_tn(av.raw(), g.raw(), db.data(), rows, ash[2], bsh[1]);
          sink.accumulate(bid, Tensor(bsh, std::move(db)));
        }
      } else {
        std::size_t ba = ash[0], bb = bsh[0];
        std::size_t batch = std::max(ba, bb);
        std::size_t m = ash[1], k = ash[2], n = bsh[2];
        if (need[0]) {
          std::vector<double> da(av.numel(), 0.0);
          for (std::size_t i = 0; i < batch; ++i)
            detail::gemm_nt(g.raw() + i * m * n, bv.raw() + (bb == 1 ? 0 : i) * k * n,
                            da.data() + (ba == 1 ? 0 : i) * m * k, m, n, k, ba == 1);
          sink.accumulate(aid, Tensor(ash, std::move(da)));
        }
        if (need[1]) {
          std::vector<double> db(bv.numel(), 0.0);
          for (std::size_t i = 0; i < batch; ++i)
            detail::gemm_tn(av.raw() + (ba == 1 ? 0 : i) * m * k, g.raw() + i * m * n,
                            db.data() + (bb == 1 ? 0 : i) * k * n, m, k, n, bb == 1);
          sink.accumulate(bid, Tensor(bsh, std::move(db)));
        }
      }
    };
  });
  return out;
}

// matmul_nt(a, b) = a . b^T over the last two axes; rank-2 or equal-batch
// rank-3. Used for attention scores so keys never need transposing.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  Tensor out;
  if (as.size() == 2 && bs.size() == 2) {
    if (as[1] != bs[1]) detail::matmul_shape_error("matmul_nt", as, bs);
    std::vector<double> c(as[0] * bs[0]);
    detail::gemm_nt(a.raw(), b.raw(), c.data(), as[0], as[1], bs[0]);
    out = Tensor({as[0], bs[0]}, std::move(c));
  } else if (as.size() == 3 && bs.size() == 3 && as[0] == bs[0]) {
    if (as[2] != bs[2]) detail::matmul_shape_error("matmul_nt", as, bs);
    std::size_t batch = as[0], m = as[1], k = as[2], n = bs[1];
    std::vector<double> c(batch * m * n);
    for (std::size_t i = 0; i < batch; ++i)
      detail::gemm_nt(a.raw() + i * m * k, b.raw() + i * n * k, c.data() + i * m * n, m, k, n);
    out = Tensor({batch, m, n}, std::move(c));
  } else {
    detail::matmul_shape_error("matmul_nt", as, bs);
  }

  detail::maybe_record(out, {&a, &b}, [&](const std::vector<bool>& need) {
    Tensor av = a.detached();
    Tensor bv = b.detached();
    auto aid = a.id();
    auto bid = b.id();
    return [=](const Tensor& g, GradientMap& sink) {
      const Shape& ash = av.shape();
      const Shape& bsh = bv.shape();
      if (ash.size() == 2) {
        std::size_t m = ash[0], k = ash[1], n = bsh[0];
        if (need[0]) {  // dA = g . B
          std::vector<double> da(av.numel());
          detail::gemm(g.raw(), bv.raw(), da.data(), m, n, k);
          sink.accumulate(aid, Tensor(ash, std::move(da)));
        }
        if (need[1]) {  // dB = g^T . A
          std::vector<double> db(bv.numel());
          detail::gemm_tn(g.raw(), av.raw(), db.data(), m, n, k);
          sink.accumulate(bid, Tensor(bsh, std::move(db)));
        }
      } else {
        std::size_t batch = ash[0], m = ash[1], k = ash[2], n = bsh[1];
        if (need[0]) {
          std::vector<double> da(av.numel());
          for (std::size_t i = 0; i < batch; ++i)
            detail::gemm(g.raw() + i * m * n, bv.raw() + i * n * k, da.data() + i * m * k, m, n, k);
          sink.accumulate(aid, Tensor(ash, std::move(da)));
        }
        if (need[1]) {
          std::vector<double> db(bv.numel());
          for (std::size_t i = 0; i < batch; ++i)
            detail::gemm_tn(g.raw() + i * m * n, av.raw() + i * m * k, db.data() + i * n * k, m, n,
                            k);
          sink.accumulate(bid, Tensor(bsh, std::move(db)));
        }
      }
    };
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::scalar(s);
  detail::maybe_record(out, {&a}, [&](const std::vector<bool>&) {
    auto as = a.shape();
    auto aid = a.id();
    return [=](const Tensor& g, GradientMap& sink) {
      sink.accumulate(aid, Tensor::full(as, g.value()));
    };
  });
  return out;
}

inline Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  double n = static_cast<double>(a.numel());
  Tensor out = Tensor::scalar(s / n);
  detail::maybe_record(out, {&a}, [&](const std::vector<bool>&) {
    auto as = a.shape();
    auto aid = a.id();
    return [=](const Tensor& g, GradientMap& sink) {
      sink.accumulate(aid, Tensor::full(as, g.value() / n));
    };
  });
  return out;
}

// Mean over the leading axis: (B, rest...) -> (rest...).
inline Tensor mean_axis0(const Tensor& a) {
  if (a.rank() < 1) throw ShapeError("mean_axis0 on scalar");
  std::size_t batch = a.shape()[0];
  std::size_t inner = a.numel() / batch;
  Shape os(a.shape().begin() + 1, a.shape().end());
  std::vector<double> out(inner, 0.0);
  const double* pa = a.raw();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < inner; ++i) out[i] += pa[b * inner + i];
  double inv = 1.0 / static_cast<double>(batch);
  for (double& v : out) v *= inv;
  Tensor t(std::move(os), std::move(out));
  detail::maybe_record(t, {&a}, [&](const std::vector<bool>&) {
    auto as = a.shape();
    auto aid = a.id();
    return [=](const Tensor& g, GradientMap& sink) {
      std::vector<double> back(shape_numel(as));
      const double* pg = g.raw();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) back[b * inner + i] = pg[i] * inv;
      sink.accumulate(aid, Tensor(as, std::move(back)));
    };
  });
  return t;
}

// ---------------------------------------------------------------------------
// Neural-net primitives
// ---------------------------------------------------------------------------

// Exact erf-based GELU: x/2 * (1 + erf(x / sqrt(2))). The forward pass
// caches the gaussian CDF values so the backward pass only needs the
// (vectorized) pdf.
inline Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto cdf = std::make_shared<std::vector<double>>(a.numel());
  const double* pa = a.raw();
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double c = 0.5 * (1.0 + std::erf(pa[i] * inv_sqrt2));
    (*cdf)[i] = c;
    out[i] = pa[i] * c;
  }
  Tensor t(a.shape(), std::move(out));
  detail::maybe_record(t, {&a}, [&](const std::vector<bool>&) {
    Tensor av = a.detached();
    auto aid = a.id();
    return [=](const Tensor& g, GradientMap& sink) {
      // scalar exp on purpose: vectorized array exp splits scalar/packet
      // lanes by destination alignment, which breaks bitwise determinism
      constexpr double inv_sqrt2pi = 0.3989422804014326779;
      std::size_t n = av.numel();
      std::vector<double> da(n);
      const double* x = av.raw();
      const double* pg = g.raw();
      const double* pc = cdf->data();
      for (std::size_t i = 0; i < n; ++i)
        da[i] = pg[i] * (pc[i] + x[i] * inv_sqrt2pi * std::exp(-0.5 * x[i] * x[i]));
      sink.accumulate(aid, Tensor(av.shape(), std::move(da)));
    };
  });
  return t;
}

// Softmax over the last axis with an additive {0, -inf} bias (broadcastable
// to the logits shape). Masked positions come out exactly 0; rows whose
// every position is masked come out all-zero rather than NaN. The bias is
// a constant: no gradient flows to it.
inline Tensor masked_softmax(const Tensor& logits, const Tensor& bias) {
  const Shape& ls = logits.shape();
  if (ls.empty()) throw ShapeError("masked_softmax needs rank >= 1");
  std::size_t L = ls.back();
  std::size_t rows = logits.numel() / L;

  // Bias offsets per element via broadcast strides.
  Shape check = detail::broadcast_shape(ls, bias.shape(), "masked_softmax");
  if (check != ls)
    throw ShapeError("masked_softmax: bias " + shape_str(bias.shape()) +
                     " does not broadcast onto logits " + shape_str(ls));
  auto bst = detail::broadcast_strides(bias.shape(), ls.size());

  std::vector<double> out(logits.numel());
  const double* pl = logits.raw();
  const double* pb = bias.raw();
  std::vector<std::size_t> idx(ls.size(), 0);
  std::size_t boff = 0;
  std::vector<double> shifted(L);
  for (std::size_t r = 0; r < rows; ++r) {
    // boff currently points at the bias entry for (r, 0)
    double mx = -std::numeric_limits<double>::infinity();
    std::size_t bo = boff;
    for (std::size_t j = 0; j < L; ++j) {
      double bv = pb[bo];
      shifted[j] = (bv <= kMaskCut) ? kMaskedBias : pl[r * L + j] + bv;
      if (shifted[j] > mx) mx = shifted[j];
      bo += bst[ls.size() - 1];
    }
    if (mx <= kMaskCut) {
      for (std::size_t j = 0; j < L; ++j) out[r * L + j] = 0.0;  // degenerate row
    } else {
      double ssum = 0.0;
      for (std::size_t j = 0; j < L; ++j) {
        double e = (shifted[j] <= kMaskCut) ? 0.0 : std::exp(shifted[j] - mx);
        out[r * L + j] = e;
        ssum += e;
      }
      double inv = 1.0 / ssum;
      for (std::size_t j = 0; j < L; ++j) out[r * L + j] *= inv;
    }
    // advance the odometer by a full row
    for (std::size_t ax = ls.size() - 1; ax-- > 0;) {
      ++idx[ax];
      boff += bst[ax];
      if (idx[ax] < ls[ax]) break;
      idx[ax] = 0;
      boff -= bst[ax] * ls[ax];
    }
  }
  Tensor t(ls, std::move(out));
  detail::maybe_record(t, {&logits}, [&](const std::vector<bool>&) {
    Tensor probs = t.detached();
    auto lid = logits.id();
    return [=](const Tensor& g, GradientMap& sink) {
      std::vector<double> dl(probs.numel());
      const double* p = probs.raw();
      const double* pg = g.raw();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < L; ++j) dot += pg[r * L + j] * p[r * L + j];
        for (std::size_t j = 0; j < L; ++j) dl[r * L + j] = p[r * L + j] * (pg[r * L + j] - dot);
      }
      sink.accumulate(lid, Tensor(probs.shape(), std::move(dl)));
    };
  });
  return t;
}

// Layer normalization over the last axis, followed by the affine map
// x_hat * gain + shift. gain/shift have the last extent's length.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift,
                         double eps = 1e-5) {
  const Shape& xs = x.shape();
  if (xs.empty()) throw ShapeError("layer_norm needs rank >= 1");
  std::size_t d = xs.back();
  if (gain.numel() != d || shift.numel() != d)
    throw ShapeError("layer_norm: gain/shift length " + std::to_string(gain.numel()) + "/" +
                     std::to_string(shift.numel()) + " vs last extent " + std::to_string(d));
  std::size_t slices = x.numel() / d;

  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(slices);
  std::vector<double> out(x.numel());
  const double* px = x.raw();
  const double* pgain = gain.raw();
  const double* pshift = shift.raw();
  for (std::size_t s = 0; s < slices; ++s) {
    const double* row = px + s * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    inv_std[s] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      double h = (row[j] - mu) * inv;
      xhat[s * d + j] = h;
      out[s * d + j] = h * pgain[j] + pshift[j];
    }
  }
  Tensor t(xs, std::move(out));
  detail::maybe_record(t, {&x, &gain, &shift}, [&](const std::vector<bool>& need) {
    auto xid = x.id();
    auto gid = gain.id();
    auto sid = shift.id();
    auto gshape = gain.shape();
    auto sshape = shift.shape();
    auto xs_copy = xs;
    Tensor gv = gain.detached();
    auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
    auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
    return [=](const Tensor& g, GradientMap& sink) {
      const double* pg = g.raw();
      const double* ph = xh->data();
      if (need[1]) {
        std::vector<double> dgain(d, 0.0);
        for (std::size_t s = 0; s < slices; ++s)
          for (std::size_t j = 0; j < d; ++j) dgain[j] += pg[s * d + j] * ph[s * d + j];
        sink.accumulate(gid, Tensor(gshape, std::move(dgain)));
      }
      if (need[2]) {
        std::vector<double> dshift(d, 0.0);
        for (std::size_t s = 0; s < slices; ++s)
          for (std::size_t j = 0; j < d; ++j) dshift[j] += pg[s * d + j];
        sink.accumulate(sid, Tensor(sshape, std::move(dshift)));
      }
      if (need[0]) {
        std::vector<double> dx(slices * d);
        const double* pgn = gv.raw();
        for (std::size_t s = 0; s < slices; ++s) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            double gd = pg[s * d + j] * pgn[j];
            m1 += gd;
            m2 += gd * ph[s * d + j];
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            double gd = pg[s * d + j] * pgn[j];
            dx[s * d + j] = (*istd)[s] * (gd - m1 - ph[s * d + j] * m2);
          }
        }
        sink.accumulate(xid, Tensor(xs_copy, std::move(dx)));
      }
    };
  });
  return t;
}

// Inverted dropout. Eval mode and p = 0 return the input tensor itself,
// which keeps the identity bitwise.
inline Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0)
    throw ParameterError("dropout probability " + std::to_string(p) + " outside [0, 1)");
  if (!training || p == 0.0) return x;
  Rng rng(seed);
  double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  std::vector<double> out(x.numel());
  const double* px = x.raw();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double m = (rng.next_unit() >= p) ? keep_scale : 0.0;
    (*mask)[i] = m;
    out[i] = px[i] * m;
  }
  Tensor t(x.shape(), std::move(out));
  detail::maybe_record(t, {&x}, [&](const std::vector<bool>&) {
    auto xid = x.id();
    auto xs = x.shape();
    return [=](const Tensor& g, GradientMap& sink) {
      std::vector<double> dx(g.numel());
      const double* pg = g.raw();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = pg[i] * (*mask)[i];
      sink.accumulate(xid, Tensor(xs, std::move(dx)));
    };
  });
  return t;
}

// Mean squared error over all elements.
inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  Tensor d = sub(pred, target);
  return mean(mul(d, d));
}

}  // namespace tsfx
