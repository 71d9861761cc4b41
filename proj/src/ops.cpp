#include "t3time/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "t3time/errors.hpp"
#include "t3time/parallel.hpp"

#ifndef T3TIME_GEMM_BYTES
#define T3TIME_GEMM_BYTES 32
#endif
#ifndef T3TIME_GEMM_ROWS
#define T3TIME_GEMM_ROWS 6
#endif

namespace t3time {

namespace {

template <typename T>
using NodeT = detail::Node<T>;

template <typename T>
using BackwardFn = std::function<void(NodeT<T>&)>;

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> data, const std::vector<Tensor<T>>& inputs,
                  const char* op, BackwardFn<T> backward) {
  auto node = std::make_shared<NodeT<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  const bool needs = grad_enabled() &&
                     std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.defined() && t.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    for (const auto& t : inputs) {
      if (t.defined()) node->parents.push_back(t.node());
    }
    node->backward_fn = std::move(backward);
  }
  return Tensor<T>::from_node(std::move(node));
}

// Gradient buffer of parent i, or nullptr when that parent is a constant.
template <typename T>
std::vector<T>* parent_grad(NodeT<T>& self, std::size_t i) {
  auto& p = self.parents[i];
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <typename T>
void require_defined(const Tensor<T>& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor argument");
}

// Elementwise binary op with leading-dimension broadcasting.
template <typename T, typename Fwd, typename DA, typename DB>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd, DA da,
                    DB db) {
  require_defined(a, name);
  require_defined(b, name);
  const Shape* out_shape = nullptr;
  if (is_suffix(b.shape(), a.shape())) {
    out_shape = &a.shape();
  } else if (is_suffix(a.shape(), b.shape())) {
    out_shape = &b.shape();
  } else {
    throw DimensionError(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const std::size_t n = shape_numel(*out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  const T* av = a.values().data();
  const T* bv = b.values().data();
  std::vector<T> out(n);
  // The smaller operand repeats every `period` elements.
  const std::size_t period = std::min(na, nb);
  const std::size_t reps = period == 0 ? 0 : n / period;
  const bool a_full = na == n, b_full = nb == n;
  for (std::size_t r = 0; r < reps; ++r) {
    const T* ap = av + (a_full ? r * period : 0);
    const T* bp = bv + (b_full ? r * period : 0);
    T* op = out.data() + r * period;
    for (std::size_t j = 0; j < period; ++j) op[j] = fwd(ap[j], bp[j]);
  }
  return make_op<T>(*out_shape, std::move(out), {a, b}, name, [=](NodeT<T>& self) {
    const T* g = self.grad.data();
    const T* x = self.parents[0]->data.data();
    const T* y = self.parents[1]->data.data();
    auto* ga = parent_grad(self, 0);
    auto* gb = parent_grad(self, 1);
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t ao = a_full ? r * period : 0, bo = b_full ? r * period : 0;
      const T* gp = g + r * period;
      if (ga) {
        T* gap = ga->data() + ao;
        for (std::size_t j = 0; j < period; ++j) gap[j] += gp[j] * da(x[ao + j], y[bo + j]);
      }
      if (gb) {
        T* gbp = gb->data() + bo;
        for (std::size_t j = 0; j < period; ++j) gbp[j] += gp[j] * db(x[ao + j], y[bo + j]);
      }
    }
  });
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary_op(const Tensor<T>& x, const char* name, Fwd fwd, Deriv deriv) {
  require_defined(x, name);
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  // deriv(input, output) -> d output / d input
  return make_op<T>(x.shape(), std::move(out), {x}, name, [deriv](NodeT<T>& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& in = self.parents[0]->data;
    for (std::size_t i = 0; i < in.size(); ++i) (*gx)[i] += self.grad[i] * deriv(in[i], self.data[i]);
  });
}

// Source flat index for every output element of a two-axis swap.
std::vector<std::size_t> swap_axes_map(const Shape& in_shape, std::size_t a, std::size_t b,
                                       Shape& out_shape) {
  out_shape = in_shape;
  std::swap(out_shape[a], out_shape[b]);
  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  std::vector<std::size_t> strides = in_strides;
  std::swap(strides[a], strides[b]);  // stride of output axis i within the input
  const std::size_t n = shape_numel(in_shape);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    map[flat] = src;
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      src += strides[ax];
      if (idx[ax] < out_shape[ax]) break;
      src -= strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return map;
}

// out (rows x n) += a (rows x k) . b (k x n), all row-major. Output tiles
// of kRows rows by two vectors stay in registers for the whole pass over k.
template <typename T>
void gemm_acc(const T* a, const T* b, T* out, std::size_t rows, std::size_t k, std::size_t n) {
  using V [[gnu::vector_size(T3TIME_GEMM_BYTES), gnu::aligned(alignof(T))]] = T;
  constexpr std::size_t kRows = T3TIME_GEMM_ROWS;
  constexpr std::size_t kLanes = T3TIME_GEMM_BYTES / sizeof(T);
  constexpr std::size_t kCols = 2 * kLanes;
  std::size_t i = 0;
  for (; i + kRows <= rows; i += kRows) {
    std::size_t j0 = 0;
    for (; j0 + kCols <= n; j0 += kCols) {
      V acc[kRows][2];
      for (std::size_t r = 0; r < kRows; ++r) {
        acc[r][0] = *reinterpret_cast<const V*>(out + (i + r) * n + j0);
        acc[r][1] = *reinterpret_cast<const V*>(out + (i + r) * n + j0 + kLanes);
      }
      for (std::size_t p = 0; p < k; ++p) {
        const V b0 = *reinterpret_cast<const V*>(b + p * n + j0);
        const V b1 = *reinterpret_cast<const V*>(b + p * n + j0 + kLanes);
        for (std::size_t r = 0; r < kRows; ++r) {
          const T s = a[(i + r) * k + p];
          acc[r][0] += s * b0;
          acc[r][1] += s * b1;
        }
      }
      for (std::size_t r = 0; r < kRows; ++r) {
        *reinterpret_cast<V*>(out + (i + r) * n + j0) = acc[r][0];
        *reinterpret_cast<V*>(out + (i + r) * n + j0 + kLanes) = acc[r][1];
      }
    }
    if (j0 < n) {
      for (std::size_t r = 0; r < kRows; ++r) {
        const T* ar = a + (i + r) * k;
        T* __restrict o = out + (i + r) * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T s = ar[p];
          const T* __restrict br = b + p * n;
          for (std::size_t j = j0; j < n; ++j) o[j] += s * br[j];
        }
      }
    }
  }
  for (; i < rows; ++i) {
    const T* ar = a + i * k;
    T* __restrict o = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = ar[p];
      const T* __restrict br = b + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
    }
  }
}

template <typename T>
std::vector<T> transpose_matrices(const T* src, std::size_t mats, std::size_t rows, std::size_t cols) {
  std::vector<T> out(mats * rows * cols);
  for (std::size_t mt = 0; mt < mats; ++mt) {
    const T* s = src + mt * rows * cols;
    T* d = out.data() + mt * rows * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) d[c * rows + r] = s[r * cols + c];
    }
  }
  return out;
}

// Splits the flat row range [lo, hi) over stacked matrices of `rows` rows
// into runs inside one matrix: fn(matrix, first_row, count).
template <typename Fn>
void for_each_matrix_run(std::size_t lo, std::size_t hi, std::size_t rows, Fn&& fn) {
  for (std::size_t r = lo; r < hi;) {
    const std::size_t mt = r / rows, i = r % rows;
    const std::size_t cnt = std::min(hi - r, rows - i);
    fn(mt, i, cnt);
    r += cnt;
  }
}

}  // namespace

// ---------------------------------------------------------------- matmul

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() < 2 || b.rank() < 2 || a.dim(-1) != b.dim(-2)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
  const Shape ab(a.shape().begin(), a.shape().end() - 2);
  const Shape bb(b.shape().begin(), b.shape().end() - 2);
  const std::size_t rank = std::max(ab.size(), bb.size());
  Shape batch(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i + ab.size() >= rank ? ab[i + ab.size() - rank] : 1;
    const std::size_t db = i + bb.size() >= rank ? bb[i + bb.size() - rank] : 1;
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("matmul: batch dimensions of " + shape_str(a.shape()) + " and " +
                           shape_str(b.shape()) + " do not broadcast");
    }
    batch[i] = std::max(da, db);
  }
  const std::size_t nbatch = shape_numel(batch);

  // Matrix index within a and b for each output batch.
  std::vector<std::size_t> a_of(nbatch), b_of(nbatch);
  {
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < nbatch; ++flat) {
      std::size_t ai = 0, bi = 0;
      for (std::size_t i = 0; i < rank; ++i) {
        if (i + ab.size() >= rank) {
          const std::size_t d = ab[i + ab.size() - rank];
          ai = ai * d + (d == 1 ? 0 : idx[i]);
        }
        if (i + bb.size() >= rank) {
          const std::size_t d = bb[i + bb.size() - rank];
          bi = bi * d + (d == 1 ? 0 : idx[i]);
        }
      }
      a_of[flat] = ai;
      b_of[flat] = bi;
      for (std::size_t ax = rank; ax-- > 0;) {
        if (++idx[ax] < batch[ax]) break;
        idx[ax] = 0;
      }
    }
  }

  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<T> out(nbatch * m * n, T(0));
  {
    const T* av = a.values().data();
    const T* bv = b.values().data();
    parallel_for(nbatch * m, std::max<std::size_t>(1, 16384 / std::max<std::size_t>(1, k * n)),
                 [&](std::size_t lo, std::size_t hi) {
                   for_each_matrix_run(lo, hi, m, [&](std::size_t bt, std::size_t i, std::size_t cnt) {
                     gemm_acc(av + (a_of[bt] * m + i) * k, bv + b_of[bt] * k * n, out.data() + (bt * m + i) * n,
                              cnt, k, n);
                   });
                 });
  }

  const std::size_t a_mats = shape_numel(ab);
  const std::size_t b_mats = shape_numel(bb);
  return make_op<T>(
      std::move(out_shape), std::move(out), {a, b}, "matmul",
      [=](NodeT<T>& self) {
        const T* g = self.grad.data();
        const auto& A = self.parents[0]->data;
        const auto& B = self.parents[1]->data;
        // Output batches grouped by the a / b matrix they read from, so each
        // gradient row is owned by exactly one worker.
        auto group = [nbatch](const std::vector<std::size_t>& of, std::size_t mats) {
          std::vector<std::vector<std::size_t>> by(mats);
          for (std::size_t bt = 0; bt < nbatch; ++bt) by[of[bt]].push_back(bt);
          return by;
        };
        if (auto* ga = parent_grad(self, 0)) {
          // dA = dOut . B^T
          const auto by = group(a_of, a_mats);
          const auto bt_mats = transpose_matrices(B.data(), b_mats, k, n);
          parallel_for(a_mats * m, std::max<std::size_t>(1, 16384 / std::max<std::size_t>(1, k * n)),
                       [&](std::size_t lo, std::size_t hi) {
                         for_each_matrix_run(lo, hi, m, [&](std::size_t am, std::size_t i, std::size_t cnt) {
                           for (std::size_t bt : by[am]) {
                             gemm_acc(g + (bt * m + i) * n, bt_mats.data() + b_of[bt] * n * k,
                                      ga->data() + (am * m + i) * k, cnt, n, k);
                           }
                         });
                       });
        }
        if (auto* gb = parent_grad(self, 1)) {
          // dB = A^T . dOut
          const auto by = group(b_of, b_mats);
          const auto at_mats = transpose_matrices(A.data(), a_mats, m, k);
          parallel_for(b_mats * k, std::max<std::size_t>(1, 16384 / std::max<std::size_t>(1, m * n)),
                       [&](std::size_t lo, std::size_t hi) {
                         for_each_matrix_run(lo, hi, k, [&](std::size_t bm, std::size_t p, std::size_t cnt) {
                           for (std::size_t bt : by[bm]) {
                             gemm_acc(at_mats.data() + (a_of[bt] * k + p) * m, g + bt * m * n,
                                      gb->data() + (bm * k + p) * n, cnt, m, n);
                           }
                         });
                       });
        }
      });
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double s) {
  const T st = static_cast<T>(s);
  return unary_op(x, "scale", [st](T v) { return st * v; }, [st](T, T) { return st; });
}

template <typename T>
Tensor<T> affine(const Tensor<T>& x, double s, double shift) {
  const T st = static_cast<T>(s);
  const T sh = static_cast<T>(shift);
  return unary_op(x, "affine", [st, sh](T v) { return st * v + sh; }, [st](T, T) { return st; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op(
      x, "relu", [](T v) { return v > T(0) ? v : T(0); },
      [](T in, T) { return in > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op(
      x, "sigmoid",
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T out) { return out * (T(1) - out); });
}

// ---------------------------------------------------------------- softmax / norm

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::ptrdiff_t axis) {
  require_defined(x, "softmax");
  const auto s = split_axis(x.shape(), normalize_axis(axis, x.rank()));
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      T mx = xv[base];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, xv[base + l * s.inner]);
      T total = T(0);
      for (std::size_t l = 0; l < s.len; ++l) {
        const T e = std::exp(xv[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
    }
  }
  return make_op<T>(x.shape(), std::move(out), {x}, "softmax", [s](NodeT<T>& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        T dot = T(0);
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t i = base + l * s.inner;
          dot += g[i] * y[i];
        }
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t i = base + l * s.inner;
          (*gx)[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, std::ptrdiff_t axis, const Tensor<T>& gain,
                     const Tensor<T>& bias, double eps) {
  require_defined(x, "layer_norm");
  const auto s = split_axis(x.shape(), normalize_axis(axis, x.rank()));
  if (s.len == 0) throw DimensionError("layer_norm: empty normalization axis");
  for (const Tensor<T>* p : {&gain, &bias}) {
    if (p->defined() && p->shape() != Shape{s.len}) {
      throw DimensionError("layer_norm: affine parameter shape " + shape_str(p->shape()) +
                           " does not match axis length " + std::to_string(s.len));
    }
  }
  auto xv = x.values();
  const std::size_t n = xv.size();
  const std::size_t groups = s.outer * s.inner;
  std::vector<T> xhat(n), inv_std(groups), out(n);
  const T* gv = gain.defined() ? gain.values().data() : nullptr;
  const T* bv = bias.defined() ? bias.values().data() : nullptr;
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      T mu = T(0);
      for (std::size_t l = 0; l < s.len; ++l) mu += xv[base + l * s.inner];
      mu /= static_cast<T>(s.len);
      T var = T(0);
      for (std::size_t l = 0; l < s.len; ++l) {
        const T d = xv[base + l * s.inner] - mu;
        var += d * d;
      }
      var /= static_cast<T>(s.len);
      const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
      inv_std[o * s.inner + in] = is;
      for (std::size_t l = 0; l < s.len; ++l) {
        const std::size_t i = base + l * s.inner;
        xhat[i] = (xv[i] - mu) * is;
        out[i] = xhat[i] * (gv ? gv[l] : T(1)) + (bv ? bv[l] : T(0));
      }
    }
  }
  return make_op<T>(
      x.shape(), std::move(out), {x, gain, bias}, "layer_norm",
      [s, xhat = std::move(xhat), inv_std = std::move(inv_std), has_gain = gain.defined(),
       has_bias = bias.defined()](NodeT<T>& self) {
        const auto& g = self.grad;
        std::size_t pi = 1;
        const std::vector<T>* gain_data = nullptr;
        std::vector<T>* g_gain = nullptr;
        std::vector<T>* g_bias = nullptr;
        if (has_gain) {
          gain_data = &self.parents[pi]->data;
          g_gain = parent_grad(self, pi);
          ++pi;
        }
        if (has_bias) g_bias = parent_grad(self, pi);
        auto* gx = parent_grad(self, 0);
        const T len = static_cast<T>(s.len);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.len * s.inner + in;
            T sum_d = T(0), sum_dx = T(0);
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t i = base + l * s.inner;
              const T d = g[i] * (gain_data ? (*gain_data)[l] : T(1));
              sum_d += d;
              sum_dx += d * xhat[i];
              if (g_gain) (*g_gain)[l] += g[i] * xhat[i];
              if (g_bias) (*g_bias)[l] += g[i];
            }
            if (!gx) continue;
            const T is = inv_std[o * s.inner + in];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t i = base + l * s.inner;
              const T d = g[i] * (gain_data ? (*gain_data)[l] : T(1));
              (*gx)[i] += is / len * (len * d - sum_d - xhat[i] * sum_dx);
            }
          }
        }
      });
}

// ---------------------------------------------------------------- layout

template <typename T>
Tensor<T> transpose(const Tensor<T>& x, std::ptrdiff_t axis_a, std::ptrdiff_t axis_b) {
  require_defined(x, "transpose");
  const std::size_t a = normalize_axis(axis_a, x.rank());
  const std::size_t b = normalize_axis(axis_b, x.rank());
  Shape out_shape;
  auto map = swap_axes_map(x.shape(), a, b, out_shape);
  auto xv = x.values();
  std::vector<T> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = xv[map[i]];
  return make_op<T>(std::move(out_shape), std::move(out), {x}, "transpose",
                    [map = std::move(map)](NodeT<T>& self) {
                      auto* gx = parent_grad(self, 0);
                      if (!gx) return;
                      for (std::size_t i = 0; i < map.size(); ++i) (*gx)[map[i]] += self.grad[i];
                    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto xv = x.values();
  return make_op<T>(std::move(shape), std::vector<T>(xv.begin(), xv.end()), {x}, "reshape",
                    [](NodeT<T>& self) {
                      auto* gx = parent_grad(self, 0);
                      if (!gx) return;
                      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
                    });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::ptrdiff_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  for (const auto& p : parts) require_defined(p, "concat");
  const std::size_t ax = normalize_axis(axis, parts[0].rank());
  Shape out_shape = parts[0].shape();
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != out_shape.size()) {
      throw DimensionError("concat: rank mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    probe[ax] = 0;
    Shape ref = parts[0].shape();
    ref[ax] = 0;
    if (probe != ref) {
      throw DimensionError("concat: shapes " + shape_str(parts[0].shape()) + " and " +
                           shape_str(p.shape()) + " differ off axis " + std::to_string(ax));
    }
    out_shape[ax] += p.dim(static_cast<std::ptrdiff_t>(ax));
  }
  const auto so = split_axis(out_shape, ax);
  std::vector<std::size_t> widths;  // contiguous chunk per outer index for each part
  for (const auto& p : parts) widths.push_back(p.shape()[ax] * so.inner);
  const std::size_t row = so.len * so.inner;
  std::vector<T> out(so.outer * row);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    auto pv = parts[pi].values();
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(pv.begin() + o * widths[pi], widths[pi], out.begin() + o * row + offset);
    }
    offset += widths[pi];
  }
  return make_op<T>(std::move(out_shape), std::move(out), parts, "concat",
                    [widths, row, outer = so.outer](NodeT<T>& self) {
                      std::size_t off = 0;
                      for (std::size_t pi = 0; pi < widths.size(); ++pi) {
                        if (auto* gp = parent_grad(self, pi)) {
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t j = 0; j < widths[pi]; ++j) {
                              (*gp)[o * widths[pi] + j] += self.grad[o * row + off + j];
                            }
                          }
                        }
                        off += widths[pi];
                      }
                    });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::ptrdiff_t axis, std::size_t start, std::size_t length) {
  require_defined(x, "slice");
  const std::size_t ax = normalize_axis(axis, x.rank());
  if (start + length > x.shape()[ax]) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis " + std::to_string(ax) + " of " + shape_str(x.shape()));
  }
  const auto s = split_axis(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = length;
  const std::size_t width = length * s.inner;
  const std::size_t row = s.len * s.inner;
  const std::size_t off = start * s.inner;
  auto xv = x.values();
  std::vector<T> out(s.outer * width);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + o * row + off, width, out.begin() + o * width);
  }
  return make_op<T>(std::move(out_shape), std::move(out), {x}, "slice",
                    [outer = s.outer, width, row, off](NodeT<T>& self) {
                      auto* gx = parent_grad(self, 0);
                      if (!gx) return;
                      for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t j = 0; j < width; ++j) {
                          (*gx)[o * row + off + j] += self.grad[o * width + j];
                        }
                      }
                    });
}

template <typename T>
Tensor<T> expand(const Tensor<T>& x, std::ptrdiff_t axis, std::size_t count) {
  require_defined(x, "expand");
  const auto rank = static_cast<std::ptrdiff_t>(x.rank());
  const std::ptrdiff_t a = axis < 0 ? axis + rank + 1 : axis;
  if (a < 0 || a > rank) {
    throw DimensionError("expand: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(x.shape()));
  }
  const auto ax = static_cast<std::size_t>(a);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < x.rank(); ++i) (i < ax ? outer : inner) *= x.shape()[i];
  Shape out_shape = x.shape();
  out_shape.insert(out_shape.begin() + a, count);
  auto xv = x.values();
  std::vector<T> out(outer * count * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < count; ++c) {
      std::copy_n(xv.begin() + o * inner, inner, out.begin() + (o * count + c) * inner);
    }
  }
  return make_op<T>(std::move(out_shape), std::move(out), {x}, "expand",
                    [outer, count, inner](NodeT<T>& self) {
                      auto* gx = parent_grad(self, 0);
                      if (!gx) return;
                      for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t c = 0; c < count; ++c) {
                          for (std::size_t i = 0; i < inner; ++i) {
                            (*gx)[o * inner + i] += self.grad[(o * count + c) * inner + i];
                          }
                        }
                      }
                    });
}

// ---------------------------------------------------------------- reductions

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::ptrdiff_t axis, bool keepdim) {
  require_defined(x, "mean");
  const std::size_t ax = normalize_axis(axis, x.rank());
  const auto s = split_axis(x.shape(), ax);
  if (s.len == 0) throw DimensionError("mean over empty axis");
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[ax] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  }
  auto xv = x.values();
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.len; ++l) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        out[o * s.inner + in] += xv[(o * s.len + l) * s.inner + in];
      }
    }
  }
  const T inv = T(1) / static_cast<T>(s.len);
  for (auto& v : out) v *= inv;
  return make_op<T>(std::move(out_shape), std::move(out), {x}, "mean", [s, inv](NodeT<T>& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t l = 0; l < s.len; ++l) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          (*gx)[(o * s.len + l) * s.inner + in] += self.grad[o * s.inner + in] * inv;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  require_defined(x, "sum_all");
  T total = T(0);
  for (T v : x.values()) total += v;
  return make_op<T>(Shape{}, std::vector<T>{total}, {x}, "sum", [](NodeT<T>& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    for (auto& v : *gx) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  require_defined(x, "mean_all");
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

// ---------------------------------------------------------------- dropout / attention

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, CounterRng& rng) {
  require_defined(x, "dropout");
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto xv = x.values();
  std::vector<T> mask(xv.size()), out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.uniform() < p ? T(0) : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  return make_op<T>(x.shape(), std::move(out), {x}, "dropout",
                    [mask = std::move(mask)](NodeT<T>& self) {
                      auto* gx = parent_grad(self, 0);
                      if (!gx) return;
                      for (std::size_t i = 0; i < mask.size(); ++i) (*gx)[i] += self.grad[i] * mask[i];
                    });
}

template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k) {
  require_defined(q, "attention");
  require_defined(k, "attention");
  if (q.rank() < 2 || k.rank() < 2 || q.dim(-1) != k.dim(-1)) {
    throw DimensionError("attention: query " + shape_str(q.shape()) + " and key " +
                         shape_str(k.shape()) + " feature dims differ");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(-1)));
  return softmax(scale(matmul(q, transpose(k, -1, -2)), inv_sqrt_d), -1);
}

template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const DropoutCtx& drop) {
  require_defined(v, "attention");
  if (v.rank() < 2 || k.rank() < 2 || k.dim(-2) != v.dim(-2)) {
    throw DimensionError("attention: key " + shape_str(k.shape()) + " and value " +
                         shape_str(v.shape()) + " token counts differ");
  }
  return matmul(drop.apply(attention_weights(q, k)), v);
}

#define T3TIME_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, double);                                          \
  template Tensor<T> affine(const Tensor<T>&, double, double);                                 \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                \
  template Tensor<T> softmax(const Tensor<T>&, std::ptrdiff_t);                                \
  template Tensor<T> layer_norm(const Tensor<T>&, std::ptrdiff_t, const Tensor<T>&,            \
                                const Tensor<T>&, double);                                     \
  template Tensor<T> transpose(const Tensor<T>&, std::ptrdiff_t, std::ptrdiff_t);              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::ptrdiff_t);                    \
  template Tensor<T> slice(const Tensor<T>&, std::ptrdiff_t, std::size_t, std::size_t);        \
  template Tensor<T> expand(const Tensor<T>&, std::ptrdiff_t, std::size_t);                    \
  template Tensor<T> mean(const Tensor<T>&, std::ptrdiff_t, bool);                             \
  template Tensor<T> sum_all(const Tensor<T>&);                                                \
  template Tensor<T> mean_all(const Tensor<T>&);                                               \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, CounterRng&);                     \
  template Tensor<T> attention_weights(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> scaled_dot_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          const DropoutCtx&);

T3TIME_INSTANTIATE_OPS(float)
T3TIME_INSTANTIATE_OPS(double)

#undef T3TIME_INSTANTIATE_OPS

}  // namespace t3time
