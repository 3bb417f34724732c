#include "linf/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>

#include "linf/errors.hpp"
#include "linf/lu.hpp"

namespace linf::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMap(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MutMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MutMap(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void accumulate(Tape& t, Var v, const Tensor& g) {
  if (!v.requires_grad()) return;
  Tensor& acc = t.grad_accumulator(v);
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

// Elementwise unary op with derivative expressed through input x and output y.
template <class F, class DF>
Var unary(Var a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape()->record(std::move(y), {a}, [a, df](Tape& t, const Tensor& g, const Tensor& yv) {
    const Tensor& xv = a.value();
    Tensor& acc = t.grad_accumulator(a);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i] * df(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.extent(0), k = av.extent(1), n = bv.extent(1);
  if (bv.extent(0) != k) {
    throw DimensionError("matmul inner extents differ: " + shape_string(av.shape()) + " * " + shape_string(bv.shape()));
  }
  Tensor out({m, n});
  as_matrix(out, m, n).noalias() = as_matrix(av, m, k) * as_matrix(bv, k, n);
  return a.tape()->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    const auto gm = as_matrix(g, m, n);
    if (a.requires_grad()) {
      as_matrix(t.grad_accumulator(a), m, k).noalias() += gm * as_matrix(b.value(), k, n).transpose();
    }
    if (b.requires_grad()) {
      as_matrix(t.grad_accumulator(b), k, n).noalias() += as_matrix(a.value(), m, k).transpose() * gm;
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t m = av.extent(0), n = av.extent(1);
  Tensor out({n, m});
  as_matrix(out, n, m) = as_matrix(av, m, n).transpose();
  return a.tape()->record(std::move(out), {a}, [a, m, n](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    as_matrix(t.grad_accumulator(a), m, n) += as_matrix(g, n, m).transpose();
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    accumulate(t, a, g);
    if (b.requires_grad()) {
      Tensor& acc = t.grad_accumulator(b);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    if (a.requires_grad()) {
      Tensor& acc = t.grad_accumulator(a);
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      Tensor& acc = t.grad_accumulator(b);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i] * av[i];
    }
  });
}

Var add_row(Var a, Var row) {
  const Tensor& av = a.value();
  require_matrix(av, "add_row");
  const std::size_t m = av.extent(0), n = av.extent(1);
  if (row.value().size() != n) throw DimensionError("add_row: row length does not match column count");
  Tensor out = av;
  const Tensor& rv = row.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  }
  return a.tape()->record(std::move(out), {a, row}, [a, row, m, n](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    accumulate(t, a, g);
    if (row.requires_grad()) {
      Tensor& acc = t.grad_accumulator(row);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) acc[j] += g[i * n + j];
      }
    }
  });
}

Var mul_col(Var a, Var col) {
  const Tensor& av = a.value();
  require_matrix(av, "mul_col");
  const std::size_t m = av.extent(0), n = av.extent(1);
  if (col.value().size() != m) throw DimensionError("mul_col: column length does not match row count");
  Tensor out = av;
  const Tensor& cv = col.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] *= cv[i];
  }
  return a.tape()->record(std::move(out), {a, col}, [a, col, m, n](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    if (a.requires_grad()) {
      Tensor& acc = t.grad_accumulator(a);
      const Tensor& cv = col.value();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) acc[i * n + j] += g[i * n + j] * cv[i];
      }
    }
    if (col.requires_grad()) {
      Tensor& acc = t.grad_accumulator(col);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * av[i * n + j];
        acc[i] += s;
      }
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape()->record(std::move(out), {a}, [a, factor](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    Tensor& acc = t.grad_accumulator(a);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += factor * g[i];
  });
}

Var add_scalar(Var a, double offset) {
  Tensor out = a.value();
  for (double& v : out.data()) v += offset;
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Tensor& g, const Tensor& /*out*/) { accumulate(t, a, g); });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var cos(Var a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var sin(Var a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos_sin(Var a) {
  const Tensor& x = a.value();
  require_matrix(x, "cos_sin");
  const std::size_t m = x.extent(0), k = x.extent(1);
  Tensor out({m, 2 * k});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = x[i * k + j];
      out[i * 2 * k + j] = std::cos(v);
      out[i * 2 * k + k + j] = std::sin(v);
    }
  }
  return a.tape()->record(std::move(out), {a}, [a, m, k](Tape& t, const Tensor& g, const Tensor& y) {
    Tensor& acc = t.grad_accumulator(a);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t r = i * 2 * k;
      for (std::size_t j = 0; j < k; ++j) acc[i * k + j] += g[r + k + j] * y[r + j] - g[r + j] * y[r + k + j];
    }
  });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  return a.tape()->record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    Tensor& acc = t.grad_accumulator(a);
    for (double& v : acc.data()) v += g[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_rows(Var a) {
  const Tensor& av = a.value();
  require_matrix(av, "sum_rows");
  const std::size_t m = av.extent(0), n = av.extent(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += av[i * n + j];
    out[i] = s;
  }
  return a.tape()->record(std::move(out), {a}, [a, m, n](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    Tensor& acc = t.grad_accumulator(a);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) acc[i * n + j] += g[i];
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Tensor& g, const Tensor& /*out*/) { accumulate(t, a, g); });
}

Var broadcast_scalar(Var s, Shape shape) {
  if (s.value().size() != 1) throw DimensionError("broadcast_scalar needs a single element");
  Tensor out(std::move(shape), s.value()[0]);
  return s.tape()->record(std::move(out), {s}, [s](Tape& t, const Tensor& g, const Tensor&) {
    double acc = 0.0;
    for (double v : g.data()) acc += v;
    t.grad_accumulator(s)[0] += acc;
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix(av, "slice_cols");
  const std::size_t m = av.extent(0), n = av.extent(1);
  if (begin > end || end > n) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * n + begin + j];
  }
  return a.tape()->record(std::move(out), {a}, [a, m, n, begin, w](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    Tensor& acc = t.grad_accumulator(a);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < w; ++j) acc[i * n + begin + j] += g[i * w + j];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of zero parts");
  const std::size_t m = parts[0].value().extent(0);
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_cols");
    if (p.value().extent(0) != m) throw DimensionError("concat_cols: row counts differ");
    total += p.value().extent(1);
  }
  Tensor out({m, total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    const std::size_t w = pv.extent(1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < w; ++j) out[i * total + offset + j] = pv[i * w + j];
    }
    offset += w;
  }
  std::vector<Var> held(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), parts, [held, m, total](Tape& t, const Tensor& g, const Tensor&) {
    std::size_t off = 0;
    for (const Var& p : held) {
      const std::size_t w = p.value().extent(1);
      if (p.requires_grad()) {
        Tensor& acc = t.grad_accumulator(p);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < w; ++j) acc[i * w + j] += g[i * total + off + j];
        }
      }
      off += w;
    }
  });
}

Var gather_rows(Var a, std::vector<std::size_t> indices) {
  const Tensor& av = a.value();
  require_matrix(av, "gather_rows");
  const std::size_t r = av.extent(0), c = av.extent(1);
  Tensor out({indices.size(), c});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= r) throw DimensionError("gather_rows: index out of range");
    std::copy_n(av.raw() + indices[i] * c, c, out.raw() + i * c);
  }
  return a.tape()->record(std::move(out), {a},
                          [a, idx = std::move(indices), c](Tape& t, const Tensor& g, const Tensor& /*out*/) {
                            Tensor& acc = t.grad_accumulator(a);
                            for (std::size_t i = 0; i < idx.size(); ++i) {
                              double* dst = acc.raw() + idx[i] * c;
                              const double* src = g.raw() + i * c;
                              for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                            }
                          });
}

namespace {

struct ConvGeometry {
  std::size_t n, h, w, cin, cout, k;
  std::size_t rows() const { return n * h * w; }
  std::size_t patch() const { return k * k * cin; }
};

// cols[(b,y,x), (dy,dx,ci)] = input[b, y+dy-p, x+dx-p, ci], zero outside.
void im2col(const ConvGeometry& g, const double* in, double* cols) {
  const long pad = static_cast<long>(g.k / 2);
  const std::size_t patch = g.patch();
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t y = 0; y < g.h; ++y) {
      for (std::size_t x = 0; x < g.w; ++x) {
        double* row = cols + ((b * g.h + y) * g.w + x) * patch;
        for (std::size_t dy = 0; dy < g.k; ++dy) {
          const long sy = static_cast<long>(y + dy) - pad;
          for (std::size_t dx = 0; dx < g.k; ++dx) {
            const long sx = static_cast<long>(x + dx) - pad;
            double* dst = row + (dy * g.k + dx) * g.cin;
            if (sy < 0 || sx < 0 || sy >= static_cast<long>(g.h) || sx >= static_cast<long>(g.w)) {
              std::fill_n(dst, g.cin, 0.0);
            } else {
              std::copy_n(in + ((b * g.h + sy) * g.w + sx) * g.cin, g.cin, dst);
            }
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* in_grad) {
  const long pad = static_cast<long>(g.k / 2);
  const std::size_t patch = g.patch();
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t y = 0; y < g.h; ++y) {
      for (std::size_t x = 0; x < g.w; ++x) {
        const double* row = cols + ((b * g.h + y) * g.w + x) * patch;
        for (std::size_t dy = 0; dy < g.k; ++dy) {
          const long sy = static_cast<long>(y + dy) - pad;
          if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
          for (std::size_t dx = 0; dx < g.k; ++dx) {
            const long sx = static_cast<long>(x + dx) - pad;
            if (sx < 0 || sx >= static_cast<long>(g.w)) continue;
            const double* src = row + (dy * g.k + dx) * g.cin;
            double* dst = in_grad + ((b * g.h + sy) * g.w + sx) * g.cin;
            for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var input, Var kernel) {
  const Tensor& iv = input.value();
  const Tensor& kv = kernel.value();
  if (kv.rank() != 4 || kv.extent(0) != kv.extent(1)) {
    throw ConfigError("conv2d kernel must be [k x k x Cin x Cout], got " + shape_string(kv.shape()));
  }
  if (kv.extent(0) % 2 == 0) throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(kv.extent(0)));
  ConvGeometry g{};
  Shape out_shape;
  if (iv.rank() == 4) {
    g = {iv.extent(0), iv.extent(1), iv.extent(2), iv.extent(3), kv.extent(3), kv.extent(0)};
    out_shape = {g.n, g.h, g.w, g.cout};
  } else if (iv.rank() == 3) {
    g = {1, iv.extent(0), iv.extent(1), iv.extent(2), kv.extent(3), kv.extent(0)};
    out_shape = {g.h, g.w, g.cout};
  } else {
    throw DimensionError("conv2d input must be HWC or NHWC, got " + shape_string(iv.shape()));
  }
  if (kv.extent(2) != g.cin) {
    throw DimensionError("conv2d channel mismatch: input has " + std::to_string(g.cin) + ", kernel expects " +
                         std::to_string(kv.extent(2)));
  }
  // im2col writes every entry, so skip zero-filling
  std::shared_ptr<double[]> cols(new double[g.rows() * g.patch()]);
  im2col(g, iv.raw(), cols.get());
  Tensor out(out_shape);
  as_matrix(out, g.rows(), g.cout).noalias() =
      ConstMap(cols.get(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.patch())) *
      as_matrix(kv, g.patch(), g.cout);
  if (!input.requires_grad() && !kernel.requires_grad()) return input.tape()->record(std::move(out), {input, kernel}, {});
  if (!kernel.requires_grad()) cols.reset();
  return input.tape()->record(
      std::move(out), {input, kernel}, [input, kernel, g, cols = std::move(cols)](Tape& t, const Tensor& grad, const Tensor& /*out*/) {
        const auto gm = as_matrix(grad, g.rows(), g.cout);
        if (kernel.requires_grad()) {
          as_matrix(t.grad_accumulator(kernel), g.patch(), g.cout).noalias() +=
              ConstMap(cols.get(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.patch()))
                  .transpose() *
              gm;
        }
        if (input.requires_grad()) {
          std::unique_ptr<double[]> dcols(new double[g.rows() * g.patch()]);
          MutMap(dcols.get(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.patch())).noalias() =
              gm * as_matrix(kernel.value(), g.patch(), g.cout).transpose();
          col2im_add(g, dcols.get(), t.grad_accumulator(input).raw());
        }
      });
}

Var logabsdet(Var w) {
  const LuFactors lu = lu_factor(w.value());
  const double value = lu.log_abs_det();
  return w.tape()->record(Tensor::scalar(value), {w}, [w, lu](Tape& t, const Tensor& g, const Tensor& /*out*/) {
    const std::size_t n = lu.n;
    const Tensor inv = lu.inverse();
    Tensor& acc = t.grad_accumulator(w);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) acc[i * n + j] += g[0] * inv[j * n + i];
    }
  });
}

Var inverse(Var w) {
  Tensor inv = lu_factor(w.value()).inverse();
  const std::size_t n = inv.extent(0);
  return w.tape()->record(std::move(inv), {w}, [w, n](Tape& t, const Tensor& g, const Tensor& out) {
    // d(W⁻¹) = -W⁻¹ dW W⁻¹  =>  dL/dW = -W⁻ᵀ G W⁻ᵀ
    const auto inv_m = as_matrix(out, n, n);
    as_matrix(t.grad_accumulator(w), n, n).noalias() -= inv_m.transpose() * as_matrix(g, n, n) * inv_m.transpose();
  });
}

}  // namespace linf::ad
