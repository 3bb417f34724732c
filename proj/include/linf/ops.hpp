#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "linf/tape.hpp"

/// Differentiable primitives over Tape variables. Matrices are rank-2 row-major;
/// "row" vectors may have any shape whose element count matches.
namespace linf::ad {

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

/// a[M×N] + row[N], broadcast over rows.
Var add_row(Var a, Var row);
/// a[M×N] scaled per row by col[M].
Var mul_col(Var a, Var col);

Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
inline Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a);
Var exp(Var a);
Var cos(Var a);
Var sin(Var a);
/// [r×k] -> [cos(a) | sin(a)] as one [r×2k] matrix.
Var cos_sin(Var a);
Var abs(Var a);
Var square(Var a);
/// Gradient is passed where lo < a < hi and zero elsewhere.
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var mean(Var a);
/// a[M×N] -> [M].
Var sum_rows(Var a);

Var reshape(Var a, Shape shape);
/// Scalar s broadcast to a tensor of `shape`.
Var broadcast_scalar(Var s, Shape shape);
/// Columns [begin, end) of a[M×N].
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);

/// out[i,:] = a[indices[i],:]; backward scatter-adds.
Var gather_rows(Var a, std::vector<std::size_t> indices);

/// Same-padded 2D convolution, NHWC input (rank 4, or rank 3 for a single image)
/// with kernel [k×k×Cin×Cout]. Zero padding; k must be odd.
Var conv2d(Var input, Var kernel);

/// log|det W| of a square matrix; gradient W⁻ᵀ.
Var logabsdet(Var w);
Var inverse(Var w);

}  // namespace linf::ad
