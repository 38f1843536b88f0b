#pragma once

#include <vector>

#include "fpk/expr.hpp"
#include "fpk/linalg.hpp"
#include "fpk/sampling.hpp"

namespace fpk {

// Dense matrix of expressions; rows of columns.
using SymMat = std::vector<std::vector<Expr>>;

SymMat sym_zero(std::size_t r, std::size_t c);
SymMat sym_identity(std::size_t n);
SymMat sym_mul(const SymMat& a, const SymMat& b);
SymMat sym_transpose(const SymMat& a);
la::Mat sym_eval(const SymMat& a, const double* x);

// Gauss–Jordan inverse.  Pivots are chosen by magnitude at `ref`, a point
// where the matrix is known to be well conditioned; throws Degenerate if a
// pivot there falls below `tol`.
SymMat sym_inverse(const SymMat& m, const std::vector<double>& ref, double tol = 1e-10);

// Picks the sample point where |det m| is largest, as a pivoting reference.
std::vector<double> best_reference(const SymMat& m, const PointSet& pts);

}  // namespace fpk
