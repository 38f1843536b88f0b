#include "fpk/symbolic.hpp"

#include <cmath>

namespace fpk {

SymMat sym_zero(std::size_t r, std::size_t c) { return SymMat(r, std::vector<Expr>(c, Expr(0.0))); }

SymMat sym_identity(std::size_t n) {
    SymMat m = sym_zero(n, n);
    for (std::size_t i = 0; i < n; ++i) m[i][i] = Expr(1.0);
    return m;
}

SymMat sym_mul(const SymMat& a, const SymMat& b) {
    const std::size_t r = a.size(), k = b.size(), c = b.empty() ? 0 : b[0].size();
    SymMat out = sym_zero(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            Expr s;
            for (std::size_t l = 0; l < k; ++l) s += a[i][l] * b[l][j];
            out[i][j] = s;
        }
    return out;
}

SymMat sym_transpose(const SymMat& a) {
    if (a.empty()) return a;
    SymMat t = sym_zero(a[0].size(), a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
    return t;
}

la::Mat sym_eval(const SymMat& a, const double* x) {
    la::Mat m(a.size(), a.empty() ? 0 : a[0].size());
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = a[i][j].eval(x);
    return m;
}

SymMat sym_inverse(const SymMat& m, const std::vector<double>& ref, double tol) {
    const std::size_t n = m.size();
    SymMat a = m, inv = sym_identity(n);
    la::Mat num = sym_eval(m, ref.data()), numinv = la::Mat::identity(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(num(i, k)) > std::abs(num(p, k))) p = i;
        if (std::abs(num(p, k)) < tol) throw Degenerate("matrix is singular at the reference point");
        if (p != k) {
            std::swap(a[p], a[k]);
            std::swap(inv[p], inv[k]);
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(num(p, j), num(k, j));
                std::swap(numinv(p, j), numinv(k, j));
            }
        }
        const Expr piv = a[k][k];
        const double npiv = num(k, k);
        for (std::size_t j = 0; j < n; ++j) {
            a[k][j] = a[k][j] / piv;
            inv[k][j] = inv[k][j] / piv;
            num(k, j) /= npiv;
            numinv(k, j) /= npiv;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == k || a[i][k].is_zero()) continue;
            const Expr f = a[i][k];
            const double nf = num(i, k);
            for (std::size_t j = 0; j < n; ++j) {
                if (!a[k][j].is_zero()) a[i][j] = a[i][j] - f * a[k][j];
                if (!inv[k][j].is_zero()) inv[i][j] = inv[i][j] - f * inv[k][j];
                num(i, j) -= nf * num(k, j);
                numinv(i, j) -= nf * numinv(k, j);
            }
            a[i][k] = Expr(0.0);
        }
    }
    return inv;
}

std::vector<double> best_reference(const SymMat& m, const PointSet& pts) {
    std::vector<double> best;
    double bd = -1.0;
    for (const auto& p : pts) {
        double d = std::abs(la::det(sym_eval(m, p.data())));
        if (d > bd) {
            bd = d;
            best = p;
        }
    }
    return best;
}

}  // namespace fpk
