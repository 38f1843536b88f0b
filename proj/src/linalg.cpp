#include "fpk/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fpk::la {

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::transpose() const {
    Mat t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double Mat::max_abs() const {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

Mat operator*(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matrix shape mismatch");
    Mat r(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            double v = x(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < y.cols; ++j) r(i, j) += v * y(k, j);
        }
    return r;
}

Mat operator-(const Mat& x, const Mat& y) {
    Mat r = x;
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
    return r;
}

Mat operator+(const Mat& x, const Mat& y) {
    Mat r = x;
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
    return r;
}

std::vector<double> operator*(const Mat& x, const std::vector<double>& v) {
    std::vector<double> r(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) r[i] += x(i, j) * v[j];
    return r;
}

LU::LU(const Mat& m, double pivot_tol) : lu(m), perm(m.rows) {
    if (m.rows != m.cols) throw std::invalid_argument("LU needs a square matrix");
    const std::size_t n = m.rows;
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(p, k))) p = i;
        if (std::abs(lu(p, k)) <= pivot_tol) {
            ok = false;
            continue;
        }
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
            std::swap(perm[k], perm[p]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            lu(i, k) /= lu(k, k);
            double f = lu(i, k);
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
        }
    }
}

std::vector<double> LU::solve(const std::vector<double>& b) const {
    if (!ok) throw std::runtime_error("LU solve on a singular matrix");
    const std::size_t n = lu.rows;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[perm[i]];
        for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * x[j];
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= lu(i, j) * x[j];
        x[i] = s / lu(i, i);
    }
    return x;
}

Mat LU::inverse() const {
    const std::size_t n = lu.rows;
    Mat inv(n, n);
    std::vector<double> e(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        auto col = solve(e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

double LU::det() const {
    if (!ok) return 0.0;
    double d = sign;
    for (std::size_t i = 0; i < lu.rows; ++i) d *= lu(i, i);
    return d;
}

bool invert(const Mat& m, Mat& out, double pivot_tol) {
    LU f(m, pivot_tol);
    if (!f.ok) return false;
    out = f.inverse();
    return true;
}

double det(const Mat& m) { return LU(m).det(); }

double pfaffian(const Mat& m) {
    const std::size_t n = m.rows;
    if (n % 2 == 1) return 0.0;
    Mat a = m;
    double pf = 1.0;
    for (std::size_t k = 0; k + 1 < n; k += 2) {
        // bring the largest entry of column k below the diagonal to row k+1
        std::size_t piv = k + 1;
        for (std::size_t i = k + 2; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (piv != k + 1) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k + 1, j), a(piv, j));
            for (std::size_t i = 0; i < n; ++i) std::swap(a(i, k + 1), a(i, piv));
            pf = -pf;
        }
        const double p = a(k, k + 1);
        if (p == 0.0) return 0.0;
        pf *= p;
        // congruence that clears row/column k beyond k+1
        for (std::size_t i = k + 2; i < n; ++i) {
            const double f = a(k, i) / p;
            for (std::size_t j = 0; j < n; ++j) a(i, j) -= f * a(k + 1, j);
            for (std::size_t j = 0; j < n; ++j) a(j, i) -= f * a(j, k + 1);
        }
    }
    return pf;
}

SVD::SVD(const Mat& m) {
    // Work on the taller orientation so columns are the short side.
    const bool flip = m.rows < m.cols;
    Mat w = flip ? m.transpose() : m;
    const std::size_t r = w.rows, c = w.cols;
    Mat vv = Mat::identity(c);
    for (int sweep = 0; sweep < 80; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < c; ++p)
            for (std::size_t q = p + 1; q < c; ++q) {
                double alpha = 0, beta = 0, gamma = 0;
                for (std::size_t i = 0; i < r; ++i) {
                    alpha += w(i, p) * w(i, p);
                    beta += w(i, q) * w(i, q);
                    gamma += w(i, p) * w(i, q);
                }
                if (gamma == 0.0) continue;
                double scale = std::sqrt(alpha * beta);
                if (scale == 0.0) continue;
                off = std::max(off, std::abs(gamma) / scale);
                double zeta = (beta - alpha) / (2.0 * gamma);
                double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double cs = 1.0 / std::sqrt(1.0 + t * t), sn = cs * t;
                for (std::size_t i = 0; i < r; ++i) {
                    double a = w(i, p), b = w(i, q);
                    w(i, p) = cs * a - sn * b;
                    w(i, q) = sn * a + cs * b;
                }
                for (std::size_t i = 0; i < c; ++i) {
                    double a = vv(i, p), b = vv(i, q);
                    vv(i, p) = cs * a - sn * b;
                    vv(i, q) = sn * a + cs * b;
                }
            }
        if (off < 1e-15) break;
    }
    std::vector<double> sv(c);
    for (std::size_t j = 0; j < c; ++j) {
        double n = 0;
        for (std::size_t i = 0; i < r; ++i) n += w(i, j) * w(i, j);
        sv[j] = std::sqrt(n);
    }
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return sv[x] > sv[y]; });
    Mat uu(r, c), v2(c, c);
    s.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        std::size_t j = order[k];
        s[k] = sv[j];
        for (std::size_t i = 0; i < r; ++i) uu(i, k) = sv[j] > 0 ? w(i, j) / sv[j] : 0.0;
        for (std::size_t i = 0; i < c; ++i) v2(i, k) = vv(i, j);
    }
    if (flip) {
        u = v2;
        v = uu;
    } else {
        u = uu;
        v = v2;
    }
}

std::size_t SVD::rank(double rel_tol) const {
    if (s.empty() || s[0] == 0.0) return 0;
    std::size_t k = 0;
    for (double x : s)
        if (x > rel_tol * s[0]) ++k;
    return k;
}

Mat SVD::null_space(double rel_tol) const {
    // v has one column per singular value of the short side; when the matrix
    // is wide the trailing directions have no singular value and are null too.
    const std::size_t n = v.rows;
    const std::size_t k = rank(rel_tol);
    // Complete v's columns to a basis of R^n if needed (wide case).
    Mat basis = v;
    if (v.cols < n) {
        // Gram-Schmidt against the standard basis.
        std::vector<std::vector<double>> cols;
        for (std::size_t j = 0; j < v.cols; ++j) {
            std::vector<double> c(n);
            for (std::size_t i = 0; i < n; ++i) c[i] = v(i, j);
            cols.push_back(c);
        }
        for (std::size_t e = 0; e < n && cols.size() < n; ++e) {
            std::vector<double> c(n, 0.0);
            c[e] = 1.0;
            for (const auto& b : cols) {
                double d = 0;
                for (std::size_t i = 0; i < n; ++i) d += b[i] * c[i];
                for (std::size_t i = 0; i < n; ++i) c[i] -= d * b[i];
            }
            double nn = 0;
            for (double x : c) nn += x * x;
            nn = std::sqrt(nn);
            if (nn < 1e-8) continue;
            for (double& x : c) x /= nn;
            cols.push_back(c);
        }
        basis = Mat(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) basis(i, j) = cols[j][i];
    }
    Mat ns(n, n - k);
    for (std::size_t j = k; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) ns(i, j - k) = basis(i, j);
    return ns;
}

std::size_t rank(const Mat& m, double rel_tol) {
    if (m.rows == 0 || m.cols == 0) return 0;
    return SVD(m).rank(rel_tol);
}

}  // namespace fpk::la
