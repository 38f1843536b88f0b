#pragma once

#include <cstddef>
#include <vector>

namespace fpk::la {

// Small dense row-major matrix; sizes here stay around a dozen.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}
    static Mat identity(std::size_t n);

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    Mat transpose() const;
    double max_abs() const;
};

Mat operator*(const Mat& x, const Mat& y);
Mat operator-(const Mat& x, const Mat& y);
Mat operator+(const Mat& x, const Mat& y);
std::vector<double> operator*(const Mat& x, const std::vector<double>& v);

// LU with partial pivoting.  `ok` is false when a pivot falls below `pivot_tol`.
struct LU {
    Mat lu;
    std::vector<std::size_t> perm;
    int sign = 1;
    bool ok = true;

    explicit LU(const Mat& m, double pivot_tol = 0.0);
    std::vector<double> solve(const std::vector<double>& b) const;
    Mat inverse() const;
    double det() const;
};

// Returns false (and leaves `out` untouched) when the matrix is numerically singular.
bool invert(const Mat& m, Mat& out, double pivot_tol = 1e-300);
double det(const Mat& m);
// Pfaffian of an antisymmetric matrix (0 for odd size); pf² = det.
double pfaffian(const Mat& m);

// One-sided Jacobi SVD: m = U diag(s) V^T with s descending.
struct SVD {
    Mat u, v;
    std::vector<double> s;
    explicit SVD(const Mat& m);
    // Count of singular values above rel_tol * s_max.
    std::size_t rank(double rel_tol = 1e-8) const;
    // Orthonormal basis (columns) of the null space relative to rel_tol.
    Mat null_space(double rel_tol = 1e-8) const;
};

std::size_t rank(const Mat& m, double rel_tol = 1e-8);

}  // namespace fpk::la
