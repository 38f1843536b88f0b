#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fpk/expr.hpp"

namespace fpk {

// Deterministic sample protocol: Halton points scaled into a box.
struct SampleProtocol {
    std::size_t count = 64;
    std::size_t offset = 0;  // index shift into the Halton sequence ("seed")
};

using PointSet = std::vector<std::vector<double>>;

double halton(std::size_t index, unsigned base);

// `shrink` pulls points toward the box centre so no sample lands on the boundary.
PointSet halton_points(const std::vector<std::pair<double, double>>& box,
                       const SampleProtocol& proto = {}, double shrink = 0.98);
PointSet halton_points(const Chart& chart, const SampleProtocol& proto = {}, double shrink = 0.98);

// Default count, overridable through FPK_POINTS.
std::size_t default_sample_count();

enum class Exec { Serial, Parallel };

// Per-point kernel driver.  Serial is the reference path; Parallel uses OpenMP.
void for_each_point(std::size_t n, const std::function<void(std::size_t)>& body, Exec exec);

// values[p][k] = exprs[k](points[p]).
std::vector<std::vector<double>> evaluate_all(const std::vector<Expr>& exprs,
                                              const PointSet& points,
                                              Exec exec = Exec::Parallel);

struct MaxAbs {
    double value = 0.0;
    std::size_t point = 0;  // index of the worst point
};

// Max |e(p)| over all expressions and points.
MaxAbs max_abs(const std::vector<Expr>& exprs, const PointSet& points, Exec exec = Exec::Parallel);

}  // namespace fpk
