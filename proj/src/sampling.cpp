#include "fpk/sampling.hpp"

#include <cmath>
#include <cstdlib>
#include <exception>
#include <string>

namespace fpk {

namespace {
constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
}

double halton(std::size_t index, unsigned base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

PointSet halton_points(const std::vector<std::pair<double, double>>& box,
                       const SampleProtocol& proto, double shrink) {
    if (box.size() > std::size(kPrimes)) throw DomainError("too many dimensions for Halton sampling");
    PointSet pts(proto.count, std::vector<double>(box.size()));
    for (std::size_t i = 0; i < proto.count; ++i)
        for (std::size_t d = 0; d < box.size(); ++d) {
            double u = halton(i + 1 + proto.offset, kPrimes[d]);
            double lo = box[d].first, hi = box[d].second;
            double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo) * shrink;
            pts[i][d] = mid + (2.0 * u - 1.0) * half;
        }
    return pts;
}

PointSet halton_points(const Chart& chart, const SampleProtocol& proto, double shrink) {
    return halton_points(chart.domain, proto, shrink);
}

std::size_t default_sample_count() {
    if (const char* env = std::getenv("FPK_POINTS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return 64;
}

void for_each_point(std::size_t n, const std::function<void(std::size_t)>& body, Exec exec) {
    if (exec == Exec::Serial) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    // Exceptions may not cross the OpenMP region; keep the first and rethrow.
    std::exception_ptr err;
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(fpk_point_error)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
}

std::vector<std::vector<double>> evaluate_all(const std::vector<Expr>& exprs,
                                              const PointSet& points, Exec exec) {
    std::vector<std::vector<double>> out(points.size(), std::vector<double>(exprs.size()));
    const Tape tape(exprs);
    for_each_point(points.size(), [&](std::size_t p) {
        std::vector<double> scratch;
        tape.run(points[p].data(), out[p].data(), scratch);
    }, exec);
    return out;
}

namespace {
// NaN outranks everything and, once seen, is never displaced.
bool worse(double v, double m) { return std::isnan(v) ? !std::isnan(m) : v > m; }
}  // namespace

MaxAbs max_abs(const std::vector<Expr>& exprs, const PointSet& points, Exec exec) {
    std::vector<double> per(points.size(), 0.0);
    std::vector<Expr> live;
    for (const auto& e : exprs)
        if (!e.is_zero()) live.push_back(e);
    const Tape tape(live);
    for_each_point(points.size(), [&](std::size_t p) {
        std::vector<double> vals(live.size()), scratch;
        tape.run(points[p].data(), vals.data(), scratch);
        double m = 0.0;
        for (double v : vals)
            if (worse(std::abs(v), m)) m = std::abs(v);
        per[p] = m;
    }, exec);
    MaxAbs r;
    for (std::size_t p = 0; p < per.size(); ++p)
        if (worse(per[p], r.value)) {
            r.value = per[p];
            r.point = p;
        }
    return r;
}

}  // namespace fpk
