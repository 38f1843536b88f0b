#include "fpk/tensor.hpp"

#include <algorithm>

namespace fpk {

int sort_index(Index& idx) {
    int sign = 1;
    for (std::size_t i = 1; i < idx.size(); ++i)
        for (std::size_t j = i; j > 0 && idx[j - 1] >= idx[j]; --j) {
            if (idx[j - 1] == idx[j]) return 0;
            std::swap(idx[j - 1], idx[j]);
            sign = -sign;
        }
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (idx[i - 1] == idx[i]) return 0;
    return sign;
}

std::vector<Index> combinations(int n, int k) {
    std::vector<Index> out;
    if (k < 0 || k > n) return out;
    Index cur(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) cur[static_cast<std::size_t>(i)] = i;
    for (;;) {
        out.push_back(cur);
        int i = k - 1;
        while (i >= 0 && cur[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++cur[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

bool same_chart(const ChartPtr& a, const ChartPtr& b) {
    return a == b || (a && b && a->names == b->names);
}

void require_same_chart(const ChartPtr& a, const ChartPtr& b, const char* what) {
    if (!same_chart(a, b)) throw ChartMismatch(std::string(what) + ": operands on different charts");
}

namespace {

// Sign of the shuffle that sorts the concatenation (I,J) of two disjoint
// increasing tuples; 0 if they overlap.  `merged` receives the sorted union.
int shuffle(const Index& i, const Index& j, Index& merged) {
    merged.clear();
    merged.reserve(i.size() + j.size());
    int inversions = 0;
    std::size_t a = 0, b = 0;
    while (a < i.size() || b < j.size()) {
        if (b == j.size() || (a < i.size() && i[a] < j[b])) {
            merged.push_back(i[a++]);
        } else if (a == i.size() || j[b] < i[a]) {
            inversions += static_cast<int>(i.size() - a);
            merged.push_back(j[b++]);
        } else {
            return 0;
        }
    }
    return inversions % 2 ? -1 : 1;
}

// If `sub` ⊂ `full` (both increasing), writes full∖sub to `rest` and returns
// the sign of sorting (sub, rest) into full; otherwise 0.
int split(const Index& full, const Index& sub, Index& rest) {
    rest.clear();
    std::size_t a = 0;
    for (int v : full) {
        if (a < sub.size() && sub[a] == v) ++a;
        else rest.push_back(v);
    }
    if (a != sub.size()) return 0;
    Index merged;
    return shuffle(sub, rest, merged);
}

template <Variance V, Variance W>
Alt<W> contract_leading(const Alt<V>& small, const Alt<W>& big) {
    require_same_chart(small.chart(), big.chart(), "interior product");
    if (small.degree() > big.degree()) throw DegreeError("interior product degree too high");
    Alt<W> r(big.chart(), big.degree() - small.degree());
    Index rest;
    for (const auto& [k, f] : big.components())
        for (const auto& [i, p] : small.components()) {
            int s = split(k, i, rest);
            if (s == 0) continue;
            r.add(rest, s > 0 ? p * f : -(p * f));
        }
    return r;
}

}  // namespace

template <Variance V>
Alt<V> wedge(const Alt<V>& a, const Alt<V>& b) {
    require_same_chart(a.chart(), b.chart(), "wedge");
    if (a.degree() + b.degree() > a.dim()) throw DegreeOverflow("wedge degree exceeds dimension");
    Alt<V> r(a.chart(), a.degree() + b.degree());
    Index merged;
    for (const auto& [i, x] : a.components())
        for (const auto& [j, y] : b.components()) {
            int s = shuffle(i, j, merged);
            if (s == 0) continue;
            r.add(merged, s > 0 ? x * y : -(x * y));
        }
    return r;
}

template MultivectorField wedge(const MultivectorField&, const MultivectorField&);
template DifferentialForm wedge(const DifferentialForm&, const DifferentialForm&);

DifferentialForm interior_product(const MultivectorField& p, const DifferentialForm& phi) {
    return contract_leading(p, phi);
}

MultivectorField interior_product(const DifferentialForm& alpha, const MultivectorField& p) {
    return contract_leading(alpha, p);
}

Expr pairing(const MultivectorField& p, const DifferentialForm& phi) {
    require_same_chart(p.chart(), phi.chart(), "pairing");
    if (p.degree() != phi.degree()) throw DegreeError("pairing of unequal degrees");
    Expr s;
    for (const auto& [k, f] : p.components()) {
        auto it = phi.components().find(k);
        if (it != phi.components().end()) s += f * it->second;
    }
    return s;
}

Expr evaluate_on(const MultivectorField& p, const std::vector<DifferentialForm>& forms) {
    if (static_cast<int>(forms.size()) != p.degree()) throw DegreeError("argument count mismatch");
    DifferentialForm w = DifferentialForm::scalar(p.chart(), Expr(1.0));
    for (const auto& f : forms) w = wedge(w, f);
    return pairing(p, w);
}

Expr evaluate_on(const DifferentialForm& phi, const std::vector<MultivectorField>& vecs) {
    if (static_cast<int>(vecs.size()) != phi.degree()) throw DegreeError("argument count mismatch");
    MultivectorField w = MultivectorField::scalar(phi.chart(), Expr(1.0));
    for (const auto& v : vecs) w = wedge(w, v);
    return pairing(w, phi);
}

DifferentialForm exterior_derivative(const DifferentialForm& phi) {
    if (phi.degree() >= phi.dim()) return DifferentialForm(phi.chart(), phi.dim());
    DifferentialForm r(phi.chart(), phi.degree() + 1);
    for (const auto& [k, f] : phi.components())
        for (int l = 0; l < phi.dim(); ++l) {
            if (std::binary_search(k.begin(), k.end(), l)) continue;
            Expr df = f.diff(l);
            if (df.is_zero()) continue;
            Index idx{l};
            idx.insert(idx.end(), k.begin(), k.end());
            r.add(idx, df);
        }
    return r;
}

DifferentialForm differential(const ChartPtr& chart, const Expr& f) {
    return exterior_derivative(DifferentialForm::scalar(chart, f));
}

Expr apply(const MultivectorField& x, const Expr& f) {
    if (x.degree() != 1) throw DegreeError("vector field expected");
    Expr s;
    for (const auto& [k, c] : x.components()) s += c * f.diff(k[0]);
    return s;
}

MultivectorField lie_bracket(const MultivectorField& x, const MultivectorField& y) {
    require_same_chart(x.chart(), y.chart(), "Lie bracket");
    if (x.degree() != 1 || y.degree() != 1) throw DegreeError("Lie bracket needs vector fields");
    MultivectorField r(x.chart(), 1);
    for (int j = 0; j < x.dim(); ++j) {
        Expr yj = y.get({j}), xj = x.get({j});
        r.add({j}, apply(x, yj) - apply(y, xj));
    }
    return r;
}

DifferentialForm lie_derivative(const MultivectorField& x, const DifferentialForm& phi) {
    require_same_chart(x.chart(), phi.chart(), "Lie derivative");
    if (x.degree() != 1) throw DegreeError("Lie derivative along a vector field only");
    if (phi.degree() == 0) return DifferentialForm::scalar(phi.chart(), apply(x, phi.get({})));
    DifferentialForm a = interior_product(x, exterior_derivative(phi));
    DifferentialForm b = exterior_derivative(interior_product(x, phi));
    return a + b;
}

MultivectorField lie_derivative(const MultivectorField& x, const MultivectorField& t) {
    require_same_chart(x.chart(), t.chart(), "Lie derivative");
    if (x.degree() != 1) throw DegreeError("Lie derivative along a vector field only");
    MultivectorField r(t.chart(), t.degree());
    for (const auto& [k, q] : t.components()) {
        r.add(k, apply(x, q));
        // each slot i of k is replaced by [X, ∂_i] = -(∂_i X^l) ∂_l
        for (std::size_t pos = 0; pos < k.size(); ++pos)
            for (const auto& [xl, xc] : x.components()) {
                Expr g = xc.diff(k[pos]);
                if (g.is_zero()) continue;
                Index idx = k;
                idx[pos] = xl[0];
                r.add(idx, -(q * g));
            }
    }
    return r;
}

MultivectorField sharp(const MultivectorField& p, const DifferentialForm& alpha) {
    if (p.degree() != 2 || alpha.degree() != 1) throw DegreeError("sharp needs a bivector and a 1-form");
    return interior_product(alpha, p);
}

Expr bivector_on(const MultivectorField& p, const DifferentialForm& a, const DifferentialForm& b) {
    return evaluate_on(p, {a, b});
}

DifferentialForm one_form_bracket(const MultivectorField& p, const DifferentialForm& a,
                                  const DifferentialForm& b) {
    if (p.degree() != 2 || a.degree() != 1 || b.degree() != 1)
        throw DegreeError("1-form bracket needs a bivector and two 1-forms");
    DifferentialForm r = interior_product(sharp(p, a), exterior_derivative(b));
    r -= interior_product(sharp(p, b), exterior_derivative(a));
    r += differential(p.chart(), bivector_on(p, a, b));
    return r;
}

MultivectorField schouten_standard(const MultivectorField& p, const MultivectorField& q) {
    require_same_chart(p.chart(), q.chart(), "Schouten bracket");
    const int dp = p.degree(), dq = q.degree();
    if (dp + dq > p.dim() + 1) throw DegreeOverflow("bracket degree exceeds dimension");
    const int out_deg = std::max(dp + dq - 1, 0);
    MultivectorField r(p.chart(), out_deg);
    if (dp + dq == 0) return r;
    const bool odd = ((dp - 1) * (dq - 1)) % 2 != 0;
    Index rest, merged;
    // Σ_l (∂P/∂ξ_l, from the right)(∂Q/∂x^l) − (−1)^{(p−1)(q−1)} (∂Q/∂ξ_l)(∂P/∂x^l)
    auto half = [&](const MultivectorField& a, const MultivectorField& b, bool negate) {
        // derivatives of b are reused across every component of a
        std::vector<std::pair<Index, std::vector<Expr>>> grad;
        grad.reserve(b.components().size());
        for (const auto& [ib, cb] : b.components()) {
            std::vector<Expr> g(static_cast<std::size_t>(p.dim()));
            for (int l = 0; l < p.dim(); ++l) g[static_cast<std::size_t>(l)] = cb.diff(l);
            grad.emplace_back(ib, std::move(g));
        }
        for (const auto& [ia, ca] : a.components())
            for (std::size_t pos = 0; pos < ia.size(); ++pos) {
                const int l = ia[pos];
                rest = ia;
                rest.erase(rest.begin() + static_cast<long>(pos));
                const bool rsign = (ia.size() - 1 - pos) % 2 != 0;
                for (const auto& [ib, g] : grad) {
                    const Expr& db = g[static_cast<std::size_t>(l)];
                    if (db.is_zero()) continue;
                    int s = shuffle(rest, ib, merged);
                    if (s == 0) continue;
                    if (rsign) s = -s;
                    if (negate) s = -s;
                    Expr term = ca * db;
                    r.add(merged, s > 0 ? term : -term);
                }
            }
    };
    half(p, q, false);
    half(q, p, !odd);
    return r;
}

MultivectorField schouten_bracket(const MultivectorField& p, const MultivectorField& q) {
    MultivectorField r = schouten_standard(p, q);
    return p.degree() % 2 ? r : -r;
}

Expr lichnerowicz_expr(const MultivectorField& p, const MultivectorField& q,
                       const DifferentialForm& phi) {
    require_same_chart(p.chart(), q.chart(), "Lichnerowicz pairing");
    require_same_chart(p.chart(), phi.chart(), "Lichnerowicz pairing");
    const int dp = p.degree(), dq = q.degree();
    if (phi.degree() != dp + dq - 1) throw DegreeError("form degree must be deg P + deg Q - 1");
    const Expr s1 = (dq * (dp + 1)) % 2 ? Expr(-1.0) : Expr(1.0);
    const Expr s2 = dp % 2 ? Expr(-1.0) : Expr(1.0);
    Expr a = pairing(p, exterior_derivative(interior_product(q, phi)));
    Expr b = pairing(q, exterior_derivative(interior_product(p, phi)));
    Expr c;
    if (dp + dq <= p.dim()) c = pairing(wedge(p, q), exterior_derivative(phi));
    return s1 * a + s2 * b - c;
}

ScalarField lichnerowicz_pairing(const MultivectorField& p, const MultivectorField& q,
                                 const DifferentialForm& phi) {
    return ScalarField(p.chart(), lichnerowicz_expr(p, q, phi));
}

la::Mat matrix_at(const MultivectorField& p, const double* x) {
    if (p.degree() != 2) throw DegreeError("bivector expected");
    const auto n = static_cast<std::size_t>(p.dim());
    la::Mat m(n, n);
    for (const auto& [k, e] : p.components()) {
        double v = e.eval(x);
        m(static_cast<std::size_t>(k[0]), static_cast<std::size_t>(k[1])) = v;
        m(static_cast<std::size_t>(k[1]), static_cast<std::size_t>(k[0])) = -v;
    }
    return m;
}

la::Mat matrix_at(const DifferentialForm& w, const double* x) {
    if (w.degree() != 2) throw DegreeError("2-form expected");
    const auto n = static_cast<std::size_t>(w.dim());
    la::Mat m(n, n);
    for (const auto& [k, e] : w.components()) {
        double v = e.eval(x);
        m(static_cast<std::size_t>(k[0]), static_cast<std::size_t>(k[1])) = v;
        m(static_cast<std::size_t>(k[1]), static_cast<std::size_t>(k[0])) = -v;
    }
    return m;
}

std::vector<double> ChartMap::apply(const double* x) const {
    std::vector<double> y(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) y[i] = comps[i].eval(x);
    return y;
}

la::Mat ChartMap::jacobian(const double* x) const {
    const std::size_t n = source->dim();
    la::Mat j(comps.size(), n);
    for (std::size_t a = 0; a < comps.size(); ++a)
        for (std::size_t i = 0; i < n; ++i) j(a, i) = comps[a].diff(static_cast<int>(i)).eval(x);
    return j;
}

std::vector<PushedSample> pushforward(const ChartMap& phi, const MultivectorField& p,
                                      const PointSet& source_points, double det_tol) {
    require_same_chart(phi.source, p.chart(), "pushforward");
    if (phi.comps.size() != phi.target->dim()) throw DegreeError("chart map needs one component per target coordinate");
    const int m = static_cast<int>(phi.target->dim());
    const auto targets = combinations(m, p.degree());
    std::vector<PushedSample> out(source_points.size());
    for_each_point(source_points.size(), [&](std::size_t n) {
        const double* x = source_points[n].data();
        la::Mat jac = phi.jacobian(x);
        if (jac.rows == jac.cols && std::abs(la::det(jac)) < det_tol)
            throw SingularJacobian("chart map Jacobian is singular at a sample point");
        PushedSample s;
        s.source_point = source_points[n];
        s.target_point = phi.apply(x);
        for (const auto& tgt : targets) {
            double sum = 0.0;
            for (const auto& [src, c] : p.components()) {
                const std::size_t k = src.size();
                la::Mat minor(k, k);
                for (std::size_t r = 0; r < k; ++r)
                    for (std::size_t cc = 0; cc < k; ++cc)
                        minor(r, cc) = jac(static_cast<std::size_t>(tgt[r]), static_cast<std::size_t>(src[cc]));
                double d = k == 0 ? 1.0 : la::det(minor);
                sum += c.eval(x) * d;
            }
            if (sum != 0.0) s.comps[tgt] = sum;
        }
        out[n] = std::move(s);
    }, Exec::Parallel);
    return out;
}

}  // namespace fpk
