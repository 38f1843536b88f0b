#include "fpk/foliation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

namespace fpk {

// ---- foliated charts and normal bundles ------------------------------------------

FoliatedChart make_foliated(ChartPtr chart, std::vector<int> leaf_slots) {
    if (!chart) throw ChartMismatch("foliation without a chart");
    const int n = static_cast<int>(chart->dim());
    std::set<int> seen;
    for (int s : leaf_slots) {
        if (s < 0 || s >= n) throw DegreeError("leaf coordinate slot out of range");
        if (!seen.insert(s).second) throw DegreeError("repeated leaf coordinate");
    }
    FoliatedChart f;
    f.chart = std::move(chart);
    f.leaf = std::move(leaf_slots);
    for (int i = 0; i < n; ++i)
        if (!seen.count(i)) f.transverse.push_back(i);
    return f;
}

FoliatedChart make_foliated(ChartPtr chart, const std::vector<std::string>& leaf_names) {
    std::vector<int> slots;
    for (const auto& nm : leaf_names) {
        auto k = chart->index_of(nm);
        if (k < 0) throw UnknownSymbol("'" + nm + "' is not a coordinate of the chart");
        slots.push_back(static_cast<int>(k));
    }
    return make_foliated(std::move(chart), std::move(slots));
}

NormalBundle NormalBundle::flat(const FoliatedChart& fol) {
    return NormalBundle{fol, sym_zero(fol.q(), fol.p())};
}

MultivectorField NormalBundle::horizontal(int a) const {
    auto x = MultivectorField::basis(fol.chart, {fol.transverse[a]});
    for (int u = 0; u < fol.p(); ++u) x.add({fol.leaf[u]}, gamma[a][u]);
    return x;
}

MultivectorField NormalBundle::vertical(int u) const { return MultivectorField::basis(fol.chart, {fol.leaf[u]}); }

DifferentialForm NormalBundle::transverse_form(int a) const {
    return DifferentialForm::basis(fol.chart, {fol.transverse[a]});
}

DifferentialForm NormalBundle::leaf_form(int u) const {
    auto t = DifferentialForm::basis(fol.chart, {fol.leaf[u]});
    for (int a = 0; a < fol.q(); ++a) t.add({fol.transverse[a]}, -gamma[a][u]);
    return t;
}

std::vector<MultivectorField> NormalBundle::frame() const {
    std::vector<MultivectorField> f;
    for (int a = 0; a < fol.q(); ++a) f.push_back(horizontal(a));
    for (int u = 0; u < fol.p(); ++u) f.push_back(vertical(u));
    return f;
}

std::vector<DifferentialForm> NormalBundle::coframe() const {
    std::vector<DifferentialForm> f;
    for (int a = 0; a < fol.q(); ++a) f.push_back(transverse_form(a));
    for (int u = 0; u < fol.p(); ++u) f.push_back(leaf_form(u));
    return f;
}

// ---- bigrading -------------------------------------------------------------------

namespace {

template <Variance V>
Alt<V> wedge_all(const ChartPtr& c, const std::vector<Alt<V>>& items, const Index& idx) {
    Alt<V> acc = Alt<V>::scalar(c, Expr(1.0));
    for (int i : idx) acc = wedge(acc, items[i]);
    return acc;
}

template <Variance V, class Dual>
Bigraded<V> bigrade_impl(const Alt<V>& t, const NormalBundle& h, const std::vector<Alt<V>>& basis,
                         const std::vector<Dual>& dual) {
    require_same_chart(t.chart(), h.fol.chart, "bigrade");
    Bigraded<V> out;
    out.chart = t.chart();
    out.degree = t.degree();
    if (t.degree() == 0) {
        if (!t.is_zero()) out.parts.emplace(Bidegree{0, 0}, t);
        return out;
    }
    const int q = h.fol.q();
    for (const auto& idx : combinations(t.dim(), t.degree())) {
        std::vector<Dual> args;
        int r = 0;
        for (int i : idx) {
            args.push_back(dual[i]);
            if (i < q) ++r;
        }
        Expr c = evaluate_on(t, args);
        if (c.is_zero()) continue;
        Bidegree key{r, t.degree() - r};
        auto it = out.parts.find(key);
        if (it == out.parts.end()) it = out.parts.emplace(key, Alt<V>(t.chart(), t.degree())).first;
        it->second += c * wedge_all(t.chart(), basis, idx);
    }
    for (auto it = out.parts.begin(); it != out.parts.end();)
        it = it->second.is_zero() ? out.parts.erase(it) : std::next(it);
    return out;
}

}  // namespace

Bigraded<Variance::Contra> bigrade(const MultivectorField& t, const NormalBundle& h) {
    return bigrade_impl(t, h, h.frame(), h.coframe());
}

Bigraded<Variance::Co> bigrade(const DifferentialForm& t, const NormalBundle& h) {
    return bigrade_impl(t, h, h.coframe(), h.frame());
}

DSplit d_split(const DifferentialForm& phi, const NormalBundle& h) {
    const ChartPtr& c = phi.chart();
    const int k = phi.degree() + 1;
    DSplit out{DifferentialForm(c, k), DifferentialForm(c, k), DifferentialForm(c, k)};
    if (k > phi.dim()) return out;
    for (const auto& [rs, piece] : bigrade(phi, h).parts) {
        const auto [r, s] = rs;
        const auto dp = bigrade(exterior_derivative(piece), h);
        out.d1 += dp.get(r + 1, s);
        out.d2 += dp.get(r, s + 1);
        if (s >= 1) out.del += dp.get(r + 2, s - 1);
    }
    return out;
}

MultivectorField project_leaf(const MultivectorField& v, const NormalBundle& h) {
    MultivectorField out = v;
    for (int a = 0; a < h.fol.q(); ++a) out -= v.get({h.fol.transverse[a]}) * h.horizontal(a);
    return out;
}

// ---- classification ----------------------------------------------------------------

const char* to_string(FoliationClass c) {
    switch (c) {
        case FoliationClass::LeafTangent: return "leaf_tangent";
        case FoliationClass::Coupling: return "coupling";
        case FoliationClass::AlmostCoupling: return "almost_coupling";
        case FoliationClass::None: return "none";
    }
    return "none";
}

namespace {

la::Mat transverse_block(const MultivectorField& p, const FoliatedChart& fol, const double* x) {
    la::Mat m(fol.q(), fol.q());
    for (int a = 0; a < fol.q(); ++a)
        for (int b = 0; b < fol.q(); ++b) m(a, b) = p.get({fol.transverse[a], fol.transverse[b]}).eval(x);
    return m;
}

bool nondegenerate(const la::Mat& m, double scale) {
    if (m.rows == 0) return true;
    la::SVD svd(m);
    return svd.s.back() > 1e-8 * std::max(1.0, scale);
}

std::string point_str(const std::vector<double>& x) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

void require_leaf_tangent_structure(const MultivectorField& p, const FoliatedChart& fol) {
    for (const auto& [idx, e] : p.components())
        for (int s : idx)
            if (std::find(fol.transverse.begin(), fol.transverse.end(), s) != fol.transverse.end())
                throw NotLeafTangent("bivector has a component along a transverse coordinate");
}

}  // namespace

NormalBundle coupling_normal_bundle(const MultivectorField& p, const FoliatedChart& fol, const PointSet& pts) {
    require_same_chart(p.chart(), fol.chart, "coupling normal bundle");
    const int q = fol.q(), pl = fol.p();
    if (q % 2 != 0) throw NotCoupling("odd codimension admits no coupling bivector");
    SymMat m = sym_zero(q, q);
    for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) m[a][b] = p.get({fol.transverse[a], fol.transverse[b]});
    for (const auto& x : pts) {
        const auto mm = sym_eval(m, x.data());
        if (!nondegenerate(mm, 1.0))
            throw NotCoupling("sharp(ann F) is not transverse at " + point_str(x));
    }
    NormalBundle h = NormalBundle::flat(fol);
    if (q == 0) return h;
    const SymMat inv = sym_inverse(m, best_reference(m, pts));
    for (int c = 0; c < q; ++c)
        for (int u = 0; u < pl; ++u) {
            Expr g;
            for (int a = 0; a < q; ++a) g += inv[c][a] * p.get({fol.transverse[a], fol.leaf[u]});
            h.gamma[c][u] = g;
        }
    return h;
}

Classification classify_bivector(const MultivectorField& p, const FoliatedChart& fol,
                                 const std::optional<NormalBundle>& h, const PointSet& pts, double tol) {
    if (p.degree() != 2) throw DegreeError("classification needs a bivector");
    require_same_chart(p.chart(), fol.chart, "classification");
    std::optional<MultivectorField> mixed;
    if (h) mixed = bigrade(p, *h).get(1, 1);

    std::map<FoliationClass, std::vector<double>> witness;
    for (const auto& x : pts) {
        const auto full = matrix_at(p, x.data());
        double transverse_max = 0.0;
        for (int a : fol.transverse)
            for (int j = 0; j < fol.dim(); ++j) transverse_max = std::max(transverse_max, std::abs(full(a, j)));
        FoliationClass k = FoliationClass::None;
        if (transverse_max < tol) {
            k = FoliationClass::LeafTangent;
        } else if (fol.q() % 2 == 0 && nondegenerate(transverse_block(p, fol, x.data()), full.max_abs())) {
            k = FoliationClass::Coupling;
        } else if (mixed) {
            double mx = 0.0;
            for (const auto& e : mixed->exprs()) mx = std::max(mx, std::abs(e.eval(x.data())));
            if (mx < tol) k = FoliationClass::AlmostCoupling;
        }
        witness.emplace(k, x);
    }
    if (witness.size() > 1) {
        std::string msg = "classification varies over the sample set:";
        for (const auto& [k, x] : witness) msg += std::string(" ") + to_string(k) + " at " + point_str(x);
        throw NonUniform(msg);
    }
    Classification c;
    c.kind = witness.empty() ? FoliationClass::LeafTangent : witness.begin()->first;
    if (c.kind == FoliationClass::Coupling) c.normal = coupling_normal_bundle(p, fol, pts);
    if (c.kind == FoliationClass::AlmostCoupling) c.normal = h;
    return c;
}

// ---- leaf-tangent Poisson --------------------------------------------------------

namespace {

// Coordinate forms plus copies scaled by a nonconstant weight, so that the
// differentials in the identities are exercised.
template <class Make>
std::vector<DifferentialForm> weighted(int count, int n, Make make) {
    std::vector<DifferentialForm> out;
    for (int i = 0; i < count; ++i) out.push_back(make(i));
    for (int i = 0; i < count; ++i)
        out.push_back((Expr(1.0) + Expr(0.25) * Expr::var((i + 1) % n) + Expr(0.1) * Expr::var(i % n).pow(2)) *
                      make(i));
    return out;
}

struct Trip {
    std::size_t a, b, c;
};
std::vector<Trip> distinct_triples(std::size_t n) {
    std::vector<Trip> t;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            for (std::size_t c = b + 1; c < n; ++c) t.push_back({a, b, c});
    return t;
}

Expr lie_on(const MultivectorField& y, const MultivectorField& r, const DifferentialForm& a,
            const DifferentialForm& b) {
    return bivector_on(lie_derivative(y, r), a, b);
}

Expr on2(const DifferentialForm& w, const MultivectorField& x, const MultivectorField& y) {
    return evaluate_on(w, {x, y});
}

}  // namespace

std::vector<CheckRecord> check_leaf_tangent_poisson(const MultivectorField& p, const FoliatedChart& fol,
                                                    const PointSet& pts, double tol) {
    require_same_chart(p.chart(), fol.chart, "leaf-tangent check");
    require_leaf_tangent_structure(p, fol);
    const auto h = NormalBundle::flat(fol);
    const int n = fol.dim();
    const auto lam = weighted(fol.p(), n, [&](int u) { return h.leaf_form(u); });
    std::vector<MultivectorField> sh;
    std::vector<DifferentialForm> d2;
    for (const auto& l : lam) {
        sh.push_back(sharp(p, l));
        d2.push_back(d_split(l, h).d2);
    }
    std::vector<Expr> res;
    for (const auto& t : distinct_triples(lam.size()))
        res.push_back(on2(d2[t.c], sh[t.a], sh[t.b]) - lie_on(sh[t.c], p, lam[t.a], lam[t.b]));

    // On coordinate leaf forms, twice the condition is exactly the matching
    // component of [P,P]; every other component must vanish.
    const auto pp = schouten_bracket(p, p);
    std::vector<Expr> cross;
    const int pl = fol.p();
    std::set<Index> leaf_keys;
    for (int a = 0; a < pl; ++a)
        for (int b = a + 1; b < pl; ++b)
            for (int c = b + 1; c < pl; ++c) {
                Index key{fol.leaf[a], fol.leaf[b], fol.leaf[c]};
                Expr cond = on2(d2[c], sh[a], sh[b]) - lie_on(sh[c], p, lam[a], lam[b]);
                cross.push_back(Expr(2.0) * cond - evaluate_on(pp, {lam[a], lam[b], lam[c]}));
                sort_index(key);
                leaf_keys.insert(key);
            }
    for (const auto& [k, e] : pp.components())
        if (!leaf_keys.count(k)) cross.push_back(e);

    std::vector<CheckRecord> out;
    out.push_back(make_check("leafwise_poisson", "leafwise-poisson-condition", max_abs(res, pts), tol, pts));
    out.push_back(make_check("leafwise_bracket_cross_check", "leafwise-vs-bracket", max_abs(cross, pts), tol, pts));
    return out;
}

// ---- coupling triples ----------------------------------------------------------

namespace {

DifferentialForm sigma_from(const MultivectorField& p, const NormalBundle& h, const PointSet& pts) {
    const int q = h.fol.q();
    SymMat m = sym_zero(q, q);
    for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) m[a][b] = p.get({h.fol.transverse[a], h.fol.transverse[b]});
    DifferentialForm sigma(p.chart(), 2);
    if (q == 0) return sigma;
    const SymMat inv = sym_inverse(m, best_reference(m, pts));
    for (int c = 0; c < q; ++c)
        for (int d = c + 1; d < q; ++d)
            sigma -= inv[c][d] * wedge(h.transverse_form(c), h.transverse_form(d));
    return sigma;
}

}  // namespace

CouplingTriple extract_triple(const MultivectorField& p, const FoliatedChart& fol, const PointSet& pts) {
    if (p.degree() != 2) throw DegreeError("triple extraction needs a bivector");
    NormalBundle h = coupling_normal_bundle(p, fol, pts);
    auto parts = bigrade(p, h);
    return CouplingTriple{parts.get(0, 2), h, sigma_from(p, h, pts)};
}

MultivectorField reconstruct_triple(const CouplingTriple& t, const PointSet& pts) {
    const auto& h = t.normal;
    const int q = h.fol.q();
    MultivectorField out = t.leaf;
    if (q == 0) return out;
    SymMat s = sym_zero(q, q);
    std::vector<MultivectorField> xs;
    for (int a = 0; a < q; ++a) xs.push_back(h.horizontal(a));
    for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) s[a][b] = on2(t.sigma, xs[a], xs[b]);
    for (const auto& x : pts)
        if (!nondegenerate(sym_eval(s, x.data()), 1.0))
            throw DegenerateSigma("coupling form is degenerate on H at " + point_str(x));
    SymMat inv;
    try {
        inv = sym_inverse(s, best_reference(s, pts));
    } catch (const Degenerate& e) {
        throw DegenerateSigma(e.what());
    }
    for (int c = 0; c < q; ++c)
        for (int d = c + 1; d < q; ++d) out -= inv[c][d] * wedge(xs[c], xs[d]);
    return out;
}

std::vector<CheckRecord> verify_triple_conditions(const CouplingTriple& t, const PointSet& pts, double tol) {
    const auto& h = t.normal;
    const int q = h.fol.q();
    std::vector<MultivectorField> xs;
    for (int a = 0; a < q; ++a) xs.push_back(h.horizontal(a));

    std::vector<Expr> curv, inv;
    for (int a = 0; a < q; ++a) {
        for (int b = a + 1; b < q; ++b) {
            auto lhs = sharp(t.leaf, differential(h.fol.chart, on2(t.sigma, xs[a], xs[b])));
            auto rhs = project_leaf(lie_bracket(xs[a], xs[b]), h);
            for (const auto& e : (lhs + rhs).exprs()) curv.push_back(e);
        }
        for (const auto& e : lie_derivative(xs[a], t.leaf).exprs()) inv.push_back(e);
    }
    std::vector<CheckRecord> out;
    out.push_back(make_check("sigma_d_prime_closed", "coupling-form-transverse-closed",
                             max_abs(d_split(t.sigma, h).d1, pts), tol, pts));
    out.push_back(make_check("curvature", "curvature-hamiltonian", max_abs(curv, pts), tol, pts));
    out.push_back(make_check("leaf_invariance", "horizontal-invariance", max_abs(inv, pts), tol, pts));
    out.push_back(make_check("leaf_poisson", "leaf-poisson", max_abs(schouten_bracket(t.leaf, t.leaf), pts), tol, pts));
    const auto p = reconstruct_triple(t, pts);
    auto direct = make_check("bracket_direct", "poisson-direct", max_abs(schouten_bracket(p, p), pts), tol, pts);
    direct.note = "cross-check on the reconstructed bivector";
    out.push_back(direct);
    return out;
}

// ---- bigraded tables ---------------------------------------------------------------

namespace {

struct TableCtx {
    const NormalBundle& h;
    const PointSet& pts;
    double tol;
    std::vector<DifferentialForm> A, L;  // (1,0) and (0,1) argument forms
    std::vector<DSplit> dA, dL;
    MultivectorField parts[3];  // P′, P̄, P″
    std::vector<MultivectorField> shA[3], shL[3];
};

}  // namespace

std::vector<CheckRecord> verify_bigraded_tables(const MultivectorField& p, const NormalBundle& h,
                                                const PointSet& pts, double tol) {
    if (p.degree() != 2) throw DegreeError("bigraded tables need a bivector");
    require_same_chart(p.chart(), h.fol.chart, "bigraded tables");
    const int n = h.fol.dim();
    TableCtx c{h, pts, tol, {}, {}, {}, {}, {}, {}, {}};
    c.A = weighted(h.fol.q(), n, [&](int a) { return h.transverse_form(a); });
    c.L = weighted(h.fol.p(), n, [&](int u) { return h.leaf_form(u); });
    const auto bg = bigrade(p, h);
    c.parts[0] = bg.get(2, 0);
    c.parts[1] = bg.get(1, 1);
    c.parts[2] = bg.get(0, 2);
    for (const auto& f : c.A) c.dA.push_back(d_split(f, h));
    for (const auto& f : c.L) c.dL.push_back(d_split(f, h));
    for (int i = 0; i < 3; ++i) {
        for (const auto& f : c.A) c.shA[i].push_back(sharp(c.parts[i], f));
        for (const auto& f : c.L) c.shL[i].push_back(sharp(c.parts[i], f));
    }
    const auto& A = c.A;
    const auto& L = c.L;
    const auto& P = c.parts;
    enum { Pp = 0, Pb = 1, Ps = 2 };

    // Brackets projected by bidegree, evaluated on typed arguments.
    std::map<std::pair<int, int>, Bigraded<Variance::Contra>> bracket;
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) bracket[{i, j}] = bigrade(schouten_bracket(P[i], P[j]), h);
    auto BR = [&](int i, int j, int u, int v, std::vector<DifferentialForm> args) {
        return evaluate_on(bracket[{i, j}].get(u, v), args);
    };

    std::deque<std::pair<std::string, std::vector<Expr>>> lines;  // deque: line() hands out references
    auto line = [&](const std::string& name) -> std::vector<Expr>& {
        lines.push_back({name, {}});
        return lines.back().second;
    };

    const auto tA = distinct_triples(A.size());
    const auto tL = distinct_triples(L.size());
    // (α,β,λ) with α<β and (α,λ,μ) with λ<μ
    std::vector<std::array<std::size_t, 3>> aab, all;
    for (std::size_t a = 0; a < A.size(); ++a) {
        for (std::size_t b = a + 1; b < A.size(); ++b)
            for (std::size_t l = 0; l < L.size(); ++l) aab.push_back({a, b, l});
        for (std::size_t l = 0; l < L.size(); ++l)
            for (std::size_t m = l + 1; m < L.size(); ++m) all.push_back({a, l, m});
    }
    const Expr two(2.0);

    // P′ with itself
    {
        auto& l30 = line("pp_prime_30");
        for (const auto& t : tA)
            l30.push_back(BR(Pp, Pp, 3, 0, {A[t.a], A[t.b], A[t.c]}) -
                          two * (on2(c.dA[t.c].d1, c.shA[Pp][t.a], c.shA[Pp][t.b]) -
                                 lie_on(c.shA[Pp][t.c], P[Pp], A[t.a], A[t.b])));
        auto& l21a = line("pp_prime_21_del");
        auto& l21b = line("pp_prime_21_bracket");
        for (const auto& [a, b, l] : aab) {
            const Expr v = BR(Pp, Pp, 2, 1, {A[a], A[b], L[l]});
            l21a.push_back(v - two * on2(c.dL[l].del, c.shA[Pp][a], c.shA[Pp][b]));
            l21b.push_back(v + two * pairing(lie_bracket(c.shA[Pp][a], c.shA[Pp][b]), L[l]));
        }
    }
    // P̄ with itself
    {
        auto& l21 = line("pp_mixed_21");
        for (const auto& [a, b, l] : aab)
            l21.push_back(BR(Pb, Pb, 2, 1, {A[a], A[b], L[l]}) -
                          two * (on2(c.dL[l].d2, c.shA[Pb][a], c.shA[Pb][b]) - lie_on(c.shL[Pb][l], P[Pb], A[a], A[b])));
        auto& l12 = line("pp_mixed_12");
        for (const auto& [a, l, m] : all)
            l12.push_back(BR(Pb, Pb, 1, 2, {A[a], L[l], L[m]}) +
                          two * (on2(c.dL[m].d1, c.shL[Pb][l], c.shA[Pb][a]) + lie_on(c.shL[Pb][m], P[Pb], A[a], L[l])));
        auto& l03 = line("pp_mixed_03");
        for (const auto& t : tL)
            l03.push_back(BR(Pb, Pb, 0, 3, {L[t.a], L[t.b], L[t.c]}) -
                          two * (on2(c.dL[t.c].del, c.shL[Pb][t.a], c.shL[Pb][t.b]) -
                                 lie_on(c.shL[Pb][t.c], P[Pb], L[t.a], L[t.b])));
    }
    // P″ with itself
    {
        auto& l03 = line("pp_leaf_03");
        for (const auto& t : tL)
            l03.push_back(BR(Ps, Ps, 0, 3, {L[t.a], L[t.b], L[t.c]}) -
                          two * (on2(c.dL[t.c].d2, c.shL[Ps][t.a], c.shL[Ps][t.b]) -
                                 lie_on(c.shL[Ps][t.c], P[Ps], L[t.a], L[t.b])));
    }
    // P′ with P̄
    {
        auto& l30 = line("prime_mixed_30");
        for (const auto& t : tA) {
            const auto& a = A[t.a];
            const auto& b = A[t.b];
            l30.push_back(BR(Pp, Pb, 3, 0, {a, b, A[t.c]}) -
                          (on2(c.dA[t.c].d2, c.shA[Pp][t.a], c.shA[Pb][t.b]) -
                           on2(c.dA[t.c].d2, c.shA[Pp][t.b], c.shA[Pb][t.a]) -
                           lie_on(c.shA[Pp][t.c], P[Pb], a, b) - lie_on(c.shA[Pb][t.c], P[Pp], a, b)));
        }
        auto& l21 = line("prime_mixed_21");
        for (const auto& [a, b, l] : aab)
            l21.push_back(BR(Pp, Pb, 2, 1, {A[a], A[b], L[l]}) -
                          (on2(c.dL[l].d1, c.shA[Pp][a], c.shA[Pb][b]) - on2(c.dL[l].d1, c.shA[Pp][b], c.shA[Pb][a]) -
                           lie_on(c.shL[Pb][l], P[Pp], A[a], A[b])));
        auto& l12a = line("prime_mixed_12_del");
        auto& l12b = line("prime_mixed_12_lie");
        for (const auto& [a, l, m] : all) {
            const Expr v = BR(Pp, Pb, 1, 2, {A[a], L[l], L[m]});
            l12a.push_back(v - (on2(c.dL[m].del, c.shA[Pp][a], c.shL[Pb][l]) - lie_on(c.shL[Pb][m], P[Pp], A[a], L[l])));
            l12b.push_back(v + lie_on(c.shA[Pp][a], P[Pb], L[l], L[m]));
        }
    }
    // P′ with P″
    {
        auto& l21 = line("prime_leaf_21");
        for (const auto& [a, b, l] : aab)
            l21.push_back(BR(Pp, Ps, 2, 1, {A[a], A[b], L[l]}) + lie_on(c.shL[Ps][l], P[Pp], A[a], A[b]));
        auto& l12a = line("prime_leaf_12_d");
        auto& l12b = line("prime_leaf_12_lie");
        for (const auto& [a, l, m] : all) {
            const Expr v = BR(Pp, Ps, 1, 2, {A[a], L[l], L[m]});
            l12a.push_back(v - (on2(c.dL[m].d1, c.shA[Pp][a], c.shL[Ps][l]) - lie_on(c.shL[Ps][m], P[Pp], A[a], L[l])));
            l12b.push_back(v + lie_on(c.shA[Pp][a], P[Ps], L[l], L[m]));
        }
        auto& l03 = line("prime_leaf_03_zero");
        for (const auto& t : tL) l03.push_back(BR(Pp, Ps, 0, 3, {L[t.a], L[t.b], L[t.c]}));
    }
    // P̄ with P″
    {
        auto& l12 = line("mixed_leaf_12");
        for (const auto& [a, l, m] : all)
            l12.push_back(BR(Pb, Ps, 1, 2, {A[a], L[l], L[m]}) -
                          (on2(c.dL[m].d2, c.shA[Pb][a], c.shL[Ps][l]) - lie_on(c.shL[Pb][m], P[Ps], A[a], L[l]) -
                           lie_on(c.shL[Ps][m], P[Pb], A[a], L[l])));
        auto& l03 = line("mixed_leaf_03");
        for (const auto& t : tL)
            l03.push_back(BR(Pb, Ps, 0, 3, {L[t.a], L[t.b], L[t.c]}) -
                          (on2(c.dL[t.c].d1, c.shL[Pb][t.a], c.shL[Ps][t.b]) -
                           on2(c.dL[t.c].d1, c.shL[Pb][t.b], c.shL[Ps][t.a]) -
                           lie_on(c.shL[Pb][t.c], P[Ps], L[t.a], L[t.b]) - lie_on(c.shL[Ps][t.c], P[Pb], L[t.a], L[t.b])));
    }

    // Selection rule: only (a+h−1,b+k), (a+h,b+k−1), (a+h−2,b+k+1) survive.
    static const Bidegree deg[3] = {{2, 0}, {1, 1}, {0, 2}};
    std::vector<Expr> excluded;
    for (const auto& [ij, b] : bracket) {
        const auto [a0, b0] = deg[ij.first];
        const auto [h0, k0] = deg[ij.second];
        const std::set<Bidegree> allowed{{a0 + h0 - 1, b0 + k0}, {a0 + h0, b0 + k0 - 1}, {a0 + h0 - 2, b0 + k0 + 1}};
        for (const auto& [rs, t] : b.parts)
            if (!allowed.count(rs))
                for (const auto& e : t.exprs()) excluded.push_back(e);
    }

    // The printed lines, with multiplicity 2 on the cross terms, rebuild [P,P].
    const auto pp = bigrade(schouten_bracket(p, p), h);
    std::vector<Expr> exhaustive;
    auto total_rhs = [&](int u, int v, const std::vector<DifferentialForm>& args) {
        Expr s;
        for (const auto& [ij, b] : bracket)
            s += (ij.first == ij.second ? Expr(1.0) : two) * evaluate_on(b.get(u, v), args);
        return s;
    };
    for (const auto& t : tA) {
        std::vector<DifferentialForm> args{A[t.a], A[t.b], A[t.c]};
        exhaustive.push_back(evaluate_on(pp.get(3, 0), args) - total_rhs(3, 0, args));
    }
    for (const auto& [a, b, l] : aab) {
        std::vector<DifferentialForm> args{A[a], A[b], L[l]};
        exhaustive.push_back(evaluate_on(pp.get(2, 1), args) - total_rhs(2, 1, args));
    }
    for (const auto& [a, l, m] : all) {
        std::vector<DifferentialForm> args{A[a], L[l], L[m]};
        exhaustive.push_back(evaluate_on(pp.get(1, 2), args) - total_rhs(1, 2, args));
    }
    for (const auto& t : tL) {
        std::vector<DifferentialForm> args{L[t.a], L[t.b], L[t.c]};
        exhaustive.push_back(evaluate_on(pp.get(0, 3), args) - total_rhs(0, 3, args));
    }
    MultivectorField recombined(p.chart(), 3);
    for (const auto& [rs, t] : pp.parts) recombined += t;
    for (const auto& e : (recombined - schouten_bracket(p, p)).exprs()) exhaustive.push_back(e);

    std::vector<CheckRecord> out;
    for (const auto& [name, res] : lines) out.push_back(make_check(name, "bigraded-table", max_abs(res, pts), tol, pts));
    out.push_back(make_check("excluded_bidegrees", "bidegree-selection", max_abs(excluded, pts), tol, pts));
    out.push_back(make_check("tables_exhaustive", "bigraded-recombination", max_abs(exhaustive, pts), tol, pts));
    return out;
}

// ---- Lichnerowicz coboundary --------------------------------------------------------

CoboundarySplit lp_coboundary_split(const MultivectorField& p_leaf, const MultivectorField& q,
                                    const NormalBundle& h) {
    require_same_chart(p_leaf.chart(), h.fol.chart, "coboundary split");
    require_leaf_tangent_structure(p_leaf, h.fol);
    const ChartPtr& c = q.chart();
    const int k = q.degree() + 1;
    if (k > q.dim()) return {MultivectorField(c, q.dim()), MultivectorField(c, q.dim()), MultivectorField(c, q.dim())};
    CoboundarySplit out{MultivectorField(c, k), MultivectorField(c, k), MultivectorField(c, k)};
    for (const auto& [rs, piece] : bigrade(q, h).parts) {
        const auto [r, s] = rs;
        const auto sq = bigrade(-schouten_bracket(p_leaf, piece), h);
        out.prime += sq.get(r - 1, s + 2);
        out.second += sq.get(r, s + 1);
        out.leftover += sq.get(r - 2, s + 3);
    }
    return out;
}

std::vector<CheckRecord> bicomplex_checks(const MultivectorField& p_leaf, const MultivectorField& q,
                                          const NormalBundle& h, const PointSet& pts, double tol) {
    const auto s = lp_coboundary_split(p_leaf, q, h);
    std::vector<CheckRecord> out;
    auto degree_ok = [&](const MultivectorField& t) { return t.degree() < t.dim(); };
    MultivectorField pp(q.chart(), 0), ss(q.chart(), 0), ps(q.chart(), 0);
    if (degree_ok(s.prime)) {
        const auto sp = lp_coboundary_split(p_leaf, s.prime, h);
        const auto s2 = lp_coboundary_split(p_leaf, s.second, h);
        pp = sp.prime;
        ss = s2.second;
        ps = sp.second + s2.prime;
    }
    out.push_back(make_check("sigma_prime_squared", "bicomplex-prime", max_abs(pp, pts), tol, pts));
    out.push_back(make_check("sigma_second_squared", "bicomplex-second", max_abs(ss, pts), tol, pts));
    out.push_back(make_check("sigma_anticommutator", "bicomplex-anticommute", max_abs(ps, pts), tol, pts));
    out.push_back(make_check("sigma_shift_minus2_3", "bicomplex-vanishing-piece", max_abs(s.leftover, pts), tol, pts));
    return out;
}

// ---- symplectic coupling -------------------------------------------------------------

SymplecticCoupling check_symplectic_coupling(const DifferentialForm& omega, const FoliatedChart& fol,
                                             const PointSet& pts, double tol) {
    if (omega.degree() != 2) throw DegreeError("symplectic coupling needs a 2-form");
    require_same_chart(omega.chart(), fol.chart, "symplectic coupling");
    for (const auto& x : pts) {
        const auto m = matrix_at(omega, x.data());
        if (!nondegenerate(m, m.max_abs())) throw Degenerate("2-form is degenerate at " + point_str(x));
    }
    const int q = fol.q(), pl = fol.p();
    SymMat w = sym_zero(pl, pl);
    for (int u = 0; u < pl; ++u)
        for (int v = 0; v < pl; ++v) w[u][v] = omega.get({fol.leaf[u], fol.leaf[v]});
    for (const auto& x : pts)
        if (!nondegenerate(sym_eval(w, x.data()), 1.0))
            throw NotCoupling("restriction to the leaves is degenerate at " + point_str(x));

    NormalBundle h = NormalBundle::flat(fol);
    if (pl > 0 && q > 0) {
        const SymMat winv = sym_inverse(w, best_reference(w, pts));
        for (int a = 0; a < q; ++a)
            for (int u = 0; u < pl; ++u) {
                Expr g;
                for (int v = 0; v < pl; ++v) g -= omega.get({fol.transverse[a], fol.leaf[v]}) * winv[v][u];
                h.gamma[a][u] = g;
            }
    }
    const auto parts = bigrade(omega, h);
    SymplecticCoupling out{h, parts.get(2, 0), parts.get(0, 2), {}};
    const auto ds = d_split(out.sigma, h);
    const auto dt = d_split(out.theta, h);
    out.records.push_back(make_check("mixed_part", "orthogonal-splitting", max_abs(parts.get(1, 1), pts), tol, pts));
    out.records.push_back(make_check("sigma_d_prime", "d-prime-sigma", max_abs(ds.d1, pts), tol, pts));
    out.records.push_back(make_check("sigma_d_second_plus_del_theta", "d-second-sigma-vs-del-theta",
                                     max_abs(ds.d2 + dt.del, pts), tol, pts));
    out.records.push_back(make_check("theta_d_prime", "d-prime-theta", max_abs(dt.d1, pts), tol, pts));
    out.records.push_back(make_check("theta_d_second", "d-second-theta", max_abs(dt.d2, pts), tol, pts));
    auto closed = make_check("closed_direct", "d-omega", max_abs(exterior_derivative(omega), pts), tol, pts);
    closed.note = "cross-check: the four lines hold iff this passes";
    out.records.push_back(closed);
    return out;
}

// ---- projectable coupling ---------------------------------------------------------

std::vector<CheckRecord> check_projectable_coupling(const MultivectorField& p, const FoliatedChart& fol,
                                                    const PointSet& pts, double tol) {
    const auto t = extract_triple(p, fol, pts);
    const auto& h = t.normal;
    const int q = fol.q(), pl = fol.p();
    std::vector<Expr> integrable, sig_proj, leaf_inv, p_proj;
    std::vector<MultivectorField> xs;
    for (int a = 0; a < q; ++a) xs.push_back(h.horizontal(a));
    for (int a = 0; a < q; ++a) {
        for (int b = a + 1; b < q; ++b)
            for (const auto& e : project_leaf(lie_bracket(xs[a], xs[b]), h).exprs()) integrable.push_back(e);
        for (const auto& e : lie_derivative(xs[a], t.leaf).exprs()) leaf_inv.push_back(e);
    }
    const auto p_prime = bigrade(p, h).get(2, 0);
    for (int u = 0; u < pl; ++u) {
        const auto y = h.vertical(u);
        for (const auto& e : lie_derivative(y, t.sigma).exprs()) sig_proj.push_back(e);
        const auto lp = lie_derivative(y, p_prime);
        for (int a = 0; a < q; ++a)
            for (int b = a + 1; b < q; ++b)
                p_proj.push_back(bivector_on(lp, h.transverse_form(a), h.transverse_form(b)));
    }
    std::vector<CheckRecord> out;
    out.push_back(make_check("leaf_poisson", "leaf-poisson", max_abs(schouten_bracket(t.leaf, t.leaf), pts), tol, pts));
    out.push_back(make_check("normal_integrable", "normal-bundle-integrable", max_abs(integrable, pts), tol, pts));
    out.push_back(make_check("sigma_projectable", "coupling-form-projectable", max_abs(sig_proj, pts), tol, pts));
    out.push_back(make_check("sigma_closed", "coupling-form-closed", max_abs(exterior_derivative(t.sigma), pts), tol, pts));
    out.push_back(make_check("leaf_invariance", "horizontal-invariance", max_abs(leaf_inv, pts), tol, pts));
    auto proj = make_check("projectable_direct", "transverse-part-projectable", max_abs(p_proj, pts), tol, pts);
    proj.note = "cross-check";
    out.push_back(proj);
    auto poisson = make_check("poisson_direct", "poisson-direct", max_abs(schouten_bracket(p, p), pts), tol, pts);
    poisson.note = "cross-check";
    out.push_back(poisson);
    return out;
}

}  // namespace fpk
