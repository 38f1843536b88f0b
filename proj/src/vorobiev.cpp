#include "fpk/vorobiev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace fpk {

Table3 table3(int d0, int d1, int d2) {
    return Table3(static_cast<std::size_t>(d0),
                  std::vector<std::vector<Expr>>(static_cast<std::size_t>(d1),
                                                 std::vector<Expr>(static_cast<std::size_t>(d2))));
}

AlgebroidData AlgebroidData::zero(ChartPtr base, int rank) {
    AlgebroidData d;
    const int n = static_cast<int>(base->dim());
    d.rank = rank;
    d.alpha = table3(rank, rank, rank);
    d.beta = table3(rank, rank, n);
    d.gamma_f = table3(rank, n, n);
    d.gamma_q = table3(n, n, n);
    if (n >= 2) d.omega = DifferentialForm(base, 2);  // a point base keeps an empty form
    for (int a = 1; a <= rank; ++a) d.fiber_names.push_back("y" + std::to_string(a));
    d.base = std::move(base);
    return d;
}

namespace {

using U = std::size_t;
U z(int i) { return static_cast<U>(i); }

std::string point_text(const std::vector<double>& x) {
    std::ostringstream os;
    os << "(";
    for (U i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

// Shifted tables with t as an expression, so the flow can treat it as a coordinate.
AlgebroidData shift_tables(const AlgebroidData& d, const SplittingShift& s, const Expr& t) {
    const int n = d.n(), k = d.rank;
    if (static_cast<int>(s.phi.size()) != k) throw DegreeError("shift needs one row per fiber index");
    for (const auto& row : s.phi)
        if (static_cast<int>(row.size()) != n) throw DegreeError("shift rows need one entry per base coordinate");
    AlgebroidData out = d;
    const auto& phi = s.phi;
    for (int dd = 0; dd < k; ++dd)
        for (int a = 0; a < k; ++a)
            for (int i = 0; i < n; ++i) {
                Expr acc;
                for (int c = 0; c < k; ++c) acc += d.alpha[z(dd)][z(a)][z(c)] * phi[z(c)][z(i)];
                out.beta[z(dd)][z(a)][z(i)] = d.beta[z(dd)][z(a)][z(i)] + t * acc;
            }
    for (int dd = 0; dd < k; ++dd)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                // [q_i, φ_j] − [q_j, φ_i] in G, and the Q-part rewritten in the new basis
                Expr lin = phi[z(dd)][z(j)].diff(i) - phi[z(dd)][z(i)].diff(j);
                for (int c = 0; c < k; ++c)
                    lin += phi[z(c)][z(i)] * d.beta[z(dd)][z(c)][z(j)] - phi[z(c)][z(j)] * d.beta[z(dd)][z(c)][z(i)];
                for (int h = 0; h < n; ++h) lin -= d.gamma_q[z(h)][z(i)][z(j)] * phi[z(dd)][z(h)];
                Expr quad;
                for (int a = 0; a < k; ++a)
                    for (int b = 0; b < k; ++b) quad += d.alpha[z(dd)][z(a)][z(b)] * phi[z(a)][z(i)] * phi[z(b)][z(j)];
                out.gamma_f[z(dd)][z(i)][z(j)] = d.gamma_f[z(dd)][z(i)][z(j)] + t * lin + t * t * quad;
            }
    return out;
}

// Γ^b_ai = −β^b_ai.
Expr conn(const AlgebroidData& d, int b, int a, int i) { return -d.beta[z(b)][z(a)][z(i)]; }

// (∇_i C)^c_ab.
Expr nabla_c(const AlgebroidData& d, int i, int c, int a, int b) {
    const int k = d.rank;
    Expr r = d.alpha[z(c)][z(a)][z(b)].diff(i);
    for (int e = 0; e < k; ++e) {
        r += conn(d, c, e, i) * d.alpha[z(e)][z(a)][z(b)];
        r -= conn(d, e, a, i) * d.alpha[z(c)][z(e)][z(b)];
        r -= conn(d, e, b, i) * d.alpha[z(c)][z(a)][z(e)];
    }
    return r;
}

// Structure functions c^E_{AB} on the frame (g_0..g_{k−1}, q_0..q_{n−1}).
struct Frame {
    const AlgebroidData& d;
    int k, n;
    explicit Frame(const AlgebroidData& dd) : d(dd), k(dd.rank), n(dd.n()) {}
    int size() const { return k + n; }
    bool is_g(int A) const { return A < k; }
    Expr c(int e, int A, int B) const {
        if (is_g(A) && is_g(B)) return e < k ? d.alpha[z(e)][z(A)][z(B)] : Expr();
        if (is_g(A) && !is_g(B)) return e < k ? d.beta[z(e)][z(A)][z(B - k)] : Expr();
        if (!is_g(A) && is_g(B)) return e < k ? -d.beta[z(e)][z(B)][z(A - k)] : Expr();
        const int i = A - k, j = B - k;
        return e < k ? d.gamma_f[z(e)][z(i)][z(j)] : d.gamma_q[z(e - k)][z(i)][z(j)];
    }
    Expr anchor_on(int A, const Expr& f) const { return is_g(A) ? Expr() : f.diff(A - k); }
    std::string name(int A) const {
        return is_g(A) ? "g" + std::to_string(A + 1) : "q" + std::to_string(A - k + 1);
    }
};

Expr lift(const Expr& e, const std::vector<Expr>& sub) { return e.substitute(sub); }

// Base slot i goes to the chart slot carrying it.  Chart slots outside the
// layout (the flow's time coordinate) follow as base slots n, n+1, ...
std::vector<Expr> lift_map(const FiberLayout& lay) {
    std::vector<Expr> sub;
    for (int s : lay.base_slots) sub.push_back(Expr::var(s));
    for (int s = 0; s < static_cast<int>(lay.chart->dim()); ++s)
        if (std::find(lay.base_slots.begin(), lay.base_slots.end(), s) == lay.base_slots.end() &&
            std::find(lay.fiber_slots.begin(), lay.fiber_slots.end(), s) == lay.fiber_slots.end())
            sub.push_back(Expr::var(s));
    return sub;
}

int position(const std::vector<int>& v, int s) {
    return static_cast<int>(std::find(v.begin(), v.end(), s) - v.begin());
}

CouplingTriple triple_impl(const AlgebroidData& d0, const FiberLayout& lay, const std::optional<SplittingShift>& shift,
                           const Expr& t, VorobievSign sign) {
    const AlgebroidData d = shift ? shift_tables(d0, *shift, t) : d0;
    const int n = d.n(), k = d.rank;
    if (static_cast<int>(lay.base_slots.size()) != n || static_cast<int>(lay.fiber_slots.size()) != k)
        throw DegreeError("fiber layout does not match the algebroid");
    const auto sub = lift_map(lay);
    const ChartPtr& ch = lay.chart;
    const Expr pm = sign == VorobievSign::Plus ? Expr(1.0) : Expr(-1.0);
    auto y = [&](int c) { return Expr::var(lay.fiber_slots[z(c)]); };

    MultivectorField leaf(ch, 2);
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
            Expr coef;
            for (int c = 0; c < k; ++c) coef += lift(d.alpha[z(c)][z(a)][z(b)], sub) * y(c);
            leaf.add({lay.fiber_slots[z(a)], lay.fiber_slots[z(b)]}, pm * coef);
        }

    // slots outside the layout ride along with the fibers, so the time
    // coordinate of the flow never becomes a transverse direction
    std::vector<int> along = lay.fiber_slots;
    for (int s = 0; s < static_cast<int>(ch->dim()); ++s)
        if (position(lay.base_slots, s) == n && position(lay.fiber_slots, s) == k) along.push_back(s);
    const FoliatedChart fol = make_foliated(ch, along);
    NormalBundle h = NormalBundle::flat(fol);
    for (int i = 0; i < n; ++i) {
        const int ti = position(fol.transverse, lay.base_slots[z(i)]);
        for (int a = 0; a < k; ++a) {
            Expr g;
            for (int b = 0; b < k; ++b) g += lift(conn(d, b, a, i), sub) * y(b);
            h.gamma[z(ti)][z(a)] = g;
        }
    }

    DifferentialForm sigma(ch, 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Expr coef = lift(d.omega.get({i, j}), sub);
            for (int c = 0; c < k; ++c) coef -= pm * lift(d.gamma_f[z(c)][z(i)][z(j)], sub) * y(c);
            sigma.add({lay.base_slots[z(i)], lay.base_slots[z(j)]}, coef);
        }
    return CouplingTriple{leaf, h, sigma};
}

// σ_t(𝒳_i, 𝒳_j) as a matrix of expressions.
SymMat sigma_matrix(const CouplingTriple& t, const FiberLayout& lay) {
    const int n = static_cast<int>(lay.base_slots.size());
    SymMat s = sym_zero(z(n), z(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) s[z(i)][z(j)] = t.sigma.get({lay.base_slots[z(i)], lay.base_slots[z(j)]});
    return s;
}

bool well_conditioned(const la::Mat& m) {
    if (m.rows == 0) return true;
    la::SVD svd(m);
    return svd.s.back() > 1e-6 * std::max(1.0, svd.s.front());
}

// First sample point where σ degenerates, if any.  The box is connected, so a
// sign change of the Pfaffian of σ between samples also counts: it vanishes
// in between.
std::optional<std::vector<double>> sigma_failure(const SymMat& s, const PointSet& pts) {
    double ref = 0.0;
    const std::vector<double>* smallest = nullptr;
    double smallest_abs = std::numeric_limits<double>::infinity();
    bool flipped = false;
    for (const auto& x : pts) {
        const la::Mat m = sym_eval(s, x.data());
        if (!well_conditioned(m)) return x;
        const double pf = la::pfaffian(m);
        if (ref == 0.0) ref = pf;
        if ((pf > 0) != (ref > 0)) flipped = true;
        if (std::abs(pf) < smallest_abs) {
            smallest_abs = std::abs(pf);
            smallest = &x;
        }
    }
    if (flipped) return *smallest;
    return std::nullopt;
}

ChartPtr with_radius(const AlgebroidData& d, double r) { return total_chart(d, r); }

bool nondegenerate_for_all(const AlgebroidData& d, const std::optional<SplittingShift>& shift, VorobievSign sign,
                           const std::vector<double>& ts, double r, const SampleProtocol& proto) {
    const auto ch = with_radius(d, r);
    const auto lay = standard_layout(d, ch);
    const auto pts = halton_points(*ch, proto);
    for (double t : ts) {
        const auto tr = triple_impl(d, lay, shift, Expr(t), sign);
        if (sigma_failure(sigma_matrix(tr, lay), pts)) return false;
    }
    return true;
}

}  // namespace

AlgebroidData shifted(const AlgebroidData& d, const SplittingShift& s, double t) {
    return shift_tables(d, s, Expr(t));
}

// ---- validation -----------------------------------------------------------------

std::vector<CheckRecord> validate_algebroid(const AlgebroidData& d, const PointSet& pts, double tol) {
    const int n = d.n(), k = d.rank;
    std::vector<CheckRecord> out;

    std::vector<Expr> anti;
    for (int c = 0; c < k; ++c)
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) anti.push_back(d.alpha[z(c)][z(a)][z(b)] + d.alpha[z(c)][z(b)][z(a)]);
    for (int c = 0; c < k; ++c)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) anti.push_back(d.gamma_f[z(c)][z(i)][z(j)] + d.gamma_f[z(c)][z(j)][z(i)]);
    for (int h = 0; h < n; ++h)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) anti.push_back(d.gamma_q[z(h)][z(i)][z(j)] + d.gamma_q[z(h)][z(j)][z(i)]);
    out.push_back(make_check("antisymmetry", "structure-antisymmetry", max_abs(anti, pts), tol, pts));
    if (n < 2) {
        out.push_back(make_check("omega_closed", "base-form-closed", 0.0, tol));
        auto r = make_check("omega_nondegenerate", "base-form-nondegenerate", n == 0 ? 0.0 : 1.0, 0.5);
        if (n == 1) r.note = "odd-dimensional base";
        out.push_back(r);
    } else {
        out.push_back(
            make_check("omega_closed", "base-form-closed", max_abs(exterior_derivative(d.omega), pts), tol, pts));
        std::optional<std::vector<double>> bad;
        for (const auto& x : pts)
            if (!well_conditioned(matrix_at(d.omega, x.data()))) {
                bad = x;
                break;
            }
        auto r = make_check("omega_nondegenerate", "base-form-nondegenerate", bad ? 1.0 : 0.0, 0.5, bad);
        if (bad) r.note = "degenerate at " + point_text(*bad);
        out.push_back(r);
    }
    std::vector<Expr> anchor;
    for (const auto& m : d.gamma_q)
        for (const auto& row : m)
            for (const auto& e : row) anchor.push_back(e);
    out.push_back(make_check("anchor_morphism", "anchor-preserves-brackets", max_abs(anchor, pts), tol, pts));

    // Σ_cyc ρ(e_A)(c^E_BC) + c^D_BC c^E_AD on every frame triple.
    const Frame f(d);
    double worst = 0.0;
    std::string worst_name;
    std::optional<std::vector<double>> worst_pt;
    for (int A = 0; A < f.size(); ++A)
        for (int B = A + 1; B < f.size(); ++B)
            for (int C = B + 1; C < f.size(); ++C) {
                std::vector<Expr> comps;
                const int cyc[3][3] = {{A, B, C}, {B, C, A}, {C, A, B}};
                for (int e = 0; e < f.size(); ++e) {
                    Expr s;
                    for (const auto& tr : cyc) {
                        s += f.anchor_on(tr[0], f.c(e, tr[1], tr[2]));
                        for (int dd = 0; dd < f.size(); ++dd) s += f.c(dd, tr[1], tr[2]) * f.c(e, tr[0], dd);
                    }
                    comps.push_back(s);
                }
                const auto m = max_abs(comps, pts);
                if (m.value > worst || worst_name.empty()) {
                    worst = m.value;
                    worst_name = "(" + f.name(A) + "," + f.name(B) + "," + f.name(C) + ")";
                    if (!pts.empty()) worst_pt = pts[m.point];
                }
            }
    auto jac = make_check("jacobi", "algebroid-jacobi", worst, tol, worst > tol ? worst_pt : std::nullopt);
    if (!worst_name.empty()) jac.note = "worst frame triple " + worst_name;
    out.push_back(jac);

    std::vector<Expr> par;
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c)
            for (int a = 0; a < k; ++a)
                for (int b = a + 1; b < k; ++b) par.push_back(nabla_c(d, i, c, a, b));
    out.push_back(make_check("structure_tensor_parallel", "nabla-C", max_abs(par, pts), tol, pts));

    // R^c_aij = ∂_iΓ^c_aj − ∂_jΓ^c_ai + Γ^b_aj Γ^c_bi − Γ^b_ai Γ^c_bj against γ^e_ij α^c_ea.
    std::vector<Expr> curv;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int a = 0; a < k; ++a)
                for (int c = 0; c < k; ++c) {
                    Expr r = conn(d, c, a, j).diff(i) - conn(d, c, a, i).diff(j);
                    for (int b = 0; b < k; ++b)
                        r += conn(d, b, a, j) * conn(d, c, b, i) - conn(d, b, a, i) * conn(d, c, b, j);
                    for (int e = 0; e < k; ++e) r -= d.gamma_f[z(e)][z(i)][z(j)] * d.alpha[z(c)][z(e)][z(a)];
                    curv.push_back(r);
                }
    out.push_back(make_check("curvature", "curvature-identity", max_abs(curv, pts), tol, pts));
    return out;
}

// ---- charts and the triple -------------------------------------------------------

ChartPtr total_chart(const AlgebroidData& d, double radius) {
    if (!(radius > 0.0)) throw DomainError("fiber radius must be positive");
    auto names = d.base->names;
    auto dom = d.base->domain;
    for (int a = 0; a < d.rank; ++a) {
        names.push_back(a < static_cast<int>(d.fiber_names.size()) ? d.fiber_names[z(a)] : "y" + std::to_string(a + 1));
        dom.emplace_back(-radius, radius);
    }
    return make_chart(std::move(names), std::move(dom));
}

FiberLayout standard_layout(const AlgebroidData& d, const ChartPtr& total) {
    FiberLayout lay{total, {}, {}};
    for (int i = 0; i < d.n(); ++i) lay.base_slots.push_back(i);
    for (int a = 0; a < d.rank; ++a) lay.fiber_slots.push_back(d.n() + a);
    return lay;
}

CouplingTriple vorobiev_triple(const AlgebroidData& d, const FiberLayout& lay, const std::optional<SplittingShift>& shift,
                               double t, VorobievSign sign) {
    return triple_impl(d, lay, shift, Expr(t), sign);
}

DifferentialForm shifted_sigma_formula(const AlgebroidData& d, const FiberLayout& lay, const SplittingShift& s,
                                       double t, VorobievSign sign) {
    const auto base = triple_impl(d, lay, std::nullopt, Expr(0.0), sign);
    const auto sub = lift_map(lay);
    const int n = d.n(), k = d.rank;
    auto y = [&](int c) { return Expr::var(lay.fiber_slots[z(c)]); };
    // ψ = ⟨z, φ(X)⟩ = y_c φ^c_i dx^i
    DifferentialForm psi(lay.chart, 1);
    for (int i = 0; i < n; ++i) {
        Expr coef;
        for (int c = 0; c < k; ++c) coef += y(c) * lift(s.phi[z(c)][z(i)], sub);
        psi.add({lay.base_slots[z(i)]}, coef);
    }
    const auto dpsi = exterior_derivative(psi);
    const auto& h = base.normal;
    const Expr pm = sign == VorobievSign::Plus ? Expr(1.0) : Expr(-1.0);
    DifferentialForm out(lay.chart, 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const int si = lay.base_slots[z(i)], sj = lay.base_slots[z(j)];
            const auto xi = h.horizontal(position(h.fol.transverse, si));
            const auto xj = h.horizontal(position(h.fol.transverse, sj));
            // 𝕃(φ_i, φ_j) = ⟨z, [φ_i, φ_j]⟩, with the sign of the chosen variant
            Expr lphi;
            for (int c = 0; c < k; ++c)
                for (int a = 0; a < k; ++a)
                    for (int b = 0; b < k; ++b)
                        lphi += y(c) * lift(d.alpha[z(c)][z(a)][z(b)] * s.phi[z(a)][z(i)] * s.phi[z(b)][z(j)], sub);
            Expr v = base.sigma.get({si, sj}) - pm * (Expr(t) * evaluate_on(dpsi, {xi, xj}) + Expr(t * t) * lphi);
            out.add({si, sj}, v);
        }
    return out;
}

// ---- building ---------------------------------------------------------------------

double fiber_radius_search(const AlgebroidData& d, const std::optional<SplittingShift>& shift, VorobievSign sign,
                           const std::vector<double>& ts, const SampleProtocol& proto, int max_halvings) {
    double r = 1.0;
    for (int m = 0; m <= max_halvings; ++m, r *= 0.5)
        if (nondegenerate_for_all(d, shift, sign, ts, r, proto)) return r;
    return 0.0;
}

VorobievStructure build_structure(const AlgebroidData& d, const std::optional<SplittingShift>& shift, double t,
                                  VorobievSign sign, std::optional<double> radius, const SampleProtocol& proto) {
    double r = 0.0;
    if (radius) {
        if (!nondegenerate_for_all(d, shift, sign, {t}, *radius, proto)) {
            double ok = *radius * 0.5;
            while (ok > 1e-4 && !nondegenerate_for_all(d, shift, sign, {t}, ok, proto)) ok *= 0.5;
            throw DegenerateSigma("coupling form degenerates on the fiber box of radius " + std::to_string(*radius) +
                                  (ok > 1e-4 ? "; nondegenerate up to radius " + std::to_string(ok)
                                             : "; no admissible radius found"));
        }
        r = *radius;
    } else {
        r = fiber_radius_search(d, shift, sign, {t}, proto);
        if (r == 0.0) throw DegenerateSigma("coupling form degenerates on every fiber box tried");
    }
    const auto ch = total_chart(d, r);
    const auto lay = standard_layout(d, ch);
    VorobievStructure v{MultivectorField(ch, 2), triple_impl(d, lay, shift, Expr(t), sign),
                        make_foliated(ch, lay.fiber_slots), r, sign, shift, t};
    v.p = reconstruct_triple(v.triple, halton_points(*ch, proto));
    return v;
}

std::vector<CheckRecord> structure_checks(const AlgebroidData& d0, const VorobievStructure& v, const PointSet& pts,
                                          double tol) {
    std::vector<CheckRecord> out;
    out.push_back(make_check("poisson", "poisson-direct", max_abs(schouten_bracket(v.p, v.p), pts), tol, pts));
    const auto cl = classify_bivector(v.p, v.fibers, std::nullopt, pts);
    out.push_back(make_check("coupling", "fiber-coupling", cl.kind == FoliationClass::Coupling ? 0.0 : 1.0, 0.5));
    const auto back = extract_triple(v.p, v.fibers, pts);
    std::vector<Expr> diff;
    for (const auto& e : (back.leaf - v.triple.leaf).exprs()) diff.push_back(e);
    for (const auto& e : (back.sigma - v.triple.sigma).exprs()) diff.push_back(e);
    for (std::size_t a = 0; a < back.normal.gamma.size(); ++a)
        for (std::size_t u = 0; u < back.normal.gamma[a].size(); ++u)
            diff.push_back(back.normal.gamma[a][u] - v.triple.normal.gamma[a][u]);
    out.push_back(make_check("triple_round_trip", "extract-after-build", max_abs(diff, pts), 1e-10, pts));

    // L_𝒳 𝕃 directly versus ⟨z, ∇_X C⟩ from the tables of the splitting in use
    const AlgebroidData d = v.shift ? shifted(d0, *v.shift, v.t) : d0;
    const FiberLayout lay = standard_layout(d, v.p.chart());
    const auto sub = lift_map(lay);
    const int n = d.n(), k = d.rank;
    const Expr pm = v.sign == VorobievSign::Plus ? Expr(1.0) : Expr(-1.0);
    std::vector<Expr> lie;
    for (int i = 0; i < n; ++i) {
        const auto xi = v.triple.normal.horizontal(position(v.triple.normal.fol.transverse, lay.base_slots[z(i)]));
        MultivectorField formula(v.p.chart(), 2);
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b) {
                Expr coef;
                for (int c = 0; c < k; ++c)
                    coef += lift(nabla_c(d, i, c, a, b), sub) * Expr::var(lay.fiber_slots[z(c)]);
                formula.add({lay.fiber_slots[z(a)], lay.fiber_slots[z(b)]}, pm * coef);
            }
        for (const auto& e : (lie_derivative(xi, v.triple.leaf) - formula).exprs()) lie.push_back(e);
    }
    out.push_back(make_check("lie_vs_nabla_c", "horizontal-lie-of-fiber-structure", max_abs(lie, pts), tol, pts));
    return out;
}

// ---- coisotropy ----------------------------------------------------------------

CoisotropyReport check_coisotropy_global(const AlgebroidData& d, const PointSet& base_pts, double far,
                                         std::size_t fiber_samples) {
    const int n = d.n(), k = d.rank;
    CoisotropyReport rep;
    double worst = 0.0;
    std::optional<std::vector<double>> witness;
    for (const auto& x : base_pts) {
        la::Mat g(z(k * n), z(n));  // rows (a, j), columns i: γ^a_ij
        for (int a = 0; a < k; ++a)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) g(z(a * n + j), z(i)) = d.gamma_f[z(a)][z(i)][z(j)].eval(x.data());
        const la::Mat om = matrix_at(d.omega, x.data());
        const la::Mat dbasis = g.max_abs() == 0.0 ? la::Mat::identity(z(n)) : la::SVD(g).null_space(1e-10);
        // D^ω = {Y : ω(X, Y) = 0 for X in D}, then test γ(Y) = 0 on it
        la::Mat perp;
        if (dbasis.cols == 0) {
            perp = la::Mat::identity(z(n));
        } else {
            const la::Mat rows = dbasis.transpose() * om;
            perp = rows.max_abs() == 0.0 ? la::Mat::identity(z(n)) : la::SVD(rows).null_space(1e-10);
        }
        if (perp.cols == 0) continue;
        const la::Mat gy = g * perp;
        const double scale = std::max(1.0, g.max_abs());
        const double r = gy.max_abs() / scale;
        if (r > worst) {
            worst = r;
            witness = x;
        }
    }
    rep.coisotropic = worst < 1e-9;
    auto c = make_check("coisotropic", "distribution-coisotropic", worst, 1e-9, witness);
    c.note = "D = {X : gamma^a_ij X^i = 0}; residual is |gamma(D^omega)|";
    rep.records.push_back(c);

    // σ_z = ω − γ·y on a large fiber box over every base point
    std::vector<std::pair<double, double>> box(z(k), {-far, far});
    const auto ys = halton_points(box, {fiber_samples, 0}, 1.0);
    double worst_sv = std::numeric_limits<double>::infinity();
    std::optional<std::vector<double>> bad;
    std::optional<std::vector<double>> flip_at;
    for (const auto& x : base_pts) {
        const la::Mat om = matrix_at(d.omega, x.data());
        double ref = 0.0;
        for (const auto& yv : ys) {
            la::Mat s = om;
            for (int a = 0; a < k; ++a)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) s(z(i), z(j)) -= d.gamma_f[z(a)][z(i)][z(j)].eval(x.data()) * yv[z(a)];
            auto w = x;
            w.insert(w.end(), yv.begin(), yv.end());
            // each fiber is connected: a Pfaffian sign change means a zero in between
            const double pf = la::pfaffian(s);
            if (ref == 0.0) ref = pf;
            if ((pf > 0) != (ref > 0) && !flip_at) flip_at = w;
            la::SVD svd(s);
            const double rel = svd.s.back() / std::max(1.0, svd.s.front());
            if (rel < worst_sv) {
                worst_sv = rel;
                bad = w;
            }
        }
    }
    if (flip_at) bad = flip_at;
    rep.sigma_nondegenerate_far = worst_sv > 1e-6 && !flip_at;
    auto nd = make_check("sigma_nondegenerate_far", "coupling-form-far-fibers", rep.sigma_nondegenerate_far ? 0.0 : 1.0,
                         0.5, rep.sigma_nondegenerate_far ? std::nullopt : bad);
    std::ostringstream os;
    if (flip_at)
        os << "Pfaffian of sigma changes sign along a fiber within |y| <= " << far;
    else
        os << "smallest relative singular value " << worst_sv << " on |y| <= " << far;
    nd.note = os.str();
    rep.records.push_back(nd);
    return rep;
}

// ---- equivalence flow ------------------------------------------------------------

FlowResult equivalence_flow(const AlgebroidData& d, const SplittingShift& s, VorobievSign sign, int steps,
                            const SampleProtocol& proto, double start_shrink, std::optional<double> radius, Exec exec) {
    if (steps < 1) throw DomainError("flow needs at least one step");
    const int n = d.n(), k = d.rank, m = n + k;

    // the homotopy parameter becomes one more coordinate, so Ξ and its
    // Jacobian are plain expressions; σ_t is then checked on samples of the
    // whole (z, t) box rather than on a t grid
    auto extended = [&](double r) {
        const auto total = total_chart(d, r);
        auto names = total->names;
        auto dom = total->domain;
        std::string tname = "t";
        while (std::find(names.begin(), names.end(), tname) != names.end()) tname += "_";
        names.push_back(tname);
        dom.emplace_back(0.0, 1.0);
        FiberLayout lay{make_chart(names, dom), {}, {}};
        for (int i = 0; i < n; ++i) lay.base_slots.push_back(i);
        for (int a = 0; a < k; ++a) lay.fiber_slots.push_back(n + a);
        return lay;
    };
    const SampleProtocol dense{std::max<std::size_t>(proto.count, 256), proto.offset};
    auto fails = [&](const FiberLayout& lay) {
        const auto tr = triple_impl(d, lay, s, Expr::var(n), sign);  // t is base slot n, see lift_map
        return sigma_failure(sigma_matrix(tr, lay), halton_points(*lay.chart, dense));
    };
    double r = radius.value_or(1.0);
    FiberLayout lay = extended(r);
    if (radius) {
        if (auto w = fails(lay))
            throw DegenerateSigma("coupling form degenerates along the homotopy at " + point_text(*w) +
                                  " on the fiber box of radius " + std::to_string(r));
    } else {
        int halvings = 0;
        while (fails(lay)) {
            if (++halvings > 12) throw DegenerateSigma("no fiber box keeps the coupling form nondegenerate for all t");
            r /= 2;
            lay = extended(r);
        }
    }
    const ChartPtr ext = lay.chart;
    const auto dom = ext->domain;
    const auto total = total_chart(d, r);
    const auto tr = triple_impl(d, lay, s, Expr::var(n), sign);
    const auto pt = reconstruct_triple(tr, halton_points(*ext, dense));
    const auto sub = lift_map(lay);
    DifferentialForm psi(ext, 1);
    for (int i = 0; i < n; ++i) {
        Expr coef;
        for (int c = 0; c < k; ++c) coef += Expr::var(n + c) * lift(s.phi[z(c)][z(i)], sub);
        psi.add({i}, coef);
    }
    auto xi = sharp(pt, psi);
    // with β(♯α) = P(α, β) the generator is −♯ψ for the + triple
    if (sign == VorobievSign::Plus) xi = -xi;

    std::vector<Expr> outs;
    for (int a = 0; a < m; ++a) outs.push_back(xi.get({a}));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) outs.push_back(xi.get({a}).diff(b));
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) outs.push_back(pt.get({a, b}));
    const Tape tape(outs);
    const U M = z(m);

    const auto starts = halton_points(*total, proto, start_shrink);
    FlowResult res;
    res.radius = r;
    res.steps = steps;
    res.samples.resize(starts.size());
    std::vector<double> worst(starts.size(), 0.0);

    for_each_point(starts.size(), [&](std::size_t p) {
        std::vector<double> scratch, buf(outs.size()), at(M + 1);
        auto field = [&](double t, const std::vector<double>& x, const std::vector<double>& jac,
                         std::vector<double>& dx, std::vector<double>& dj) {
            for (U i = 0; i < M; ++i) {
                if (x[i] < dom[i].first || x[i] > dom[i].second)
                    throw IntegrationLeftDomain("trajectory from " + point_text(starts[p]) + " left the chart at t = " +
                                                std::to_string(t));
                at[i] = x[i];
            }
            at[M] = t;
            tape.run(at.data(), buf.data(), scratch);
            for (U i = 0; i < M; ++i) dx[i] = buf[i];
            for (U i = 0; i < M; ++i)
                for (U j = 0; j < M; ++j) {
                    double acc = 0.0;
                    for (U l = 0; l < M; ++l) acc += buf[M + i * M + l] * jac[l * M + j];
                    dj[i * M + j] = acc;
                }
        };
        std::vector<double> x = starts[p], jac(M * M, 0.0);
        for (U i = 0; i < M; ++i) jac[i * M + i] = 1.0;
        const double h = 1.0 / steps;
        std::vector<double> k1(M), k2(M), k3(M), k4(M), j1(M * M), j2(M * M), j3(M * M), j4(M * M);
        std::vector<double> xs(M), js(M * M);
        auto stage = [&](const std::vector<double>& dx, const std::vector<double>& dj, double f) {
            for (U i = 0; i < M; ++i) xs[i] = x[i] + f * dx[i];
            for (U i = 0; i < M * M; ++i) js[i] = jac[i] + f * dj[i];
        };
        for (int st = 0; st < steps; ++st) {
            const double t = st * h;
            field(t, x, jac, k1, j1);
            stage(k1, j1, h / 2);
            field(t + h / 2, xs, js, k2, j2);
            stage(k2, j2, h / 2);
            field(t + h / 2, xs, js, k3, j3);
            stage(k3, j3, h);
            field(t + h, xs, js, k4, j4);
            for (U i = 0; i < M; ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            for (U i = 0; i < M * M; ++i) jac[i] += h / 6 * (j1[i] + 2 * j2[i] + 2 * j3[i] + j4[i]);
        }
        for (U i = 0; i < M; ++i)
            if (x[i] < dom[i].first || x[i] > dom[i].second)
                throw IntegrationLeftDomain("trajectory from " + point_text(starts[p]) + " ended outside the chart");

        // Φ_* P_0 at the endpoint against P_1 there
        auto bivector_at = [&](const std::vector<double>& y, double t) {
            for (U i = 0; i < M; ++i) at[i] = y[i];
            at[M] = t;
            tape.run(at.data(), buf.data(), scratch);
            la::Mat b(M, M);
            U o = M + M * M;
            for (U a = 0; a < M; ++a)
                for (U c = a + 1; c < M; ++c) {
                    b(a, c) = buf[o];
                    b(c, a) = -buf[o];
                    ++o;
                }
            return b;
        };
        la::Mat jm(M, M);
        for (U i = 0; i < M; ++i)
            for (U j = 0; j < M; ++j) jm(i, j) = jac[i * M + j];
        const la::Mat pushed = jm * bivector_at(starts[p], 0.0) * jm.transpose();
        const la::Mat p1 = bivector_at(x, 1.0);
        worst[p] = (pushed - p1).max_abs();
        res.samples[p] = FlowSample{starts[p], x, jm};
    }, exec);
    res.residual = worst.empty() ? 0.0 : *std::max_element(worst.begin(), worst.end());
    return res;
}

// ---- linearization at a leaf -----------------------------------------------------

PointSet near_leaf_points(const FoliatedChart& fol, const PointSet& pts, double r, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    PointSet out;
    for (auto x : pts) {
        std::vector<double> v(z(fol.q()));
        double len = 0.0;
        while (len < 1e-12) {
            len = 0.0;
            for (auto& e : v) {
                e = nd(rng);
                len += e * e;
            }
            len = std::sqrt(len);
        }
        for (int a = 0; a < fol.q(); ++a) x[z(fol.transverse[z(a)])] = r * v[z(a)] / len;
        out.push_back(std::move(x));
    }
    return out;
}

Linearization linearize_at_leaf(const MultivectorField& p, const FoliatedChart& fol, const PointSet& pts, double tol) {
    if (p.degree() != 2) throw DegreeError("linearization needs a bivector");
    require_same_chart(p.chart(), fol.chart, "linearization");
    const ChartPtr& ch = p.chart();
    const int N = p.dim();
    const auto& kap = fol.leaf;
    const auto& nor = fol.transverse;
    const int n = fol.p(), k = fol.q();

    std::vector<Expr> to_base(z(N)), up(z(n));
    for (int i = 0; i < n; ++i) {
        to_base[z(kap[z(i)])] = Expr::var(i);
        up[z(i)] = Expr::var(kap[z(i)]);
    }
    std::vector<std::string> bnames;
    std::vector<std::pair<double, double>> bdom;
    for (int s : kap) {
        bnames.push_back(ch->names[z(s)]);
        bdom.push_back(ch->domain[z(s)]);
    }
    // a point leaf gets an empty base chart, which make_chart would refuse
    const ChartPtr base = n == 0 ? std::make_shared<const Chart>() : make_chart(bnames, bdom);
    PointSet base_pts;
    for (const auto& x : pts) {
        std::vector<double> b;
        for (int s : kap) b.push_back(x[z(s)]);
        base_pts.push_back(std::move(b));
    }

    // slice conditions at the sample points
    for (const auto& x : near_leaf_points(fol, pts, 0.0)) {
        const auto full = matrix_at(p, x.data());
        const double scale = std::max(1.0, full.max_abs());
        for (int a : nor)
            for (int j = 0; j < N; ++j)
                if (std::abs(full(z(a), z(j))) > tol * scale)
                    throw NotALeaf("normal components do not vanish on the slice at " + point_text(x));
        la::Mat mm(z(n), z(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) mm(z(i), z(j)) = full(z(kap[z(i)]), z(kap[z(j)]));
        if (!well_conditioned(mm)) throw NotALeaf("leaf block is degenerate at " + point_text(x));
    }

    SymMat msym = sym_zero(z(n), z(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) msym[z(i)][z(j)] = p.get({kap[z(i)], kap[z(j)]}).substitute(to_base);
    const SymMat minv = sym_inverse(msym, best_reference(msym, base_pts));

    // frame of T*M along the leaf: g_a = dx^α, q_i = ♯-preimage of ∂_i
    std::vector<DifferentialForm> g, q;
    for (int a = 0; a < k; ++a) g.push_back(DifferentialForm::basis(ch, {nor[z(a)]}));
    for (int i = 0; i < n; ++i) {
        DifferentialForm f(ch, 1);
        for (int j = 0; j < n; ++j) f.add({kap[z(j)]}, minv[z(i)][z(j)].substitute(up));
        q.push_back(f);
    }
    auto on_leaf = [&](const DifferentialForm& f, int slot) { return f.get({slot}).substitute(to_base); };

    Linearization lin;
    AlgebroidData d = AlgebroidData::zero(base, k);
    d.fiber_names.clear();
    for (int s : nor) d.fiber_names.push_back(ch->names[z(s)]);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            if (a == b) continue;
            const auto br = one_form_bracket(p, g[z(a)], g[z(b)]);
            for (int c = 0; c < k; ++c) d.alpha[z(c)][z(a)][z(b)] = on_leaf(br, nor[z(c)]);
        }
    for (int a = 0; a < k; ++a)
        for (int i = 0; i < n; ++i) {
            const auto br = one_form_bracket(p, g[z(a)], q[z(i)]);
            for (int c = 0; c < k; ++c) d.beta[z(c)][z(a)][z(i)] = on_leaf(br, nor[z(c)]);
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto br = one_form_bracket(p, q[z(i)], q[z(j)]);
            for (int c = 0; c < k; ++c) d.gamma_f[z(c)][z(i)][z(j)] = on_leaf(br, nor[z(c)]);
            for (int h = 0; h < n; ++h) {
                Expr acc;
                for (int l = 0; l < n; ++l) acc += on_leaf(br, kap[z(l)]) * msym[z(l)][z(h)];
                d.gamma_q[z(h)][z(i)][z(j)] = acc;
            }
        }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d.omega.add({i, j}, -minv[z(i)][z(j)]);

    const FiberLayout lay{ch, kap, nor};
    lin.triple = triple_impl(d, lay, std::nullopt, Expr(0.0), VorobievSign::Plus);
    lin.p_lin = reconstruct_triple(lin.triple, near_leaf_points(fol, pts, 1e-2));
    lin.fibers = make_foliated(ch, nor);
    lin.algebroid = std::move(d);
    return lin;
}

std::vector<CheckRecord> linearization_checks(const MultivectorField& p, const Linearization& lin,
                                              const PointSet& pts, double r1, double r2) {
    // normal offsets are taken with respect to the original foliation: the
    // fibers of the linearization are its transverse directions
    FoliatedChart fol = make_foliated(lin.fibers.chart, lin.fibers.transverse);
    const auto diff = p - lin.p_lin;
    const auto on = near_leaf_points(fol, pts, 0.0);
    const auto n1 = near_leaf_points(fol, pts, r1);
    const auto n2 = near_leaf_points(fol, pts, r2);
    std::vector<CheckRecord> out;
    out.push_back(make_check("leaf_agreement", "agreement-on-leaf", max_abs(diff, on), 1e-10, on));
    const double e1 = max_abs(diff, n1).value, e2 = max_abs(diff, n2).value;
    out.push_back(make_check("first_order_near", "agreement-at-r1", e1, r1, std::nullopt));
    out.push_back(make_check("first_order_nearer", "agreement-at-r2", e2, r2, std::nullopt));
    const double target = (r1 / r2) * (r1 / r2);
    const bool exact = e1 < 1e-12 && e2 < 1e-12;
    const double ratio = e2 > 0.0 ? e1 / e2 : std::numeric_limits<double>::infinity();
    auto ord = make_check("second_order_ratio", "agreement-order", exact ? 0.0 : 0.5 * target / ratio, 1.0);
    std::ostringstream os;
    os << "ratio " << ratio << ", expected about " << target << (exact ? " (exact agreement)" : "");
    ord.note = os.str();
    out.push_back(ord);
    if (lin.p_lin.dim() < 3)
        out.push_back(make_check("linear_poisson", "poisson-direct", 0.0, 1e-9));  // no room for a trivector
    else
        out.push_back(make_check("linear_poisson", "poisson-direct",
                                 max_abs(schouten_bracket(lin.p_lin, lin.p_lin), n1), 1e-9, n1));
    return out;
}

}  // namespace fpk
