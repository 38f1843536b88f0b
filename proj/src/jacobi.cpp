#include "fpk/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fpk {

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

MaxAbs worst_of(const std::vector<Expr>& es, const PointSet& pts) { return max_abs(es, pts); }

void append(std::vector<Expr>& out, const std::vector<Expr>& more) { out.insert(out.end(), more.begin(), more.end()); }

CheckRecord line(const std::string& name, const std::string& label, const std::vector<Expr>& es, const PointSet& pts,
                 double tol) {
    return make_check(name, label, worst_of(es, pts), tol, pts);
}

Expr ev(const MultivectorField& p, const DifferentialForm& a, const DifferentialForm& b) {
    return evaluate_on(p, {a, b});
}
Expr ev(const MultivectorField& p, const DifferentialForm& a, const DifferentialForm& b, const DifferentialForm& c) {
    return evaluate_on(p, {a, b, c});
}
Expr ev(const DifferentialForm& w, const MultivectorField& x) { return evaluate_on(w, {x}); }
Expr ev(const DifferentialForm& w, const MultivectorField& x, const MultivectorField& y) {
    return evaluate_on(w, {x, y});
}

la::Mat sub(const la::Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
    la::Mat out(rows.size(), cols.size());
    for (U i = 0; i < rows.size(); ++i)
        for (U j = 0; j < cols.size(); ++j) out(i, j) = m(z(rows[i]), z(cols[j]));
    return out;
}

std::vector<int> all_slots(int n) {
    std::vector<int> v(z(n));
    for (int i = 0; i < n; ++i) v[z(i)] = i;
    return v;
}

// Aggregates a pointwise boolean into Yes / No / Mixed with witnesses.
struct Tally {
    std::optional<std::vector<double>> yes, no;
    void add(bool v, const std::vector<double>& x) {
        auto& slot = v ? yes : no;
        if (!slot) slot = x;
    }
    Verdict verdict() const {
        if (yes && no) return Verdict::Mixed;
        return yes ? Verdict::Yes : Verdict::No;
    }
    std::vector<std::vector<double>> witnesses() const { return {*yes, *no}; }
};

// H′ ⊕ span{E} as a graph over the transverse slots: spanned by ♯ of
// ann(F ⊕ E) and E itself.
NormalBundle third_kind_bundle(const JacobiPair& pair, const FoliatedChart& fol, const PointSet& pts) {
    const int q = fol.q(), p = fol.p();
    const auto& ch = pair.chart();
    // pivot on the transverse component of E that stays largest over the samples
    int a0 = 0;
    double best = -1.0;
    for (int a = 0; a < q; ++a) {
        const Expr ea = pair.e.get({fol.transverse[z(a)]});
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& x : pts) lo = std::min(lo, std::abs(ea.eval(x.data())));
        if (lo > best) {
            best = lo;
            a0 = a;
        }
    }
    const Expr e0 = pair.e.get({fol.transverse[z(a0)]});
    std::vector<MultivectorField> vecs;
    for (int k = 0; k < q; ++k) {
        if (k == a0) continue;
        DifferentialForm c(ch, 1);
        c.add({fol.transverse[z(k)]}, e0);
        c.add({fol.transverse[z(a0)]}, -pair.e.get({fol.transverse[z(k)]}));
        vecs.push_back(sharp(pair.lambda, c));
    }
    vecs.push_back(pair.e);
    SymMat a = sym_zero(z(q), z(q));
    for (int k = 0; k < q; ++k)
        for (int j = 0; j < q; ++j) a[z(k)][z(j)] = vecs[z(k)].get({fol.transverse[z(j)]});
    SymMat inv;
    try {
        inv = sym_inverse(a, best_reference(a, pts));
    } catch (const Degenerate& e) {
        throw NotCoupling(std::string("H' + span{E} is not complementary to F: ") + e.what());
    }
    NormalBundle h = NormalBundle::flat(fol);
    for (int r = 0; r < q; ++r)
        for (int u = 0; u < p; ++u) {
            Expr g;
            for (int k = 0; k < q; ++k) g += inv[z(r)][z(k)] * vecs[z(k)].get({fol.leaf[z(u)]});
            h.gamma[z(r)][z(u)] = g;
        }
    return h;
}

}  // namespace

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Yes: return "yes";
        case Verdict::No: return "no";
        default: return "mixed";
    }
}

const char* to_string(EType t) {
    switch (t) {
        case EType::Tangent: return "tangent";
        case EType::Normal: return "normal";
        default: return "neither";
    }
}

JacobiPair make_jacobi_pair(MultivectorField lambda, MultivectorField e) {
    if (lambda.degree() != 2) throw DegreeError("Jacobi pair needs a bivector");
    if (e.degree() != 1) throw DegreeError("Jacobi pair needs a vector field");
    require_same_chart(lambda.chart(), e.chart(), "Jacobi pair");
    return JacobiPair{std::move(lambda), std::move(e)};
}

bool JacobiReport::pass() const {
    return std::all_of(records.begin(), records.end(), [](const CheckRecord& r) { return r.pass(); });
}

JacobiReport check_jacobi(const JacobiPair& pair, const PointSet& pts, double tol) {
    const auto& l = pair.lambda;
    JacobiReport rep;
    // no trivectors below dimension three, so the bracket condition is empty there
    const auto b = l.dim() < 3 ? MaxAbs{}
                               : max_abs(schouten_bracket(l, l) - Expr(2.0) * wedge(pair.e, l), pts);
    const auto lie = max_abs(lie_derivative(pair.e, l), pts);
    rep.bracket_residual = b.value;
    rep.lie_residual = lie.value;
    rep.records.push_back(make_check("bracket", "jacobi-bracket-square", b, tol, pts));
    rep.records.push_back(make_check("lie", "jacobi-reeb-invariance", lie, tol, pts));
    return rep;
}

ChartPtr extended_chart(const ChartPtr& chart, std::pair<double, double> t_domain) {
    auto names = chart->names;
    auto dom = chart->domain;
    std::string t = "t";
    while (std::find(names.begin(), names.end(), t) != names.end()) t += "_";
    names.push_back(t);
    dom.push_back(t_domain);
    return make_chart(names, dom);
}

FoliatedChart extended_foliation(const FoliatedChart& fol, const ChartPtr& extended) {
    auto leaf = fol.leaf;
    leaf.push_back(static_cast<int>(extended->dim()) - 1);
    return make_foliated(extended, leaf);
}

MultivectorField poissonize(const JacobiPair& pair, std::pair<double, double> t_domain) {
    const auto ext = extended_chart(pair.chart(), t_domain);
    const int t = static_cast<int>(ext->dim()) - 1;
    MultivectorField l(ext, 2), e(ext, 1);
    for (const auto& [k, c] : pair.lambda.components()) l.add(k, c);
    for (const auto& [k, c] : pair.e.components()) e.add(k, c);
    return exp(-Expr::var(t)) * (l + wedge(MultivectorField::basis(ext, {t}), e));
}

JacobiPair conformal_change(const JacobiPair& pair, const Expr& a, const PointSet& pts) {
    for (const auto& x : pts)
        if (!(a.eval(x.data()) > 0.0)) throw NonPositiveScale("conformal factor is not positive at " + point_text(x));
    return JacobiPair{a * pair.lambda, a * pair.e + sharp(pair.lambda, differential(pair.chart(), a))};
}

JacobiClassification classify_jacobi_coupling(const JacobiPair& pair, const FoliatedChart& fol,
                                              const std::optional<NormalBundle>& h, const PointSet& pts, double tol,
                                              bool strict) {
    require_same_chart(pair.chart(), fol.chart, "Jacobi classification");
    const int q = fol.q(), n = fol.dim();
    const auto& tr = fol.transverse;
    const auto every = all_slots(n);
    Tally pre, leaf_tangent, tangent, almost;
    std::map<int, std::vector<double>> kinds;
    for (const auto& x : pts) {
        const la::Mat l = matrix_at(pair.lambda, x.data());
        std::vector<double> e(z(n));
        for (int i = 0; i < n; ++i) e[z(i)] = pair.e.get({i}).eval(x.data());
        double scale = std::max(1.0, l.max_abs());
        for (double v : e) scale = std::max(scale, std::abs(v));
        const double eps = tol * scale;

        const la::Mat b = sub(l, tr, tr), rows = sub(l, tr, every);
        double e_tr = 0.0;
        for (int a : tr) e_tr = std::max(e_tr, std::abs(e[z(a)]));
        const bool is_tangent = e_tr <= eps;
        const std::size_t rank_b = q ? la::rank(b) : 0;
        pre.add(rows.max_abs() <= eps || la::rank(rows) == rank_b, x);
        leaf_tangent.add(rows.max_abs() <= eps && is_tangent, x);
        tangent.add(is_tangent, x);

        if (h) {
            double worst = 0.0;
            for (int a = 0; a < q; ++a)
                for (int u = 0; u < fol.p(); ++u) {
                    double expect = 0.0;
                    for (int c = 0; c < q; ++c) expect += b(z(a), z(c)) * h->gamma[z(c)][z(u)].eval(x.data());
                    worst = std::max(worst, std::abs(rows(z(a), z(fol.leaf[z(u)])) - expect));
                }
            almost.add(worst <= eps, x);
        }

        // kinds: rank conditions on ann F and on ann(F ⊕ E)
        const bool full = static_cast<int>(rank_b) == q;
        bool e_in_image = false;
        if (full) {
            la::Mat aug(z(n), z(q) + 1);
            for (int i = 0; i < n; ++i) {
                for (int a = 0; a < q; ++a) aug(z(i), z(a)) = rows(z(a), z(i));
                aug(z(i), z(q)) = e[z(i)];
            }
            e_in_image = la::rank(aug) == z(q);
        }
        int kind = 0;
        if (q > 0 && full && is_tangent)
            kind = 1;
        else if (q > 0 && full && e_in_image)
            kind = 2;
        else if (q > 0 && !is_tangent) {
            la::Mat row(1, z(q));
            for (int a = 0; a < q; ++a) row(0, z(a)) = e[z(tr[z(a)])];
            const la::Mat c = la::SVD(row).null_space();
            if (static_cast<int>(c.cols) == q - 1) {
                const la::Mat r = c.transpose() * b * c;
                if (q == 1 || static_cast<int>(la::rank(r)) == q - 1) kind = 3;
            }
        }
        kinds.emplace(kind, x);
    }

    JacobiClassification out;
    auto note = [&](const std::string& name, const Tally& t) {
        const Verdict v = t.verdict();
        if (v == Verdict::Mixed) {
            out.uniform = false;
            out.witnesses[name] = t.witnesses();
        }
        return v;
    };
    out.pre_coupling = note("pre_coupling", pre);
    out.leaf_tangent_pair = note("leaf_tangent_pair", leaf_tangent);
    const Verdict tv = note("e_type", tangent);
    out.e_type = tv == Verdict::Yes ? EType::Tangent : tv == Verdict::No ? EType::Normal : EType::Neither;
    if (h) out.almost_coupling = note("almost_coupling", almost);
    if (kinds.size() == 1) {
        out.kind = kinds.begin()->first;
    } else if (!kinds.empty()) {
        out.uniform = false;
        auto& w = out.witnesses["kind"];
        for (const auto& [k, x] : kinds) w.push_back(x);
    }
    if (strict && !out.uniform) {
        std::ostringstream os;
        os << "verdicts change over the samples:";
        for (const auto& [name, w] : out.witnesses) os << " " << name << " at " << point_text(w.front()) << " vs "
                                                      << point_text(w.back()) << ";";
        throw NonUniform(os.str());
    }
    if (out.kind == 1 || out.kind == 2)
        out.normal = coupling_normal_bundle(pair.lambda, fol, pts);
    else if (out.kind == 3)
        out.normal = third_kind_bundle(pair, fol, pts);
    return out;
}

std::vector<CheckRecord> verify_kind_conditions(const JacobiPair& pair, const FoliatedChart& fol, int kind,
                                                const PointSet& pts, double tol) {
    if (kind < 1 || kind > 3) throw KindMismatch("coupling kind must be 1, 2 or 3");
    const auto cls = classify_jacobi_coupling(pair, fol, std::nullopt, pts, tol);
    if (!cls.uniform || cls.kind != kind)
        throw KindMismatch("pair is not coupling of kind " + std::to_string(kind) + " (classified as " +
                           (cls.uniform ? std::to_string(cls.kind) : std::string("non-uniform")) + ")");
    const NormalBundle& h = *cls.normal;
    const int q = fol.q(), p = fol.p();
    const auto& e = pair.e;
    const auto bg = bigrade(pair.lambda, h);
    const MultivectorField l1 = bg.get(2, 0), l2 = bg.get(0, 2), l11 = bg.get(1, 1);
    std::vector<DifferentialForm> al, la;
    for (int a = 0; a < q; ++a) al.push_back(h.transverse_form(a));
    for (int u = 0; u < p; ++u) la.push_back(h.leaf_form(u));
    std::vector<MultivectorField> xs;
    for (int a = 0; a < q; ++a) xs.push_back(h.horizontal(a));

    std::vector<CheckRecord> out;
    out.push_back(line("mixed_part_zero", "jacobi-no-mixed-part", l11.exprs(), pts, tol));

    if (kind == 3) {
        // the product description only follows when ♯(ann F) ⊆ H
        const auto mixed = max_abs(l11, pts);
        if (mixed.value > tol)
            throw KindMismatch("third-kind conditions need the mixed part of Lambda to vanish (max " +
                               std::to_string(mixed.value) + " at " + point_text(pts[mixed.point]) + ")");
        out.push_back(line("leaf_part_zero", "third-kind-leaf-part", l2.exprs(), pts, tol));
        const auto tj = check_jacobi(JacobiPair{l1, e}, pts, tol);
        auto r1 = tj.records[0];
        r1.name = "transverse_bracket";
        auto r2 = tj.records[1];
        r2.name = "transverse_lie";
        out.push_back(r1);
        out.push_back(r2);
        std::vector<Expr> del;
        for (const auto& th : la) append(del, d_split(th, h).del.exprs());
        out.push_back(line("normal_integrable", "normal-bundle-involutive", del, pts, tol));
        // restriction to the leaves of H: rank Λ′ = q − 1 with E outside its image
        std::optional<std::vector<double>> bad;
        for (const auto& x : pts) {
            la::Mat b(z(q), z(q)), aug(z(q), z(q) + 1);
            for (int a = 0; a < q; ++a) {
                for (int c = 0; c < q; ++c) b(z(a), z(c)) = aug(z(a), z(c)) = ev(l1, al[z(a)], al[z(c)]).eval(x.data());
                aug(z(a), z(q)) = ev(al[z(a)], e).eval(x.data());
            }
            if (static_cast<int>(la::rank(b)) != q - 1 || static_cast<int>(la::rank(aug)) != q) {
                bad = x;
                break;
            }
        }
        auto c = make_check("normal_leaves_contact", "third-kind-contact-leaves", bad ? 1.0 : 0.0, 0.5, bad);
        out.push_back(c);
    } else {
        const bool first = kind == 1;
        // the four bracket lines, per bidegree of the arguments
        std::vector<Expr> f1, f2, f3, f4;
        for (int a = 0; a < q; ++a)
            for (int b = a + 1; b < q; ++b) {
                const auto sa = sharp(l1, al[z(a)]), sb = sharp(l1, al[z(b)]);
                const auto br = lie_bracket(sa, sb);
                for (int c = 0; c < q; ++c) {
                    Expr v = ev(d_split(al[z(c)], h).d1, sa, sb) -
                             ev(lie_derivative(sharp(l1, al[z(c)]), l1), al[z(a)], al[z(b)]);
                    if (!first) v -= ev(wedge(e, l1), al[z(a)], al[z(b)], al[z(c)]);
                    f1.push_back(v);
                }
                for (int u = 0; u < p; ++u) {
                    Expr v = ev(lie_derivative(sharp(l2, la[z(u)]), l1), al[z(a)], al[z(b)]) + ev(la[z(u)], br);
                    if (first) v += ev(la[z(u)], e) * ev(l1, al[z(a)], al[z(b)]);
                    f2.push_back(v);
                }
            }
        for (int a = 0; a < q; ++a) {
            const auto lie = lie_derivative(sharp(l1, al[z(a)]), l2);
            for (int u = 0; u < p; ++u)
                for (int v = u + 1; v < p; ++v) {
                    Expr w = ev(lie, la[z(u)], la[z(v)]);
                    if (!first) w += ev(al[z(a)], e) * ev(l2, la[z(u)], la[z(v)]);
                    f3.push_back(w);
                }
        }
        for (int u = 0; u < p; ++u)
            for (int v = u + 1; v < p; ++v) {
                const auto su = sharp(l2, la[z(u)]), sv = sharp(l2, la[z(v)]);
                for (int w = 0; w < p; ++w) {
                    Expr r = ev(d_split(la[z(w)], h).d2, su, sv) -
                             ev(lie_derivative(sharp(l2, la[z(w)]), l2), la[z(u)], la[z(v)]);
                    if (first) r -= ev(wedge(e, l2), la[z(u)], la[z(v)], la[z(w)]);
                    f4.push_back(r);
                }
            }
        out.push_back(line("transverse_transverse", "pair-lines-transverse", f1, pts, tol));
        out.push_back(line("transverse_leaf_mixed", "pair-lines-mixed", f2, pts, tol));
        out.push_back(line("leaf_along_transverse", "pair-lines-leaf-invariance", f3, pts, tol));
        out.push_back(line("leaf_leaf", "pair-lines-leaf", f4, pts, tol));

        // Lie derivative along E, per bidegree
        const auto le = lie_derivative(e, pair.lambda);
        std::vector<Expr> e20, e02, e11;
        for (int a = 0; a < q; ++a)
            for (int b = a + 1; b < q; ++b) e20.push_back(ev(lie_derivative(e, l1), al[z(a)], al[z(b)]));
        for (int u = 0; u < p; ++u)
            for (int v = u + 1; v < p; ++v) e02.push_back(ev(lie_derivative(e, l2), la[z(u)], la[z(v)]));
        for (int a = 0; a < q; ++a)
            for (int u = 0; u < p; ++u) e11.push_back(ev(le, al[z(a)], la[z(u)]));
        if (first) {
            out.push_back(line("reeb_leaf_invariance", "reeb-preserves-leaf-part", lie_derivative(e, l2).exprs(), pts,
                               tol));
            out.push_back(line("reeb_transverse_invariance", "reeb-preserves-transverse-part",
                               lie_derivative(e, l1).exprs(), pts, tol));
        } else {
            out.push_back(line("reeb_transverse_invariance", "reeb-preserves-transverse-part", e20, pts, tol));
            out.push_back(line("reeb_leaf_invariance", "reeb-preserves-leaf-part", e02, pts, tol));
            out.push_back(line("reeb_mixed_invariance", "reeb-mixed-part", e11, pts, tol));
        }

        // the coupling form σ on H and its conditions
        const auto sigma = extract_triple(pair.lambda, fol, pts).sigma;
        const auto ds = d_split(sigma, h);
        DifferentialForm d1 = ds.d1;
        if (!first) d1 -= wedge(interior_product(e, sigma), sigma);
        out.push_back(line("sigma_transverse_closed", first ? "coupling-form-closed" : "coupling-form-lee-closed",
                           d1.exprs(), pts, tol));
        std::vector<Expr> inv, curv, reeb_sigma, reeb_frame;
        for (int a = 0; a < q; ++a) {
            MultivectorField li = lie_derivative(xs[z(a)], l2);
            if (!first) li -= ev(sigma, xs[z(a)], e) * l2;
            append(inv, li.exprs());
            if (first) append(reeb_frame, lie_bracket(e, xs[z(a)]).exprs());
            for (int b = a + 1; b < q; ++b) {
                const Expr s = ev(sigma, xs[z(a)], xs[z(b)]);
                MultivectorField c = project_leaf(lie_bracket(xs[z(a)], xs[z(b)]), h) +
                                     sharp(l2, differential(fol.chart, s));
                if (first) {
                    c += s * e;
                    reeb_sigma.push_back(apply(e, s));
                }
                append(curv, c.exprs());
            }
        }
        out.push_back(line("leaf_part_invariance", first ? "horizontal-invariance" : "horizontal-conformal-invariance",
                           inv, pts, tol));
        out.push_back(line("curvature", first ? "curvature-with-reeb" : "curvature", curv, pts, tol));
        if (first) {
            out.push_back(line("reeb_sigma_constant", "reeb-kills-sigma", reeb_sigma, pts, tol));
            out.push_back(line("reeb_frame_commutes", "reeb-commutes-with-lifts", reeb_frame, pts, tol));
            const auto lj = check_jacobi(JacobiPair{l2, e}, pts, tol);
            auto r1 = lj.records[0];
            r1.name = "leaf_jacobi_bracket";
            auto r2 = lj.records[1];
            r2.name = "leaf_jacobi_lie";
            out.push_back(r1);
            out.push_back(r2);
        } else {
            out.push_back(line("leaf_poisson", "leaf-part-poisson", schouten_bracket(l2, l2).exprs(), pts, tol));
        }
    }

    const auto direct = check_jacobi(pair, pts, tol);
    const auto& worse = direct.records[0].max_residual >= direct.records[1].max_residual ? direct.records[0]
                                                                                          : direct.records[1];
    out.push_back(make_check("jacobi_direct", "jacobi-direct", worse.max_residual, tol, worse.witness));
    return out;
}

JacobiPair from_lcs(const DifferentialForm& omega, const DifferentialForm& epsilon, const PointSet& pts, double tol) {
    if (omega.degree() != 2) throw DegreeError("LCS form must have degree 2");
    if (epsilon.degree() != 1) throw DegreeError("Lee form must have degree 1");
    require_same_chart(omega.chart(), epsilon.chart(), "LCS pair");
    const auto& ch = omega.chart();
    const int n = omega.dim();
    for (const auto& x : pts) {
        const la::Mat m = matrix_at(omega, x.data());
        la::SVD svd(m);
        if (!(svd.s.back() > 1e-10 * std::max(1.0, svd.s.front())))
            throw Degenerate("LCS form is degenerate at " + point_text(x));
    }
    const double closed = max_abs(exterior_derivative(epsilon), pts).value;
    const double lcs = max_abs(exterior_derivative(omega) - wedge(epsilon, omega), pts).value;
    if (closed > tol || lcs > tol) {
        std::ostringstream os;
        os << "not locally conformal symplectic: |d eps| = " << closed << ", |d omega - eps^omega| = " << lcs;
        throw NotLCS(os.str());
    }
    SymMat w = sym_zero(z(n), z(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) w[z(i)][z(j)] = omega.get({i, j});
    const SymMat inv = sym_inverse(w, best_reference(w, pts));
    MultivectorField l(ch, 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) l.add({i, j}, -inv[z(i)][z(j)]);
    MultivectorField e = -sharp(l, epsilon);
    return JacobiPair{std::move(l), std::move(e)};
}

LcsCouplingReport lcs_coupling_lines(const DifferentialForm& omega, const DifferentialForm& epsilon,
                                     const FoliatedChart& fol, const PointSet& pts, double tol) {
    const auto sc = check_symplectic_coupling(omega, fol, pts, tol);
    const auto& h = sc.normal;
    const auto eb = bigrade(epsilon, h);
    const double transverse = max_abs(eb.get(1, 0), pts).value;
    const double leafwise = max_abs(eb.get(0, 1), pts).value;
    LcsCouplingReport rep;
    rep.kind = transverse <= tol ? 1 : leafwise <= tol ? 2 : 0;
    const auto ds = d_split(sc.sigma, h), dt = d_split(sc.theta, h);
    const auto es = wedge(epsilon, sc.sigma), et = wedge(epsilon, sc.theta);
    if (rep.kind == 1) {
        rep.records.push_back(line("sigma_transverse", "lcs-first-sigma-closed", ds.d1.exprs(), pts, tol));
        rep.records.push_back(line("theta_transverse", "lcs-first-theta-closed", dt.d1.exprs(), pts, tol));
        rep.records.push_back(line("sigma_leafwise", "lcs-first-mixed", (ds.d2 + dt.del - es).exprs(), pts, tol));
        rep.records.push_back(line("theta_leafwise", "lcs-first-theta-lee", (dt.d2 - et).exprs(), pts, tol));
    } else if (rep.kind == 2) {
        rep.records.push_back(line("sigma_transverse", "lcs-second-sigma-lee", (ds.d1 - es).exprs(), pts, tol));
        rep.records.push_back(line("sigma_leafwise", "lcs-second-mixed", (ds.d2 + dt.del).exprs(), pts, tol));
        rep.records.push_back(line("theta_transverse", "lcs-second-theta-lee", (dt.d1 - et).exprs(), pts, tol));
        rep.records.push_back(line("theta_leafwise", "lcs-second-theta-closed", dt.d2.exprs(), pts, tol));
    }
    rep.records.push_back(line("lcs_direct", "lcs-condition",
                               (exterior_derivative(omega) - wedge(epsilon, omega)).exprs(), pts, tol));
    return rep;
}

JacobiPair from_contact(const DifferentialForm& phi, const PointSet& pts) {
    if (phi.degree() != 1) throw DegreeError("contact form must have degree 1");
    const auto& ch = phi.chart();
    const int n = phi.dim();
    if (n % 2 == 0) throw NotContact("contact forms live in odd dimension, chart has " + std::to_string(n));
    const DifferentialForm dphi = exterior_derivative(phi);
    DifferentialForm vol = phi;
    for (int i = 0; i < n / 2; ++i) vol = wedge(vol, dphi);
    const Expr top = vol.get(all_slots(n));
    for (const auto& x : pts)
        if (!(std::abs(top.eval(x.data())) > 1e-10))
            throw NotContact("phi ^ (d phi)^n vanishes at " + point_text(x));
    // [[dφ, φᵀ], [−φ, 0]]⁻¹ = [[−Λ, −E], [Eᵀ, 0]]
    const U m = z(n) + 1;
    SymMat a = sym_zero(m, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            if (i != j) a[z(i)][z(j)] = dphi.get({i, j});
        a[z(i)][z(n)] = phi.get({i});
        a[z(n)][z(i)] = -phi.get({i});
    }
    const SymMat inv = sym_inverse(a, best_reference(a, pts));
    MultivectorField l(ch, 2), e(ch, 1);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) l.add({i, j}, -inv[z(i)][z(j)]);
        e.add({i}, -inv[z(i)][z(n)]);
    }
    return JacobiPair{std::move(l), std::move(e)};
}

CheckRecord leafwise_contact(const DifferentialForm& phi, const FoliatedChart& fol, const PointSet& pts) {
    require_same_chart(phi.chart(), fol.chart, "leafwise contact test");
    const int p = fol.p();
    if (p % 2 == 0) {
        auto r = make_check("leafwise_contact", "leaf-pullback-contact", 1.0, 0.5, pts.empty() ? std::nullopt
                                                                                           : std::optional(pts.front()));
        r.note = "leaves have even dimension " + std::to_string(p);
        return r;
    }
    auto on_leaves = [&](const DifferentialForm& w) {
        DifferentialForm out(w.chart(), w.degree());
        for (const auto& [k, c] : w.components())
            if (std::all_of(k.begin(), k.end(), [&](int s) {
                    return std::find(fol.leaf.begin(), fol.leaf.end(), s) != fol.leaf.end();
                }))
                out.add(k, c);
        return out;
    };
    const DifferentialForm pl = on_leaves(phi);
    const DifferentialForm dpl = on_leaves(exterior_derivative(pl));
    DifferentialForm vol = pl;
    for (int i = 0; i < p / 2; ++i) vol = wedge(vol, dpl);
    const Expr top = vol.get(fol.leaf);
    double lo = std::numeric_limits<double>::infinity();
    std::optional<std::vector<double>> at;
    for (const auto& x : pts) {
        const double v = std::abs(top.eval(x.data()));
        if (v < lo) {
            lo = v;
            at = x;
        }
    }
    const bool ok = lo > 1e-10;
    auto r = make_check("leafwise_contact", "leaf-pullback-contact", ok ? 0.0 : 1.0, 0.5, ok ? std::nullopt : at);
    std::ostringstream os;
    os << "smallest |phi ^ (d phi)^k| on leaves: " << lo;
    r.note = os.str();
    return r;
}

Expr jacobi_bracket(const JacobiPair& pair, const Expr& f, const Expr& g) {
    const auto& ch = pair.chart();
    return bivector_on(pair.lambda, differential(ch, f), differential(ch, g)) + f * apply(pair.e, g) -
           g * apply(pair.e, f);
}

JetSection jet_bracket_unchecked(const JetSection& s1, const JetSection& s2, const JacobiPair& pair) {
    require_same_chart(s1.alpha.chart(), pair.chart(), "jet bracket");
    require_same_chart(s2.alpha.chart(), pair.chart(), "jet bracket");
    const auto& ch = pair.chart();
    const auto& l = pair.lambda;
    const auto& e = pair.e;
    const auto& a = s1.alpha;
    const auto& b = s2.alpha;
    DifferentialForm form = one_form_bracket(l, a, b) + s1.f * lie_derivative(e, b) - s2.f * lie_derivative(e, a) -
                            ev(a, e) * b + ev(b, e) * a;
    const Expr scalar = jacobi_bracket(pair, s1.f, s2.f) -
                        bivector_on(l, differential(ch, s1.f) - a, differential(ch, s2.f) - b);
    return JetSection{std::move(form), scalar};
}

JetSection jet_bracket(const JetSection& s1, const JetSection& s2, const JacobiPair& pair, const PointSet& pts) {
    const auto rep = check_jacobi(pair, pts);
    if (!rep.pass())
        throw NotJacobi("jet bracket needs a Jacobi pair (residuals " + std::to_string(rep.bracket_residual) + ", " +
                        std::to_string(rep.lie_residual) + ")");
    return jet_bracket_unchecked(s1, s2, pair);
}

MultivectorField jet_anchor(const JetSection& s, const JacobiPair& pair) {
    const auto pts = halton_points(*pair.chart(), {default_sample_count(), 0});
    if (!check_jacobi(pair, pts).pass()) throw NotJacobi("jet anchor needs a Jacobi pair");
    return sharp(pair.lambda, s.alpha) + s.f * pair.e;
}

JacobiPair iglesias_pair(const AlgebroidData& d, const std::vector<double>& zeta, double radius,
                         const PointSet& base_pts) {
    const int k = d.rank, n = d.n();
    if (static_cast<int>(zeta.size()) != k) throw DegreeError("zeta needs one entry per fiber coordinate");
    std::vector<Expr> kill;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            Expr s;
            for (int c = 0; c < k; ++c) s += zeta[z(c)] * d.alpha[z(c)][z(a)][z(b)];
            kill.push_back(s);
        }
    const auto m = max_abs(kill, base_pts);
    if (m.value > 1e-12)
        throw ZetaNotAnnihilating("zeta does not vanish on the derived algebra (residual " + std::to_string(m.value) +
                                  " at " + point_text(base_pts[m.point]) + ")");
    const auto total = total_chart(d, radius);
    const auto lay = standard_layout(d, total);
    const auto lp = vorobiev_triple(d, lay, std::nullopt, 0.0, VorobievSign::Plus).leaf;
    MultivectorField euler(total, 1), zv(total, 1);
    for (int a = 0; a < k; ++a) {
        euler.add({n + a}, Expr::var(n + a));
        zv.add({n + a}, Expr(zeta[z(a)]));
    }
    return JacobiPair{lp + wedge(euler, zv), -zv};
}

}  // namespace fpk
