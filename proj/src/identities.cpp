#include "fpk/identities.hpp"

namespace fpk {

namespace {

std::vector<DifferentialForm> coframe(const ChartPtr& c) {
    std::vector<DifferentialForm> out;
    for (int i = 0; i < static_cast<int>(c->dim()); ++i) out.push_back(DifferentialForm::basis(c, {i}));
    return out;
}

std::vector<MultivectorField> default_fields(const ChartPtr& c) {
    const int n = static_cast<int>(c->dim());
    std::vector<MultivectorField> out;
    for (int i = 0; i < n; ++i) out.push_back(MultivectorField::basis(c, {i}));
    MultivectorField x(c, 1);
    for (int i = 0; i < n; ++i) x.add({i}, Expr::var((i + 1) % n) * Expr(1.0 + 0.5 * i));
    out.push_back(x);
    return out;
}

struct Triple {
    std::size_t a, b, c;
};

std::vector<Triple> triples(std::size_t n) {
    std::vector<Triple> t;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            for (std::size_t c = b + 1; c < n; ++c) t.push_back({a, b, c});
    return t;
}

}  // namespace

std::vector<CheckRecord> gd_identity_suite(const MultivectorField& p, const PointSet& pts, double tol,
                                           const IdentityInputs& in, Exec exec) {
    if (p.degree() != 2) throw DegreeError("identity suite needs a bivector");
    const ChartPtr& ch = p.chart();
    const auto args = in.args.empty() ? coframe(ch) : in.args;
    const auto fields = in.fields.empty() ? default_fields(ch) : in.fields;
    const MultivectorField q = in.rhs ? *in.rhs : p;
    require_same_chart(ch, q.chart(), "identity right-hand side");
    const auto pp = schouten_bracket(p, p);
    const auto qq = in.rhs ? schouten_bracket(q, q) : pp;
    const Expr two(2.0), half(0.5);

    std::vector<MultivectorField> sh;
    std::vector<DifferentialForm> d;
    for (const auto& a : args) {
        sh.push_back(sharp(q, a));
        d.push_back(exterior_derivative(a));
    }
    auto ppv = [&](const DifferentialForm& a, const DifferentialForm& b, const DifferentialForm& c) {
        return evaluate_on(pp, {a, b, c});
    };
    auto qqv = [&](const DifferentialForm& a, const DifferentialForm& b, const DifferentialForm& c) {
        return evaluate_on(qq, {a, b, c});
    };

    std::vector<Expr> r_lie, r_form, r_cyc, r_alg, r_cond;
    for (const auto& t : triples(args.size())) {
        const auto &a = args[t.a], &b = args[t.b], &c = args[t.c];
        const Expr lhs = ppv(a, b, c);

        Expr rhs1 = two * (evaluate_on(d[t.c], {sh[t.a], sh[t.b]}) -
                           bivector_on(lie_derivative(sh[t.c], q), a, b));
        r_lie.push_back(lhs - rhs1);

        auto ab = one_form_bracket(q, a, b);
        Expr rhs2 = two * (pairing(sharp(q, ab), c) - pairing(lie_bracket(sh[t.a], sh[t.b]), c));
        r_form.push_back(lhs - rhs2);

        auto cyc_term = [&](std::size_t i, std::size_t j, std::size_t k) {
            return pairing(sharp(q, lie_derivative(sh[i], args[j])), args[k]);
        };
        Expr rhs3 = two * (cyc_term(t.a, t.b, t.c) + cyc_term(t.b, t.c, t.a) + cyc_term(t.c, t.a, t.b));
        r_cyc.push_back(lhs - rhs3);

        for (const auto& x : fields) {
            auto jac = [&](const DifferentialForm& u, const DifferentialForm& v, const DifferentialForm& w) {
                return pairing(x, one_form_bracket(p, one_form_bracket(p, u, v), w));
            };
            Expr l4 = jac(a, b, c) + jac(b, c, a) + jac(c, a, b);
            Expr r4 = evaluate_on(schouten_bracket(q, lie_derivative(x, q)), {a, b, c});
            auto dpair = [&](const DifferentialForm& w) { return differential(ch, pairing(x, w)); };
            r4 += half * (qqv(a, b, dpair(c)) + qqv(b, c, dpair(a)) + qqv(c, a, dpair(b)));
            r_alg.push_back(l4 - r4);
        }
    }
    for (std::size_t i = 0; i < args.size(); ++i)
        for (std::size_t j = i + 1; j < args.size(); ++j)
            for (std::size_t k = 0; k < args.size(); ++k) {
                Expr lhs = bivector_on(lie_derivative(sharp(p, args[k]), p), args[i], args[j]);
                r_cond.push_back(lhs - evaluate_on(d[k], {sh[i], sh[j]}));
            }

    std::vector<CheckRecord> out;
    out.push_back(make_check("pp_via_lie_derivative", "bracket-square-lie", max_abs(r_lie, pts, exec), tol, pts));
    out.push_back(make_check("pp_via_form_bracket", "bracket-square-forms", max_abs(r_form, pts, exec), tol, pts));
    out.push_back(make_check("pp_cyclic", "bracket-square-cyclic", max_abs(r_cyc, pts, exec), tol, pts));
    out.push_back(make_check("cotangent_jacobiator", "cotangent-algebroid", max_abs(r_alg, pts, exec), tol, pts));
    out.push_back(make_check("poisson_condition", "poisson-condition", max_abs(r_cond, pts, exec), tol, pts));
    return out;
}

CheckRecord polarization_check(const MultivectorField& p1, const MultivectorField& p2,
                               const PointSet& pts, double tol, const std::vector<DifferentialForm>& in_args) {
    const auto args = in_args.empty() ? coframe(p1.chart()) : in_args;
    const auto br = schouten_bracket(p1, p2);
    std::vector<Expr> res;
    for (const auto& t : triples(args.size())) {
        const auto &a = args[t.a], &b = args[t.b], &c = args[t.c];
        auto dc = exterior_derivative(c);
        Expr rhs = evaluate_on(dc, {sharp(p1, a), sharp(p2, b)}) + evaluate_on(dc, {sharp(p2, a), sharp(p1, b)}) -
                   bivector_on(lie_derivative(sharp(p1, c), p2), a, b) -
                   bivector_on(lie_derivative(sharp(p2, c), p1), a, b);
        res.push_back(evaluate_on(br, {a, b, c}) - rhs);
    }
    return make_check("polarization", "bracket-polarization", max_abs(res, pts), tol, pts);
}

CheckRecord lichnerowicz_agreement(const MultivectorField& p, const MultivectorField& q,
                                   const PointSet& pts, double tol, const Expr& weight) {
    const int k = p.degree() + q.degree() - 1;
    const auto br = schouten_bracket(p, q);
    std::vector<Expr> res;
    for (const auto& idx : combinations(p.dim(), k)) {
        auto phi = DifferentialForm::basis(p.chart(), idx, weight);
        res.push_back(pairing(br, phi) - lichnerowicz_expr(p, q, phi));
    }
    return make_check("lichnerowicz_agreement", "lichnerowicz-pairing", max_abs(res, pts), tol, pts);
}

}  // namespace fpk
