#include <cmath>
#include <string>

#include "doctest.h"
#include "fpk/vorobiev.hpp"
#include "testing.hpp"

using namespace fpk;
using namespace fpk::testing;

namespace {

const SampleProtocol kProto{64, 0};

const CheckRecord& rec(const std::vector<CheckRecord>& rs, const std::string& name) {
    for (const auto& r : rs)
        if (r.name == name) return r;
    FAIL("missing record " << name);
    return rs.front();
}

bool all_pass(const std::vector<CheckRecord>& rs) {
    for (const auto& r : rs)
        if (!r.pass()) return false;
    return true;
}

double levi_civita(int a, int b, int c) {
    if (a == b || b == c || a == c) return 0.0;
    return ((b - a + 3) % 3 == 1) ? 1.0 : -1.0;
}

ChartPtr plane() { return make_chart({"x1", "x2"}, -1.0, 1.0); }

// Trivial so(3) bundle over (ℝ², dx¹∧dx²).
AlgebroidData flat_so3() {
    AlgebroidData d = AlgebroidData::zero(plane(), 3);
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) d.alpha[c][a][b] = Expr(levi_civita(a, b, c));
    d.omega.add({0, 1}, Expr(1.0));
    return d;
}

// so(3)-valued 1-form ζ with nonconstant entries.
std::vector<std::vector<Expr>> zeta() {
    const Expr x1 = Expr::var(0), x2 = Expr::var(1);
    std::vector<std::vector<Expr>> z(3, std::vector<Expr>(2));
    z[0][0] = Expr(0.3) * x2;
    z[1][1] = Expr(0.2) * x1 * x1;
    z[2][0] = Expr(0.1) * x1 * x2;
    z[2][1] = Expr(0.25);
    return z;
}

// TB ⊕ so(3) with the frame q_i = ∂_i + ζ_i, written out by hand:
//   [g_a, q_i] = [e_a, ζ_i],  [q_i, q_j] = ∂_i ζ_j − ∂_j ζ_i + [ζ_i, ζ_j].
AlgebroidData curved_so3() {
    AlgebroidData d = flat_so3();
    const auto z = zeta();
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a)
            for (int i = 0; i < 2; ++i) {
                Expr acc;
                for (int b = 0; b < 3; ++b) acc += levi_civita(a, b, c) * z[b][i];
                d.beta[c][a][i] = acc;
            }
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                if (i == j) continue;
                Expr acc = z[c][j].diff(i) - z[c][i].diff(j);
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) acc += levi_civita(a, b, c) * z[a][i] * z[b][j];
                d.gamma_f[c][i][j] = acc;
            }
    return d;
}

SplittingShift constant_shift(double size) {
    SplittingShift s;
    s.phi = {{Expr(size), Expr(0.0)}, {Expr(0.0), Expr(-size)}, {Expr(0.5 * size), Expr(size)}};
    return s;
}

SplittingShift varying_shift(double size) {
    const Expr x1 = Expr::var(0), x2 = Expr::var(1);
    SplittingShift s;
    s.phi = {{Expr(size) * x2, Expr(size)}, {Expr(0.0), Expr(size) * x1 * x1}, {Expr(size) * x1 * x2, Expr(0.0)}};
    return s;
}

double table_gap(const Table3& a, const Table3& b, const PointSet& pts) {
    std::vector<Expr> diff;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j)
            for (std::size_t k = 0; k < a[i][j].size(); ++k) diff.push_back(a[i][j][k] - b[i][j][k]);
    return max_abs(diff, pts, Exec::Serial).value;
}

// Rank-one algebroid over (ℝ⁴, dx¹∧dx² + dx³∧dx⁴) with γ = f(x¹,x³) dx^i∧dx^j.
AlgebroidData rank_one(int i, int j, const std::string& f) {
    auto base = make_chart({"x1", "x2", "x3", "x4"}, -1.0, 1.0);
    AlgebroidData d = AlgebroidData::zero(base, 1);
    d.omega.add({0, 1}, Expr(1.0));
    d.omega.add({2, 3}, Expr(1.0));
    const Expr g = parse_expr(f, base->names);
    d.gamma_f[0][i][j] = g;
    d.gamma_f[0][j][i] = -g;
    return d;
}

}  // namespace

TEST_CASE("validator: flat so(3) bundle is clean") {
    const auto d = flat_so3();
    const auto rs = validate_algebroid(d, halton_points(*d.base, kProto));
    for (const auto& r : rs) CHECK_MESSAGE(r.max_residual < 1e-12, r.name);
    CHECK(all_pass(rs));
}

TEST_CASE("validator: curved so(3) bundle passes and matches the shifted flat one") {
    const auto d = curved_so3();
    const auto pts = halton_points(*d.base, kProto);
    const auto rs = validate_algebroid(d, pts);
    for (const auto& r : rs) CHECK_MESSAGE(r.max_residual < 1e-9, r.name);
    CHECK(all_pass(rs));
    CHECK(table_gap(d.beta, d.beta, pts) == 0.0);

    // the same algebroid reached by shifting the flat splitting
    SplittingShift s{zeta()};
    const auto e = shifted(flat_so3(), s, 1.0);
    CHECK(table_gap(d.beta, e.beta, pts) < 1e-14);
    CHECK(table_gap(d.gamma_f, e.gamma_f, pts) < 1e-14);
}

TEST_CASE("validator: Jacobi-violating structure functions are caught") {
    auto d = flat_so3();
    // a base-dependent α is not compatible with β = 0
    d.alpha[2][0][1] = parse_expr("1 + x1", d.base->names);
    d.alpha[2][1][0] = parse_expr("-1 - x1", d.base->names);
    const auto rs = validate_algebroid(d, halton_points(*d.base, kProto));
    const auto& j = rec(rs, "jacobi");
    CHECK_FALSE(j.pass());
    CHECK(j.max_residual > 1e-2);
    CHECK(j.note.find("g1") != std::string::npos);
    CHECK(j.note.find("g2") != std::string::npos);
    CHECK(j.note.find("q1") != std::string::npos);
    CHECK_FALSE(rec(rs, "structure_tensor_parallel").pass());
}

TEST_CASE("validator: algebraic Jacobi failure") {
    auto d = flat_so3();
    // [g1,g2] = g3 + g1 breaks the cyclic sum on (g1,g2,g3)
    d.alpha[0][0][1] = Expr(1.0);
    d.alpha[0][1][0] = Expr(-1.0);
    const auto rs = validate_algebroid(d, halton_points(*d.base, kProto));
    CHECK(rec(rs, "jacobi").max_residual > 1e-2);
    CHECK(rec(rs, "jacobi").note.find("(g1,g2,g3)") != std::string::npos);
}

TEST_CASE("validator: antisymmetry, anchor and ω defects") {
    auto d = flat_so3();
    d.alpha[0][1][2] = Expr(2.0);
    d.gamma_q[0][0][1] = Expr(1.0);
    d.gamma_q[0][1][0] = Expr(-1.0);
    d.omega = DifferentialForm(d.base, 2);
    const auto rs = validate_algebroid(d, halton_points(*d.base, kProto));
    CHECK_FALSE(rec(rs, "antisymmetry").pass());
    CHECK_FALSE(rec(rs, "anchor_morphism").pass());
    CHECK_FALSE(rec(rs, "omega_nondegenerate").pass());
    CHECK(rec(rs, "omega_closed").pass());

    auto e = flat_so3();
    e.omega = DifferentialForm::basis(e.base, {0, 1}, parse_expr("1 + x1", e.base->names));
    CHECK(rec(validate_algebroid(e, halton_points(*e.base, kProto)), "omega_closed").pass());
}

TEST_CASE("validator: curvature identity fails when γ is inconsistent with β") {
    auto d = curved_so3();
    d.gamma_f[0][0][1] += Expr(0.5);
    d.gamma_f[0][1][0] -= Expr(0.5);
    const auto rs = validate_algebroid(d, halton_points(*d.base, kProto));
    CHECK_FALSE(rec(rs, "curvature").pass());
    CHECK_FALSE(rec(rs, "jacobi").pass());
}

TEST_CASE("flat structure: symplectic part plus Lie-Poisson fibers") {
    const auto d = flat_so3();
    const auto v = build_structure(d, std::nullopt, 0.0, VorobievSign::Plus, 0.5);
    CHECK(v.radius == 0.5);
    const auto& p = v.p;
    const auto pts = halton_points(*p.chart(), kProto);
    CHECK(max_abs_at(schouten_bracket(p, p), pts) < 1e-10);
    CHECK(max_abs_at(p.get({0, 1}) - Expr(1.0), pts) < 1e-14);  // −σ⁻¹ with σ = dx¹∧dx²
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b) {
            Expr lp;
            for (int c = 0; c < 3; ++c) lp += levi_civita(a, b, c) * Expr::var(2 + c);
            CHECK(max_abs_at(p.get({2 + a, 2 + b}) - lp, pts) < 1e-14);
        }
    for (int i = 0; i < 2; ++i)
        for (int a = 0; a < 3; ++a) CHECK(max_abs_at(p.get({i, 2 + a}), pts) < 1e-14);
}

TEST_CASE("curved structure is Poisson and coupling, both signs") {
    const auto d = curved_so3();
    for (auto sign : {VorobievSign::Plus, VorobievSign::Minus}) {
        const auto v = build_structure(d, std::nullopt, 0.0, sign, 0.1);
        const auto pts = halton_points(*v.p.chart(), kProto);
        CHECK(max_abs_at(schouten_bracket(v.p, v.p), pts) < 1e-9);
        const auto rs = structure_checks(d, v, pts);
        CHECK(rec(rs, "poisson").pass());
        CHECK(rec(rs, "coupling").pass());
        CHECK(rec(rs, "triple_round_trip").max_residual < 1e-10);
        CHECK(rec(rs, "lie_vs_nabla_c").pass());
    }
}

TEST_CASE("sign variant negates the vertical part and the curvature term") {
    const auto d = curved_so3();
    const auto plus = build_structure(d, std::nullopt, 0.0, VorobievSign::Plus, 0.1);
    const auto minus = build_structure(d, std::nullopt, 0.0, VorobievSign::Minus, 0.1);
    const auto pts = halton_points(*plus.p.chart(), kProto);
    CHECK(max_abs_at(plus.triple.leaf + minus.triple.leaf, pts) < 1e-14);
    // the form of the variant is 2ω − σ
    const auto two_omega = plus.triple.sigma + minus.triple.sigma;
    CHECK(max_abs_at(two_omega.get({0, 1}) - Expr(2.0), pts) < 1e-14);
}

TEST_CASE("shifted splitting: both σ constructions agree and the structure stays Poisson") {
    const auto d = curved_so3();
    const auto s = varying_shift(0.2);
    for (auto sign : {VorobievSign::Plus, VorobievSign::Minus})
        for (double t : {0.3, 1.0}) {
            const auto total = total_chart(d, 0.5);
            const auto lay = standard_layout(d, total);
            const auto pts = halton_points(*total, kProto);
            const auto scratch = vorobiev_triple(d, lay, s, t, sign).sigma;
            const auto formula = shifted_sigma_formula(d, lay, s, t, sign);
            CHECK(max_abs_at(scratch - formula, pts) < 1e-10);

            const auto v = build_structure(d, s, t, sign, 0.5);
            const auto rs = structure_checks(d, v, pts);
            CHECK(all_pass(rs));
        }
}

TEST_CASE("degenerate coupling form: explicit box refused, search shrinks") {
    // rank one over the plane, σ = 1 − 2.5y vanishes at y = 0.4
    AlgebroidData d = AlgebroidData::zero(plane(), 1);
    d.omega.add({0, 1}, Expr(1.0));
    d.gamma_f[0][0][1] = Expr(2.5);
    d.gamma_f[0][1][0] = Expr(-2.5);
    CHECK(all_pass(validate_algebroid(d, halton_points(*d.base, kProto))));
    CHECK_THROWS_AS(build_structure(d, std::nullopt, 0.0, VorobievSign::Plus, 1.0), DegenerateSigma);
    const auto v = build_structure(d, std::nullopt, 0.0, VorobievSign::Plus);
    CHECK(v.radius == 0.25);
    // the variant has σ = 1 + 2.5y and degenerates on the other side
    CHECK_THROWS_AS(build_structure(d, std::nullopt, 0.0, VorobievSign::Minus, 1.0), DegenerateSigma);
    CHECK(build_structure(d, std::nullopt, 0.0, VorobievSign::Minus).radius == 0.25);
    try {
        build_structure(d, std::nullopt, 0.0, VorobievSign::Plus, 1.0);
    } catch (const DegenerateSigma& e) {
        CHECK(std::string(e.what()).find("nondegenerate up to radius 0.25") != std::string::npos);
    }
}

TEST_CASE("coisotropy: vanishing curvature form") {
    const auto flat = flat_so3();
    const auto rep = check_coisotropy_global(flat, halton_points(*flat.base, kProto));
    CHECK(rep.coisotropic);
    CHECK(rep.sigma_nondegenerate_far);
    CHECK(all_pass(rep.records));
}

TEST_CASE("coisotropy: Lagrangian D versus symplectic D, against a hand check") {
    // D = ker γ(·)|.  With one fiber index, D^ω = span of ω⁻¹γᵀ rows, so D is
    // coisotropic exactly when G ω⁻¹ Gᵀ = 0.
    auto hand = [](const AlgebroidData& d, const std::vector<double>& x) {
        la::Mat g(4, 4), w = matrix_at(d.omega, x.data()), wi;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) g(i, j) = d.gamma_f[0][i][j].eval(x.data());
        REQUIRE(la::invert(w, wi));
        return (g * wi * g.transpose()).max_abs() < 1e-12;
    };
    const auto lag = rank_one(0, 2, "1 + x1^2 + x3^2");
    const auto sym = rank_one(0, 1, "1");
    const auto base_pts = halton_points(*lag.base, SampleProtocol{5, 3});
    for (const auto& x : base_pts) {
        CHECK(hand(lag, x));
        CHECK_FALSE(hand(sym, x));
    }
    CHECK(all_pass(validate_algebroid(lag, base_pts)));
    CHECK(all_pass(validate_algebroid(sym, base_pts)));

    const auto r1 = check_coisotropy_global(lag, base_pts);
    CHECK(r1.coisotropic);
    CHECK(r1.sigma_nondegenerate_far);
    const auto r2 = check_coisotropy_global(sym, base_pts);
    CHECK_FALSE(r2.coisotropic);
    CHECK_FALSE(r2.sigma_nondegenerate_far);
    CHECK_FALSE(rec(r2.records, "coisotropic").pass());
    CHECK(rec(r2.records, "coisotropic").witness.has_value());
}

TEST_CASE("equivalence flow: zero shift is the identity") {
    const auto d = curved_so3();
    SplittingShift zero{std::vector<std::vector<Expr>>(3, std::vector<Expr>(2))};
    const auto f = equivalence_flow(d, zero, VorobievSign::Plus, 20);
    CHECK(f.residual < 1e-12);
    for (const auto& s : f.samples) {
        for (std::size_t i = 0; i < s.start.size(); ++i) CHECK(s.end[i] == doctest::Approx(s.start[i]).epsilon(1e-15));
        CHECK((s.jacobian - la::Mat::identity(5)).max_abs() < 1e-15);
    }
}

TEST_CASE("equivalence flow: flat bundle, small constant shift") {
    const auto d = flat_so3();
    const auto f = equivalence_flow(d, constant_shift(0.05), VorobievSign::Plus, 200);
    CHECK(f.residual < 1e-5);
    CHECK(f.steps == 200);
    CHECK(f.samples.size() == 16);
    // the flow actually moves points
    double moved = 0.0;
    for (const auto& s : f.samples)
        for (std::size_t i = 0; i < s.start.size(); ++i) moved = std::max(moved, std::abs(s.end[i] - s.start[i]));
    CHECK(moved > 1e-3);
}

TEST_CASE("equivalence flow: curved bundle converges at fourth order") {
    const auto d = curved_so3();
    const auto s = varying_shift(0.3);
    for (auto sign : {VorobievSign::Plus, VorobievSign::Minus}) {
        const auto fine = equivalence_flow(d, s, sign, 200);
        CHECK(fine.residual < 1e-4);
        // coarse steps keep the error above round-off so the ratio is meaningful
        const auto a = equivalence_flow(d, s, sign, 5, {16, 0}, 0.5, fine.radius);
        const auto b = equivalence_flow(d, s, sign, 10, {16, 0}, 0.5, fine.radius);
        CHECK(a.residual > 1e-11);
        CHECK(a.residual / b.residual >= 8.0);
    }
}

TEST_CASE("equivalence flow: serial and parallel agree") {
    const auto d = curved_so3();
    const auto s = varying_shift(0.3);
    const auto a = equivalence_flow(d, s, VorobievSign::Plus, 20, {8, 0}, 0.5, std::nullopt, Exec::Serial);
    const auto b = equivalence_flow(d, s, VorobievSign::Plus, 20, {8, 0}, 0.5, std::nullopt, Exec::Parallel);
    CHECK(a.residual == b.residual);
    for (std::size_t p = 0; p < a.samples.size(); ++p) CHECK(a.samples[p].end == b.samples[p].end);
}

TEST_CASE("equivalence flow: errors") {
    const auto d = curved_so3();
    CHECK_THROWS_AS(equivalence_flow(d, varying_shift(0.3), VorobievSign::Plus, 0), DomainError);
    // a large shift drives trajectories out of a thin fiber box
    CHECK_THROWS_AS(equivalence_flow(d, constant_shift(3.0), VorobievSign::Plus, 50, {16, 0}, 0.99, 0.05),
                    IntegrationLeftDomain);
    AlgebroidData deg = AlgebroidData::zero(plane(), 1);
    deg.omega.add({0, 1}, Expr(1.0));
    deg.gamma_f[0][0][1] = Expr(2.0);
    deg.gamma_f[0][1][0] = Expr(-2.0);
    SplittingShift s{{{Expr(0.1), Expr(0.0)}}};
    CHECK_THROWS_AS(equivalence_flow(deg, s, VorobievSign::Plus, 10, {16, 0}, 0.5, 1.0), DegenerateSigma);
}

TEST_CASE("linearization: a Vorobiev structure is its own linear model") {
    const auto d = curved_so3();
    const auto v = build_structure(d, std::nullopt, 0.0, VorobievSign::Plus, 0.5);
    const auto ch = v.p.chart();
    const auto fol = make_foliated(ch, std::vector<int>{0, 1});
    const auto pts = halton_points(*ch, SampleProtocol{16, 0});
    const auto lin = linearize_at_leaf(v.p, fol, pts);
    const auto base_pts = halton_points(*d.base, SampleProtocol{16, 0});
    CHECK(table_gap(lin.algebroid.alpha, d.alpha, base_pts) < 1e-12);
    CHECK(table_gap(lin.algebroid.beta, d.beta, base_pts) < 1e-12);
    CHECK(table_gap(lin.algebroid.gamma_f, d.gamma_f, base_pts) < 1e-12);
    CHECK(all_pass(validate_algebroid(lin.algebroid, base_pts)));
    const auto near = near_leaf_points(fol, pts, 0.3);
    CHECK(max_abs_at(v.p - lin.p_lin, near) < 1e-12);
    const auto rs = linearization_checks(v.p, lin, pts);
    CHECK(all_pass(rs));
    CHECK(rec(rs, "first_order_near").max_residual < 1e-12);
}

TEST_CASE("linearization: so(3) x symplectic plane recovers the structure constants") {
    const auto ch = make_chart({"y1", "y2", "y3", "u", "v"}, -1.0, 1.0);
    MultivectorField p = MultivectorField::basis(ch, {3, 4});
    p.add({0, 1}, Expr::var(2));
    p.add({1, 2}, Expr::var(0));
    p.add({0, 2}, -Expr::var(1));
    const auto fol = make_foliated(ch, std::vector<std::string>{"u", "v"});
    const auto pts = halton_points(*ch, SampleProtocol{16, 0});
    const auto lin = linearize_at_leaf(p, fol, pts);
    const auto base_pts = halton_points(*lin.algebroid.base, SampleProtocol{8, 0});
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                CHECK(max_abs_at(lin.algebroid.alpha[c][a][b] - Expr(levi_civita(a, b, c)), base_pts) < 1e-14);
    CHECK(lin.algebroid.fiber_names == std::vector<std::string>{"y1", "y2", "y3"});
    CHECK(max_abs_at(p - lin.p_lin, near_leaf_points(fol, pts, 0.5)) < 1e-12);
}

TEST_CASE("linearization: quadratic corrections decay at second order") {
    const auto ch = make_chart({"x1", "x2", "y1", "y2"}, -1.0, 1.0);
    // f(y) ∂x1∧∂x2 is Poisson for any f depending on the normal coordinates
    MultivectorField p =
        MultivectorField::basis(ch, {0, 1}, parse_expr("1 + y1 + y1^2 + 0.5*y2*sin(x1) + y2^2", ch->names));
    const auto fol = make_foliated(ch, std::vector<int>{0, 1});
    const auto pts = halton_points(*ch, SampleProtocol{16, 0});
    CHECK(max_abs_at(schouten_bracket(p, p), pts) < 1e-12);
    const auto lin = linearize_at_leaf(p, fol, pts);
    const auto rs = linearization_checks(p, lin, pts, 1e-2, 1e-3);
    CHECK(all_pass(rs));
    CHECK(rec(rs, "leaf_agreement").max_residual < 1e-12);
    const double ratio = rec(rs, "first_order_near").max_residual / rec(rs, "first_order_nearer").max_residual;
    CHECK(ratio >= 50.0);
    CHECK(ratio <= 200.0);
    // the first-order term lives in the curvature part of the linear model
    const auto base_pts = halton_points(*lin.algebroid.base, SampleProtocol{8, 0});
    CHECK(max_abs_at(lin.algebroid.gamma_f[0][0][1] - Expr(1.0), base_pts) < 1e-12);
}

TEST_CASE("linearization: isolated zero of a planar structure") {
    const auto ch = make_chart({"u", "v"}, -1.0, 1.0);
    const auto p = MultivectorField::basis(ch, {0, 1}, parse_expr("u^2 + v^2 + u*v", ch->names));
    const auto fol = make_foliated(ch, std::vector<int>{});
    const auto pts = halton_points(*ch, SampleProtocol{4, 0});
    const auto lin = linearize_at_leaf(p, fol, pts);
    CHECK(lin.algebroid.rank == 2);
    CHECK(lin.algebroid.n() == 0);
    const auto rs = linearization_checks(p, lin, pts);
    CHECK(all_pass(rs));
    const double ratio = rec(rs, "first_order_near").max_residual / rec(rs, "first_order_nearer").max_residual;
    CHECK(ratio == doctest::Approx(100.0).epsilon(0.05));
}

TEST_CASE("linearization: slices that are not leaves") {
    const auto ch = make_chart({"x1", "x2", "y"}, -1.0, 1.0);
    const auto leaf_of = [&] { return make_foliated(ch, std::vector<int>{0, 1}); };
    const auto pts = halton_points(*ch, SampleProtocol{8, 0});
    // normal component survives on the slice
    MultivectorField a = MultivectorField::basis(ch, {0, 1}) + MultivectorField::basis(ch, {0, 2});
    CHECK_THROWS_AS(linearize_at_leaf(a, leaf_of(), pts), NotALeaf);
    // leaf block vanishes at x1 = 0
    MultivectorField b = MultivectorField::basis(ch, {0, 1}, Expr::var(0));
    CHECK_THROWS_AS(linearize_at_leaf(b, leaf_of(), halton_points(*ch, SampleProtocol{8, 0}, 1.0)), NotALeaf);
    // point slice with a nonzero bivector there
    const auto c2 = make_chart({"u", "v"}, -1.0, 1.0);
    CHECK_THROWS_AS(linearize_at_leaf(MultivectorField::basis(c2, {0, 1}), make_foliated(c2, std::vector<int>{}),
                                      halton_points(*c2, SampleProtocol{4, 0})),
                    NotALeaf);
    CHECK_THROWS_AS(linearize_at_leaf(MultivectorField(ch, 1), leaf_of(), pts),
                    DegreeError);
}

TEST_CASE("near-leaf points sit at the requested normal distance") {
    const auto ch = make_chart({"x1", "y1", "x2", "y2"}, -1.0, 1.0);
    const auto fol = make_foliated(ch, std::vector<int>{0, 2});
    const auto pts = halton_points(*ch, SampleProtocol{10, 0});
    const auto near = near_leaf_points(fol, pts, 0.01);
    for (std::size_t p = 0; p < pts.size(); ++p) {
        CHECK(near[p][0] == pts[p][0]);
        CHECK(near[p][2] == pts[p][2]);
        CHECK(std::hypot(near[p][1], near[p][3]) == doctest::Approx(0.01).epsilon(1e-12));
    }
    CHECK(near_leaf_points(fol, pts, 0.01) == near);
}
