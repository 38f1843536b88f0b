#include <cmath>
#include <string>

#include "doctest.h"
#include "fpk/jacobi.hpp"
#include "testing.hpp"

using namespace fpk;
using namespace fpk::testing;

namespace {

const SampleProtocol kProto{48, 0};

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

std::string failing(const std::vector<CheckRecord>& rs) {
    std::string s;
    for (const auto& r : rs)
        if (!r.pass()) s += r.name + "=" + std::to_string(r.max_residual) + " ";
    return s;
}

Expr v(int i) { return Expr::var(i); }

double jacobi_residual(const JacobiPair& p, const PointSet& pts) {
    const auto r = check_jacobi(p, pts);
    return std::max(r.bracket_residual, r.lie_residual);
}

// ℝ³(q, p, z) with φ = dz − p dq.
ChartPtr contact3() { return make_chart({"q", "p", "z"}, -1.0, 1.0); }
DifferentialForm contact_form(const ChartPtr& c) {
    DifferentialForm phi(c, 1);
    phi.add({2}, Expr(1.0));
    phi.add({0}, -v(1));
    return phi;
}

// Λ = u ∂q∧∂p + (t∂t)∧(p∂p), E = t∂t on ℝ⁴(q, p, u, t).
JacobiPair r4_pair(const ChartPtr& c) {
    MultivectorField l(c, 2), e(c, 1);
    l.add({0, 1}, v(2));
    l.add({1, 3}, -v(3) * v(1));
    e.add({3}, v(3));
    return make_jacobi_pair(l, e);
}
ChartPtr r4_chart(double tlo = -1.0) {
    return make_chart({"q", "p", "u", "t"}, {{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}, {tlo, 1.0}});
}

// ω = eˣ(dx∧dy + du∧dv), ε = dx on ℝ⁴(x, y, u, v).
ChartPtr lcs_chart() { return make_chart({"x", "y", "u", "v"}, -1.0, 1.0); }
DifferentialForm lcs_omega(const ChartPtr& c) {
    DifferentialForm w(c, 2);
    w.add({0, 1}, exp(v(0)));
    w.add({2, 3}, exp(v(0)));
    return w;
}
DifferentialForm lcs_lee(const ChartPtr& c) { return DifferentialForm::basis(c, {0}); }

// contact ℝ³(q, p, z) × ℝ(w).
ChartPtr product_chart() { return make_chart({"q", "p", "z", "w"}, -1.0, 1.0); }
JacobiPair product_pair(const ChartPtr& c, const Expr& scale = Expr(1.0)) {
    MultivectorField l(c, 2), e(c, 1);
    l.add({0, 1}, scale);
    l.add({2, 1}, scale * v(1));
    e.add({2}, Expr(1.0));
    return make_jacobi_pair(l, e);
}

// Lie algebra bundle over (ℝ², dx¹∧dx²) with constant structure constants.
AlgebroidData algebra_bundle(int k, const std::vector<std::tuple<int, int, int, double>>& brackets) {
    AlgebroidData d = AlgebroidData::zero(make_chart({"x1", "x2"}, -1.0, 1.0), k);
    for (const auto& [a, b, c, val] : brackets) {
        d.alpha[c][a][b] = Expr(val);
        d.alpha[c][b][a] = Expr(-val);
    }
    d.omega.add({0, 1}, Expr(1.0));
    return d;
}

PointSet extended_points(const PointSet& pts, const ChartPtr& ext) {
    const auto ts = halton_points(*ext, {pts.size(), 5});
    PointSet out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto x = pts[i];
        x.push_back(ts[i].back());
        out.push_back(x);
    }
    return out;
}

}  // namespace

TEST_CASE("check_jacobi on Poisson, contact and the four-dimensional pair") {
    const auto c = box_chart(3);
    const auto pts = halton_points(*c, kProto);
    MultivectorField l(c, 2);
    l.add({0, 1}, v(2));
    const auto zero = check_jacobi(make_jacobi_pair(l, MultivectorField(c, 1)), pts);
    CHECK(zero.bracket_residual == 0.0);
    CHECK(zero.lie_residual == 0.0);

    const auto c4 = r4_chart();
    const auto r4 = check_jacobi(r4_pair(c4), halton_points(*c4, kProto));
    CHECK(r4.bracket_residual < 1e-10);
    CHECK(r4.lie_residual < 1e-10);
    CHECK(r4.pass());

    const auto c3 = contact3();
    const auto p3 = halton_points(*c3, kProto);
    CHECK(jacobi_residual(from_contact(contact_form(c3), p3), p3) < 1e-10);

    CHECK_THROWS_AS(make_jacobi_pair(l, l), DegreeError);
    CHECK_THROWS_AS(make_jacobi_pair(l, MultivectorField(box_chart(4), 1)), ChartMismatch);
}

TEST_CASE("contact constructor: Reeb field, bivector, scaling and failures") {
    const auto c = contact3();
    const auto pts = halton_points(*c, kProto);
    const auto phi = contact_form(c);
    const auto pair = from_contact(phi, pts);
    // E = ∂z, Λ = (∂q + p∂z)∧∂p
    MultivectorField e(c, 1), l(c, 2);
    e.add({2}, Expr(1.0));
    l.add({0, 1}, Expr(1.0));
    l.add({2, 1}, v(1));
    CHECK(max_abs_at(pair.e - e, pts) < 1e-12);
    CHECK(max_abs_at(pair.lambda - l, pts) < 1e-12);
    // φ(E) = 1, i(E)dφ = 0
    CHECK(max_abs_at(evaluate_on(phi, {pair.e}) - Expr(1.0), pts) < 1e-12);
    CHECK(max_abs_at(interior_product(pair.e, exterior_derivative(phi)), pts) < 1e-12);

    const auto doubled = from_contact(Expr(2.0) * phi, pts);
    CHECK(max_abs_at(doubled.e - Expr(0.5) * e, pts) < 1e-12);
    CHECK(jacobi_residual(doubled, pts) < 1e-10);

    CHECK_THROWS_AS(from_contact(DifferentialForm::basis(c, {2}), pts), NotContact);
    CHECK_THROWS_AS(from_contact(DifferentialForm::basis(box_chart(4), {0}), pts), NotContact);
    CHECK_THROWS_AS(from_contact(exterior_derivative(phi), pts), DegreeError);
}

TEST_CASE("contact image lies in the contact hyperplanes") {
    Gen g(11);
    for (int trial = 0; trial < 4; ++trial) {
        // φ = dz − p dq + small closed-free perturbation keeps contact near 0
        const auto c = make_chart({"q", "p", "z"}, -0.5, 0.5);
        const auto pts = halton_points(*c, {24, static_cast<std::size_t>(trial)});
        DifferentialForm phi = contact_form(c);
        phi.add({1}, Expr(0.2) * g.poly(3, 2, 2));
        phi.add({0}, Expr(0.1) * g.poly(3, 2, 2));
        const auto pair = from_contact(phi, pts);
        CHECK(jacobi_residual(pair, pts) < 1e-9);
        for (int i = 0; i < 3; ++i) {
            const auto img = sharp(pair.lambda, DifferentialForm::basis(c, {i}));
            CHECK(max_abs_at(evaluate_on(phi, {img}), pts) < 1e-12);
        }
        const auto beta = g.form(c, 1, 3);
        CHECK(max_abs_at(evaluate_on(phi, {sharp(pair.lambda, beta)}), pts) < 1e-12);
        CHECK(max_abs_at(evaluate_on(phi, {pair.e}) - Expr(1.0), pts) < 1e-12);
    }
}

TEST_CASE("locally conformal symplectic constructor") {
    const auto c = lcs_chart();
    const auto pts = halton_points(*c, kProto);
    const auto pair = from_lcs(lcs_omega(c), lcs_lee(c), pts);
    CHECK(jacobi_residual(pair, pts) < 1e-9);
    // ♭_ω ♯_Λ = −id on the coordinate covectors
    for (int i = 0; i < 4; ++i) {
        const auto a = DifferentialForm::basis(c, {i});
        const auto back = interior_product(sharp(pair.lambda, a), lcs_omega(c));
        CHECK(max_abs_at(back + a, pts) < 1e-12);
    }

    // ε = 0 with ω symplectic gives E = 0
    DifferentialForm w(c, 2);
    w.add({0, 1}, Expr(1.0) + Expr(0.0) * v(0));
    w.add({2, 3}, Expr(1.0));
    const auto poisson = from_lcs(w, DifferentialForm(c, 1), pts);
    CHECK(max_abs_at(poisson.e, pts) == 0.0);
    CHECK(max_abs_at(schouten_bracket(poisson.lambda, poisson.lambda), pts) < 1e-12);

    CHECK_THROWS_AS(from_lcs(lcs_omega(c), DifferentialForm::basis(c, {1}), pts), NotLCS);
    DifferentialForm not_closed(c, 1);
    not_closed.add({0}, v(1));
    CHECK_THROWS_AS(from_lcs(lcs_omega(c), not_closed, pts), NotLCS);
    DifferentialForm degenerate(c, 2);
    degenerate.add({0, 1}, Expr(1.0));
    CHECK_THROWS_AS(from_lcs(degenerate, DifferentialForm(c, 1), pts), Degenerate);
}

TEST_CASE("bigraded LCS lines agree with the direct condition") {
    const auto c = lcs_chart();
    const auto pts = halton_points(*c, kProto);
    const auto w = lcs_omega(c);
    const auto eps = lcs_lee(c);

    SUBCASE("Lee form along the leaves: first kind") {
        const auto fol = make_foliated(c, std::vector<int>{0, 1});
        const auto rep = lcs_coupling_lines(w, eps, fol, pts);
        CHECK(rep.kind == 1);
        CHECK(rep.records.size() == 5);
        CHECK_MESSAGE(all_pass(rep.records), failing(rep.records));
        CHECK(rec(rep.records, "lcs_direct").pass());
    }
    SUBCASE("Lee form transverse: second kind") {
        const auto fol = make_foliated(c, std::vector<int>{2, 3});
        const auto rep = lcs_coupling_lines(w, eps, fol, pts);
        CHECK(rep.kind == 2);
        CHECK_MESSAGE(all_pass(rep.records), failing(rep.records));
    }
    SUBCASE("a non-LCS pair fails both ways") {
        // ω = e^{x+0.5u}(…) has dω = (dx + 0.5du)∧ω, so ε = dx is wrong
        DifferentialForm bad(c, 2);
        const Expr f = exp(v(0) + Expr(0.5) * v(2));
        bad.add({0, 1}, f);
        bad.add({2, 3}, f);
        for (const auto& leaf : {std::vector<int>{0, 1}, std::vector<int>{2, 3}}) {
            const auto rep = lcs_coupling_lines(bad, eps, make_foliated(c, leaf), pts);
            CHECK(!rec(rep.records, "lcs_direct").pass());
            bool some_line_fails = false;
            for (const auto& r : rep.records)
                if (r.name != "lcs_direct" && !r.pass()) some_line_fails = true;
            CHECK(some_line_fails);
        }
    }
    SUBCASE("Lee form of mixed bidegree has no kind") {
        DifferentialForm mixed(c, 1);
        mixed.add({0}, Expr(1.0));
        mixed.add({2}, Expr(1.0));
        DifferentialForm wm(c, 2);
        const Expr f = exp(v(0) + v(2));
        wm.add({0, 1}, f);
        wm.add({2, 3}, f);
        const auto rep = lcs_coupling_lines(wm, mixed, make_foliated(c, std::vector<int>{2, 3}), pts);
        CHECK(rep.kind == 0);
        CHECK(rep.records.size() == 1);
        CHECK(rep.records.front().pass());
    }
}

TEST_CASE("classification: contact pair, leaf-tangent pair, four-dimensional pair") {
    const auto c = contact3();
    const auto pts = halton_points(*c, kProto);
    const auto pair = from_contact(contact_form(c), pts);
    const auto cls = classify_jacobi_coupling(pair, make_foliated(c, std::vector<int>{2}), std::nullopt, pts);
    CHECK(cls.uniform);
    CHECK(cls.e_type == EType::Tangent);
    CHECK(cls.pre_coupling == Verdict::Yes);
    CHECK(cls.leaf_tangent_pair == Verdict::No);
    CHECK(cls.kind == 1);
    REQUIRE(cls.normal);
    // H = span{♯dq, ♯dp}: ♯dq = ∂p, ♯dp = −∂q − p∂z, so Γ^z_q = p, Γ^z_p = 0
    CHECK(max_abs_at(cls.normal->gamma[0][0] - v(1), pts) < 1e-12);
    CHECK(max_abs_at(cls.normal->gamma[1][0], pts) < 1e-12);
    // almost coupling via that H, and not via the flat one
    const auto again = classify_jacobi_coupling(pair, make_foliated(c, std::vector<int>{2}), cls.normal, pts);
    CHECK(again.almost_coupling == Verdict::Yes);
    const auto flat = classify_jacobi_coupling(pair, make_foliated(c, std::vector<int>{2}),
                                               NormalBundle::flat(make_foliated(c, std::vector<int>{2})), pts);
    CHECK(flat.almost_coupling == Verdict::No);

    // whole chart as the leaf: leaf-tangent pair
    const auto all = classify_jacobi_coupling(pair, make_foliated(c, std::vector<int>{0, 1, 2}), std::nullopt, pts);
    CHECK(all.leaf_tangent_pair == Verdict::Yes);
    CHECK(all.pre_coupling == Verdict::Yes);
    CHECK(all.e_type == EType::Tangent);

    // ℝ⁴ pair, leaves {q, p, u}: E = t∂t is tangent exactly on t = 0
    const auto c4 = r4_chart();
    const auto p4 = halton_points(*c4, kProto);
    const auto fol4 = make_foliated(c4, std::vector<std::string>{"q", "p", "u"});
    const auto whole = classify_jacobi_coupling(r4_pair(c4), fol4, std::nullopt, p4 /*t spans 0*/);
    CHECK(whole.e_type == EType::Normal);  // t = 0 is never hit by the samples
    auto with_zero = p4;
    with_zero.push_back({0.1, 0.2, 0.3, 0.0});
    const auto mixed = classify_jacobi_coupling(r4_pair(c4), fol4, std::nullopt, with_zero);
    CHECK(mixed.e_type == EType::Neither);
    CHECK(!mixed.uniform);
    REQUIRE(mixed.witnesses.count("e_type"));
    CHECK(mixed.witnesses.at("e_type").size() == 2);
    CHECK_THROWS_AS(classify_jacobi_coupling(r4_pair(c4), fol4, std::nullopt, with_zero, 1e-9, true), NonUniform);

    const auto pos = r4_chart(0.1);
    const auto pp = halton_points(*pos, kProto);
    const auto cls4 = classify_jacobi_coupling(r4_pair(pos), make_foliated(pos, std::vector<std::string>{"q", "p", "u"}),
                                               std::nullopt, pp, 1e-9, true);
    CHECK(cls4.e_type == EType::Normal);
    CHECK(cls4.kind == 3);
}

TEST_CASE("first kind: contact pair and its condition lines") {
    const auto c = contact3();
    const auto pts = halton_points(*c, kProto);
    const auto fol = make_foliated(c, std::vector<int>{2});
    const auto pair = from_contact(contact_form(c), pts);
    const auto rs = verify_kind_conditions(pair, fol, 1, pts);
    CHECK_MESSAGE(all_pass(rs), failing(rs));
    for (const char* n : {"transverse_transverse", "transverse_leaf_mixed", "leaf_along_transverse", "leaf_leaf",
                          "reeb_leaf_invariance", "reeb_transverse_invariance", "sigma_transverse_closed",
                          "leaf_part_invariance", "curvature", "reeb_sigma_constant", "reeb_frame_commutes",
                          "leaf_jacobi_bracket", "leaf_jacobi_lie", "mixed_part_zero", "jacobi_direct"})
        CHECK_MESSAGE(rec(rs, n).max_residual < 1e-9, n);
    CHECK_THROWS_AS(verify_kind_conditions(pair, fol, 2, pts), KindMismatch);
    CHECK_THROWS_AS(verify_kind_conditions(pair, fol, 4, pts), KindMismatch);

    // not Jacobi, still first kind: Λ scaled by 1 + q²
    const auto bad = make_jacobi_pair((Expr(1.0) + v(0) * v(0)) * pair.lambda, pair.e);
    CHECK(classify_jacobi_coupling(bad, fol, std::nullopt, pts).kind == 1);
    const auto rb = verify_kind_conditions(bad, fol, 1, pts);
    CHECK(!rec(rb, "jacobi_direct").pass());
    CHECK(!all_pass(rb));
}

TEST_CASE("five-dimensional contact: coupling iff the leaves pull back to contact") {
    const auto c = make_chart({"x1", "y1", "x2", "y2", "z"}, -1.0, 1.0);
    const auto pts = halton_points(*c, kProto);
    DifferentialForm phi(c, 1);
    phi.add({4}, Expr(1.0));
    phi.add({0}, -v(1));
    phi.add({2}, -v(3));
    const auto pair = from_contact(phi, pts);
    CHECK(jacobi_residual(pair, pts) < 1e-10);

    // trivially: one leaf
    const auto whole = make_foliated(c, std::vector<int>{0, 1, 2, 3, 4});
    CHECK(leafwise_contact(phi, whole, pts).pass());
    CHECK(classify_jacobi_coupling(pair, whole, std::nullopt, pts).leaf_tangent_pair == Verdict::Yes);

    const std::vector<std::vector<int>> leaves = {{2, 3, 4}, {0, 1, 4}, {0, 2, 4}, {1, 3, 4}, {0, 3, 4}};
    int positives = 0, negatives = 0;
    for (const auto& leaf : leaves) {
        const auto fol = make_foliated(c, leaf);
        const auto cls = classify_jacobi_coupling(pair, fol, std::nullopt, pts);
        CHECK(cls.e_type == EType::Tangent);
        const bool contact_leaves = leafwise_contact(phi, fol, pts).pass();
        CHECK_MESSAGE(contact_leaves == (cls.kind == 1), "leaf starting at slot " << leaf[0]);
        (contact_leaves ? positives : negatives)++;
        if (cls.kind == 1) CHECK(all_pass(verify_kind_conditions(pair, fol, 1, pts)));
    }
    CHECK(positives == 2);
    CHECK(negatives == 3);
    CHECK(!leafwise_contact(phi, make_foliated(c, std::vector<int>{2, 4}), pts).pass());
}

TEST_CASE("second kind: LCS pair with transverse Lee form") {
    const auto c = lcs_chart();
    const auto pts = halton_points(*c, kProto);
    const auto fol = make_foliated(c, std::vector<int>{2, 3});
    const auto pair = from_lcs(lcs_omega(c), lcs_lee(c), pts);
    const auto cls = classify_jacobi_coupling(pair, fol, std::nullopt, pts);
    CHECK(cls.e_type == EType::Normal);
    CHECK(cls.kind == 2);
    const auto rs = verify_kind_conditions(pair, fol, 2, pts);
    CHECK_MESSAGE(all_pass(rs), failing(rs));
    for (const char* n : {"sigma_transverse_closed", "leaf_part_invariance", "curvature", "leaf_poisson",
                          "reeb_transverse_invariance", "reeb_leaf_invariance", "reeb_mixed_invariance"})
        CHECK_MESSAGE(rec(rs, n).max_residual < 1e-9, n);

    // the same pair with the other foliation is first kind
    const auto other = make_foliated(c, std::vector<int>{0, 1});
    CHECK(classify_jacobi_coupling(pair, other, std::nullopt, pts).kind == 1);
    const auto r1 = verify_kind_conditions(pair, other, 1, pts);
    CHECK_MESSAGE(all_pass(r1), failing(r1));

    // Λ + 0.3x ∂u∧∂v: still second kind, no longer Jacobi
    MultivectorField extra(c, 2);
    extra.add({2, 3}, Expr(0.3) * v(0));
    const auto bad = make_jacobi_pair(pair.lambda + extra, pair.e);
    CHECK(classify_jacobi_coupling(bad, fol, std::nullopt, pts).kind == 2);
    const auto rb = verify_kind_conditions(bad, fol, 2, pts);
    CHECK(!rec(rb, "jacobi_direct").pass());
    CHECK(!all_pass(rb));
}

TEST_CASE("six-dimensional LCS: codimension four, both kinds") {
    const auto c = make_chart({"x", "y", "u", "v", "w", "s"}, -1.0, 1.0);
    const auto pts = halton_points(*c, {32, 0});
    DifferentialForm w(c, 2);
    const Expr f = exp(v(0) + Expr(0.5) * v(2));
    w.add({0, 1}, f);
    w.add({2, 3}, f);
    w.add({4, 5}, f);
    DifferentialForm eps(c, 1);
    eps.add({0}, Expr(1.0));
    eps.add({2}, Expr(0.5));
    const auto pair = from_lcs(w, eps, pts);
    CHECK(jacobi_residual(pair, pts) < 1e-9);

    // ε = dx + 0.5 du: transverse to the {w, s} leaves, leafwise for {x, y, u, v}
    const auto second = make_foliated(c, std::vector<int>{4, 5});
    CHECK(lcs_coupling_lines(w, eps, second, pts).kind == 2);
    CHECK(classify_jacobi_coupling(pair, second, std::nullopt, pts).kind == 2);
    const auto r2 = verify_kind_conditions(pair, second, 2, pts);
    CHECK_MESSAGE(all_pass(r2), failing(r2));

    const auto first = make_foliated(c, std::vector<int>{0, 1, 2, 3});
    CHECK(lcs_coupling_lines(w, eps, first, pts).kind == 1);
    CHECK(classify_jacobi_coupling(pair, first, std::nullopt, pts).kind == 1);
    const auto r1 = verify_kind_conditions(pair, first, 1, pts);
    CHECK_MESSAGE(all_pass(r1), failing(r1));

    // leafwise perturbation of Λ″ keeps the kind and breaks Jacobi
    MultivectorField extra(c, 2);
    extra.add({4, 5}, Expr(0.2) * v(0) * v(2));
    const auto bad = make_jacobi_pair(pair.lambda + extra, pair.e);
    CHECK(classify_jacobi_coupling(bad, second, std::nullopt, pts).kind == 2);
    const auto rb = verify_kind_conditions(bad, second, 2, pts);
    CHECK(!rec(rb, "jacobi_direct").pass());
    CHECK(!all_pass(rb));
}

TEST_CASE("third kind: contact times a line") {
    const auto c = product_chart();
    const auto pts = halton_points(*c, kProto);
    const auto fol = make_foliated(c, std::vector<int>{3});
    const auto pair = product_pair(c);
    CHECK(jacobi_residual(pair, pts) < 1e-10);
    const auto cls = classify_jacobi_coupling(pair, fol, std::nullopt, pts);
    CHECK(cls.e_type == EType::Normal);
    CHECK(cls.kind == 3);
    const auto rs = verify_kind_conditions(pair, fol, 3, pts);
    CHECK_MESSAGE(all_pass(rs), failing(rs));
    CHECK(rec(rs, "leaf_part_zero").max_residual < 1e-12);
    CHECK(rec(rs, "normal_leaves_contact").pass());
    CHECK(rec(rs, "normal_integrable").pass());

    const auto bad = product_pair(c, Expr(1.0) + v(3) * v(3));
    CHECK(classify_jacobi_coupling(bad, fol, std::nullopt, pts).kind == 3);
    const auto rb = verify_kind_conditions(bad, fol, 3, pts);
    CHECK(!rec(rb, "jacobi_direct").pass());
    CHECK(!all_pass(rb));

    // Jacobi and third kind, but with a mixed part: outside the product description
    const auto pos = r4_chart(0.1);
    const auto pp = halton_points(*pos, kProto);
    const auto r4 = r4_pair(pos);
    CHECK(jacobi_residual(r4, pp) < 1e-10);
    CHECK_THROWS_AS(verify_kind_conditions(r4, make_foliated(pos, std::vector<int>{0, 1, 2}), 3, pp), KindMismatch);
}

TEST_CASE("conformal changes") {
    const auto c4 = r4_chart();
    const auto p4 = halton_points(*c4, kProto);
    const auto r4 = r4_pair(c4);

    const auto same = conformal_change(r4, Expr(1.0), p4);
    CHECK(max_abs_at(same.lambda - r4.lambda, p4) == 0.0);
    CHECK(max_abs_at(same.e - r4.e, p4) == 0.0);

    CHECK(jacobi_residual(conformal_change(r4, exp(v(0)), p4), p4) < 1e-9);
    CHECK_THROWS_AS(conformal_change(r4, v(0), p4), NonPositiveScale);

    // round trip e^b then e^{−b}
    Gen g(5);
    for (int trial = 0; trial < 5; ++trial) {
        const Expr b = Expr(0.5) * g.poly(4, 3, 3);
        const auto there = conformal_change(r4, exp(b), p4);
        const auto back = conformal_change(there, exp(-b), p4);
        CHECK(max_abs_at(back.lambda - r4.lambda, p4) < 1e-12);
        CHECK(max_abs_at(back.e - r4.e, p4) < 1e-12);
        CHECK(jacobi_residual(there, p4) < 1e-9);
    }

    // first kind survives only constant factors
    const auto c = contact3();
    const auto pts = halton_points(*c, kProto);
    const auto fol = make_foliated(c, std::vector<int>{2});
    const auto pair = from_contact(contact_form(c), pts);
    CHECK(classify_jacobi_coupling(conformal_change(pair, Expr(3.0), pts), fol, std::nullopt, pts).kind == 1);
    const auto moved = conformal_change(pair, exp(v(0)), pts);
    const auto cm = classify_jacobi_coupling(moved, fol, std::nullopt, pts);
    CHECK(cm.e_type == EType::Normal);  // E^a = e^q(∂z + ∂p)
    CHECK(cm.kind == 0);
    CHECK(jacobi_residual(moved, pts) < 1e-9);

    // second and third kinds are preserved
    const auto cl = lcs_chart();
    const auto pl = halton_points(*cl, kProto);
    const auto lcs = from_lcs(lcs_omega(cl), lcs_lee(cl), pl);
    const auto fl = make_foliated(cl, std::vector<int>{2, 3});
    const Expr a = exp(Expr(0.3) * v(1) + Expr(0.2) * v(0) * v(1));
    const auto lcs_a = conformal_change(lcs, a, pl);
    CHECK(classify_jacobi_coupling(lcs_a, fl, std::nullopt, pl).kind == 2);
    CHECK(all_pass(verify_kind_conditions(lcs_a, fl, 2, pl)));
    // a varying along the leaves adds ♯(d″a) ∈ F to E, which leaves ♯(ann F)
    const auto lcs_u = conformal_change(lcs, exp(Expr(0.3) * v(2)), pl);
    CHECK(jacobi_residual(lcs_u, pl) < 1e-9);
    CHECK(classify_jacobi_coupling(lcs_u, fl, std::nullopt, pl).kind == 0);

    const auto cp = product_chart();
    const auto pp = halton_points(*cp, kProto);
    const auto fp = make_foliated(cp, std::vector<int>{3});
    const auto prod_a = conformal_change(product_pair(cp), exp(Expr(0.2) * v(0) + Expr(0.1) * v(2)), pp);
    CHECK(classify_jacobi_coupling(prod_a, fp, std::nullopt, pp).kind == 3);
}

TEST_CASE("Poissonization: Jacobi iff Poisson") {
    struct Case {
        std::string name;
        JacobiPair pair;
        PointSet pts;
        bool jacobi;
    };
    std::vector<Case> cases;
    {
        const auto c = contact3();
        const auto pts = halton_points(*c, {24, 0});
        const auto p = from_contact(contact_form(c), pts);
        cases.push_back({"contact", p, pts, true});
        cases.push_back({"contact scaled", make_jacobi_pair((Expr(1.0) + v(0) * v(0)) * p.lambda, p.e), pts, false});
    }
    {
        const auto c = r4_chart();
        const auto pts = halton_points(*c, {24, 0});
        const auto p = r4_pair(c);
        cases.push_back({"four-dimensional", p, pts, true});
        MultivectorField e = p.e;
        e.add({0}, v(2));  // breaks L_EΛ
        cases.push_back({"four-dimensional broken", make_jacobi_pair(p.lambda, e), pts, false});
    }
    {
        const auto c = lcs_chart();
        const auto pts = halton_points(*c, {24, 0});
        const auto p = from_lcs(lcs_omega(c), lcs_lee(c), pts);
        cases.push_back({"lcs", p, pts, true});
        MultivectorField extra(c, 2);
        extra.add({2, 3}, Expr(0.3) * v(0));
        cases.push_back({"lcs perturbed", make_jacobi_pair(p.lambda + extra, p.e), pts, false});
    }
    {
        const auto c = product_chart();
        const auto pts = halton_points(*c, {24, 0});
        cases.push_back({"product", product_pair(c), pts, true});
        cases.push_back({"product scaled", product_pair(c, Expr(1.0) + v(3) * v(3)), pts, false});
    }
    for (const auto& k : cases) {
        const auto p = poissonize(k.pair);
        const auto ext = extended_points(k.pts, p.chart());
        const double pp = max_abs_at(schouten_bracket(p, p), ext);
        const double jr = jacobi_residual(k.pair, k.pts);
        CHECK_MESSAGE((jr < 1e-9) == k.jacobi, k.name);
        CHECK_MESSAGE((pp < 1e-8) == (jr < 1e-9), k.name << " [P,P]=" << pp << " jacobi=" << jr);
        if (!k.jacobi) CHECK_MESSAGE(pp > 1e-3, k.name);
    }

    // naming and trivial input
    const auto c4 = r4_chart();
    const auto p4 = poissonize(r4_pair(c4));
    CHECK(p4.chart()->names.back() == "t_");
    CHECK(p4.chart()->dim() == 5);
    const auto c = contact3();
    const auto zero = poissonize(make_jacobi_pair(MultivectorField(c, 2), MultivectorField(c, 1)), {-2.0, 3.0});
    CHECK(zero.components().empty());
    CHECK(zero.chart()->names.back() == "t");
    CHECK(zero.chart()->domain.back() == std::pair<double, double>{-2.0, 3.0});
}

TEST_CASE("first and second kind give coupling Poissonizations") {
    const auto check = [](const JacobiPair& pair, const FoliatedChart& fol, const PointSet& pts) {
        const auto p = poissonize(pair);
        const auto ext = extended_points(pts, p.chart());
        const auto cls = classify_bivector(p, extended_foliation(fol, p.chart()), std::nullopt, ext);
        return cls.kind == FoliationClass::Coupling;
    };
    const auto c = contact3();
    const auto pts = halton_points(*c, {24, 0});
    CHECK(check(from_contact(contact_form(c), pts), make_foliated(c, std::vector<int>{2}), pts));
    const auto cl = lcs_chart();
    const auto pl = halton_points(*cl, {24, 0});
    const auto lcs = from_lcs(lcs_omega(cl), lcs_lee(cl), pl);
    CHECK(check(lcs, make_foliated(cl, std::vector<int>{0, 1}), pl));
    CHECK(check(lcs, make_foliated(cl, std::vector<int>{2, 3}), pl));
    // the third kind is not: codimension is odd
    const auto cp = product_chart();
    const auto pp = halton_points(*cp, {24, 0});
    CHECK(!check(product_pair(cp), make_foliated(cp, std::vector<int>{3}), pp));
}

TEST_CASE("jet bracket: Hamiltonian sections, trivial sections, anchor, Jacobi identity") {
    const auto c = r4_chart();
    const auto pts = halton_points(*c, {24, 0});
    const auto pair = r4_pair(c);
    Gen g(21);

    const Expr f = g.poly(4, 3, 3), h = g.poly(4, 3, 3);
    const JetSection sf{differential(c, f), f}, sh{differential(c, h), h};
    // anchor of (df, f) is the Hamiltonian field: X_f(g) = {f, g}
    const auto xf = jet_anchor(sf, pair);
    CHECK(max_abs_at(apply(xf, h) - jacobi_bracket(pair, f, h) - h * apply(pair.e, f), pts) < 1e-10);
    const auto b = jet_bracket(sf, sh, pair, pts);
    CHECK(max_abs_at(b.f - jacobi_bracket(pair, f, h), pts) < 1e-10);
    CHECK(max_abs_at(b.alpha - differential(c, b.f), pts) < 1e-9);

    const JetSection k1{DifferentialForm(c, 1), Expr(2.0)}, k2{DifferentialForm(c, 1), Expr(-0.5)};
    const auto kb = jet_bracket(k1, k2, pair, pts);
    CHECK(max_abs_at(kb.alpha, pts) == 0.0);
    CHECK(max_abs_at(kb.f, pts) == 0.0);

    double anchor = 0.0, jac_form = 0.0, jac_scalar = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const JetSection s1{g.form(c, 1, 3), g.poly(4, 3, 2)}, s2{g.form(c, 1, 3), g.poly(4, 3, 2)},
            s3{g.form(c, 1, 3), g.poly(4, 3, 2)};
        const auto b12 = jet_bracket_unchecked(s1, s2, pair);
        const auto lhs = sharp(pair.lambda, b12.alpha) + b12.f * pair.e;
        const auto r1 = sharp(pair.lambda, s1.alpha) + s1.f * pair.e;
        const auto r2 = sharp(pair.lambda, s2.alpha) + s2.f * pair.e;
        anchor = std::max(anchor, max_abs_at(lhs - lie_bracket(r1, r2), pts));

        const auto t1 = jet_bracket_unchecked(b12, s3, pair);
        const auto t2 = jet_bracket_unchecked(jet_bracket_unchecked(s2, s3, pair), s1, pair);
        const auto t3 = jet_bracket_unchecked(jet_bracket_unchecked(s3, s1, pair), s2, pair);
        jac_form = std::max(jac_form, max_abs_at(t1.alpha + t2.alpha + t3.alpha, pts));
        jac_scalar = std::max(jac_scalar, max_abs_at(t1.f + t2.f + t3.f, pts));
    }
    CHECK(anchor < 1e-8);
    CHECK(jac_form < 1e-7);
    CHECK(jac_scalar < 1e-7);

    MultivectorField e = pair.e;
    e.add({0}, v(2));
    const auto broken = make_jacobi_pair(pair.lambda, e);
    CHECK_THROWS_AS(jet_bracket(sf, sh, broken, pts), NotJacobi);
    CHECK_THROWS_AS(jet_anchor(sf, broken), NotJacobi);
}

TEST_CASE("Jacobi bracket identity on random functions") {
    const auto c = lcs_chart();
    const auto pts = halton_points(*c, {24, 0});
    const auto pair = from_lcs(lcs_omega(c), lcs_lee(c), pts);
    Gen g(3);
    for (int trial = 0; trial < 3; ++trial) {
        const Expr f = g.poly(4, 2, 2), h = g.poly(4, 2, 2), k = g.poly(4, 2, 2);
        const Expr cyc = jacobi_bracket(pair, jacobi_bracket(pair, f, h), k) +
                         jacobi_bracket(pair, jacobi_bracket(pair, h, k), f) +
                         jacobi_bracket(pair, jacobi_bracket(pair, k, f), h);
        CHECK(max_abs_at(cyc, pts) < 1e-8);
        CHECK(max_abs_at(jacobi_bracket(pair, f, h) + jacobi_bracket(pair, h, f), pts) < 1e-12);
    }
}

TEST_CASE("Lie algebra bundles: leaf-tangent Jacobi pairs") {
    const auto base_pts = halton_points(*make_chart({"x1", "x2"}, -1.0, 1.0), {16, 0});

    SUBCASE("abelian fiber, any zeta") {
        const auto d = algebra_bundle(2, {});
        const auto pair = iglesias_pair(d, {0.7, -1.3}, 1.0, base_pts);
        const auto pts = halton_points(*pair.chart(), kProto);
        CHECK(jacobi_residual(pair, pts) < 1e-10);
        // Λ = 𝔼∧ζ exactly
        MultivectorField euler(pair.chart(), 1), z(pair.chart(), 1);
        euler.add({2}, v(2));
        euler.add({3}, v(3));
        z.add({2}, Expr(0.7));
        z.add({3}, Expr(-1.3));
        CHECK(max_abs_at(pair.lambda - wedge(euler, z), pts) < 1e-12);
        CHECK(max_abs_at(pair.e + z, pts) == 0.0);
    }
    SUBCASE("affine line algebra and Heisenberg algebra") {
        const auto aff = algebra_bundle(2, {{0, 1, 1, 1.0}});
        const auto heis = algebra_bundle(3, {{0, 1, 2, 1.0}});
        for (const auto& [d, zeta] : {std::pair{aff, std::vector<double>{1.0, 0.0}},
                                      std::pair{heis, std::vector<double>{0.4, -0.8, 0.0}}}) {
            CHECK(all_pass(validate_algebroid(d, base_pts)));
            const auto pair = iglesias_pair(d, zeta, 1.0, base_pts);
            const auto pts = halton_points(*pair.chart(), kProto);
            CHECK(jacobi_residual(pair, pts) < 1e-10);
            const auto fibers = standard_layout(d, pair.chart());
            const auto fol = make_foliated(pair.chart(), fibers.fiber_slots);
            const auto cls = classify_jacobi_coupling(pair, fol, std::nullopt, pts);
            CHECK(cls.leaf_tangent_pair == Verdict::Yes);
            CHECK(cls.e_type == EType::Tangent);

            // P + 𝔼∧ζ with P the full Vorobiev structure is first kind but not Jacobi
            const auto v = build_structure(d, std::nullopt, 0.0, VorobievSign::Plus, 1.0);
            const auto vp = halton_points(*v.p.chart(), kProto);
            MultivectorField euler(v.p.chart(), 1), zv(v.p.chart(), 1);
            for (std::size_t a = 0; a < zeta.size(); ++a) {
                const int s = 2 + static_cast<int>(a);
                euler.add({s}, Expr::var(s));
                zv.add({s}, Expr(zeta[a]));
            }
            const auto lp = make_jacobi_pair(v.p + wedge(euler, zv), -zv);
            CHECK(jacobi_residual(lp, vp) > 1e-3);
            const auto lcls = classify_jacobi_coupling(lp, v.fibers, std::nullopt, vp);
            CHECK(lcls.kind == 1);
        }
        CHECK_THROWS_AS(iglesias_pair(aff, {0.0, 1.0}, 1.0, base_pts), ZetaNotAnnihilating);
    }
    SUBCASE("so(3) is perfect") {
        std::vector<std::tuple<int, int, int, double>> br = {{0, 1, 2, 1.0}, {1, 2, 0, 1.0}, {2, 0, 1, 1.0}};
        const auto d = algebra_bundle(3, br);
        CHECK_THROWS_AS(iglesias_pair(d, {1.0, 0.0, 0.0}, 1.0, base_pts), ZetaNotAnnihilating);
        CHECK_THROWS_AS(iglesias_pair(d, {0.0, 0.0, 0.2}, 1.0, base_pts), ZetaNotAnnihilating);
        const auto pair = iglesias_pair(d, {0.0, 0.0, 0.0}, 1.0, base_pts);
        CHECK(jacobi_residual(pair, halton_points(*pair.chart(), kProto)) < 1e-10);
        CHECK_THROWS_AS(iglesias_pair(d, {1.0}, 1.0, base_pts), DegreeError);
    }
}
