// One pass/fail line per acceptance criterion; exit status 0 iff all pass.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "fpk/identities.hpp"
#include "fpk/jacobi.hpp"
#include "fpk/spec.hpp"
#include "testing.hpp"

using namespace fpk;
using namespace fpk::testing;

namespace {

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    // Records a measured value against its bound; `below` selects < or >.
    void expect(const std::string& what, double value, double bound, bool below = true) {
        const bool good = below ? value < bound : value > bound;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %.2e %s %.0e%s", what.c_str(), value, below ? "<" : ">", bound,
                      good ? "" : " (VIOLATED)");
        detail << (detail.tellp() > 0 ? "; " : "") << buf;
        ok = ok && good;
    }
    void expect(const std::string& what, bool cond) {
        detail << (detail.tellp() > 0 ? "; " : "") << what << (cond ? "" : " (VIOLATED)");
        ok = ok && cond;
    }
};

std::string spec_path(const std::string& name) { return std::string(FPK_SPEC_DIR) + "/" + name; }

double bad_records(const std::vector<CheckRecord>& rs, const std::string& skip = "") {
    double n = 0;
    for (const auto& r : rs)
        if (r.name != skip && !r.pass()) ++n;
    return n;
}

double worst_of(const std::vector<CheckRecord>& rs, const std::string& skip = "") {
    double w = 0.0;
    for (const auto& r : rs)
        if (r.name != skip) w = std::max(w, r.max_residual);
    return w;
}

const CheckRecord& rec(const std::vector<CheckRecord>& rs, const std::string& name) {
    for (const auto& r : rs)
        if (r.name == name) return r;
    throw std::runtime_error("missing record " + name);
}

// 1 ------------------------------------------------------------------------------
void oracle_equivalence(Outcome& o) {
    Gen g(1001);
    const std::pair<int, int> degs[] = {{2, 2}, {2, 1}, {1, 1}, {2, 3}};
    double worst = 0.0;
    int count = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto [p, q] = degs[trial % 4];
        const int n = std::max(g.integer(3, 6), p + q - 1);
        const auto c = box_chart(n);
        const auto pts = halton_points(*c, {12, static_cast<std::size_t>(trial)});
        const auto r = lichnerowicz_agreement(g.multivector(c, p, 2), g.multivector(c, q, 2), pts, 1e-9,
                                              Expr(1.0) + Expr(0.3) * g.poly(n, 2, 2));
        worst = std::max(worst, r.max_residual);
        ++count;
    }
    o.expect(std::to_string(count) + " random pairs, worst |bracket - pairing|", worst, 1e-9);
}

// 2 ------------------------------------------------------------------------------
void identity_suite(Outcome& o) {
    Gen g(2002);
    double worst = 0.0, weakest_neg = 1e300, worst_pol = 0.0, weakest_pol_neg = 1e300;
    double poisson_worst = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
        const int n = g.integer(3, 5);
        const auto c = box_chart(n);
        const auto pts = halton_points(*c, {20, static_cast<std::size_t>(trial)});
        IdentityInputs in;
        for (int i = 0; i < n; ++i) in.args.push_back(DifferentialForm::basis(c, {i}, g.poly(n, 2, 2)));
        // f ∂_i∧∂_j is Poisson for any f, so the Poisson condition must hold too
        const int i = g.integer(0, n - 2);
        const auto poisson = MultivectorField::basis(c, {i, i + 1}, g.smooth(n));
        const auto rp = gd_identity_suite(poisson, pts, 1e-10, in);
        poisson_worst = std::max(poisson_worst, worst_of(rp));
        const auto p = g.multivector(c, 2, 2);
        const auto rs = gd_identity_suite(p, pts, 1e-10, in);
        worst = std::max(worst, worst_of(rs, "poisson_condition"));
        // a perturbation is only visible when it changes the bracket square
        auto q = p + Expr(0.1) * g.multivector(c, 2, 2);
        while (max_abs_at(schouten_bracket(q, q) - schouten_bracket(p, p), pts) < 1e-2)
            q = p + Expr(0.1) * g.multivector(c, 2, 2);
        in.rhs = q;
        for (const auto& r : gd_identity_suite(p, pts, 1e-10, in))
            if (r.name != "poisson_condition") weakest_neg = std::min(weakest_neg, r.max_residual);

        const auto p2 = g.multivector(c, 2, 2);
        worst_pol = std::max(worst_pol, polarization_check(p, p2, pts).max_residual);
        const auto p2b = p2 + Expr(0.1) * g.multivector(c, 2, 2);
        const auto half = Expr(0.5) * (schouten_bracket(p + p2b, p + p2b) - schouten_bracket(p, p) -
                                       schouten_bracket(p2b, p2b));
        weakest_pol_neg = std::min(weakest_pol_neg, max_abs_at(schouten_bracket(p, p2) - half, pts));
    }
    const auto c3 = make_chart({"x", "y", "z"}, -1.0, 1.0);
    const auto pts3 = halton_points(*c3, {64, 0});
    const auto nonpoisson =
        MultivectorField::basis(c3, {0, 1}, Expr::var(1)) + MultivectorField::basis(c3, {1, 2}, Expr::var(0));
    const double cond = rec(gd_identity_suite(nonpoisson, pts3), "poisson_condition").max_residual;
    o.expect("bracket/Gelfand-Dorfman identities", worst, 1e-10);
    o.expect("Poisson condition on Poisson inputs", poisson_worst, 1e-10);
    o.expect("polarization", worst_pol, 1e-10);
    o.expect("perturbed identities", weakest_neg, 1e-3, false);
    o.expect("perturbed polarization", weakest_pol_neg, 1e-3, false);
    o.expect("non-Poisson condition", cond, 1e-3, false);
}

// 3 ------------------------------------------------------------------------------
void bigraded_tables(Outcome& o) {
    Gen g(3003);
    double lines = 0.0, excluded = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 4 + trial % 3;
        const auto c = box_chart(n);
        std::vector<int> leaf;
        const int pl = g.integer(1, n - 2);
        for (int i = n - pl; i < n; ++i) leaf.push_back(i);
        const auto fol = make_foliated(c, leaf);
        NormalBundle h = NormalBundle::flat(fol);
        for (auto& row : h.gamma)
            for (auto& e : row) e = Expr(0.5) * g.poly(n, 1 + trial % 2, 2);
        const auto pts = halton_points(*c, {n == 6 ? std::size_t{12} : std::size_t{20}, static_cast<std::size_t>(trial)});
        const auto rs = verify_bigraded_tables(g.multivector(c, 2, 2), h, pts, 1e-9);
        for (const auto& r : rs) {
            if (r.name == "excluded_bidegrees") excluded = std::max(excluded, r.max_residual);
            else lines = std::max(lines, r.max_residual);
        }
    }
    o.expect("20 configurations, table lines", lines, 1e-9);
    o.expect("excluded bidegrees", excluded, 1e-11);
}

// 4 ------------------------------------------------------------------------------
bool conditions_pass(const std::vector<CheckRecord>& rs) { return bad_records(rs, "bracket_direct") == 0; }

void heisenberg_and_coupling(Outcome& o) {
    const auto heis = load_spec(spec_path("heisenberg.json"));
    const auto& hp = *heis.first("bivector")->multivector;
    o.expect("Heisenberg [P,P]", max_abs_at(schouten_bracket(hp, hp), halton_points(*heis.chart, {64, 0})), 1e-12);

    const auto ad = load_spec(spec_path("coupling5-adapted.json"));
    const auto& fol = *ad.foliation;
    const auto pts = halton_points(*ad.chart, {64, 0});
    const auto& p = *ad.first("bivector")->multivector;
    const auto cls = classify_bivector(p, fol, std::nullopt, pts);
    o.expect(std::string("adapted example classified ") + to_string(cls.kind), cls.kind == FoliationClass::Coupling);
    const auto rs = verify_triple_conditions(extract_triple(p, fol, pts), pts, 1e-10);
    o.expect("triple conditions", worst_of(rs), 1e-10);

    const auto& ch = ad.chart;
    const Expr x1 = Expr::var(0), x2 = Expr::var(1), y = Expr::var(2);
    const MultivectorField cases[] = {
        p + MultivectorField::basis(ch, {0, 3}, Expr(0.5) * x2),                // leaf part varies transversally
        p + MultivectorField::basis(ch, {1, 4}, Expr(0.3) * x1),                // curved: σ varies along a leaf
        p + MultivectorField::basis(ch, {2, 4}, Expr(0.2) * x1),                // mixed term breaks invariance
        p + MultivectorField::basis(ch, {1, 4}, Expr(0.4) * x1 * Expr::var(3)),  // curved again
        p + MultivectorField::basis(ch, {1, 4}, Expr(0.3) * y),                 // still Poisson
        p + MultivectorField::basis(ch, {0, 1}, Expr(0.3)),                     // constant connection term
    };
    int agree = 0, negatives = 0;
    for (const auto& q : cases) {
        const auto k = classify_bivector(q, fol, std::nullopt, pts).kind;
        const bool poisson = max_abs_at(schouten_bracket(q, q), pts) < 1e-9;
        const bool conds = k == FoliationClass::Coupling && conditions_pass(verify_triple_conditions(extract_triple(q, fol, pts), pts));
        if (k == FoliationClass::Coupling && poisson == conds) ++agree;
        if (!poisson) ++negatives;
    }
    o.expect("biconditional on perturbations " + std::to_string(agree) + "/" + std::to_string(std::size(cases)) +
                 " (" + std::to_string(negatives) + " non-Poisson)",
             agree == static_cast<int>(std::size(cases)) && negatives >= 3);
    o.expect("positive side of the biconditional", conditions_pass(rs));
}

// 5 ------------------------------------------------------------------------------
void bicomplex(Outcome& o) {
    const auto heis = load_spec(spec_path("heisenberg.json"));
    const auto h = NormalBundle::flat(*heis.foliation);
    const auto& p = *heis.first("bivector")->multivector;
    const auto pts = halton_points(*heis.chart, {24, 0});
    Gen g(5005);
    std::map<std::string, double> worst;
    for (int trial = 0; trial < 8; ++trial)
        for (const auto& r : bicomplex_checks(p, g.multivector(heis.chart, 1 + trial % 2, 2), h, pts, 1e-10))
            worst[r.name] = std::max(worst[r.name], r.max_residual);
    for (const auto& [name, w] : worst) o.expect(name, w, 1e-10);
}

// 6 ------------------------------------------------------------------------------
void vorobiev(Outcome& o) {
    const auto spec = load_spec(spec_path("so3-curved.json"));
    const auto& d = *spec.first("algebroid")->algebroid;
    o.expect("validator failures", bad_records(validate_algebroid(d, halton_points(*d.base, {64, 0}))), 0.5);
    for (auto sign : {VorobievSign::Plus, VorobievSign::Minus}) {
        const auto v = build_structure(d, std::nullopt, 0.0, sign);
        const auto pts = halton_points(*v.p.chart(), {64, 0});
        char what[96];
        std::snprintf(what, sizeof what, "%s [P,P] on box r=%g", sign == VorobievSign::Plus ? "plus" : "variant",
                      v.radius);
        o.expect(what, max_abs_at(schouten_bracket(v.p, v.p), pts), 1e-9);
    }
    const auto& shift = *spec.first("splitting_shift")->shift;
    const auto fine = equivalence_flow(d, shift, VorobievSign::Plus, 200);
    o.expect("flow endpoint residual (200 steps)", fine.residual, 1e-5);
    const auto a = equivalence_flow(d, shift, VorobievSign::Plus, 5, {16, 0}, 0.5, fine.radius);
    const auto b = equivalence_flow(d, shift, VorobievSign::Plus, 10, {16, 0}, 0.5, fine.radius);
    o.expect("step-halving ratio", a.residual / b.residual, 8.0, false);
}

// 7 ------------------------------------------------------------------------------
void linearization(Outcome& o) {
    const auto lin_spec = load_spec(spec_path("so3-plane.json"));
    const auto& p = *lin_spec.first("bivector")->multivector;
    const auto pts = halton_points(*lin_spec.chart, {16, 0});
    const auto lin = linearize_at_leaf(p, *lin_spec.foliation, pts);
    o.expect("linear structure reproduced", max_abs_at(p - lin.p_lin, pts), 1e-12);

    const auto q_spec = load_spec(spec_path("quadratic-normal.json"));
    const auto& q = *q_spec.first("bivector")->multivector;
    const auto qpts = halton_points(*q_spec.chart, {16, 0});
    const auto qlin = linearize_at_leaf(q, *q_spec.foliation, qpts);
    const auto rs = linearization_checks(q, qlin, qpts, 1e-2, 1e-3);
    o.expect("decade ratio of the residual",
             rec(rs, "first_order_near").max_residual / rec(rs, "first_order_nearer").max_residual, 50.0, false);
}

// 8 ------------------------------------------------------------------------------
double jacobi_residual(const JacobiPair& p, const PointSet& pts) {
    const auto r = check_jacobi(p, pts);
    return std::max(r.bracket_residual, r.lie_residual);
}

PointSet with_t(const PointSet& pts, const ChartPtr& ext) {
    const auto ts = halton_points(*ext, {pts.size(), 5});
    PointSet out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto x = pts[i];
        x.push_back(ts[i].back());
        out.push_back(x);
    }
    return out;
}

void jacobi(Outcome& o) {
    const auto r4 = load_spec(spec_path("r4-jacobi.json"));
    const auto r4pts = halton_points(*r4.chart, {64, 0});
    const auto& r4p = *r4.first("jacobi_pair")->pair;
    o.expect("R4 pair Jacobi conditions", jacobi_residual(r4p, r4pts), 1e-10);

    struct Case {
        JacobiPair pair;
        PointSet pts;
    };
    std::vector<Case> cases;
    for (const char* f : {"r4-jacobi.json", "r4-jacobi-broken.json", "contact-r3.json", "lcs-r4.json",
                          "product-kind3.json", "product-kind3-broken.json"}) {
        const auto s = load_spec(spec_path(f));
        cases.push_back({*s.first("jacobi_pair")->pair, halton_points(*s.chart, {24, 0})});
    }
    {
        // Reeb field scaled, and an LCS pair with a tilted E
        const auto& c = cases[2];
        cases.push_back({make_jacobi_pair(c.pair.lambda, Expr(2.0) * c.pair.e), c.pts});
        const auto& l = cases[3];
        cases.push_back({make_jacobi_pair(l.pair.lambda, l.pair.e + MultivectorField::basis(l.pair.chart(), {2}, Expr(0.5))), l.pts});
    }
    int pos = 0, neg = 0, agree = 0;
    for (const auto& k : cases) {
        const auto p = poissonize(k.pair);
        const bool is_poisson = max_abs_at(schouten_bracket(p, p), with_t(k.pts, p.chart())) < 1e-8;
        const bool is_jacobi = jacobi_residual(k.pair, k.pts) < 1e-9;
        (is_jacobi ? pos : neg)++;
        if (is_poisson == is_jacobi) ++agree;
    }
    o.expect("Poissonization biconditional " + std::to_string(agree) + "/" + std::to_string(cases.size()) + " (" +
                 std::to_string(pos) + " Jacobi, " + std::to_string(neg) + " not)",
             agree == static_cast<int>(cases.size()) && pos >= 3 && neg >= 3);

    const auto contact = load_spec(spec_path("contact-r3.json"));
    const auto cpts = halton_points(*contact.chart, {64, 0});
    const auto& cp = *contact.first("jacobi_pair")->pair;
    o.expect("contact Reeb field minus d/dz", max_abs_at(cp.e - MultivectorField::basis(contact.chart, {2}), cpts), 1e-12);
    o.expect("contact first-kind conditions", worst_of(verify_kind_conditions(cp, *contact.foliation, 1, cpts)), 1e-9);

    const auto lcs = load_spec(spec_path("lcs-r4.json"));
    const auto lpts = halton_points(*lcs.chart, {64, 0});
    o.expect("LCS second-kind conditions",
             worst_of(verify_kind_conditions(*lcs.first("jacobi_pair")->pair, *lcs.foliation, 2, lpts)), 1e-9);

    // Heisenberg algebra bundle: P + 𝔼∧ζ with P the full Vorobiev structure
    AlgebroidData d = AlgebroidData::zero(make_chart({"x1", "x2"}, -1.0, 1.0), 3);
    d.alpha[2][0][1] = Expr(1.0);
    d.alpha[2][1][0] = Expr(-1.0);
    d.omega.add({0, 1}, Expr(1.0));
    const std::vector<double> zeta{0.4, -0.8, 0.0};
    const auto leafwise = iglesias_pair(d, zeta, 1.0, halton_points(*d.base, {16, 0}));
    o.expect("annihilating pair is Jacobi", jacobi_residual(leafwise, halton_points(*leafwise.chart(), {48, 0})), 1e-10);
    const auto v = build_structure(d, std::nullopt, 0.0, VorobievSign::Plus, 1.0);
    MultivectorField euler(v.p.chart(), 1), z(v.p.chart(), 1);
    for (int a = 0; a < 3; ++a) {
        euler.add({2 + a}, Expr::var(2 + a));
        z.add({2 + a}, Expr(zeta[static_cast<std::size_t>(a)]));
    }
    const auto full = make_jacobi_pair(v.p + wedge(euler, z), -z);
    const auto vpts = halton_points(*v.p.chart(), {48, 0});
    o.expect("first-kind pair built on the full structure fails Jacobi", jacobi_residual(full, vpts), 1e-3, false);
    o.expect("and is first kind", classify_jacobi_coupling(full, v.fibers, std::nullopt, vpts).kind == 1);
}

// 9 ------------------------------------------------------------------------------
void jet_algebroid(Outcome& o) {
    const auto r4 = load_spec(spec_path("r4-jacobi.json"));
    const auto& pair = *r4.first("jacobi_pair")->pair;
    const auto& c = r4.chart;
    const auto pts = halton_points(*c, {24, 0});
    Gen g(9009);
    double anchor = 0.0, jac = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const JetSection s1{g.form(c, 1, 3), g.poly(4, 3, 2)}, s2{g.form(c, 1, 3), g.poly(4, 3, 2)},
            s3{g.form(c, 1, 3), g.poly(4, 3, 2)};
        const auto b12 = jet_bracket(s1, s2, pair, pts);
        const auto img = [&](const JetSection& s) { return sharp(pair.lambda, s.alpha) + s.f * pair.e; };
        anchor = std::max(anchor, max_abs_at(img(b12) - lie_bracket(img(s1), img(s2)), pts));
        const auto t1 = jet_bracket(b12, s3, pair, pts);
        const auto t2 = jet_bracket(jet_bracket(s2, s3, pair, pts), s1, pair, pts);
        const auto t3 = jet_bracket(jet_bracket(s3, s1, pair, pts), s2, pair, pts);
        jac = std::max({jac, max_abs_at(t1.alpha + t2.alpha + t3.alpha, pts), max_abs_at(t1.f + t2.f + t3.f, pts)});
    }
    o.expect("anchor morphism", anchor, 1e-8);
    o.expect("bracket Jacobi identity", jac, 1e-7);
}

// 10 -----------------------------------------------------------------------------
int run_cli(const std::string& args, std::string* out = nullptr) {
    namespace fs = std::filesystem;
    const auto file = fs::temp_directory_path() / ("fpk_acceptance_" + std::to_string(::getpid()) + ".out");
    const std::string cmd = "\"" FPK_CLI_PATH "\" " + args + " >\"" + file.string() + "\" 2>/dev/null";
    const int st = std::system(cmd.c_str());
    if (out) {
        std::ifstream in(file, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        *out = ss.str();
    }
    fs::remove(file);
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

void cli(Outcome& o) {
    int stable = 0, total = 0;
    for (const auto& entry : std::filesystem::directory_iterator(FPK_SPEC_DIR)) {
        if (entry.path().extension() != ".json") continue;
        const std::string arg = "check \"" + entry.path().string() + "\" --json -";
        std::string a, b;
        const int ca = run_cli(arg, &a), cb = run_cli(arg, &b);
        ++total;
        if (ca == cb && a == b) ++stable;
    }
    o.expect("byte-stable reports " + std::to_string(stable) + "/" + std::to_string(total), stable == total && total > 0);
    const auto q = [](const std::string& f) { return "\"" + spec_path(f) + "\""; };
    o.expect("pass -> 0", run_cli("check " + q("heisenberg.json") + " --suite poisson") == 0);
    o.expect("math failure -> 1", run_cli("check " + q("heisenberg-broken.json") + " --suite poisson") == 1);
    o.expect("malformed spec -> 2", run_cli("check " + q("malformed.json")) == 2);
    o.expect("degenerate coupling form -> 3", run_cli("vorobiev build " + q("degenerate-sigma.json") + " --fiber-radius 1") == 3);
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
        {"oracle equivalence", oracle_equivalence},
        {"identity suite", identity_suite},
        {"bigraded tables", bigraded_tables},
        {"Heisenberg and coupling example", heisenberg_and_coupling},
        {"bicomplex", bicomplex},
        {"Vorobiev construction", vorobiev},
        {"linearization", linearization},
        {"Jacobi structures", jacobi},
        {"jet algebroid", jet_algebroid},
        {"CLI", cli},
    };
    int failed = 0, index = 0;
    for (const auto& [name, body] : criteria) {
        ++index;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(o);
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail << (o.detail.tellp() > 0 ? "; " : "") << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2d %s (%.1fs): %s\n", o.ok ? "PASS" : "FAIL", index, name, secs, o.detail.str().c_str());
        if (!o.ok) ++failed;
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed ? 1 : 0;
}
