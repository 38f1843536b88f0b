#include "fpk/regular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpk {

int constant_rank(const MultivectorField& p, const PointSet& pts, double rel_tol) {
    int r = -1;
    for (const auto& x : pts) {
        const auto m = matrix_at(p, x.data());
        const int k = m.max_abs() == 0.0 ? 0 : static_cast<int>(la::SVD(m).rank(rel_tol));
        if (r < 0) r = k;
        if (k != r) throw RankDrop("rank varies across sample points (" + std::to_string(r) + " vs " +
                                   std::to_string(k) + ")");
    }
    return std::max(r, 0);
}

namespace {

// Coordinate slots whose minor of the frame stays best conditioned.
Index graph_slots(const std::vector<MultivectorField>& e, int n, const PointSet& pts) {
    const int r = static_cast<int>(e.size());
    Index best;
    double best_score = -1.0;
    for (const auto& idx : combinations(n, r)) {
        double score = std::numeric_limits<double>::infinity();
        for (const auto& x : pts) {
            la::Mat a(r, r);
            for (int k = 0; k < r; ++k)
                for (int l = 0; l < r; ++l) a(k, l) = e[l].get({idx[k]}).eval(x.data());
            score = std::min(score, std::abs(la::det(a)));
        }
        if (score > best_score) {
            best_score = score;
            best = idx;
        }
    }
    if (best_score < 1e-8) throw BadComplement("complement frame is not pointwise independent");
    return best;
}

}  // namespace

RegularForm regular_equivalent_form(const MultivectorField& p,
                                    const std::vector<MultivectorField>& complement_frame,
                                    const PointSet& pts) {
    if (p.degree() != 2) throw DegreeError("regular form needs a bivector");
    const ChartPtr& ch = p.chart();
    const int n = p.dim();
    for (const auto& v : complement_frame) {
        require_same_chart(ch, v.chart(), "complement frame");
        if (v.degree() != 1) throw DegreeError("complement frame must consist of vector fields");
    }
    RegularForm rf;
    rf.rank = constant_rank(p, pts);
    const int r = static_cast<int>(complement_frame.size());
    const int s = rf.rank;
    if (r + s != n)
        throw BadComplement("complement has dimension " + std::to_string(r) + ", expected " +
                            std::to_string(n - s));

    // Normalise E to graph form over the slots I, then ann E is spanned by
    // dx^j − Σ_k ê_k^j dx^{I_k} for j outside I.
    Index slots;
    SymMat ehat;  // ehat[k][j] = ê_k^j
    if (r > 0) {
        slots = graph_slots(complement_frame, n, pts);
        SymMat a = sym_zero(r, r);
        for (int k = 0; k < r; ++k)
            for (int l = 0; l < r; ++l) a[k][l] = complement_frame[l].get({slots[k]});
        const SymMat ainv = sym_inverse(a, best_reference(a, pts));
        ehat = sym_zero(r, n);
        for (int k = 0; k < r; ++k)
            for (int j = 0; j < n; ++j) {
                Expr acc;
                for (int l = 0; l < r; ++l) acc += complement_frame[l].get({j}) * ainv[l][k];
                ehat[k][j] = acc;
            }
    }
    for (int j = 0; j < n; ++j) {
        if (std::find(slots.begin(), slots.end(), j) != slots.end()) continue;
        auto phi = DifferentialForm::basis(ch, {j});
        for (int k = 0; k < r; ++k) phi.add({slots[k]}, -ehat[k][j]);
        rf.ann_e.push_back(phi);
    }

    rf.pi = sym_zero(s, s);
    for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b) rf.pi[a][b] = bivector_on(p, rf.ann_e[a], rf.ann_e[b]);
    for (const auto& x : pts) {
        const auto m = sym_eval(rf.pi, x.data());
        if (s > 0 && static_cast<int>(la::SVD(m).rank()) != s)
            throw BadComplement("complement frame is not transverse to im of sharp");
    }
    const SymMat pinv = s > 0 ? sym_inverse(rf.pi, best_reference(rf.pi, pts)) : SymMat{};

    rf.theta = DifferentialForm(ch, 2);
    for (int c = 0; c < s; ++c)
        for (int d = c + 1; d < s; ++d) rf.theta -= pinv[c][d] * wedge(rf.ann_e[c], rf.ann_e[d]);
    for (const auto& phi : rf.ann_e) rf.d_frame.push_back(sharp(p, phi));

    // ker ♯: γ_k = dx^{I_k} + Σ_a v_a φ^a with v = Π⁻¹ w, w_b = P(dx^{I_k}, φ^b).
    for (int k = 0; k < r; ++k) {
        auto eps = DifferentialForm::basis(ch, {slots[k]});
        auto g = eps;
        for (int a = 0; a < s; ++a) {
            Expr v;
            for (int b = 0; b < s; ++b) v += pinv[a][b] * bivector_on(p, eps, rf.ann_e[b]);
            g += v * rf.ann_e[a];
        }
        rf.ann_d.push_back(g);
    }
    return rf;
}

MultivectorField reconstruct(const RegularForm& rf, const PointSet& pts) {
    const int s = static_cast<int>(rf.d_frame.size());
    MultivectorField out(rf.theta.chart(), 2);
    if (s == 0) return out;
    SymMat th = sym_zero(s, s);
    for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b) th[a][b] = evaluate_on(rf.theta, {rf.d_frame[a], rf.d_frame[b]});
    const SymMat inv = sym_inverse(th, best_reference(th, pts));
    for (int a = 0; a < s; ++a)
        for (int b = a + 1; b < s; ++b) out -= inv[a][b] * wedge(rf.d_frame[a], rf.d_frame[b]);
    return out;
}

std::vector<CheckRecord> regular_identity_checks(const MultivectorField& p, const RegularForm& rf,
                                                 const PointSet& pts, double tol) {
    const ChartPtr& ch = p.chart();
    const auto pp = schouten_bracket(p, p);
    const auto dth = exterior_derivative(rf.theta);
    const std::size_t s = rf.ann_e.size(), r = rf.ann_d.size();
    std::vector<CheckRecord> out;

    out.push_back(make_check("regular_round_trip", "regular-reconstruct",
                             max_abs(reconstruct(rf, pts) - p, pts), tol, pts));

    std::vector<Expr> two_in_kernel, mixed, leafwise, dtheta_d;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = i + 1; j < r; ++j)
            for (int k = 0; k < p.dim(); ++k)
                two_in_kernel.push_back(evaluate_on(pp, {rf.ann_d[i], rf.ann_d[j], DifferentialForm::basis(ch, {k})}));
    for (std::size_t a = 0; a < s; ++a)
        for (std::size_t b = a + 1; b < s; ++b) {
            const auto br = lie_bracket(rf.d_frame[a], rf.d_frame[b]);
            for (std::size_t k = 0; k < r; ++k)
                mixed.push_back(evaluate_on(pp, {rf.ann_e[a], rf.ann_e[b], rf.ann_d[k]}) -
                                Expr(-2.0) * pairing(br, rf.ann_d[k]));
            for (std::size_t c = b + 1; c < s; ++c) {
                const Expr dt = evaluate_on(dth, {rf.d_frame[a], rf.d_frame[b], rf.d_frame[c]});
                leafwise.push_back(evaluate_on(pp, {rf.ann_e[a], rf.ann_e[b], rf.ann_e[c]}) - Expr(2.0) * dt);
                dtheta_d.push_back(dt);
            }
        }
    out.push_back(make_check("regular_kernel_pair", "bracket-two-kernel-args", max_abs(two_in_kernel, pts), tol, pts));
    out.push_back(make_check("regular_mixed", "bracket-mixed-args", max_abs(mixed, pts), tol, pts));
    out.push_back(make_check("regular_leafwise", "bracket-leafwise-args", max_abs(leafwise, pts), tol, pts));
    out.push_back(make_check("dtheta_on_distribution", "dtheta-restricted", max_abs(dtheta_d, pts), tol, pts));
    return out;
}

}  // namespace fpk
