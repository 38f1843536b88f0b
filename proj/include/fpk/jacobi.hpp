#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fpk/foliation.hpp"
#include "fpk/report.hpp"
#include "fpk/tensor.hpp"
#include "fpk/vorobiev.hpp"

namespace fpk {

// {f,g} = Λ(df,dg) + f E(g) − g E(f); Jacobi iff [Λ,Λ] = 2E∧Λ and L_EΛ = 0.
struct JacobiPair {
    MultivectorField lambda;  // degree 2
    MultivectorField e;       // degree 1, same chart

    const ChartPtr& chart() const { return lambda.chart(); }
};
JacobiPair make_jacobi_pair(MultivectorField lambda, MultivectorField e);

// A section (α, f) of T*M ⊕ ℝ.
struct JetSection {
    DifferentialForm alpha;
    Expr f;
};

struct JacobiReport {
    double bracket_residual = 0.0;  // max |[Λ,Λ] − 2E∧Λ|
    double lie_residual = 0.0;      // max |L_E Λ|
    std::vector<CheckRecord> records;
    bool pass() const;
};
JacobiReport check_jacobi(const JacobiPair& pair, const PointSet& pts, double tol = 1e-9);

// e^{−t}(Λ + ∂_t∧E) on the chart extended by a last coordinate t ∈ t_domain
// (named "t", or "t_"… when taken).
MultivectorField poissonize(const JacobiPair& pair, std::pair<double, double> t_domain = {-1.0, 1.0});
// Chart × ℝ as used by poissonize.
ChartPtr extended_chart(const ChartPtr& chart, std::pair<double, double> t_domain = {-1.0, 1.0});
// The foliation F × ℝ on the extended chart (t along the leaves).
FoliatedChart extended_foliation(const FoliatedChart& fol, const ChartPtr& extended);

// Λᵃ = aΛ, Eᵃ = aE + ♯_Λ(da).  Throws NonPositiveScale when a ≤ 0 at a sample point.
JacobiPair conformal_change(const JacobiPair& pair, const Expr& a, const PointSet& pts);

enum class Verdict { Yes, No, Mixed };
const char* to_string(Verdict v);

enum class EType { Tangent, Normal, Neither };
const char* to_string(EType t);

struct JacobiClassification {
    Verdict pre_coupling = Verdict::No;
    Verdict leaf_tangent_pair = Verdict::No;
    EType e_type = EType::Neither;
    std::optional<Verdict> almost_coupling;  // only when a normal bundle was supplied
    int kind = 0;                            // 1, 2, 3; 0 for none
    bool uniform = true;                     // false when some verdict changes over the samples
    std::map<std::string, std::vector<std::vector<double>>> witnesses;  // per mixed verdict: one point per value
    std::optional<NormalBundle> normal;      // ♯(ann F) for kinds 1–2, H′ ⊕ span{E} for kind 3
};

// Pointwise verdicts aggregated over the samples.  With `strict`, any mixed
// verdict throws NonUniform instead of being reported.
JacobiClassification classify_jacobi_coupling(const JacobiPair& pair, const FoliatedChart& fol,
                                              const std::optional<NormalBundle>& h, const PointSet& pts,
                                              double tol = 1e-9, bool strict = false);

// Condition set for the requested kind, one record per printed line, plus the
// direct Jacobi check as `jacobi_direct`.  Throws KindMismatch, also for a
// third-kind pair with a nonzero mixed part (outside the product description).
std::vector<CheckRecord> verify_kind_conditions(const JacobiPair& pair, const FoliatedChart& fol, int kind,
                                                const PointSet& pts, double tol = 1e-9);

// Λ = −ω⁻¹ (♯_Λ = −♭_ω⁻¹), E = Λ(·, ε) = −♯_Λ ε.  Throws Degenerate, NotLCS.
JacobiPair from_lcs(const DifferentialForm& omega, const DifferentialForm& epsilon, const PointSet& pts,
                    double tol = 1e-12);

// The bigraded lines of dω = ε∧ω for a coupling LCS pair; the kind follows
// from where ε lives (leafwise: first, transverse: second).  Also reports the
// single residual |dω − ε∧ω| as `lcs_direct`.
struct LcsCouplingReport {
    int kind = 0;
    std::vector<CheckRecord> records;
};
LcsCouplingReport lcs_coupling_lines(const DifferentialForm& omega, const DifferentialForm& epsilon,
                                     const FoliatedChart& fol, const PointSet& pts, double tol = 1e-9);

// Reeb field and the bivector with ♯_Λ = 0 on φ and −♭_{dφ}⁻¹ on ann E.
// Throws NotContact (even dimension or φ∧(dφ)ⁿ vanishing, with the point).
JacobiPair from_contact(const DifferentialForm& phi, const PointSet& pts);

// φ∧(dφ)ᵏ of the pullback of φ to the leaves, nonvanishing at every sample.
CheckRecord leafwise_contact(const DifferentialForm& phi, const FoliatedChart& fol, const PointSet& pts);

// Bracket and anchor of T*M ⊕ ℝ.  Both throw NotJacobi unless check_jacobi passes.
JetSection jet_bracket(const JetSection& s1, const JetSection& s2, const JacobiPair& pair, const PointSet& pts);
MultivectorField jet_anchor(const JetSection& s, const JacobiPair& pair);
// Same, without the Jacobi precheck (for identity tests on many sections).
JetSection jet_bracket_unchecked(const JetSection& s1, const JetSection& s2, const JacobiPair& pair);

// {f,g} = Λ(df,dg) + f E(g) − g E(f).
Expr jacobi_bracket(const JacobiPair& pair, const Expr& f, const Expr& g);

// Λ = 𝕃 + 𝔼∧ζ, E = −ζ on the fiber box, with 𝔼 = y_a ∂/∂y_a and ζ constant.
// Throws ZetaNotAnnihilating when ζ_c α^c_ab ≠ 0 somewhere.
JacobiPair iglesias_pair(const AlgebroidData& d, const std::vector<double>& zeta, double radius,
                         const PointSet& base_pts);

}  // namespace fpk
