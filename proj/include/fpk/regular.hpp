#pragma once

#include <vector>

#include "fpk/report.hpp"
#include "fpk/symbolic.hpp"
#include "fpk/tensor.hpp"

namespace fpk {

// Constant rank of a bivector over the sample set (singular values above
// rel_tol × largest); throws RankDrop when it varies.
int constant_rank(const MultivectorField& p, const PointSet& pts, double rel_tol = 1e-8);

// θ ∈ ∧²D* equivalent to a regular bivector P modulo a complement E of
// D = im ♯_P, with θ(♯α,♯β) = P(α,β) for α,β ∈ ann E.
struct RegularForm {
    DifferentialForm theta;
    int rank = 0;
    std::vector<DifferentialForm> ann_e;    // φ^a, a basis of ann E ≅ D*
    std::vector<MultivectorField> d_frame;  // ♯φ^a, a frame of D
    std::vector<DifferentialForm> ann_d;    // basis of ann D = ker ♯
    SymMat pi;                              // P(φ^a, φ^b)
};

// `complement_frame` spans E.  Throws RankDrop, BadComplement.
RegularForm regular_equivalent_form(const MultivectorField& p,
                                    const std::vector<MultivectorField>& complement_frame,
                                    const PointSet& pts);

// P = −Σ_{a<b} (Θ⁻¹)_{ab} d_a∧d_b with Θ_ab = θ(d_a, d_b).
MultivectorField reconstruct(const RegularForm& rf, const PointSet& pts);

// Records: round trip, [P,P] with two arguments in ann D, the mixed line
// [P,P](α,β,γ) = −2γ([♯α,♯β]) (α,β ∈ ann E, γ ∈ ann D), the
// leafwise line [P,P] = 2dθ(♯α,♯β,♯γ) on ann E, and dθ restricted to D.
std::vector<CheckRecord> regular_identity_checks(const MultivectorField& p, const RegularForm& rf,
                                                 const PointSet& pts, double tol = 1e-10);

}  // namespace fpk
