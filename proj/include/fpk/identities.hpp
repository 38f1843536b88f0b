#pragma once

#include <optional>
#include <vector>

#include "fpk/report.hpp"
#include "fpk/tensor.hpp"

namespace fpk {

// Classical bivector identities, each side computed by a separate code path.
// Arguments range over triples drawn from `args` (coordinate coframe when
// empty); the Lie-algebroid identity also ranges over `fields` (coordinate
// fields plus one nonconstant field when empty).
struct IdentityInputs {
    std::vector<DifferentialForm> args;
    std::vector<MultivectorField> fields;
    // Bivector used on every right-hand side; defaults to P.  Supplying a
    // perturbed copy exercises the detection path.
    std::optional<MultivectorField> rhs;
};

// Records, in order:
//   pp_via_lie_derivative   [P,P](α,β,γ) = 2[dγ(♯α,♯β) − (L_{♯γ}P)(α,β)]
//   pp_via_form_bracket     [P,P](α,β,γ) = 2γ(♯{α,β} − [♯α,♯β])
//   pp_cyclic               [P,P](α,β,γ) = 2 Σ_cyc ⟨γ, ♯(L_{♯α}β)⟩
//   cotangent_jacobiator    Σ_cyc⟨{{α,β},γ},X⟩ = [P,L_XP](α,β,γ) + ½Σ_cyc[P,P](α,β,d⟨γ,X⟩)
//   poisson_condition       (L_{♯γ}P)(α,β) = dγ(♯α,♯β)   (holds iff P is Poisson)
std::vector<CheckRecord> gd_identity_suite(const MultivectorField& p, const PointSet& pts,
                                           double tol = 1e-10, const IdentityInputs& in = {},
                                           Exec exec = Exec::Parallel);

// [P1,P2](α,β,γ) against the polarized right-hand side.
CheckRecord polarization_check(const MultivectorField& p1, const MultivectorField& p2,
                               const PointSet& pts, double tol = 1e-10,
                               const std::vector<DifferentialForm>& args = {});

// i([P,Q])φ from the coordinate bracket versus the Lichnerowicz pairing, over
// the basis forms dx^I (optionally scaled by `weight`).
CheckRecord lichnerowicz_agreement(const MultivectorField& p, const MultivectorField& q,
                                   const PointSet& pts, double tol = 1e-9,
                                   const Expr& weight = Expr(1.0));

}  // namespace fpk
