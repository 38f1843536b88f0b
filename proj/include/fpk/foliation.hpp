#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "fpk/report.hpp"
#include "fpk/symbolic.hpp"
#include "fpk/tensor.hpp"

namespace fpk {

// Coordinate foliation: leaves are the level sets of the transverse coordinates.
struct FoliatedChart {
    ChartPtr chart;
    std::vector<int> leaf;        // slots tangent to the leaves (size p)
    std::vector<int> transverse;  // the complement, increasing (size q)

    int p() const { return static_cast<int>(leaf.size()); }
    int q() const { return static_cast<int>(transverse.size()); }
    int dim() const { return p() + q(); }
};

FoliatedChart make_foliated(ChartPtr chart, std::vector<int> leaf_slots);
FoliatedChart make_foliated(ChartPtr chart, const std::vector<std::string>& leaf_names);

// Normal bundle H spanned by X_a = ∂_a + Σ_u Γ^u_a ∂_u.
struct NormalBundle {
    FoliatedChart fol;
    SymMat gamma;  // gamma[a][u], a over transverse slots, u over leaf slots (in FoliatedChart order)

    static NormalBundle flat(const FoliatedChart& fol);

    MultivectorField horizontal(int a) const;  // X_a
    MultivectorField vertical(int u) const;    // ∂ on the u-th leaf slot
    DifferentialForm transverse_form(int a) const;  // dx^a
    DifferentialForm leaf_form(int u) const;        // θ^u = dy^u − Σ_a Γ^u_a dx^a

    // Adapted frame (X_a then ∂_u) and its dual coframe (dx^a then θ^u).
    std::vector<MultivectorField> frame() const;
    std::vector<DifferentialForm> coframe() const;
};

using Bidegree = std::pair<int, int>;  // (count in H-direction, count in F-direction)

template <Variance V>
struct Bigraded {
    ChartPtr chart;
    int degree = 0;
    std::map<Bidegree, Alt<V>> parts;  // only nonzero pieces

    Alt<V> get(int r, int s) const {
        auto it = parts.find({r, s});
        return it == parts.end() ? Alt<V>(chart, degree) : it->second;
    }
    Alt<V> sum() const {
        Alt<V> out(chart, degree);
        for (const auto& [k, t] : parts) out += t;
        return out;
    }
};

Bigraded<Variance::Contra> bigrade(const MultivectorField& t, const NormalBundle& h);
Bigraded<Variance::Co> bigrade(const DifferentialForm& t, const NormalBundle& h);

struct DSplit {
    DifferentialForm d1;   // d′, bidegree (1,0)
    DifferentialForm d2;   // d″, bidegree (0,1)
    DifferentialForm del;  // ∂,  bidegree (2,−1)
};
DSplit d_split(const DifferentialForm& phi, const NormalBundle& h);

// Projection onto F along H.
MultivectorField project_leaf(const MultivectorField& v, const NormalBundle& h);

enum class FoliationClass { LeafTangent, Coupling, AlmostCoupling, None };
const char* to_string(FoliationClass c);

struct Classification {
    FoliationClass kind = FoliationClass::None;
    std::optional<NormalBundle> normal;  // H_P for coupling, the given H for almost coupling
};

// Classifies pointwise and requires agreement over the sample set; throws
// NonUniform naming one witness point per class otherwise.
Classification classify_bivector(const MultivectorField& p, const FoliatedChart& fol,
                                 const std::optional<NormalBundle>& h, const PointSet& pts,
                                 double tol = 1e-9);

// H_P = ♯_P(ann F) as a graph field; Γ is obtained symbolically from the
// transverse block.  Throws NotCoupling where that block degenerates.
NormalBundle coupling_normal_bundle(const MultivectorField& p, const FoliatedChart& fol,
                                    const PointSet& pts);

// Leafwise Poisson condition d″ν(♯λ,♯μ) − (L_{♯ν}P)(λ,μ) over leaf coframe
// triples, plus a cross-check against the components of [P,P].
std::vector<CheckRecord> check_leaf_tangent_poisson(const MultivectorField& p, const FoliatedChart& fol,
                                                    const PointSet& pts, double tol = 1e-9);

struct CouplingTriple {
    MultivectorField leaf;  // P″, bidegree (0,2)
    NormalBundle normal;    // H
    DifferentialForm sigma; // in ∧²(ann F), nondegenerate on H
};

CouplingTriple extract_triple(const MultivectorField& p, const FoliatedChart& fol, const PointSet& pts);
MultivectorField reconstruct_triple(const CouplingTriple& t, const PointSet& pts);

// d′σ, curvature, invariance of P″ along the horizontal frame, P″ Poisson,
// and the direct [P,P] of the reconstructed bivector as a cross-check.
std::vector<CheckRecord> verify_triple_conditions(const CouplingTriple& t, const PointSet& pts,
                                                  double tol = 1e-9);

// Every printed line of the six bigraded bracket tables, the excluded
// bidegrees, and the exhaustive recombination into [P,P].
std::vector<CheckRecord> verify_bigraded_tables(const MultivectorField& p, const NormalBundle& h,
                                                const PointSet& pts, double tol = 1e-9);

struct CoboundarySplit {
    MultivectorField prime;     // σ′Q, bidegree shift (−1,2)
    MultivectorField second;    // σ″Q, shift (0,1)
    MultivectorField leftover;  // shift (−2,3); vanishes for leaf-tangent Poisson P
};
// σQ = −[P,Q] split by bidegree shift relative to the pure pieces of Q.
CoboundarySplit lp_coboundary_split(const MultivectorField& p_leaf, const MultivectorField& q,
                                    const NormalBundle& h);
// σ′², σ″², σ′σ″+σ″σ′ and the (−2,3) piece on Q.
std::vector<CheckRecord> bicomplex_checks(const MultivectorField& p_leaf, const MultivectorField& q,
                                          const NormalBundle& h, const PointSet& pts, double tol = 1e-10);

struct SymplecticCoupling {
    NormalBundle normal;      // ω-orthogonal of F
    DifferentialForm sigma;   // (2,0) part
    DifferentialForm theta;   // (0,2) part
    std::vector<CheckRecord> records;
};
// Throws Degenerate (ω degenerate somewhere) or NotCoupling (ω|F degenerate).
SymplecticCoupling check_symplectic_coupling(const DifferentialForm& omega, const FoliatedChart& fol,
                                             const PointSet& pts, double tol = 1e-9);

// Conditions of the projectable case, one record each, plus the direct
// projectability of P′ and the Poisson property.
std::vector<CheckRecord> check_projectable_coupling(const MultivectorField& p, const FoliatedChart& fol,
                                                    const PointSet& pts, double tol = 1e-9);

}  // namespace fpk
