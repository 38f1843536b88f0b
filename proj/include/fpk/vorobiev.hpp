#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpk/foliation.hpp"
#include "fpk/report.hpp"
#include "fpk/symbolic.hpp"
#include "fpk/tensor.hpp"

namespace fpk {

using Table3 = std::vector<std::vector<std::vector<Expr>>>;
Table3 table3(int d0, int d1, int d2);

// Transitive Lie algebroid over a symplectic base, in a local basis (g_a, q_i)
// with q_i lifting ∂_i:
//   [g_a,g_b] = α^c_ab g_c,  [g_a,q_i] = β^c_ai g_c,  [q_i,q_j] = γ^c_ij g_c + γ^h_ij q_h.
// All coefficients are expressions over the base chart.
struct AlgebroidData {
    ChartPtr base;
    int rank = 0;                          // k
    Table3 alpha;                          // alpha[c][a][b]
    Table3 beta;                           // beta[c][a][i]
    Table3 gamma_f;                        // gamma_f[c][i][j]
    Table3 gamma_q;                        // gamma_q[h][i][j]
    DifferentialForm omega;                // on the base
    std::vector<std::string> fiber_names;  // defaults to y1..yk

    int n() const { return static_cast<int>(base->dim()); }
    // Zero tables of the right shapes and ω = 0.
    static AlgebroidData zero(ChartPtr base, int rank);
};

// G-valued 1-form φ on the base: phi[c][i].
struct SplittingShift {
    std::vector<std::vector<Expr>> phi;
};

enum class VorobievSign { Plus, Minus };  // (𝕃, H, σ) or (−𝕃, H, σ̃)

// Algebroid in the basis (g_a, q_i + t φ_i): the shifted splitting from scratch.
AlgebroidData shifted(const AlgebroidData& d, const SplittingShift& s, double t = 1.0);

// Antisymmetry, closedness and nondegeneracy of ω, the anchor-morphism
// condition, the Jacobi identity on frame triples (worst triple named in the
// note), parallelism of the structure tensor, and the curvature identity.
std::vector<CheckRecord> validate_algebroid(const AlgebroidData& d, const PointSet& base_pts,
                                            double tol = 1e-9);

// Product chart (base coordinates, then fiber coordinates on [−r, r]).
ChartPtr total_chart(const AlgebroidData& d, double radius);

// Where base and fiber coordinates sit inside a chart.
struct FiberLayout {
    ChartPtr chart;
    std::vector<int> base_slots;
    std::vector<int> fiber_slots;
};
FiberLayout standard_layout(const AlgebroidData& d, const ChartPtr& total);

// The triple (±𝕃, H_t, σ_t) of the splitting shifted by t φ.
CouplingTriple vorobiev_triple(const AlgebroidData& d, const FiberLayout& lay,
                               const std::optional<SplittingShift>& shift, double t, VorobievSign sign);

// σ_t by the shift formula σ − t dψ(𝒳,𝒴) − t² 𝕃(φX, φY) on the unshifted lifts,
// as a form in ∧²(ann of the fibers).  Independent of the from-scratch route.
DifferentialForm shifted_sigma_formula(const AlgebroidData& d, const FiberLayout& lay,
                                       const SplittingShift& s, double t, VorobievSign sign);

struct VorobievStructure {
    MultivectorField p;
    CouplingTriple triple;
    FoliatedChart fibers;  // leaves are the fibers
    double radius = 0.0;   // fiber box actually used
    VorobievSign sign = VorobievSign::Plus;
    std::optional<SplittingShift> shift;
    double t = 0.0;
};

// With `radius` given the box is checked as is; otherwise it starts at 1 and
// halves until σ_t is nondegenerate.  Throws DegenerateSigma, naming the
// largest radius at which nondegeneracy held.
VorobievStructure build_structure(const AlgebroidData& d, const std::optional<SplittingShift>& shift, double t,
                                  VorobievSign sign, std::optional<double> radius = std::nullopt,
                                  const SampleProtocol& proto = {});

// Largest radius 2^{-m} (m ≥ 0, at most `max_halvings`) at which σ_t is
// nondegenerate for every t on the grid; 0 when none qualifies.
double fiber_radius_search(const AlgebroidData& d, const std::optional<SplittingShift>& shift,
                           VorobievSign sign, const std::vector<double>& ts, const SampleProtocol& proto = {},
                           int max_halvings = 12);

// [P,P], coupling classification under the fiber foliation, triple round
// trip, and L_𝒳𝕃 against ⟨z, ∇_X C⟩ computed from the (shifted) tables.
std::vector<CheckRecord> structure_checks(const AlgebroidData& d, const VorobievStructure& v, const PointSet& pts,
                                          double tol = 1e-9);

struct CoisotropyReport {
    bool coisotropic = false;
    bool sigma_nondegenerate_far = false;
    std::vector<CheckRecord> records;
};
// D = {X : γ^a_ij X^i = 0} per base point, its ω-coisotropy, and σ_z on a
// large fiber box (radius `far`).
CoisotropyReport check_coisotropy_global(const AlgebroidData& d, const PointSet& base_pts, double far = 10.0,
                                         std::size_t fiber_samples = 64);

struct FlowSample {
    std::vector<double> start, end;
    la::Mat jacobian;
};
struct FlowResult {
    std::vector<FlowSample> samples;
    double residual = 0.0;  // max |Φ_* P_0 − P_1| at the endpoints
    double radius = 0.0;
    int steps = 0;
};
// RK4 for ż = Ξ_t(z), Ξ_t = ∓♯_{P_t}ψ (β(♯α) = P(α,β)), with the variational equation for the
// Jacobian.  Start points are `proto` points of the fiber box shrunk by
// `start_shrink`.  Throws IntegrationLeftDomain, DegenerateSigma.
FlowResult equivalence_flow(const AlgebroidData& d, const SplittingShift& s, VorobievSign sign = VorobievSign::Plus,
                            int steps = 200, const SampleProtocol& proto = {16, 0}, double start_shrink = 0.5,
                            std::optional<double> radius = std::nullopt, Exec exec = Exec::Parallel);

struct Linearization {
    AlgebroidData algebroid;  // T*M restricted to the leaf
    CouplingTriple triple;    // on the original chart, fibers = normal directions
    MultivectorField p_lin;
    FoliatedChart fibers;
};
// `fol.transverse` are the coordinates vanishing on the leaf, `fol.leaf`
// coordinates along it.  Throws NotALeaf when the slice is not a symplectic leaf.
Linearization linearize_at_leaf(const MultivectorField& p, const FoliatedChart& fol, const PointSet& pts,
                                double tol = 1e-9);

// Points of the leaf pushed off by normal offsets of size r.
PointSet near_leaf_points(const FoliatedChart& fol, const PointSet& pts, double r, unsigned seed = 7);

// |P − P_lin| at normal distance r1 and r2, their ratio (second order means
// ≈ (r1/r2)²), and [P_lin, P_lin] near the leaf.
std::vector<CheckRecord> linearization_checks(const MultivectorField& p, const Linearization& lin,
                                              const PointSet& pts, double r1 = 1e-2, double r2 = 1e-3);

}  // namespace fpk
