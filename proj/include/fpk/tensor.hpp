#pragma once

#include <map>
#include <vector>

#include "fpk/expr.hpp"
#include "fpk/linalg.hpp"
#include "fpk/sampling.hpp"

namespace fpk {

using Index = std::vector<int>;  // 0-based coordinate slots

// Sorts in place; returns the permutation sign, or 0 on a repeated slot.
int sort_index(Index& idx);

// All strictly increasing k-subsets of {0..n-1}, lexicographic.
std::vector<Index> combinations(int n, int k);

bool same_chart(const ChartPtr& a, const ChartPtr& b);
void require_same_chart(const ChartPtr& a, const ChartPtr& b, const char* what);

enum class Variance { Contra, Co };

// Antisymmetric tensor of fixed variance; components keyed by increasing index
// tuples, absent keys are zero.
template <Variance V>
class Alt {
public:
    Alt() = default;
    Alt(ChartPtr chart, int degree) : chart_(std::move(chart)), degree_(degree) {
        if (!chart_) throw ChartMismatch("tensor without a chart");
        if (degree_ < 0 || degree_ > static_cast<int>(chart_->dim()))
            throw DegreeOverflow("degree " + std::to_string(degree_) + " exceeds chart dimension");
    }

    static Alt scalar(ChartPtr chart, Expr f) {
        Alt a(std::move(chart), 0);
        a.set({}, std::move(f));
        return a;
    }
    // ∂_{i1}∧…∧∂_{ik} (or dx^{i1}∧…), slots in any order.
    static Alt basis(ChartPtr chart, Index idx, Expr coeff = Expr(1.0)) {
        Alt a(std::move(chart), static_cast<int>(idx.size()));
        a.add(std::move(idx), std::move(coeff));
        return a;
    }

    const ChartPtr& chart() const { return chart_; }
    int degree() const { return degree_; }
    int dim() const { return static_cast<int>(chart_->dim()); }
    const std::map<Index, Expr>& components() const { return comps_; }

    Expr get(Index idx) const {
        int s = sort_index(idx);
        if (s == 0) return Expr(0.0);
        auto it = comps_.find(idx);
        if (it == comps_.end()) return Expr(0.0);
        return s > 0 ? it->second : -it->second;
    }

    void add(Index idx, const Expr& e) {
        if (static_cast<int>(idx.size()) != degree_) throw DegreeError("index length differs from degree");
        for (int i : idx)
            if (i < 0 || i >= dim()) throw DegreeError("index slot out of range");
        if (e.is_zero()) return;
        int s = sort_index(idx);
        if (s == 0) return;  // repeated slot: alternating part vanishes
        Expr term = s > 0 ? e : -e;
        auto it = comps_.find(idx);
        if (it == comps_.end()) {
            comps_.emplace(std::move(idx), term);
        } else {
            it->second = it->second + term;
            if (it->second.is_zero()) comps_.erase(it);
        }
    }

    void set(Index idx, const Expr& e) {
        Index key = idx;
        int s = sort_index(key);
        if (s == 0) {
            if (!e.is_zero()) throw DegreeError("nonzero value on a repeated index");
            return;
        }
        comps_.erase(key);
        add(std::move(idx), e);
    }

    bool is_zero() const { return comps_.empty(); }

    std::vector<Expr> exprs() const {
        std::vector<Expr> out;
        out.reserve(comps_.size());
        for (const auto& [k, e] : comps_) out.push_back(e);
        return out;
    }

    template <class F>
    Alt map(F&& f) const {
        Alt r(chart_, degree_);
        for (const auto& [k, e] : comps_) r.add(k, f(e));
        return r;
    }

    Alt diff(int slot) const {
        return map([slot](const Expr& e) { return e.diff(slot); });
    }

    std::map<Index, double> eval(const double* x) const {
        std::map<Index, double> out;
        for (const auto& [k, e] : comps_) out[k] = e.eval(x);
        return out;
    }

    Alt& operator+=(const Alt& o) {
        check(o);
        for (const auto& [k, e] : o.comps_) add(k, e);
        return *this;
    }
    Alt& operator-=(const Alt& o) {
        check(o);
        for (const auto& [k, e] : o.comps_) add(k, -e);
        return *this;
    }
    friend Alt operator+(Alt a, const Alt& b) { return a += b; }
    friend Alt operator-(Alt a, const Alt& b) { return a -= b; }
    friend Alt operator-(const Alt& a) {
        return a.map([](const Expr& e) { return -e; });
    }
    friend Alt operator*(const Expr& f, const Alt& a) {
        if (f.is_zero()) return Alt(a.chart_, a.degree_);
        return a.map([&f](const Expr& e) { return f * e; });
    }
    friend Alt operator*(const Alt& a, const Expr& f) { return f * a; }

private:
    void check(const Alt& o) const {
        require_same_chart(chart_, o.chart_, "tensor sum");
        if (o.degree_ != degree_) throw DegreeError("sum of tensors of different degree");
    }

    ChartPtr chart_;
    int degree_ = 0;
    std::map<Index, Expr> comps_;
};

using MultivectorField = Alt<Variance::Contra>;
using DifferentialForm = Alt<Variance::Co>;

// ---- algebra ------------------------------------------------------------------

template <Variance V>
Alt<V> wedge(const Alt<V>& a, const Alt<V>& b);

// i(P)φ: P fills the leading slots of φ.
DifferentialForm interior_product(const MultivectorField& p, const DifferentialForm& phi);
// i(α)P: α fills the leading slots of P.
MultivectorField interior_product(const DifferentialForm& alpha, const MultivectorField& p);

// Full pairing of equal degrees, ⟨φ, P⟩ with det normalisation.
Expr pairing(const MultivectorField& p, const DifferentialForm& phi);
// P(α1,…,αk) and φ(X1,…,Xk).
Expr evaluate_on(const MultivectorField& p, const std::vector<DifferentialForm>& forms);
Expr evaluate_on(const DifferentialForm& phi, const std::vector<MultivectorField>& vecs);

DifferentialForm exterior_derivative(const DifferentialForm& phi);
DifferentialForm differential(const ChartPtr& chart, const Expr& f);

// X(f)
Expr apply(const MultivectorField& x, const Expr& f);
// Classical bracket of vector fields, written out independently of the SN code.
MultivectorField lie_bracket(const MultivectorField& x, const MultivectorField& y);

DifferentialForm lie_derivative(const MultivectorField& x, const DifferentialForm& phi);
MultivectorField lie_derivative(const MultivectorField& x, const MultivectorField& t);

MultivectorField sharp(const MultivectorField& p, const DifferentialForm& alpha);
Expr bivector_on(const MultivectorField& p, const DifferentialForm& a, const DifferentialForm& b);
DifferentialForm one_form_bracket(const MultivectorField& p, const DifferentialForm& a,
                                  const DifferentialForm& b);

// Schouten–Nijenhuis bracket in the Lichnerowicz sign convention:
// [X,Y] is the Lie bracket, [X,Q] = L_X Q, [P,Q] = (-1)^{pq}[Q,P], and for a
// bivector [P,P](α,β,γ) = 2[dγ(♯α,♯β) − (L_{♯γ}P)(α,β)].  It differs from the
// other common convention by the factor (-1)^{p-1}.
MultivectorField schouten_bracket(const MultivectorField& p, const MultivectorField& q);
// Superfunction coordinate formula, convention with [P,Q] = -(-1)^{(p-1)(q-1)}[Q,P].
MultivectorField schouten_standard(const MultivectorField& p, const MultivectorField& q);
// i([P,Q])φ evaluated through d and i only, never forming [P,Q].
ScalarField lichnerowicz_pairing(const MultivectorField& p, const MultivectorField& q,
                                 const DifferentialForm& phi);
Expr lichnerowicz_expr(const MultivectorField& p, const MultivectorField& q,
                       const DifferentialForm& phi);

// Numeric square matrix of a bivector (P^{ij}, antisymmetric) or 2-form at x.
la::Mat matrix_at(const MultivectorField& p, const double* x);
la::Mat matrix_at(const DifferentialForm& w, const double* x);

// Max absolute component over a point set.
template <Variance V>
MaxAbs max_abs(const Alt<V>& t, const PointSet& pts, Exec exec = Exec::Parallel) {
    return max_abs(t.exprs(), pts, exec);
}

// ---- maps between charts --------------------------------------------------------

struct ChartMap {
    ChartPtr source, target;
    std::vector<Expr> comps;  // one per target coordinate, over source slots

    std::vector<double> apply(const double* x) const;
    la::Mat jacobian(const double* x) const;  // rows: target, cols: source
};

struct PushedSample {
    std::vector<double> source_point;
    std::vector<double> target_point;
    std::map<Index, double> comps;
};

// Φ_*P at Φ(x) for each source point x.
std::vector<PushedSample> pushforward(const ChartMap& phi, const MultivectorField& p,
                                      const PointSet& source_points, double det_tol = 1e-10);

}  // namespace fpk
