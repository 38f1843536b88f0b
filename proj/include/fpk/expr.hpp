#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fpk/errors.hpp"

namespace fpk {

// Coordinate chart: ordered coordinate names and a closed box domain.
struct Chart {
    std::vector<std::string> names;
    std::vector<std::pair<double, double>> domain;

    std::size_t dim() const { return names.size(); }
    int index_of(std::string_view name) const;
};
using ChartPtr = std::shared_ptr<const Chart>;

// Validates names (unique, not reserved) and intervals before sharing the chart.
ChartPtr make_chart(std::vector<std::string> names,
                    std::vector<std::pair<double, double>> domain);
ChartPtr make_chart(std::vector<std::string> names, double lo, double hi);

namespace detail {
struct Node;
}

// Immutable expression DAG over coordinate slots 0..n-1.  Copies share nodes.
class Expr {
public:
    enum class Op : std::uint8_t { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp };

    Expr();  // the constant 0
    Expr(double c);  // NOLINT(google-explicit-constructor): literals mix freely
    static Expr var(int slot);

    Op op() const;
    bool is_const() const;
    bool is_zero() const;
    bool is_one() const;
    double const_value() const;  // only meaningful when is_const()
    std::size_t node_count() const;

    Expr diff(int slot) const;
    // Replaces every Var(i) by by_slot[i]; throws DomainError for uncovered slots.
    Expr substitute(const std::vector<Expr>& by_slot) const;
    double eval(const double* x) const;  // throws DomainError on a zero divisor
    std::string str(const std::vector<std::string>& names) const;

    Expr pow(int n) const;
    friend Expr sin(const Expr& a);
    friend Expr cos(const Expr& a);
    friend Expr exp(const Expr& a);
    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);
    Expr& operator+=(const Expr& b) { return *this = *this + b; }
    Expr& operator-=(const Expr& b) { return *this = *this - b; }
    Expr& operator*=(const Expr& b) { return *this = *this * b; }

    const detail::Node* raw() const { return node_.get(); }

private:
    explicit Expr(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const detail::Node> node_;
    friend struct detail::Node;
};

Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);

// Straight-line program for a batch of expressions.  Shared and structurally
// equal subexpressions are computed once per point, which keeps evaluation
// linear in the DAG size instead of the unfolded tree size.
class Tape {
public:
    explicit Tape(const std::vector<Expr>& exprs);

    std::size_t outputs() const { return outs_.size(); }
    std::size_t size() const { return ins_.size(); }
    // out must hold outputs() values; scratch is resized as needed.
    void run(const double* x, double* out, std::vector<double>& scratch) const;

private:
    struct Ins {
        Expr::Op op;
        int k;
        double c;
        std::uint32_t a, b;
    };
    std::vector<Ins> ins_;
    std::vector<std::uint32_t> outs_;
};

// Parses the coefficient grammar against the given coordinate names.
Expr parse_expr(std::string_view text, const std::vector<std::string>& names);

struct Point {
    ChartPtr chart;
    std::vector<double> values;
};

// Chart-bound scalar field; the public face of Expr.
class ScalarField {
public:
    ScalarField(ChartPtr chart, Expr e) : chart_(std::move(chart)), expr_(std::move(e)) {}

    const ChartPtr& chart() const { return chart_; }
    const Expr& expr() const { return expr_; }

    ScalarField differentiate(std::string_view coord) const;
    double evaluate(const Point& p) const;  // domain-checked
    std::string str() const { return expr_.str(chart_->names); }

private:
    ChartPtr chart_;
    Expr expr_;
};

ScalarField parse_expression(std::string_view text, const ChartPtr& chart);
ScalarField differentiate(const ScalarField& f, std::string_view coord);
double evaluate(const ScalarField& f, const Point& p);

}  // namespace fpk
