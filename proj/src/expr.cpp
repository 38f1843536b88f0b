#include "fpk/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <set>
#include <unordered_map>

namespace fpk {

namespace detail {

struct Node {
    Expr::Op op;
    int k = 0;        // slot for Var, exponent for Pow
    double c = 0.0;   // value for Const
    std::shared_ptr<const Node> a, b;

    static Expr make(Expr::Op op, int k, double c, std::shared_ptr<const Node> a,
                     std::shared_ptr<const Node> b) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->k = k;
        n->c = c;
        n->a = std::move(a);
        n->b = std::move(b);
        return Expr(std::shared_ptr<const Node>(std::move(n)));
    }
    static Expr wrap(const std::shared_ptr<const Node>& n) { return Expr(n); }
    static const std::shared_ptr<const Node>& ptr(const Expr& e) { return e.node_; }
};

}  // namespace detail

using detail::Node;
using Op = Expr::Op;

namespace {

const std::set<std::string>& reserved_names() {
    static const std::set<std::string> r{"sin", "cos", "exp", "pi"};
    return r;
}

Expr constant(double c) {
    // The folding rules produce 0 and 1 constantly; share one node for each.
    static const Expr zero = Node::make(Op::Const, 0, 0.0, nullptr, nullptr);
    static const Expr one = Node::make(Op::Const, 0, 1.0, nullptr, nullptr);
    if (c == 0.0 && !std::signbit(c)) return zero;
    if (c == 1.0) return one;
    return Node::make(Op::Const, 0, c, nullptr, nullptr);
}

Expr unary(Op op, const Expr& a) {
    return Node::make(op, 0, 0.0, Node::ptr(a), nullptr);
}

Expr binary(Op op, const Expr& a, const Expr& b) {
    return Node::make(op, 0, 0.0, Node::ptr(a), Node::ptr(b));
}

}  // namespace

int Chart::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

ChartPtr make_chart(std::vector<std::string> names,
                    std::vector<std::pair<double, double>> domain) {
    if (names.empty()) throw DomainError("chart needs at least one coordinate");
    if (names.size() != domain.size())
        throw DomainError("chart: one interval per coordinate required");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& n = names[i];
        bool ok = !n.empty() && std::isalpha(static_cast<unsigned char>(n[0]));
        for (char ch : n) ok = ok && (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_');
        if (!ok) throw DomainError("chart: invalid coordinate name '" + n + "'");
        if (reserved_names().count(n)) throw DomainError("chart: reserved name '" + n + "'");
        if (!seen.insert(n).second) throw DomainError("chart: duplicate coordinate '" + n + "'");
        if (!(domain[i].first <= domain[i].second))
            throw DomainError("chart: empty interval for '" + n + "'");
    }
    auto c = std::make_shared<Chart>();
    c->names = std::move(names);
    c->domain = std::move(domain);
    return c;
}

ChartPtr make_chart(std::vector<std::string> names, double lo, double hi) {
    std::vector<std::pair<double, double>> dom(names.size(), {lo, hi});
    return make_chart(std::move(names), std::move(dom));
}

// ---- construction with constant folding -------------------------------------

Expr::Expr() : Expr(constant(0.0)) {}
Expr::Expr(double c) : Expr(constant(c)) {}
Expr Expr::var(int slot) { return Node::make(Op::Var, slot, 0.0, nullptr, nullptr); }

Expr::Op Expr::op() const { return node_->op; }
bool Expr::is_const() const { return node_->op == Op::Const; }
bool Expr::is_zero() const { return is_const() && node_->c == 0.0; }
bool Expr::is_one() const { return is_const() && node_->c == 1.0; }
double Expr::const_value() const { return node_->c; }

std::size_t Expr::node_count() const {
    std::unordered_map<const Node*, bool> seen;
    std::vector<const Node*> stack{node_.get()};
    while (!stack.empty()) {
        const Node* n = stack.back();
        stack.pop_back();
        if (!n || !seen.emplace(n, true).second) continue;
        stack.push_back(n->a.get());
        stack.push_back(n->b.get());
    }
    return seen.size();
}

Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_const() && b.is_const()) return constant(a.const_value() + b.const_value());
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    return binary(Op::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
    if (a.is_const() && b.is_const()) return constant(a.const_value() - b.const_value());
    if (b.is_zero()) return a;
    if (a.is_zero()) return -b;
    return binary(Op::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_const() && b.is_const()) return constant(a.const_value() * b.const_value());
    if (a.is_zero() || b.is_zero()) return constant(0.0);
    if (a.is_one()) return b;
    if (b.is_one()) return a;
    if (a.is_const() && a.const_value() == -1.0) return -b;
    if (b.is_const() && b.const_value() == -1.0) return -a;
    return binary(Op::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
    if (b.is_zero()) throw DomainError("division by the constant zero");
    if (a.is_const() && b.is_const()) return constant(a.const_value() / b.const_value());
    if (a.is_zero()) return constant(0.0);
    if (b.is_one()) return a;
    return binary(Op::Div, a, b);
}

Expr operator-(const Expr& a) {
    if (a.is_const()) return constant(-a.const_value());
    if (a.op() == Op::Neg) return Node::wrap(a.raw()->a);
    return unary(Op::Neg, a);
}

Expr Expr::pow(int n) const {
    if (n == 0) return constant(1.0);
    if (n == 1) return *this;
    if (is_const()) return constant(std::pow(const_value(), n));
    return Node::make(Op::Pow, n, 0.0, node_, nullptr);
}

Expr sin(const Expr& a) {
    if (a.is_const()) return constant(std::sin(a.const_value()));
    return unary(Op::Sin, a);
}

Expr cos(const Expr& a) {
    if (a.is_const()) return constant(std::cos(a.const_value()));
    return unary(Op::Cos, a);
}

Expr exp(const Expr& a) {
    if (a.is_const()) return constant(std::exp(a.const_value()));
    return unary(Op::Exp, a);
}

// ---- differentiation ---------------------------------------------------------

namespace {

struct Differ {
    int slot;
    std::unordered_map<const Node*, Expr> memo;  // shared subtrees differentiate once

    Expr go(const std::shared_ptr<const Node>& n) {
        auto it = memo.find(n.get());
        if (it != memo.end()) return it->second;
        Expr r = compute(n);
        memo.emplace(n.get(), r);
        return r;
    }

    Expr compute(const std::shared_ptr<const Node>& n) {
        Expr a = n->a ? Node::wrap(n->a) : Expr();
        Expr b = n->b ? Node::wrap(n->b) : Expr();
        switch (n->op) {
            case Op::Const: return Expr(0.0);
            case Op::Var: return Expr(n->k == slot ? 1.0 : 0.0);
            case Op::Add: return go(n->a) + go(n->b);
            case Op::Sub: return go(n->a) - go(n->b);
            case Op::Mul: return go(n->a) * b + a * go(n->b);
            case Op::Div: {
                Expr da = go(n->a), db = go(n->b);
                if (db.is_zero()) return da / b;
                return (da * b - a * db) / b.pow(2);
            }
            case Op::Neg: return -go(n->a);
            case Op::Pow: return Expr(static_cast<double>(n->k)) * a.pow(n->k - 1) * go(n->a);
            case Op::Sin: return cos(a) * go(n->a);
            case Op::Cos: return -(sin(a) * go(n->a));
            case Op::Exp: return Node::wrap(n) * go(n->a);
        }
        return Expr(0.0);
    }
};

struct Substituter {
    const std::vector<Expr>& by_slot;
    std::unordered_map<const Node*, Expr> memo;

    Expr go(const std::shared_ptr<const Node>& n) {
        auto it = memo.find(n.get());
        if (it != memo.end()) return it->second;
        Expr r = compute(n);
        memo.emplace(n.get(), r);
        return r;
    }

    Expr compute(const std::shared_ptr<const Node>& n) {
        switch (n->op) {
            case Op::Const: return Node::wrap(n);
            case Op::Var:
                if (n->k < 0 || static_cast<std::size_t>(n->k) >= by_slot.size())
                    throw DomainError("substitution does not cover slot " + std::to_string(n->k));
                return by_slot[static_cast<std::size_t>(n->k)];
            case Op::Add: return go(n->a) + go(n->b);
            case Op::Sub: return go(n->a) - go(n->b);
            case Op::Mul: return go(n->a) * go(n->b);
            case Op::Div: return go(n->a) / go(n->b);
            case Op::Neg: return -go(n->a);
            case Op::Pow: return go(n->a).pow(n->k);
            case Op::Sin: return sin(go(n->a));
            case Op::Cos: return cos(go(n->a));
            case Op::Exp: return exp(go(n->a));
        }
        return Expr(0.0);
    }
};

double eval_node(const Node* n, const double* x) {
    switch (n->op) {
        case Op::Const: return n->c;
        case Op::Var: return x[n->k];
        case Op::Add: return eval_node(n->a.get(), x) + eval_node(n->b.get(), x);
        case Op::Sub: return eval_node(n->a.get(), x) - eval_node(n->b.get(), x);
        case Op::Mul: return eval_node(n->a.get(), x) * eval_node(n->b.get(), x);
        case Op::Div: {
            double den = eval_node(n->b.get(), x);
            if (den == 0.0) throw DomainError("division by zero during evaluation");
            return eval_node(n->a.get(), x) / den;
        }
        case Op::Neg: return -eval_node(n->a.get(), x);
        case Op::Pow: {
            double v = eval_node(n->a.get(), x);
            if (n->k < 0 && v == 0.0) throw DomainError("negative power of zero");
            return std::pow(v, n->k);
        }
        case Op::Sin: return std::sin(eval_node(n->a.get(), x));
        case Op::Cos: return std::cos(eval_node(n->a.get(), x));
        case Op::Exp: return std::exp(eval_node(n->a.get(), x));
    }
    return 0.0;
}

// Precedence: 1 sums, 2 products, 3 unary minus, 4 powers, 5 atoms.
int prec(const Node* n) {
    switch (n->op) {
        case Op::Const: return n->c < 0 || std::signbit(n->c) ? 3 : 5;
        case Op::Var: return 5;
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

std::string number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void print(const Node* n, const std::vector<std::string>& names, int need, std::string& out) {
    bool paren = prec(n) < need;
    if (paren) out += '(';
    switch (n->op) {
        case Op::Const:
            if (std::signbit(n->c)) out += "-" + number(-n->c);
            else out += number(n->c);
            break;
        case Op::Var: out += names.at(static_cast<std::size_t>(n->k)); break;
        case Op::Add:
        case Op::Sub:
            print(n->a.get(), names, 1, out);
            out += n->op == Op::Add ? " + " : " - ";
            print(n->b.get(), names, 2, out);
            break;
        case Op::Mul:
        case Op::Div:
            print(n->a.get(), names, 2, out);
            out += n->op == Op::Mul ? "*" : "/";
            print(n->b.get(), names, 3, out);
            break;
        case Op::Neg:
            out += '-';
            print(n->a.get(), names, 4, out);
            break;
        case Op::Pow:
            print(n->a.get(), names, 5, out);
            out += "^" + std::to_string(n->k);
            break;
        case Op::Sin:
        case Op::Cos:
        case Op::Exp:
            out += n->op == Op::Sin ? "sin(" : n->op == Op::Cos ? "cos(" : "exp(";
            print(n->a.get(), names, 0, out);
            out += ')';
            break;
    }
    if (paren) out += ')';
}

}  // namespace

// ---- tape ------------------------------------------------------------------------

namespace {

struct InsKey {
    Op op;
    int k;
    double c;
    std::uint32_t a, b;
    bool operator==(const InsKey& o) const {
        return op == o.op && k == o.k && std::memcmp(&c, &o.c, sizeof c) == 0 && a == o.a && b == o.b;
    }
};

struct InsHash {
    std::size_t operator()(const InsKey& k) const {
        std::uint64_t bits;
        std::memcpy(&bits, &k.c, sizeof bits);
        std::size_t h = static_cast<std::size_t>(k.op) * 0x9e3779b97f4a7c15ULL;
        h ^= std::hash<std::uint64_t>()(bits) + 0x9e3779b9 + (h << 6) + (h >> 2);
        h ^= std::hash<std::uint64_t>()((static_cast<std::uint64_t>(k.a) << 32) | k.b) + (h << 6) + (h >> 2);
        h ^= std::hash<int>()(k.k) + (h << 6) + (h >> 2);
        return h;
    }
};

}  // namespace

Tape::Tape(const std::vector<Expr>& exprs) {
    std::unordered_map<const Node*, std::uint32_t> slot;
    std::unordered_map<InsKey, std::uint32_t, InsHash> cse;
    // Iterative post-order so deep sums do not exhaust the stack.
    for (const auto& e : exprs) {
        std::vector<std::pair<const Node*, bool>> stack{{e.raw(), false}};
        while (!stack.empty()) {
            auto [n, expanded] = stack.back();
            stack.pop_back();
            if (slot.count(n)) continue;
            if (!expanded) {
                stack.push_back({n, true});
                if (n->b) stack.push_back({n->b.get(), false});
                if (n->a) stack.push_back({n->a.get(), false});
                continue;
            }
            InsKey key{n->op, n->k, n->c, n->a ? slot.at(n->a.get()) : 0u, n->b ? slot.at(n->b.get()) : 0u};
            auto it = cse.find(key);
            if (it == cse.end()) {
                auto id = static_cast<std::uint32_t>(ins_.size());
                ins_.push_back({key.op, key.k, key.c, key.a, key.b});
                it = cse.emplace(key, id).first;
            }
            slot.emplace(n, it->second);
        }
        outs_.push_back(slot.at(e.raw()));
    }
}

void Tape::run(const double* x, double* out, std::vector<double>& v) const {
    v.resize(ins_.size());
    for (std::size_t i = 0; i < ins_.size(); ++i) {
        const Ins& in = ins_[i];
        switch (in.op) {
            case Op::Const: v[i] = in.c; break;
            case Op::Var: v[i] = x[in.k]; break;
            case Op::Add: v[i] = v[in.a] + v[in.b]; break;
            case Op::Sub: v[i] = v[in.a] - v[in.b]; break;
            case Op::Mul: v[i] = v[in.a] * v[in.b]; break;
            case Op::Div:
                if (v[in.b] == 0.0) throw DomainError("division by zero during evaluation");
                v[i] = v[in.a] / v[in.b];
                break;
            case Op::Neg: v[i] = -v[in.a]; break;
            case Op::Pow:
                if (in.k < 0 && v[in.a] == 0.0) throw DomainError("negative power of zero");
                v[i] = std::pow(v[in.a], in.k);
                break;
            case Op::Sin: v[i] = std::sin(v[in.a]); break;
            case Op::Cos: v[i] = std::cos(v[in.a]); break;
            case Op::Exp: v[i] = std::exp(v[in.a]); break;
        }
    }
    for (std::size_t k = 0; k < outs_.size(); ++k) out[k] = v[outs_[k]];
}

Expr Expr::diff(int slot) const {
    Differ d{slot, {}};
    return d.go(node_);
}

Expr Expr::substitute(const std::vector<Expr>& by_slot) const {
    Substituter sub{by_slot, {}};
    return sub.go(node_);
}

double Expr::eval(const double* x) const {
    // Small trees recurse directly; shared DAGs go through a one-off tape.
    if (node_->op == Op::Const || node_->op == Op::Var) return eval_node(node_.get(), x);
    Tape t({*this});
    double out = 0.0;
    std::vector<double> scratch;
    t.run(x, &out, scratch);
    return out;
}

std::string Expr::str(const std::vector<std::string>& names) const {
    std::string out;
    print(node_.get(), names, 0, out);
    return out;
}

// ---- parser ------------------------------------------------------------------

namespace {

class Parser {
public:
    Parser(std::string_view s, const std::vector<std::string>& names) : s_(s), names_(names) {}

    Expr parse() {
        Expr e = expr();
        skip();
        if (pos_ != s_.size()) fail({"+", "-", "*", "/", "^", "end of input"});
        return e;
    }

private:
    std::string_view s_;
    const std::vector<std::string>& names_;
    std::size_t pos_ = 0;

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool peek(char c) {
        skip();
        return pos_ < s_.size() && s_[pos_] == c;
    }
    [[noreturn]] void fail(std::vector<std::string> expected) {
        std::string msg = "syntax error at position " + std::to_string(pos_) + ": expected ";
        for (std::size_t i = 0; i < expected.size(); ++i)
            msg += (i ? ", " : "") + expected[i];
        if (pos_ < s_.size()) msg += std::string(" but found '") + s_[pos_] + "'";
        else msg += " but reached end of input";
        throw SyntaxError(pos_, std::move(expected), msg);
    }
    void expect(char c) {
        if (!peek(c)) fail({std::string(1, c)});
        ++pos_;
    }

    Expr expr() {
        Expr e = term();
        for (;;) {
            if (peek('+')) { ++pos_; e = e + term(); }
            else if (peek('-')) { ++pos_; e = e - term(); }
            else return e;
        }
    }

    Expr term() {
        Expr e = factor();
        for (;;) {
            if (peek('*')) { ++pos_; e = e * factor(); }
            else if (peek('/')) {
                ++pos_;
                std::size_t at = pos_;
                Expr d = factor();
                if (d.is_zero()) {
                    pos_ = at;
                    throw DomainError("division by zero literal at position " + std::to_string(at));
                }
                e = e / d;
            }
            else return e;
        }
    }

    Expr factor() {
        if (peek('-')) {
            ++pos_;
            return -factor_core();
        }
        return factor_core();
    }

    Expr factor_core() {
        Expr b = base();
        if (peek('^')) {
            ++pos_;
            skip();
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (start == pos_) fail({"integer exponent"});
            int n = std::stoi(std::string(s_.substr(start, pos_ - start)));
            b = b.pow(n);
        }
        return b;
    }

    Expr base() {
        skip();
        if (pos_ >= s_.size()) fail({"number", "identifier", "("});
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return num();
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            std::string id(s_.substr(start, pos_ - start));
            if (id == "pi") return Expr(std::numbers::pi);
            if (id == "sin" || id == "cos" || id == "exp") {
                expect('(');
                Expr arg = expr();
                expect(')');
                return id == "sin" ? sin(arg) : id == "cos" ? cos(arg) : exp(arg);
            }
            for (std::size_t i = 0; i < names_.size(); ++i)
                if (names_[i] == id) return Expr::var(static_cast<int>(i));
            throw UnknownSymbol("unknown symbol '" + id + "' at position " + std::to_string(start));
        }
        fail({"number", "identifier", "("});
    }

    Expr num() {
        std::size_t start = pos_;
        auto digits = [&] {
            std::size_t d = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            return pos_ - d;
        };
        std::size_t whole = digits();
        std::size_t frac = 0;
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            frac = digits();
        }
        if (whole + frac == 0) fail({"digit"});
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (digits() == 0) pos_ = save;  // not an exponent; leave 'e' for the caller
        }
        return Expr(std::stod(std::string(s_.substr(start, pos_ - start))));
    }
};

}  // namespace

Expr parse_expr(std::string_view text, const std::vector<std::string>& names) {
    return Parser(text, names).parse();
}

// ---- chart-bound API ----------------------------------------------------------

ScalarField parse_expression(std::string_view text, const ChartPtr& chart) {
    return ScalarField(chart, parse_expr(text, chart->names));
}

ScalarField ScalarField::differentiate(std::string_view coord) const {
    int i = chart_->index_of(coord);
    if (i < 0) throw UnknownSymbol("'" + std::string(coord) + "' is not a coordinate of the chart");
    return ScalarField(chart_, expr_.diff(i));
}

double ScalarField::evaluate(const Point& p) const {
    if (p.chart != chart_ && (!p.chart || p.chart->names != chart_->names))
        throw ChartMismatch("point and field live on different charts");
    if (p.values.size() != chart_->dim()) throw DomainError("point has wrong dimension");
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const auto& [lo, hi] = chart_->domain[i];
        if (!(p.values[i] >= lo && p.values[i] <= hi))
            throw DomainError("point outside domain in coordinate '" + chart_->names[i] + "'");
    }
    return expr_.eval(p.values.data());
}

ScalarField differentiate(const ScalarField& f, std::string_view coord) {
    return f.differentiate(coord);
}

double evaluate(const ScalarField& f, const Point& p) { return f.evaluate(p); }

}  // namespace fpk
