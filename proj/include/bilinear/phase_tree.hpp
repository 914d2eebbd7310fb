#pragma once

#include <array>
#include <cctype>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "bilinear/error.hpp"
#include "bilinear/trig_poly.hpp"

namespace bilinear {

// Symbolic witness for an element of H_j.
//   Generator:  l0 + l1 cos x + l2 sin x
//   Quartic:    phi_0 - sum_k w_k (phi_k')^4
// with phi_0 the affine subtree and (w_k, phi_k) the weighted children. The
// weights are signed rationals; a negative weight is an algebraic device
// that physical synthesis has to avoid (see realize() in saturation.hpp).
class PhaseTree {
public:
    enum class Kind { Generator, Quartic };

    struct Child {
        Rational weight;
        std::shared_ptr<const PhaseTree> tree;
    };

    PhaseTree() : lambda_{0, 0, 0} {}

    static PhaseTree generator(const Rational& c0, const Rational& c1, const Rational& s1) {
        PhaseTree t;
        t.lambda_ = {c0, c1, s1};
        return t;
    }
    static PhaseTree zero() { return generator(0, 0, 0); }

    // A node without children collapses to its affine part.
    static PhaseTree quartic(const PhaseTree& affine, std::vector<Child> children) {
        std::vector<Child> kept;
        for (auto& c : children)
            if (c.weight != 0 && !c.tree->is_affine_constant()) kept.push_back(std::move(c));
        if (kept.empty()) return affine;
        PhaseTree t;
        t.kind_ = Kind::Quartic;
        t.affine_ = std::make_shared<const PhaseTree>(affine);
        t.children_ = std::move(kept);
        int d = t.affine_->depth();
        for (const auto& c : t.children_) d = std::max(d, c.tree->depth() + 1);
        t.depth_ = std::max(d, 1);
        return t;
    }

    Kind kind() const { return kind_; }
    const std::array<Rational, 3>& lambda() const { return lambda_; }
    const PhaseTree& affine() const { return *affine_; }
    const std::vector<Child>& children() const { return children_; }

    int depth() const { return depth_; }

    std::size_t node_count() const {
        if (kind_ == Kind::Generator) return 1;
        std::size_t n = 1 + affine_->node_count();
        for (const auto& c : children_) n += c.tree->node_count();
        return n;
    }

    // Subtrees are shared between many parents (the ladder reuses them), so
    // both the value and (phi')^4 are computed once per node.
    const TrigPolynomial& evaluate() const {
        std::call_once(memo_->value_once, [this] {
            if (kind_ == Kind::Generator) {
                TrigPolynomial p = TrigPolynomial::constant(lambda_[0]);
                p.add_cos(1, lambda_[1]);
                p.add_sin(1, lambda_[2]);
                memo_->value = p;
                return;
            }
            TrigPolynomial p = affine_->evaluate();
            for (const auto& c : children_) p -= c.weight * c.tree->derivative_quartic();
            memo_->value = p;
        });
        return memo_->value;
    }

    const TrigPolynomial& derivative_quartic() const {
        std::call_once(memo_->quartic_once, [this] { memo_->quartic = quartic_of_derivative(evaluate()); });
        return memo_->quartic;
    }

    bool is_zero_generator() const {
        return kind_ == Kind::Generator && lambda_[0] == 0 && lambda_[1] == 0 && lambda_[2] == 0;
    }

    std::string to_sexpr() const {
        if (kind_ == Kind::Generator)
            return "(gen " + lambda_[0].str() + " " + lambda_[1].str() + " " + lambda_[2].str() + ")";
        std::string s = "(quartic " + affine_->to_sexpr();
        for (const auto& c : children_) s += " (" + c.weight.str() + " " + c.tree->to_sexpr() + ")";
        return s + ")";
    }

    static PhaseTree parse(const std::string& text) {
        std::size_t pos = 0;
        PhaseTree t = parse_node(text, pos);
        skip_ws(text, pos);
        if (pos != text.size()) throw ConfigError("trailing text after phase tree");
        return t;
    }

private:
    // Generators of the form l0 (no cos/sin part) have zero derivative, so
    // a child built from them contributes nothing.
    bool is_affine_constant() const {
        return kind_ == Kind::Generator && lambda_[1] == 0 && lambda_[2] == 0;
    }

    static void skip_ws(const std::string& s, std::size_t& pos) {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    static void expect(const std::string& s, std::size_t& pos, char c) {
        skip_ws(s, pos);
        if (pos >= s.size() || s[pos] != c)
            throw ConfigError(std::string("phase tree: expected '") + c + "' at offset " + std::to_string(pos));
        ++pos;
    }
    static std::string atom(const std::string& s, std::size_t& pos) {
        skip_ws(s, pos);
        const std::size_t b = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '(' && s[pos] != ')')
            ++pos;
        if (b == pos) throw ConfigError("phase tree: expected an atom at offset " + std::to_string(b));
        return s.substr(b, pos - b);
    }
    static PhaseTree parse_node(const std::string& s, std::size_t& pos) {
        expect(s, pos, '(');
        const std::string head = atom(s, pos);
        if (head == "gen") {
            const Rational a = parse_rational(atom(s, pos));
            const Rational b = parse_rational(atom(s, pos));
            const Rational c = parse_rational(atom(s, pos));
            expect(s, pos, ')');
            return generator(a, b, c);
        }
        if (head != "quartic") throw ConfigError("phase tree: unknown node '" + head + "'");
        const PhaseTree affine = parse_node(s, pos);
        std::vector<Child> kids;
        for (;;) {
            skip_ws(s, pos);
            if (pos < s.size() && s[pos] == ')') {
                ++pos;
                break;
            }
            expect(s, pos, '(');
            const Rational w = parse_rational(atom(s, pos));
            auto sub = std::make_shared<const PhaseTree>(parse_node(s, pos));
            expect(s, pos, ')');
            kids.push_back({w, sub});
        }
        return quartic(affine, std::move(kids));
    }

    struct Memo {
        std::once_flag value_once, quartic_once;
        TrigPolynomial value, quartic;
    };

    Kind kind_ = Kind::Generator;
    std::shared_ptr<Memo> memo_ = std::make_shared<Memo>();
    std::array<Rational, 3> lambda_;
    std::shared_ptr<const PhaseTree> affine_;
    std::vector<Child> children_;
    int depth_ = 0;
};

inline PhaseTree scale(const PhaseTree& t, const Rational& r) {
    if (r == 0) return PhaseTree::zero();
    if (t.kind() == PhaseTree::Kind::Generator) {
        const auto& l = t.lambda();
        return PhaseTree::generator(r * l[0], r * l[1], r * l[2]);
    }
    auto kids = t.children();
    for (auto& c : kids) c.weight *= r;
    return PhaseTree::quartic(scale(t.affine(), r), std::move(kids));
}

// Tree evaluating to a + b. Same-depth quartic nodes merge (affine parts
// added, children concatenated); a shallower tree goes into the affine part
// of the deeper one, which keeps the depth at max(depth a, depth b).
inline PhaseTree combine(const PhaseTree& a, const PhaseTree& b) {
    using K = PhaseTree::Kind;
    if (a.kind() == K::Generator && b.kind() == K::Generator) {
        const auto& x = a.lambda();
        const auto& y = b.lambda();
        return PhaseTree::generator(x[0] + y[0], x[1] + y[1], x[2] + y[2]);
    }
    if (a.depth() < b.depth()) return combine(b, a);
    if (a.depth() > b.depth()) return PhaseTree::quartic(combine(a.affine(), b), a.children());
    auto kids = a.children();
    kids.insert(kids.end(), b.children().begin(), b.children().end());
    return PhaseTree::quartic(combine(a.affine(), b.affine()), std::move(kids));
}

inline PhaseTree generator_of(const TrigPolynomial& p) {
    if (p.max_frequency() > 1) throw ConfigError("generator_of: frequency above 1");
    return PhaseTree::generator(p.cos_coeff(0), p.cos_coeff(1), p.sin_coeff(1));
}

}  // namespace bilinear
