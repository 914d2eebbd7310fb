#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "bilinear/error.hpp"
#include "bilinear/trig_field.hpp"

namespace bilinear {

// Field expressions for initial conditions and phases:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | primary
//   primary := number | 'pi' | '(' expr ')' | ('sin' | 'cos') '(' [int ['*']] 'x' ')' | 'exp' '(' expr ')'
// Frequencies are integers, so every expression is 2 pi periodic. The value
// is sampled on an oversampled grid and projected to |k| <= K.
class FieldExpression {
public:
    explicit FieldExpression(std::string text) : src_(std::move(text)) {
        pos_ = 0;
        root_ = expr();
        skip();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    }

    double operator()(double x) const { return eval(*root_, x); }
    const std::string& text() const { return src_; }

    FourierField field(int K, int N = 0) const {
        const int M = detail::oversampled_size(std::max(N, 2 * K + 2), std::max(K, 16));
        std::vector<double> g(M);
        for (int j = 0; j < M; ++j) {
            g[j] = (*this)(two_pi * j / M);
            if (!std::isfinite(g[j])) fail("value is not finite at x = " + std::to_string(two_pi * j / M));
        }
        return FourierField::from_grid(g, K, std::max(N, 2 * K + 2));
    }

private:
    struct Node {
        char op = 0;  // 'n' number, 's' sin, 'c' cos, 'e' exp, 'u' negate, or + - * /
        double value = 0.0;
        int freq = 0;
        std::unique_ptr<Node> a, b;
    };
    using P = std::unique_ptr<Node>;

    std::string src_;
    std::size_t pos_ = 0;
    P root_;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression '" + src_ + "': " + what);
    }
    void skip() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void need(char c) {
        if (!eat(c)) fail(std::string("expected '") + c + "' at offset " + std::to_string(pos_));
    }
    static P make(char op, P a = nullptr, P b = nullptr) {
        auto n = std::make_unique<Node>();
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    P expr() {
        P left = term();
        for (;;) {
            if (eat('+')) left = make('+', std::move(left), term());
            else if (eat('-')) left = make('-', std::move(left), term());
            else return left;
        }
    }
    P term() {
        P left = unary();
        for (;;) {
            if (eat('*')) left = make('*', std::move(left), unary());
            else if (eat('/')) left = make('/', std::move(left), unary());
            else return left;
        }
    }
    P unary() {
        if (eat('-')) return make('u', unary());
        if (eat('+')) return unary();
        return primary();
    }
    P primary() {
        skip();
        if (pos_ >= src_.size()) fail("unexpected end");
        if (eat('(')) {
            P e = expr();
            need(')');
            return e;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(src_.substr(pos_), &used);
            } catch (const std::exception&) {
                fail("bad number at offset " + std::to_string(pos_));
            }
            pos_ += used;
            auto n = make('n');
            n->value = v;
            return n;
        }
        std::size_t b = pos_;
        while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        const std::string name = src_.substr(b, pos_ - b);
        if (name == "pi") {
            auto n = make('n');
            n->value = two_pi / 2.0;
            return n;
        }
        if (name == "x") fail("a bare x is not periodic; use sin(kx) or cos(kx)");
        if (name == "sin" || name == "cos") {
            need('(');
            auto n = make(name == "sin" ? 's' : 'c');
            n->freq = frequency();
            need(')');
            return n;
        }
        if (name == "exp") {
            need('(');
            P e = make('e', expr());
            need(')');
            return e;
        }
        fail(name.empty() ? "unexpected '" + std::string(1, c) + "'" : "unknown name '" + name + "'");
    }
    // [int ['*']] 'x'
    int frequency() {
        skip();
        int k = 1;
        if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            std::size_t b = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            k = std::stoi(src_.substr(b, pos_ - b));
            eat('*');
        }
        skip();
        if (pos_ >= src_.size() || src_[pos_] != 'x') fail("sin and cos take an argument of the form kx");
        ++pos_;
        return k;
    }

    static double eval(const Node& n, double x) {
        switch (n.op) {
            case 'n': return n.value;
            case 's': return std::sin(n.freq * x);
            case 'c': return std::cos(n.freq * x);
            case 'e': return std::exp(eval(*n.a, x));
            case 'u': return -eval(*n.a, x);
            case '+': return eval(*n.a, x) + eval(*n.b, x);
            case '-': return eval(*n.a, x) - eval(*n.b, x);
            case '*': return eval(*n.a, x) * eval(*n.b, x);
            default: return eval(*n.a, x) / eval(*n.b, x);
        }
    }
};

inline FourierField parse_field(const std::string& text, int K, int N = 0) {
    return FieldExpression(text).field(K, N);
}

}  // namespace bilinear
