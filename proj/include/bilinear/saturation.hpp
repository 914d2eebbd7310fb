#pragma once

#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bilinear/error.hpp"
#include "bilinear/phase_tree.hpp"
#include "bilinear/trig_poly.hpp"

namespace bilinear {

// Coordinates: 0 -> 1, 2k-1 -> cos kx, 2k -> sin kx.
inline std::vector<Rational> coordinates(const TrigPolynomial& p, int cap) {
    if (p.max_frequency() > cap) throw BudgetExceeded("frequency " + std::to_string(p.max_frequency()) +
                                                      " above the cap " + std::to_string(cap));
    std::vector<Rational> v(2 * cap + 1);
    for (const auto& [k, c] : p.terms()) {
        if (k == 0) v[0] = c.a;
        else {
            v[2 * k - 1] = c.a;
            v[2 * k] = c.b;
        }
    }
    return v;
}

inline TrigPolynomial from_coordinates(const std::vector<Rational>& v) {
    TrigPolynomial p = TrigPolynomial::constant(v[0]);
    for (std::size_t i = 1; i < v.size(); ++i) {
        const int k = static_cast<int>((i + 1) / 2);
        if (i % 2) p.add_cos(k, v[i]);
        else p.add_sin(k, v[i]);
    }
    return p;
}

// Subspace of trigonometric polynomials up to a frequency cap, kept in
// reduced row echelon form over Q.
class SpanBasis {
public:
    explicit SpanBasis(int cap = 1) : cap_(cap) {}

    static SpanBasis H0(int cap = 1) {
        SpanBasis b(std::max(cap, 1));
        b.insert(TrigPolynomial::constant(1));
        b.insert(TrigPolynomial::cos_k(1));
        b.insert(TrigPolynomial::sin_k(1));
        return b;
    }

    int cap() const { return cap_; }
    std::size_t size() const { return rows_.size(); }

    SpanBasis with_cap(int cap) const {
        if (cap < cap_) throw ConfigError("SpanBasis: cannot lower the cap");
        SpanBasis b(cap);
        for (const auto& e : elements()) b.insert(e);
        return b;
    }

    // Leftover after eliminating against the basis (zero iff p is in the span).
    std::vector<Rational> reduce(std::vector<Rational> v) const {
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const Rational f = v[pivots_[r]];
            if (f == 0) continue;
            for (std::size_t j = 0; j < v.size(); ++j)
                if (rows_[r][j] != 0) v[j] -= f * rows_[r][j];
        }
        return v;
    }

    // Returns true when p enlarged the span.
    bool insert(const TrigPolynomial& p) {
        auto v = reduce(coordinates(p, cap_));
        std::size_t piv = 0;
        while (piv < v.size() && v[piv] == 0) ++piv;
        if (piv == v.size()) return false;
        const Rational inv = Rational(1) / v[piv];
        for (auto& x : v) x *= inv;
        for (auto& row : rows_) {
            const Rational f = row[piv];
            if (f == 0) continue;
            for (std::size_t j = 0; j < v.size(); ++j) row[j] -= f * v[j];
        }
        // keep rows ordered by pivot column
        std::size_t at = 0;
        while (at < pivots_.size() && pivots_[at] < static_cast<int>(piv)) ++at;
        rows_.insert(rows_.begin() + at, std::move(v));
        pivots_.insert(pivots_.begin() + at, static_cast<int>(piv));
        return true;
    }

    std::vector<TrigPolynomial> elements() const {
        std::vector<TrigPolynomial> out;
        for (const auto& r : rows_) out.push_back(from_coordinates(r));
        return out;
    }

    bool contains(const SpanBasis& other) const {
        for (const auto& e : other.elements()) {
            if (e.max_frequency() > cap_) return false;
            for (const auto& x : reduce(coordinates(e, cap_)))
                if (x != 0) return false;
        }
        return true;
    }

private:
    int cap_;
    std::vector<std::vector<Rational>> rows_;
    std::vector<int> pivots_;
};

struct Membership {
    bool member = false;
    TrigPolynomial residual;
};

inline Membership membership(const TrigPolynomial& p, const SpanBasis& b) {
    if (p.max_frequency() > b.cap()) return {false, p};
    auto r = from_coordinates(b.reduce(coordinates(p, b.cap())));
    return {r.is_zero(), r};
}

// One step of the chain: G plus -(e')^4 for every basis element e and
// -((e_i +- e_j)')^4 for every pair.
inline SpanBasis generate_next(const SpanBasis& G, int cap, std::size_t max_terms = 4096) {
    if (G.size() == 0) return SpanBasis(cap);
    SpanBasis out = G.with_cap(std::max(cap, G.cap()));
    const auto e = G.elements();
    auto add = [&](const TrigPolynomial& phi) {
        const auto q = -quartic_of_derivative(phi);
        if (q.max_frequency() > out.cap())
            throw BudgetExceeded("generate_next: frequency " + std::to_string(q.max_frequency()) +
                                 " exceeds cap " + std::to_string(out.cap()));
        out.insert(q);
        if (out.size() > max_terms) throw BudgetExceeded("generate_next: basis larger than max_terms");
    };
    for (std::size_t i = 0; i < e.size(); ++i) add(e[i]);
    for (std::size_t i = 0; i < e.size(); ++i)
        for (std::size_t j = i + 1; j < e.size(); ++j) {
            add(e[i] + e[j]);
            add(e[i] - e[j]);
        }
    return out;
}

// Tree for (phi')^2 one level above phi:
//   a^2 b^2 = [(a + b)^4 + (a - b)^4 - 2 a^4 - 2 b^4] / 12
// with b = sin x and b = cos x, summed using sin^2 + cos^2 = 1.
inline PhaseTree expand_square_to_quartics(const PhaseTree& phi) {
    if (derivative(phi.evaluate()).is_zero()) return PhaseTree::zero();
    const Rational m12(-1, 12), p6(1, 6);
    std::vector<PhaseTree::Child> kids;
    auto node = [](PhaseTree t) { return std::make_shared<const PhaseTree>(std::move(t)); };
    // partners with derivative sin x and cos x
    for (const auto& psi : {PhaseTree::generator(0, -1, 0), PhaseTree::generator(0, 0, 1)}) {
        kids.push_back({m12, node(combine(phi, psi))});
        kids.push_back({m12, node(combine(phi, scale(psi, -1)))});
        kids.push_back({p6, node(psi)});
    }
    kids.push_back({Rational(1, 3), node(phi)});
    return PhaseTree::quartic(PhaseTree::zero(), std::move(kids));
}

// Tree for phi1' phi2' = [((phi1 + phi2)')^2 - ((phi1 - phi2)')^2] / 4.
inline PhaseTree cross_product_tree(const PhaseTree& phi1, const PhaseTree& phi2) {
    const auto plus = expand_square_to_quartics(combine(phi1, phi2));
    const auto minus = expand_square_to_quartics(combine(phi1, scale(phi2, -1)));
    return combine(scale(plus, Rational(1, 4)), scale(minus, Rational(-1, 4)));
}

struct ModeWitness {
    int n = 0;
    PhaseTree cos_tree, sin_tree;
};

// Frequency ladder. Even n = 2m uses squares,
//   cos 2mx = 2 ((sin(mx)/m)')^2 - 1,   sin 2mx = 2 (-cos(mx)/m)' (sin(mx)/m)',
// odd n = a + 1 uses a cross product with a frequency-1 partner,
//   cos((a+1)x) = 2 cos(ax) cos x - cos((a-1)x),
//   sin((a+1)x) = 2 sin(ax) cos x - sin((a-1)x).
class ModeLadder {
public:
    explicit ModeLadder(int cap) : cap_(cap) {}

    const ModeWitness& get(int n) {
        if (n < 0) throw ConfigError("mode_ladder: negative frequency");
        if (n > cap_) throw BudgetExceeded("mode_ladder: n = " + std::to_string(n) + " above the cap");
        auto it = memo_.find(n);
        if (it != memo_.end()) return it->second;
        ModeWitness w;
        w.n = n;
        if (n == 0) {
            w.cos_tree = PhaseTree::generator(1, 0, 0);
            w.sin_tree = PhaseTree::zero();
        } else if (n == 1) {
            w.cos_tree = PhaseTree::generator(0, 1, 0);
            w.sin_tree = PhaseTree::generator(0, 0, 1);
        } else if (n % 2 == 0) {
            const int m = n / 2;
            const ModeWitness half = get(m);
            const Rational inv(1, m);
            const auto sin_over = scale(half.sin_tree, inv);    // derivative cos(mx)
            const auto mcos_over = scale(half.cos_tree, -inv);  // derivative sin(mx)
            w.cos_tree = combine(scale(expand_square_to_quartics(sin_over), 2), PhaseTree::generator(-1, 0, 0));
            w.sin_tree = scale(cross_product_tree(mcos_over, sin_over), 2);
        } else {
            const int a = n - 1;
            const ModeWitness top = get(a);
            const ModeWitness low = get(a - 1);
            const Rational inv(1, a);
            const auto sin_over = scale(top.sin_tree, inv);    // derivative cos(ax)
            const auto mcos_over = scale(top.cos_tree, -inv);  // derivative sin(ax)
            const auto sinx = PhaseTree::generator(0, 0, 1);  // derivative cos x
            w.cos_tree = combine(scale(cross_product_tree(sin_over, sinx), 2), scale(low.cos_tree, -1));
            w.sin_tree = combine(scale(cross_product_tree(mcos_over, sinx), 2), scale(low.sin_tree, -1));
        }
        if (w.cos_tree.evaluate() != TrigPolynomial::cos_k(n) ||
            (n > 0 && w.sin_tree.evaluate() != TrigPolynomial::sin_k(n)))
            throw CertificateFailed("mode_ladder: witness for n = " + std::to_string(n) + " does not evaluate exactly");
        return memo_.emplace(n, std::move(w)).first->second;
    }

private:
    int cap_;
    std::map<int, ModeWitness> memo_;
};

inline ModeWitness mode_ladder(int n, int cap) {
    if (n < 1) throw ConfigError("mode_ladder: n must be positive");
    ModeLadder l(cap);
    return l.get(n);
}

// CSV rows n,mode,depth,node_count for n = 1..n_max.
inline std::string derivation_table_csv(int n_max) {
    ModeLadder l(n_max);
    std::ostringstream os;
    os << "n,mode,depth,node_count\n";
    for (int n = 1; n <= n_max; ++n) {
        const auto& w = l.get(n);
        os << n << ",cos," << w.cos_tree.depth() << ',' << w.cos_tree.node_count() << '\n';
        os << n << ",sin," << w.sin_tree.depth() << ',' << w.sin_tree.node_count() << '\n';
    }
    return os.str();
}

// ---- exact linear programming ---------------------------------------------

// min c.w subject to A w = b, w >= 0, by the two-phase simplex method with
// Bland's rule over Q. Returns nothing when infeasible.
inline std::optional<std::vector<Rational>> simplex_min(const std::vector<std::vector<Rational>>& A,
                                                       const std::vector<Rational>& b,
                                                       const std::vector<Rational>& c) {
    const std::size_t m = A.size();
    const std::size_t n = c.size();
    const std::size_t cols = n + m;  // originals then artificials
    std::vector<std::vector<Rational>> T(m, std::vector<Rational>(cols + 1));
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
        const bool flip = b[i] < 0;
        for (std::size_t j = 0; j < n; ++j) T[i][j] = flip ? Rational(-A[i][j]) : A[i][j];
        T[i][n + i] = 1;
        T[i][cols] = flip ? Rational(-b[i]) : b[i];
        basis[i] = n + i;
    }
    auto pivot = [&](std::size_t r, std::size_t col) {
        const Rational inv = Rational(1) / T[r][col];
        for (auto& x : T[r]) x *= inv;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == r || T[i][col] == 0) continue;
            const Rational f = T[i][col];
            for (std::size_t j = 0; j <= cols; ++j)
                if (T[r][j] != 0) T[i][j] -= f * T[r][j];
        }
        basis[r] = col;
    };
    auto run = [&](const std::vector<Rational>& cost, std::size_t usable) {
        for (;;) {
            // reduced costs
            std::size_t enter = usable;
            for (std::size_t j = 0; j < usable && enter == usable; ++j) {
                Rational rc = cost[j];
                for (std::size_t i = 0; i < m; ++i) rc -= cost[basis[i]] * T[i][j];
                if (rc < 0) enter = j;
            }
            if (enter == usable) return true;
            std::size_t leave = m;
            Rational best;
            for (std::size_t i = 0; i < m; ++i) {
                if (T[i][enter] <= 0) continue;
                const Rational ratio = T[i][cols] / T[i][enter];
                if (leave == m || ratio < best || (ratio == best && basis[i] < basis[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave == m) return false;  // unbounded
            pivot(leave, enter);
        }
    };
    std::vector<Rational> phase1(cols, 0);
    for (std::size_t j = n; j < cols; ++j) phase1[j] = 1;
    run(phase1, cols);
    Rational infeas = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] >= n) infeas += T[i][cols];
    if (infeas != 0) return std::nullopt;
    // drive remaining zero-level artificials out of the basis where possible
    for (std::size_t i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        for (std::size_t j = 0; j < n; ++j)
            if (T[i][j] != 0) {
                pivot(i, j);
                break;
            }
    }
    std::vector<Rational> phase2(cols, 0);
    for (std::size_t j = 0; j < n; ++j) phase2[j] = c[j];
    if (!run(phase2, n)) return std::nullopt;
    std::vector<Rational> w(n, 0);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) w[basis[i]] = T[i][cols];
    return w;
}

// Primitive directions (alpha, beta), |alpha|, |beta| <= r, one per sign pair.
inline std::vector<std::pair<int, int>> primitive_directions(int r) {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a <= r; ++a)
        for (int b = -r; b <= r; ++b) {
            if (a == 0 && b <= 0) continue;
            if (std::gcd(a, std::abs(b)) != 1) continue;
            out.emplace_back(a, b);
        }
    return out;
}

// Rewrites g as affine + sum_i -w_i ((psi_i)')^4 with every w_i >= 0 and
// psi_i = alpha cos x + beta sin x, so that each quartic term can be driven
// by the conjugated dynamics (which only produce e^{-(psi')^4}). Supports g
// of frequency <= 2; higher frequencies would need nonnegative weights on
// deeper trees.
inline PhaseTree realize(const TrigPolynomial& g, int direction_radius = 3) {
    if (g.max_frequency() <= 1) return generator_of(g);
    if (g.max_frequency() > 2)
        throw BudgetExceeded("realize: positive-weight realization is implemented up to frequency 2");
    const auto dirs = primitive_directions(direction_radius);
    // constrained coordinates: cos 2x, sin 2x, cos 4x, sin 4x
    const int cap = 4;
    const std::vector<int> rows{3, 4, 7, 8};
    std::vector<std::vector<Rational>> A(rows.size(), std::vector<Rational>(dirs.size()));
    std::vector<Rational> cost(dirs.size());
    std::vector<TrigPolynomial> gens;
    for (std::size_t j = 0; j < dirs.size(); ++j) {
        const auto psi = TrigPolynomial::cos_k(1, dirs[j].first) + TrigPolynomial::sin_k(1, dirs[j].second);
        gens.push_back(psi);
        const auto q = coordinates(-quartic_of_derivative(psi), cap);
        for (std::size_t i = 0; i < rows.size(); ++i) A[i][j] = q[rows[i]];
        const Rational r2 = dirs[j].first * dirs[j].first + dirs[j].second * dirs[j].second;
        cost[j] = r2 * r2;
    }
    const auto gv = coordinates(g, cap);
    std::vector<Rational> b;
    for (int r : rows) b.push_back(gv[r]);
    const auto w = simplex_min(A, b, cost);
    if (!w) throw ToleranceNotMet("realize: no nonnegative quartic combination found", 0.0);
    TrigPolynomial rest = g;
    std::vector<PhaseTree::Child> kids;
    for (std::size_t j = 0; j < dirs.size(); ++j) {
        if ((*w)[j] == 0) continue;
        rest += (*w)[j] * quartic_of_derivative(gens[j]);
        kids.push_back({(*w)[j], std::make_shared<const PhaseTree>(generator_of(gens[j]))});
    }
    const auto tree = PhaseTree::quartic(generator_of(rest), std::move(kids));
    if (tree.evaluate() != g) throw CertificateFailed("realize: tree does not evaluate to the target");
    return tree;
}

// True when every quartic weight in the tree is nonnegative.
inline bool has_nonnegative_weights(const PhaseTree& t) {
    if (t.kind() == PhaseTree::Kind::Generator) return true;
    if (!has_nonnegative_weights(t.affine())) return false;
    for (const auto& c : t.children())
        if (c.weight < 0 || !has_nonnegative_weights(*c.tree)) return false;
    return true;
}

// Exact check of a witness against its target: the rational residual
// evaluate(t) - target, and membership of the target in the span of the
// top node's terms (affine part and each -(phi_k')^4), decided by
// elimination over Q.
struct WitnessCertificate {
    bool exact = false;
    bool member = false;
    TrigPolynomial residual;
};

inline WitnessCertificate certify_witness(const PhaseTree& t, const TrigPolynomial& target) {
    WitnessCertificate c;
    c.residual = t.evaluate() - target;
    c.exact = c.residual.is_zero();
    std::vector<TrigPolynomial> terms;
    if (t.kind() == PhaseTree::Kind::Generator) {
        terms = {TrigPolynomial::constant(1), TrigPolynomial::cos_k(1), TrigPolynomial::sin_k(1)};
    } else {
        terms.push_back(t.affine().evaluate());
        for (const auto& ch : t.children()) terms.push_back(quartic_of_derivative(ch.tree->evaluate()));
    }
    int cap = target.max_frequency();
    for (const auto& p : terms) cap = std::max(cap, p.max_frequency());
    SpanBasis span(std::max(cap, 1));
    for (const auto& p : terms) span.insert(p);
    c.member = membership(target, span).member;
    return c;
}

}  // namespace bilinear
