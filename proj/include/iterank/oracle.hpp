#pragma once

// Dense, deliberately naive reference implementations. They build every matrix from
// raw incidence (never from the sparse or implicit operators) so they can check them.

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "iterank/error.hpp"
#include "iterank/graph.hpp"
#include "iterank/phase2.hpp"

namespace iterank::oracle {

inline constexpr std::size_t kMaxSystemDim = 10'000;
inline constexpr std::size_t kMaxIncidenceItems = 50;

struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;  // row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    std::vector<double> operator*(std::span<const double> x) const {
        std::vector<double> y(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) y[r] += a[r * cols + c] * x[c];
        return y;
    }
};

/// Materializes any operator exposing rows()/cols()/for_each_in_column().
template <class Op>
DenseMatrix to_dense(const Op& op) {
    if (op.rows() * op.cols() > kMaxSystemDim * kMaxSystemDim) throw UsageError("operator too large to densify");
    DenseMatrix m(op.rows(), op.cols());
    for (std::size_t j = 0; j < op.cols(); ++j) op.for_each_in_column(j, [&](std::size_t r, double w) { m(r, j) = w; });
    return m;
}

/// Divides every non-empty column by its sum.
inline DenseMatrix column_normalized(DenseMatrix m) {
    for (std::size_t c = 0; c < m.cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) s += m(r, c);
        if (s > 0.0)
            for (std::size_t r = 0; r < m.rows; ++r) m(r, c) /= s;
    }
    return m;
}

inline DenseMatrix transposed(const DenseMatrix& m) {
    DenseMatrix t(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) t(c, r) = m(r, c);
    return t;
}

/// z = restart_rate * v + (1 - restart_rate) * X z, with X = [[0, top], [bottom, 0]].
struct DenseSystem {
    DenseMatrix X;
    std::vector<double> v;
    double restart = 0.15;
};

/// Stacks `top` (first block <- second block) and `bottom` (second <- first).
inline DenseSystem stacked_system(const DenseMatrix& top, const DenseMatrix& bottom, std::vector<double> v,
                                  double restart) {
    const std::size_t n1 = top.rows, n2 = top.cols;
    if (bottom.rows != n2 || bottom.cols != n1 || v.size() != n1 + n2)
        throw DataError("stacked system blocks disagree in shape");
    if (n1 + n2 > kMaxSystemDim) throw UsageError("dense system exceeds dimension guard");
    DenseSystem sys{DenseMatrix(n1 + n2, n1 + n2), std::move(v), restart};
    for (std::size_t r = 0; r < n1; ++r)
        for (std::size_t c = 0; c < n2; ++c) sys.X(r, n1 + c) = top(r, c);
    for (std::size_t r = 0; r < n2; ++r)
        for (std::size_t c = 0; c < n1; ++c) sys.X(n1 + r, c) = bottom(r, c);
    return sys;
}

struct FixedPoint {
    std::vector<double> z;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Power iteration on G = (1 - a) X + a v 1^T from the uniform vector, renormalized to
/// unit L1 mass after every step.
inline FixedPoint dense_fixed_point(const DenseSystem& sys, double tol, std::size_t max_iter) {
    const std::size_t n = sys.X.rows;
    if (n > kMaxSystemDim) throw UsageError("dense system exceeds dimension guard");
    if (sys.X.cols != n || sys.v.size() != n) throw DataError("dense system is not square");
    const double a = sys.restart;
    FixedPoint out{std::vector<double>(n, 1.0 / static_cast<double>(n)), 0, false};
    for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
        double mass = 0.0;
        for (double x : out.z) mass += x;
        auto next = sys.X * out.z;
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            next[k] = (1.0 - a) * next[k] + a * sys.v[k] * mass;
            total += next[k];
        }
        double change = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            next[k] /= total;
            change += std::abs(next[k] - out.z[k]);
        }
        out.z = std::move(next);
        if (change < tol) {
            out.converged = true;
            return out;
        }
    }
    out.iterations = max_iter;
    return out;
}

/// All ordered pairs (i, j), i != j, in canonical-id order; row k of the incidence
/// matrix belongs to entry k.
inline std::vector<Preference> preference_universe(std::size_t n_items) {
    std::vector<Preference> out;
    for (ItemId i = 0; i < n_items; ++i)
        for (ItemId j = 0; j < n_items; ++j)
            if (i != j) out.push_back({i, j});
    return out;
}

/// B[p][r] = 1 iff preference p = (a, b) supports r, i.e. r = a_d or r = b_u.
/// Representative columns follow the library layout: 2i desirable, 2i + 1 undesirable.
inline DenseMatrix dense_prnet_incidence(std::size_t n_items) {
    if (n_items > kMaxIncidenceItems) throw UsageError("incidence oracle limited to 50 items");
    if (n_items < 2) throw DataError("PRNet needs at least 2 items");
    const auto prefs = preference_universe(n_items);
    DenseMatrix B(prefs.size(), 2 * n_items);
    for (std::size_t k = 0; k < prefs.size(); ++k) {
        for (ItemId i = 0; i < n_items; ++i) {
            if (prefs[k].winner == i) B(k, 2 * i) = 1.0;
            if (prefs[k].loser == i) B(k, 2 * i + 1) = 1.0;
        }
    }
    return B;
}

/// Dense 0/1 adjacency, users x observed preferences (compact index).
inline DenseMatrix dense_upnet_adjacency(const UPNet& g) {
    if (g.n_users() + g.n_prefs() > kMaxSystemDim) throw UsageError("UPNet too large for dense oracle");
    DenseMatrix A(g.n_users(), g.n_prefs());
    for (const auto& [u, p] : g.edges()) A(u, *g.index_of(p)) = 1.0;
    return A;
}

struct OracleRun {
    std::vector<double> s, c;  // users, observed preferences (compact)
    std::vector<double> h;     // preference universe, canonical order (n(n-1) entries)
    std::vector<double> p;     // representatives, 2i / 2i + 1
    ScoredItems scores;
};

/// Both walks for `target` by dense power iteration on the stacked systems.
inline OracleRun dense_pipeline(const UPNet& g, UserId target, double alpha, double beta, double tol = 1e-14,
                                std::size_t max_iter = 100'000) {
    const auto A = dense_upnet_adjacency(g);
    const auto L = column_normalized(A);              // users <- prefs
    const auto M = column_normalized(transposed(A));  // prefs <- users
    const std::size_t nu = g.n_users(), np = g.n_prefs();

    std::vector<double> d(np, 0.0);
    double dsum = 0.0;
    for (std::size_t k = 0; k < np; ++k) {
        if (A(target, k) == 0.0) continue;
        d[k] = L(target, k);
        dsum += d[k];
    }
    if (dsum <= 0.0) throw ColdStartError("oracle target holds no preference");
    std::vector<double> v1(nu + np, 0.0);
    for (std::size_t k = 0; k < np; ++k) v1[nu + k] = d[k] / dsum;
    const auto z1 = dense_fixed_point(stacked_system(L, M, std::move(v1), alpha), tol, max_iter);
    if (!z1.converged) throw NumericalError("oracle phase 1 did not converge");

    OracleRun out;
    out.s.assign(z1.z.begin(), z1.z.begin() + static_cast<std::ptrdiff_t>(nu));
    out.c.assign(z1.z.begin() + static_cast<std::ptrdiff_t>(nu), z1.z.end());

    const std::size_t n = g.n_items();
    const auto B = dense_prnet_incidence(n);
    const auto W = column_normalized(B);              // prefs <- reps
    const auto T = column_normalized(transposed(B));  // reps <- prefs
    const auto universe = preference_universe(n);
    double csum = 0.0;
    for (double x : out.c) csum += x;
    std::vector<double> v2(universe.size() + 2 * n, 0.0);
    for (std::size_t k = 0; k < universe.size(); ++k)
        if (auto idx = g.index_of(universe[k])) v2[k] = out.c[*idx] / csum;
    const auto z2 = dense_fixed_point(stacked_system(W, T, std::move(v2), beta), tol, max_iter);
    if (!z2.converged) throw NumericalError("oracle phase 2 did not converge");
    out.h.assign(z2.z.begin(), z2.z.begin() + static_cast<std::ptrdiff_t>(universe.size()));
    out.p.assign(z2.z.begin() + static_cast<std::ptrdiff_t>(universe.size()), z2.z.end());

    out.scores.score.assign(n, 0.0);
    out.scores.defined.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double total = out.p[2 * i] + out.p[2 * i + 1];
        if (total < kSignificanceFloor) continue;
        out.scores.score[i] = out.p[2 * i] / total;
        out.scores.defined[i] = 1;
    }
    return out;
}

}  // namespace iterank::oracle
