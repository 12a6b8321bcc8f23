#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "iterank/error.hpp"
#include "iterank/graph.hpp"

namespace iterank {

/// How the two halves of a coupled walk are advanced.
///
/// `jacobi` updates both sides from the previous state. `gauss_seidel` feeds the side
/// computed first into the second update of the same iteration. Both share the same
/// fixed point; on a bipartite graph Jacobi advances two independent interleaved
/// chains, so Gauss-Seidel reaches a given residual in roughly half the iterations.
enum class Schedule { jacobi, gauss_seidel };

/// Starting state of a coupled walk.
///
/// `uniform` spreads half the mass evenly over each side. `restart` starts from the
/// restart distribution, split between the sides in the same proportion as the fixed
/// point, which removes the slowly decaying oscillation between the two sides.
enum class StartVector { uniform, restart };

struct Phase1Config {
    double alpha = 0.15;
    double tol = 1e-10;
    std::size_t max_iter = 100;
    Schedule schedule = Schedule::gauss_seidel;
    StartVector start = StartVector::restart;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
        if (!(tol > 0.0)) throw UsageError("phase-1 tol must be > 0");
        if (max_iter < 1) throw UsageError("phase-1 max_iter must be >= 1");
    }
};

struct Phase1Result {
    std::vector<double> s;  // similarity of every user to the target
    std::vector<double> c;  // concordance of every observed preference, compact index
    std::size_t iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Restart vector of the target: 1/deg(p) on each preference the target holds,
/// renormalized to unit L1 mass.
inline std::vector<double> personalization_vector(const UPNet& g, UserId target) {
    if (target >= g.n_users()) throw DataError("unknown user " + std::to_string(target));
    const auto prefs = g.prefs_of(target);
    if (prefs.empty()) throw ColdStartError("user " + std::to_string(target) + " holds no preference");
    std::vector<double> d(g.n_prefs(), 0.0);
    double total = 0.0;
    for (auto k : prefs) {
        d[k] = 1.0 / static_cast<double>(g.pref_degree(k));
        total += d[k];
    }
    for (auto k : prefs) d[k] /= total;
    return d;
}

namespace detail {

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
    double r = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) r += std::abs(a[k] - b[k]);
    return r;
}

}  // namespace detail

/// Coupled similarity/concordance walk on UPNet:
///   s <- (1 - alpha) L c
///   c <- (1 - alpha) M s + alpha d
/// iterated until the L1 change of the stacked (s, c) drops below cfg.tol. Hitting
/// max_iter first is not an error; the result is returned with converged = false.
inline Phase1Result iterate_phase1(const StochasticOperator& L, const StochasticOperator& M,
                                   std::span<const double> d, const Phase1Config& cfg) {
    cfg.validate();
    const std::size_t n_users = L.rows();
    const std::size_t n_prefs = L.cols();
    if (M.rows() != n_prefs || M.cols() != n_users || d.size() != n_prefs)
        throw DataError("phase-1 operators and restart vector disagree in shape");

    const double a = cfg.alpha;
    const double keep = 1.0 - a;
    Phase1Result r;
    r.s.assign(n_users, 0.0);
    r.c.assign(n_prefs, 0.0);
    if (cfg.start == StartVector::uniform) {
        std::fill(r.s.begin(), r.s.end(), 0.5 / static_cast<double>(n_users));
        std::fill(r.c.begin(), r.c.end(), 0.5 / static_cast<double>(n_prefs));
    } else {
        for (std::size_t k = 0; k < n_prefs; ++k) r.c[k] = d[k] / (2.0 - a);
        L.apply(d, r.s, keep / (2.0 - a));
    }

    std::vector<double> s_next(n_users), c_next(n_prefs);
    for (r.iterations = 1; r.iterations <= cfg.max_iter; ++r.iterations) {
        L.apply(r.c, s_next, keep);
        M.apply(cfg.schedule == Schedule::gauss_seidel ? std::span<const double>(s_next) : r.s, c_next, keep);
        for (std::size_t k = 0; k < n_prefs; ++k) c_next[k] += a * d[k];

        r.residual = detail::l1_distance(s_next, r.s) + detail::l1_distance(c_next, r.c);
        if (!std::isfinite(r.residual)) throw NumericalError("non-finite value in phase-1 iteration");
        std::swap(s_next, r.s);
        std::swap(c_next, r.c);
        if (r.residual < cfg.tol) {
            r.converged = true;
            return r;
        }
    }
    r.iterations = cfg.max_iter;
    return r;
}

}  // namespace iterank
