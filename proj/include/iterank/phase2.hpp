#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "iterank/error.hpp"
#include "iterank/graph.hpp"
#include "iterank/phase1.hpp"

namespace iterank {

struct Phase2Config {
    double beta = 0.15;
    double tol = 1e-10;
    std::size_t max_iter = 100;
    Schedule schedule = Schedule::gauss_seidel;
    StartVector start = StartVector::restart;

    void validate() const {
        if (!(beta >= 0.0 && beta <= 1.0)) throw UsageError("beta must lie in [0, 1]");
        if (!(tol > 0.0)) throw UsageError("phase-2 tol must be > 0");
        if (max_iter < 1) throw UsageError("phase-2 max_iter must be >= 1");
    }
};

/// Sparse vector over full-universe preference ids, sorted by id.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

struct Phase2Result {
    std::size_t n_items = 0;
    std::vector<double> h;  // extended concordance, indexed winner * n_items + loser
    std::vector<double> p;  // significance, desirable 2i / undesirable 2i + 1
    std::size_t iterations = 0;
    double residual = 0.0;
    bool converged = false;

    double concordance(Preference pref) const { return h[std::size_t{pref.winner} * n_items + pref.loser]; }
};

/// Restart distribution of the second walk: phase-1 concordances moved to full-universe
/// ids and scaled to unit mass.
inline SparseVector build_q(const UPNet& g, std::span<const double> c, const PRNet& prnet) {
    if (c.size() != g.n_prefs()) throw DataError("concordance vector does not match UPNet");
    if (prnet.n_items() != g.n_items()) throw DataError("PRNet and UPNet disagree on item count");
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    if (!(total > 0.0)) throw ColdStartError("phase-1 concordance vector has no mass");
    SparseVector q;
    for (std::uint32_t k = 0; k < c.size(); ++k) {
        if (c[k] < 0.0) throw NumericalError("negative concordance");
        if (c[k] > 0.0) q.emplace_back(prnet.encode(g.preference(k)), c[k] / total);
    }
    std::sort(q.begin(), q.end());
    return q;
}

namespace detail {

// sum over i != j of |a_i + b_j|, in O(n log n).
inline double sum_abs_pairwise(std::span<const double> a, std::span<const double> b, std::vector<double>& scratch) {
    const std::size_t n = a.size();
    scratch.assign(b.begin(), b.end());
    std::sort(scratch.begin(), scratch.end());
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + scratch[k];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto below = static_cast<std::size_t>(
            std::lower_bound(scratch.begin(), scratch.end(), -a[i]) - scratch.begin());
        total += -(a[i] * static_cast<double>(below) + prefix[below]);
        total += a[i] * static_cast<double>(n - below) + (prefix[n] - prefix[below]);
        total -= std::abs(a[i] + b[i]);
    }
    return total;
}

}  // namespace detail

/// Coupled extended-concordance/significance walk on PRNet:
///   h <- (1 - beta) W p + beta q
///   p <- (1 - beta) T h
///
/// PRNet is regular, so both products reduce to index arithmetic:
///   (W p)(i, j) = (p(i_d) + p(j_u)) / (n - 1)
///   (T h)(i_d)  = row sum i of h / 2,   (T h)(i_u) = column sum i of h / 2.
/// The first iteration is a dense pass over the n x n grid (h_0 is arbitrary). From then
/// on every h_t equals (1 - beta) W p_{t-1} + beta q, so h stays implicit: its row and
/// column sums and the L1 change between iterates follow from p alone. h is written out
/// once, after the last iteration.
inline Phase2Result iterate_phase2(const PrnetW& W, const PrnetT& T, const SparseVector& q,
                                   const Phase2Config& cfg) {
    cfg.validate();
    const std::size_t n = W.cols() / 2;
    if (T.rows() != 2 * n || n < 2) throw DataError("PRNet operators disagree in shape");
    std::vector<double> q_row(n, 0.0), q_col(n, 0.0);
    for (const auto& [id, v] : q) {
        if (id >= n * n || id / n == id % n) throw DataError("restart vector holds a non-preference id");
        if (!(v >= 0.0)) throw NumericalError("negative restart weight");
        q_row[id / n] += v;
        q_col[id % n] += v;
    }

    const double b = cfg.beta;
    const double keep = 1.0 - b;
    const double w = keep / static_cast<double>(n - 1);
    const bool seidel = cfg.schedule == Schedule::gauss_seidel;

    Phase2Result r;
    r.n_items = n;
    r.h.assign(n * n, 0.0);
    r.p.assign(2 * n, 0.0);
    if (cfg.start == StartVector::uniform) {
        const double hv = 0.5 / static_cast<double>(n * (n - 1));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) r.h[i * n + j] = hv;
        std::fill(r.p.begin(), r.p.end(), 0.5 / static_cast<double>(2 * n));
    } else {
        for (const auto& [id, v] : q) {
            r.h[id] = v / (2.0 - b);
            r.p[2 * (id / n)] += 0.5 * keep * v / (2.0 - b);
            r.p[2 * (id % n) + 1] += 0.5 * keep * v / (2.0 - b);
        }
    }

    // Writes h = keep * W * p + beta * q into r.h and returns sum |new - old| over the
    // grid. Row and column sums of either the new or the old h land in row_sum/col_sum.
    std::vector<double> pd(n), pu(n), row_sum(n), col_sum(n);
    auto grid_pass = [&](std::span<const double> p, bool sum_new) {
        for (std::size_t i = 0; i < n; ++i) {
            pd[i] = p[2 * i];
            pu[i] = p[2 * i + 1];
        }
        std::fill(col_sum.begin(), col_sum.end(), 0.0);
        double change = 0.0;
        auto qit = q.begin();
        for (std::size_t i = 0; i < n; ++i) {
            double* row = r.h.data() + i * n;
            const double di = pd[i];
            double rs = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                double next = (di + pu[j]) * w;
                if (qit != q.end() && qit->first == i * n + j) {
                    next += b * qit->second;
                    ++qit;
                }
                const double summed = sum_new ? next : row[j];
                rs += summed;
                col_sum[j] += summed;
                change += std::abs(next - row[j]);
                row[j] = next;
            }
            row_sum[i] = rs;
        }
        return change;
    };

    // p <- keep * T * (keep * W * x + beta * q), from the structure alone.
    auto project = [&](std::span<const double> x, std::span<double> out) {
        double total_d = 0.0, total_u = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total_d += x[2 * i];
            total_u += x[2 * i + 1];
        }
        const double inv = 1.0 / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double rs = keep * (x[2 * i] + (total_u - x[2 * i + 1]) * inv) + b * q_row[i];
            const double cs = keep * ((total_d - x[2 * i]) * inv + x[2 * i + 1]) + b * q_col[i];
            out[2 * i] = 0.5 * keep * rs;
            out[2 * i + 1] = 0.5 * keep * cs;
        }
    };

    std::vector<double> p_prev(2 * n), p_next(2 * n), delta_d(n), delta_u(n), scratch;
    bool h_current = true;  // r.h holds h_t for the current t
    for (r.iterations = 1; r.iterations <= cfg.max_iter; ++r.iterations) {
        double residual;
        if (r.iterations == 1) {
            residual = grid_pass(r.p, seidel);
            for (std::size_t i = 0; i < 2 * n; ++i)
                p_next[i] = 0.5 * keep * (i % 2 == 0 ? row_sum[i / 2] : col_sum[i / 2]);
        } else {
            h_current = false;
            // h_{t+1} - h_t = keep * W * (p_t - p_{t-1})
            for (std::size_t i = 0; i < n; ++i) {
                delta_d[i] = r.p[2 * i] - p_prev[2 * i];
                delta_u[i] = r.p[2 * i + 1] - p_prev[2 * i + 1];
            }
            residual = w * detail::sum_abs_pairwise(delta_d, delta_u, scratch);
            project(seidel ? std::span<const double>(r.p) : std::span<const double>(p_prev), p_next);
        }
        residual += detail::l1_distance(p_next, r.p);
        if (!std::isfinite(residual)) throw NumericalError("non-finite value in phase-2 iteration");
        p_prev = r.p;
        std::swap(p_next, r.p);
        r.residual = residual;
        if (residual < cfg.tol) {
            r.converged = true;
            break;
        }
    }
    if (r.iterations > cfg.max_iter) r.iterations = cfg.max_iter;
    if (!h_current) grid_pass(p_prev, true);
    return r;
}

struct ScoredItems {
    std::vector<double> score;
    std::vector<char> defined;  // false when both significances fall below the floor
};

inline constexpr double kSignificanceFloor = 1e-15;

/// score(i) = p(i_d) / (p(i_d) + p(i_u)).
inline ScoredItems score_items(const Phase2Result& r) {
    const std::size_t n = r.p.size() / 2;
    ScoredItems out{std::vector<double>(n, 0.0), std::vector<char>(n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        const double d = r.p[2 * i];
        const double total = d + r.p[2 * i + 1];
        if (total < kSignificanceFloor) continue;
        out.score[i] = d / total;
        out.defined[i] = 1;
    }
    return out;
}

/// Orders `candidates` by descending score, ties by ascending id, and keeps the first k.
inline std::vector<ItemId> rank_candidates(const ScoredItems& s, std::vector<ItemId> candidates, std::size_t k) {
    if (k < 1) throw UsageError("k must be >= 1");
    const auto better = [&](ItemId a, ItemId b) {
        if (s.score[a] != s.score[b]) return s.score[a] > s.score[b];
        return a < b;
    };
    const auto take = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                      better);
    candidates.resize(take);
    return candidates;
}

/// Best `k` items outside `exclude`.
inline std::vector<ItemId> recommend_topk(const ScoredItems& s, std::size_t k, std::span<const ItemId> exclude) {
    std::vector<char> banned(s.score.size(), 0);
    for (auto i : exclude)
        if (i < banned.size()) banned[i] = 1;
    std::vector<ItemId> candidates;
    candidates.reserve(s.score.size());
    for (ItemId i = 0; i < s.score.size(); ++i)
        if (!banned[i]) candidates.push_back(i);
    return rank_candidates(s, std::move(candidates), k);
}

}  // namespace iterank
