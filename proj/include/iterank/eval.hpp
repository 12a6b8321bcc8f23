#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iterank/dataset.hpp"
#include "iterank/engine.hpp"
#include "iterank/graph.hpp"
#include "iterank/parallel.hpp"

namespace iterank {

/// NDCG@k with gain 2^rel - 1 and discount log2(position + 1). Items missing from
/// `test` have rel = 0. The ideal ordering is built from the test items only.
inline double ndcg_at_k(std::span<const ItemId> recommended, const std::unordered_map<ItemId, double>& test,
                        std::size_t k) {
    if (k < 1) throw UsageError("NDCG cutoff must be >= 1");
    if (test.empty()) throw DataError("NDCG needs at least one test rating");
    if (recommended.empty()) return 0.0;

    double dcg = 0.0;
    const auto depth = std::min(k, recommended.size());
    for (std::size_t pos = 0; pos < depth; ++pos) {
        auto it = test.find(recommended[pos]);
        const double rel = it == test.end() ? 0.0 : it->second;
        dcg += (std::exp2(rel) - 1.0) / std::log2(static_cast<double>(pos) + 2.0);
    }

    std::vector<double> ideal;
    ideal.reserve(test.size());
    for (const auto& [item, rel] : test) ideal.push_back(rel);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t pos = 0; pos < std::min(k, ideal.size()); ++pos)
        idcg += (std::exp2(ideal[pos]) - 1.0) / std::log2(static_cast<double>(pos) + 2.0);
    // All-zero gains: every ordering is ideal.
    if (idcg <= 0.0) return 1.0;
    return std::clamp(dcg / idcg, 0.0, 1.0);
}

/// Items a user's ranking is drawn from during evaluation.
///
/// `test_items` ranks the user's held-out rated items, the usual setting of the
/// fixed-profile-length protocol. `unseen_items` ranks every item outside the user's
/// training profile; unrated candidates then count with rel = 0.
enum class CandidateSet { test_items, unseen_items };

struct EvalOptions {
    std::vector<std::size_t> upls{10, 20, 30, 40, 50};
    std::vector<std::size_t> cutoffs{1, 3, 5, 10};
    std::size_t repetitions = 5;
    std::size_t min_test = 10;
    std::uint64_t seed = 0;
    EngineConfig engine;
    std::size_t threads = 1;
    std::size_t max_users = 0;  // evaluate at most this many kept users per split (0 = all)
    CandidateSet candidates = CandidateSet::test_items;
};

struct NdcgCell {
    std::size_t upl = 0;
    std::size_t cutoff = 0;
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over repetitions
    std::size_t n_users = 0;
    double runtime_ms = 0.0;
    std::vector<double> per_repetition;
};

struct NdcgReport {
    EvalOptions options;
    std::vector<NdcgCell> cells;                       // UPL-major, cutoff-minor
    std::vector<std::vector<std::size_t>> kept_users;  // [upl index][repetition]
    std::vector<std::vector<std::size_t>> cold_start;  // [upl index][repetition]

    const NdcgCell& at(std::size_t upl, std::size_t cutoff) const {
        for (const auto& c : cells)
            if (c.upl == upl && c.cutoff == cutoff) return c;
        throw UsageError("no report cell for upl=" + std::to_string(upl) + " cutoff=" + std::to_string(cutoff));
    }
};

namespace detail {

inline std::pair<double, double> mean_and_population_std(std::span<const double> xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

// Evenly spaced subsample of `users`, keeping order.
inline std::vector<UserId> thin(const std::vector<UserId>& users, std::size_t cap) {
    if (cap == 0 || users.size() <= cap) return users;
    std::vector<UserId> out;
    out.reserve(cap);
    for (std::size_t k = 0; k < cap; ++k) out.push_back(users[k * users.size() / cap]);
    return out;
}

}  // namespace detail

/// Per-user NDCG values of one split, in kept-user order; cold-start users are skipped.
struct SplitScores {
    std::vector<UserId> users;
    std::vector<std::vector<double>> ndcg;  // [user][cutoff index]
    std::size_t cold_start = 0;
};

inline SplitScores evaluate_split(const Split& split, const EvalOptions& opt) {
    const auto store = derive_preferences(split.train);
    const Engine engine(UPNet::build(store), opt.engine);
    const auto users = detail::thin(split.kept_users, opt.max_users);
    const auto train_groups = split.train.by_user();
    const auto test_groups = split.test.by_user();
    const std::size_t depth = *std::max_element(opt.cutoffs.begin(), opt.cutoffs.end());

    std::vector<std::vector<double>> per_user(users.size());
    std::vector<char> cold(users.size(), 0);
    parallel_for(users.size(), opt.threads, [&](std::size_t k) {
        const UserId u = users[k];
        std::unordered_map<ItemId, double> test;
        for (const auto& r : test_groups[u]) test.emplace(r.item, r.value);
        std::vector<ItemId> ranked;
        try {
            const auto scores = engine.run(u).scores;
            if (opt.candidates == CandidateSet::test_items) {
                std::vector<ItemId> candidates;
                for (const auto& r : test_groups[u]) candidates.push_back(r.item);
                ranked = rank_candidates(scores, std::move(candidates), depth);
            } else {
                std::vector<ItemId> exclude;
                for (const auto& r : train_groups[u]) exclude.push_back(r.item);
                ranked = recommend_topk(scores, depth, exclude);
            }
        } catch (const ColdStartError&) {
            cold[k] = 1;
            return;
        }
        for (auto cutoff : opt.cutoffs) per_user[k].push_back(ndcg_at_k(ranked, test, cutoff));
    });

    SplitScores out;
    for (std::size_t k = 0; k < users.size(); ++k) {
        if (cold[k]) {
            ++out.cold_start;
            continue;
        }
        out.users.push_back(users[k]);
        out.ndcg.push_back(std::move(per_user[k]));
    }
    return out;
}

/// Full protocol: for every UPL and repetition, split, build graphs, rank every kept user
/// and average NDCG over users; then mean and population std over repetitions.
inline NdcgReport evaluate_run(const RatingsDataset& data, const EvalOptions& opt) {
    if (opt.upls.empty() || opt.cutoffs.empty()) throw UsageError("need at least one UPL and one cutoff");
    for (auto c : opt.cutoffs)
        if (c < 1) throw UsageError("cutoffs must be >= 1");
    NdcgReport report;
    report.options = opt;
    for (auto upl : opt.upls) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::vector<double>> rep_means(opt.cutoffs.size());
        std::vector<std::size_t> kept, cold;
        std::size_t evaluated = 0;
        for (std::size_t rep = 0; rep < opt.repetitions; ++rep) {
            SplitSpec spec{upl, opt.min_test, opt.seed, opt.repetitions};
            const auto split = upl_split(data, spec, rep);
            const auto scores = evaluate_split(split, opt);
            kept.push_back(split.kept_users.size());
            cold.push_back(scores.cold_start);
            evaluated += scores.users.size();
            for (std::size_t c = 0; c < opt.cutoffs.size(); ++c) {
                double sum = 0.0;
                for (const auto& row : scores.ndcg) sum += row[c];
                rep_means[c].push_back(scores.ndcg.empty() ? 0.0 : sum / static_cast<double>(scores.ndcg.size()));
            }
        }
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        for (std::size_t c = 0; c < opt.cutoffs.size(); ++c) {
            const auto [mean, sd] = detail::mean_and_population_std(rep_means[c]);
            report.cells.push_back({upl, opt.cutoffs[c], mean, sd, evaluated / opt.repetitions, ms, rep_means[c]});
        }
        report.kept_users.push_back(std::move(kept));
        report.cold_start.push_back(std::move(cold));
    }
    return report;
}

inline void write_report_header(std::ostream& out, const NdcgReport& r) {
    const auto& o = r.options;
    out << "# alpha=" << o.engine.phase1.alpha << " beta=" << o.engine.phase2.beta << " tol=" << o.engine.phase1.tol
        << " max_iter=" << o.engine.phase1.max_iter << " repetitions=" << o.repetitions << " seed=" << o.seed
        << " min_test=" << o.min_test << " max_users=" << o.max_users << " candidates="
        << (o.candidates == CandidateSet::test_items ? "test" : "unseen") << "\n"
        << "# std is the population standard deviation over repetitions\n";
}

/// Human-readable table: one row per UPL, mean±std per cutoff.
inline void write_report_table(std::ostream& out, const NdcgReport& r) {
    write_report_header(out, r);
    out << "UPL";
    for (auto c : r.options.cutoffs) out << "\tNDCG@" << c;
    out << "\tusers\n";
    for (auto upl : r.options.upls) {
        out << upl;
        std::size_t n = 0;
        for (auto c : r.options.cutoffs) {
            const auto& cell = r.at(upl, c);
            out << '\t' << std::fixed << std::setprecision(3) << cell.mean << "±" << cell.std;
            n = cell.n_users;
        }
        out << '\t' << n << '\n';
    }
    out.unsetf(std::ios::floatfield);
    out << std::setprecision(6);
}

/// Machine-readable records, one per UPL x cutoff.
inline void write_report_records(std::ostream& out, const NdcgReport& r) {
    write_report_header(out, r);
    out << std::setprecision(17);
    for (const auto& c : r.cells)
        out << "upl=" << c.upl << "\tcutoff=" << c.cutoff << "\tmean=" << c.mean << "\tstd=" << c.std
            << "\tn_users=" << c.n_users << "\truntime_ms=" << c.runtime_ms << '\n';
    out << std::setprecision(6);
}

// ---------------------------------------------------------------------------
// Diagnostics: how many similarities/concordances are non-zero, and how many
// distinct values they take.

inline constexpr double kNonZeroFloor = 1e-15;

/// Number of distinct values > kNonZeroFloor after rounding to 12 significant digits.
inline std::size_t distinct_levels(std::span<const double> values) {
    std::vector<std::pair<int, std::int64_t>> keys;
    for (double v : values) {
        if (!(v > kNonZeroFloor)) continue;
        int e = static_cast<int>(std::floor(std::log10(v)));
        auto m = static_cast<std::int64_t>(std::llround(v / std::pow(10.0, e - 11)));
        // log10 can land one decade off near powers of ten.
        if (m >= 1'000'000'000'000) {
            ++e;
            m = std::llround(v / std::pow(10.0, e - 11));
        } else if (m < 100'000'000'000) {
            --e;
            m = std::llround(v / std::pow(10.0, e - 11));
        }
        keys.emplace_back(e, m);
    }
    std::sort(keys.begin(), keys.end());
    return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

struct UserDiagnostics {
    UserId user = 0;
    double similarity_nonzero = 0.0;  // share of other warm users with s > floor
    std::size_t similarity_levels = 0;
    double phase1_nonzero = 0.0;  // share of the n(n-1) universe with c > floor
    std::size_t phase1_levels = 0;
    double phase2_nonzero = 0.0;  // share of the n(n-1) universe with h > floor
    std::size_t phase2_levels = 0;
    bool connected = false;  // every warm user reachable from the target in UPNet
    std::size_t phase1_iterations = 0;
    std::size_t phase2_iterations = 0;
    bool converged = false;
};

inline UserDiagnostics diagnose_user(const UPNet& g, const UserRun& run) {
    UserDiagnostics d;
    d.user = run.user;
    const auto reach = reachable_users(g, run.user);
    std::size_t others = 0, nonzero = 0;
    std::vector<double> sims;
    d.connected = true;
    for (UserId v = 0; v < g.n_users(); ++v) {
        if (v == run.user || g.user_degree(v) == 0) continue;
        ++others;
        if (!reach[v]) d.connected = false;
        if (run.phase1.s[v] > kNonZeroFloor) ++nonzero;
        sims.push_back(run.phase1.s[v]);
    }
    d.similarity_nonzero = others ? static_cast<double>(nonzero) / static_cast<double>(others) : 0.0;
    d.similarity_levels = distinct_levels(sims);

    const std::size_t n = g.n_items();
    const double universe = static_cast<double>(n * (n - 1));
    const auto& c = run.phase1.c;
    d.phase1_nonzero =
        static_cast<double>(std::count_if(c.begin(), c.end(), [](double v) { return v > kNonZeroFloor; })) / universe;
    d.phase1_levels = distinct_levels(c);
    // h keeps its diagonal at zero, so counting over all n*n slots is exact.
    const auto& h = run.phase2.h;
    d.phase2_nonzero =
        static_cast<double>(std::count_if(h.begin(), h.end(), [](double v) { return v > kNonZeroFloor; })) / universe;
    d.phase2_levels = distinct_levels(h);
    d.phase1_iterations = run.phase1.iterations;
    d.phase2_iterations = run.phase2.iterations;
    d.converged = run.phase1.converged && run.phase2.converged;
    return d;
}

struct DiagnosticsReport {
    std::vector<UserDiagnostics> users;
    std::size_t cold_start = 0;
    double mean_similarity_nonzero = 0.0;
    double mean_similarity_levels = 0.0;
    double mean_phase1_nonzero = 0.0;
    double mean_phase1_levels = 0.0;
    double mean_phase2_nonzero = 0.0;
    double mean_phase2_levels = 0.0;
    double min_phase2_nonzero = 0.0;
    double connected_fraction = 0.0;
};

inline DiagnosticsReport summarize(std::vector<UserDiagnostics> users, std::size_t cold_start) {
    DiagnosticsReport r;
    r.users = std::move(users);
    r.cold_start = cold_start;
    if (r.users.empty()) return r;
    const double n = static_cast<double>(r.users.size());
    r.min_phase2_nonzero = 1.0;
    for (const auto& u : r.users) {
        r.mean_similarity_nonzero += u.similarity_nonzero / n;
        r.mean_similarity_levels += static_cast<double>(u.similarity_levels) / n;
        r.mean_phase1_nonzero += u.phase1_nonzero / n;
        r.mean_phase1_levels += static_cast<double>(u.phase1_levels) / n;
        r.mean_phase2_nonzero += u.phase2_nonzero / n;
        r.mean_phase2_levels += static_cast<double>(u.phase2_levels) / n;
        r.min_phase2_nonzero = std::min(r.min_phase2_nonzero, u.phase2_nonzero);
        r.connected_fraction += (u.connected ? 1.0 : 0.0) / n;
    }
    return r;
}

/// Runs both walks for each user in `users` and summarizes them; cold-start users are
/// counted and skipped.
inline DiagnosticsReport diagnostics(const Engine& engine, std::span<const UserId> users, std::size_t threads = 1) {
    std::vector<UserDiagnostics> per_user(users.size());
    std::vector<char> ok(users.size(), 0);
    parallel_for(users.size(), threads, [&](std::size_t k) {
        try {
            per_user[k] = diagnose_user(engine.graph(), engine.run(users[k]));
            ok[k] = 1;
        } catch (const ColdStartError&) {
        }
    });
    std::vector<UserDiagnostics> kept;
    for (std::size_t k = 0; k < users.size(); ++k)
        if (ok[k]) kept.push_back(per_user[k]);
    return summarize(std::move(kept), users.size() - kept.size());
}

inline void write_diagnostics(std::ostream& out, const DiagnosticsReport& r) {
    out << std::setprecision(12);
    out << "# users=" << r.users.size() << " cold_start=" << r.cold_start << "\n";
    out << "similarity_nonzero_fraction=" << r.mean_similarity_nonzero << '\n'
        << "similarity_levels=" << r.mean_similarity_levels << '\n'
        << "phase1_concordance_nonzero_fraction=" << r.mean_phase1_nonzero << '\n'
        << "phase1_concordance_levels=" << r.mean_phase1_levels << '\n'
        << "phase2_concordance_nonzero_fraction=" << r.mean_phase2_nonzero << '\n'
        << "phase2_concordance_levels=" << r.mean_phase2_levels << '\n'
        << "phase2_concordance_nonzero_fraction_min=" << r.min_phase2_nonzero << '\n'
        << "connected_fraction=" << r.connected_fraction << '\n';
    out << "user\tsim_nonzero\tsim_levels\tp1_nonzero\tp1_levels\tp2_nonzero\tp2_levels\tconnected\tp1_iter\tp2_iter\n";
    for (const auto& u : r.users)
        out << u.user << '\t' << u.similarity_nonzero << '\t' << u.similarity_levels << '\t' << u.phase1_nonzero
            << '\t' << u.phase1_levels << '\t' << u.phase2_nonzero << '\t' << u.phase2_levels << '\t'
            << (u.connected ? 1 : 0) << '\t' << u.phase1_iterations << '\t' << u.phase2_iterations << '\n';
    out << std::setprecision(6);
}

}  // namespace iterank
