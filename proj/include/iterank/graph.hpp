#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "iterank/dataset.hpp"
#include "iterank/error.hpp"

namespace iterank {

/// Bipartite user <-> observed-preference graph.
///
/// Only preferences held by at least one user get a node; they are addressed by a
/// compact index. A graph built in one shot orders that index by canonical id, while
/// incremental inserts append. Equality is structural (same users, items and edges),
/// so both orders compare equal.
class UPNet {
public:
    UPNet() = default;
    UPNet(std::size_t n_users, std::size_t n_items) : n_items_(n_items), user_prefs_(n_users) {}

    static UPNet build(const PreferenceStore& store) {
        if (store.total() == 0) throw EmptyGraphError("preference store holds no preferences");
        UPNet g(store.n_users(), store.n_items());

        std::vector<Preference> all;
        all.reserve(store.total());
        for (UserId u = 0; u < store.n_users(); ++u) {
            const auto prefs = store.of(u);
            all.insert(all.end(), prefs.begin(), prefs.end());
        }
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());

        g.observed_ = std::move(all);
        g.pref_users_.resize(g.observed_.size());
        g.index_.reserve(g.observed_.size());
        for (std::uint32_t k = 0; k < g.observed_.size(); ++k) g.index_.emplace(key(g.observed_[k]), k);
        g.edge_keys_.reserve(store.total());
        for (UserId u = 0; u < store.n_users(); ++u) {
            for (const auto& p : store.of(u)) {
                const auto k = g.index_.at(key(p));
                g.user_prefs_[u].push_back(k);
                g.pref_users_[k].push_back(u);
                g.edge_keys_.insert(edge_key(u, k));
            }
        }
        g.n_edges_ = store.total();
        return g;
    }

    std::size_t n_users() const noexcept { return user_prefs_.size(); }
    std::size_t n_items() const noexcept { return n_items_; }
    std::size_t n_prefs() const noexcept { return observed_.size(); }
    std::size_t n_edges() const noexcept { return n_edges_; }

    std::span<const Preference> observed() const noexcept { return observed_; }
    Preference preference(std::uint32_t k) const { return observed_.at(k); }

    std::optional<std::uint32_t> index_of(Preference p) const {
        auto it = index_.find(key(p));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::span<const std::uint32_t> prefs_of(UserId u) const { return user_prefs_.at(u); }
    std::span<const UserId> users_of(std::uint32_t k) const { return pref_users_.at(k); }
    std::size_t user_degree(UserId u) const { return user_prefs_.at(u).size(); }
    std::size_t pref_degree(std::uint32_t k) const { return pref_users_.at(k).size(); }

    bool has_edge(UserId u, Preference p) const {
        const auto k = index_of(p);
        return k && edge_keys_.contains(edge_key(u, *k));
    }

    /// Appends an isolated user node.
    UserId add_user() {
        user_prefs_.emplace_back();
        return static_cast<UserId>(user_prefs_.size() - 1);
    }

    /// Grows the item universe by one. Preferences are keyed by (winner, loser), so
    /// existing nodes are unaffected.
    ItemId add_item() { return static_cast<ItemId>(n_items_++); }

    /// Inserts edge (u, p). Returns false if the edge already exists. Throws
    /// ConflictError if `u` already holds the reversed pair.
    bool add_preference(UserId u, Preference p) {
        if (u >= n_users()) throw DataError("unknown user " + std::to_string(u));
        if (p.winner == p.loser) throw DataError("preference with winner == loser");
        if (p.winner >= n_items_ || p.loser >= n_items_) throw DataError("preference item out of range");
        if (has_edge(u, p.reversed()))
            throw ConflictError("user " + std::to_string(u) + " already holds the reversed preference");

        std::uint32_t k;
        if (auto found = index_of(p)) {
            k = *found;
            if (edge_keys_.contains(edge_key(u, k))) return false;
        } else {
            k = static_cast<std::uint32_t>(observed_.size());
            observed_.push_back(p);
            pref_users_.emplace_back();
            index_.emplace(key(p), k);
        }
        user_prefs_[u].push_back(k);
        pref_users_[k].push_back(u);
        edge_keys_.insert(edge_key(u, k));
        ++n_edges_;
        return true;
    }

    /// All edges as (user, preference), sorted.
    std::vector<std::pair<UserId, Preference>> edges() const {
        std::vector<std::pair<UserId, Preference>> out;
        out.reserve(n_edges_);
        for (UserId u = 0; u < n_users(); ++u)
            for (auto k : user_prefs_[u]) out.emplace_back(u, observed_[k]);
        std::sort(out.begin(), out.end());
        return out;
    }

    friend bool operator==(const UPNet& a, const UPNet& b) {
        return a.n_users() == b.n_users() && a.n_items_ == b.n_items_ && a.n_edges_ == b.n_edges_ &&
               a.edges() == b.edges();
    }

private:
    static std::uint64_t key(Preference p) { return (std::uint64_t{p.winner} << 32) | p.loser; }
    static std::uint64_t edge_key(UserId u, std::uint32_t k) { return (std::uint64_t{u} << 32) | k; }

    std::size_t n_items_ = 0;
    std::size_t n_edges_ = 0;
    std::vector<Preference> observed_;
    std::unordered_map<std::uint64_t, std::uint32_t> index_;
    std::vector<std::vector<std::uint32_t>> user_prefs_;
    std::vector<std::vector<UserId>> pref_users_;
    std::unordered_set<std::uint64_t> edge_keys_;
};

/// Users reachable from `target` through the bipartite walk graph (target included).
inline std::vector<char> reachable_users(const UPNet& g, UserId target) {
    std::vector<char> seen_user(g.n_users(), 0);
    std::vector<char> seen_pref(g.n_prefs(), 0);
    std::vector<UserId> frontier{target};
    seen_user.at(target) = 1;
    while (!frontier.empty()) {
        const UserId u = frontier.back();
        frontier.pop_back();
        for (auto k : g.prefs_of(u)) {
            if (seen_pref[k]) continue;
            seen_pref[k] = 1;
            for (auto v : g.users_of(k)) {
                if (!seen_user[v]) {
                    seen_user[v] = 1;
                    frontier.push_back(v);
                }
            }
        }
    }
    return seen_user;
}

enum class Direction { pref_to_user, user_to_pref, rep_to_pref, pref_to_rep };

/// Sparse column-stochastic matrix in compressed-column form. Column j lists the
/// transition probabilities out of source node j.
class StochasticOperator {
public:
    StochasticOperator(Direction dir, std::size_t rows, std::size_t cols)
        : dir_(dir), rows_(rows), cols_(cols), col_ptr_(cols + 1, 0) {}

    Direction direction() const noexcept { return dir_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return row_.size(); }

    /// y = scale * (this * x). `y` is overwritten.
    void apply(std::span<const double> x, std::span<double> y, double scale = 1.0) const {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t j = 0; j < cols_; ++j) {
            const double xj = x[j];
            if (xj == 0.0) continue;
            for (auto e = col_ptr_[j]; e < col_ptr_[j + 1]; ++e) y[row_[e]] += weight_[e] * xj;
        }
        if (scale != 1.0)
            for (auto& v : y) v *= scale;
    }

    template <class F>
    void for_each_in_column(std::size_t j, F&& f) const {
        for (auto e = col_ptr_[j]; e < col_ptr_[j + 1]; ++e) f(std::size_t{row_[e]}, weight_[e]);
    }

private:
    friend std::pair<StochasticOperator, StochasticOperator> upnet_operators(const UPNet&);

    Direction dir_;
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::size_t> col_ptr_;
    std::vector<std::uint32_t> row_;
    std::vector<double> weight_;
};

/// L (preference -> user, weight 1/deg(p)) and M (user -> preference, weight 1/deg(u)).
/// Users without preferences give empty M columns.
inline std::pair<StochasticOperator, StochasticOperator> upnet_operators(const UPNet& g) {
    StochasticOperator L(Direction::pref_to_user, g.n_users(), g.n_prefs());
    StochasticOperator M(Direction::user_to_pref, g.n_prefs(), g.n_users());
    L.row_.reserve(g.n_edges());
    L.weight_.reserve(g.n_edges());
    for (std::uint32_t k = 0; k < g.n_prefs(); ++k) {
        const auto users = g.users_of(k);
        const double w = 1.0 / static_cast<double>(users.size());
        for (auto u : users) {
            L.row_.push_back(u);
            L.weight_.push_back(w);
        }
        L.col_ptr_[k + 1] = L.row_.size();
    }
    M.row_.reserve(g.n_edges());
    M.weight_.reserve(g.n_edges());
    for (UserId u = 0; u < g.n_users(); ++u) {
        const auto prefs = g.prefs_of(u);
        const double w = prefs.empty() ? 0.0 : 1.0 / static_cast<double>(prefs.size());
        for (auto k : prefs) {
            M.row_.push_back(k);
            M.weight_.push_back(w);
        }
        M.col_ptr_[u + 1] = M.row_.size();
    }
    return {std::move(L), std::move(M)};
}

/// Implicit preference <-> representative graph over the full pair universe.
///
/// Preference (w, l) has canonical id w * n + l; ids with w == l are unused. Item i
/// owns a desirable representative 2i (supported when i wins) and an undesirable
/// representative 2i + 1 (supported when i loses).
class PRNet {
public:
    explicit PRNet(std::size_t n_items) : n_(n_items) {
        if (n_items < 2) throw DataError("PRNet needs at least 2 items");
    }

    std::size_t n_items() const noexcept { return n_; }
    std::size_t n_preferences() const noexcept { return n_ * (n_ - 1); }
    std::size_t id_space() const noexcept { return n_ * n_; }
    std::size_t n_representatives() const noexcept { return 2 * n_; }

    static std::size_t desirable(ItemId i) noexcept { return 2 * std::size_t{i}; }
    static std::size_t undesirable(ItemId i) noexcept { return 2 * std::size_t{i} + 1; }

    std::size_t encode(Preference p) const noexcept { return std::size_t{p.winner} * n_ + p.loser; }
    Preference decode(std::size_t id) const noexcept {
        return {static_cast<ItemId>(id / n_), static_cast<ItemId>(id % n_)};
    }
    bool is_preference(std::size_t id) const noexcept { return id < id_space() && id / n_ != id % n_; }

    /// The two representatives a preference supports: winner's desirable, loser's undesirable.
    static std::array<std::size_t, 2> supported(Preference p) noexcept {
        return {desirable(p.winner), undesirable(p.loser)};
    }

    ItemId add_item() { return static_cast<ItemId>(n_++); }

private:
    std::size_t n_;
};

/// W: representative -> preference. Representative i_d reaches every (i, j), i_u every
/// (j, i), each with probability 1/(n - 1).
class PrnetW {
public:
    explicit PrnetW(std::size_t n_items) : n_(n_items) {}

    Direction direction() const noexcept { return Direction::rep_to_pref; }
    std::size_t rows() const noexcept { return n_ * n_; }
    std::size_t cols() const noexcept { return 2 * n_; }

    /// y = scale * (W * x); y has n*n slots with the diagonal left at zero.
    void apply(std::span<const double> x, std::span<double> y, double scale = 1.0) const {
        const double w = scale / static_cast<double>(n_ - 1);
        for (std::size_t i = 0; i < n_; ++i) {
            const double di = x[2 * i];
            double* row = y.data() + i * n_;
            for (std::size_t j = 0; j < n_; ++j) row[j] = (di + x[2 * j + 1]) * w;
            row[i] = 0.0;
        }
    }

    template <class F>
    void for_each_in_column(std::size_t r, F&& f) const {
        const std::size_t item = r / 2;
        const double w = 1.0 / static_cast<double>(n_ - 1);
        for (std::size_t other = 0; other < n_; ++other) {
            if (other == item) continue;
            f(r % 2 == 0 ? item * n_ + other : other * n_ + item, w);
        }
    }

private:
    std::size_t n_;
};

/// T: preference -> representative, 1/2 to each of the two supported representatives.
class PrnetT {
public:
    explicit PrnetT(std::size_t n_items) : n_(n_items) {}

    Direction direction() const noexcept { return Direction::pref_to_rep; }
    std::size_t rows() const noexcept { return 2 * n_; }
    std::size_t cols() const noexcept { return n_ * n_; }

    void apply(std::span<const double> x, std::span<double> y, double scale = 1.0) const {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* row = x.data() + i * n_;
            for (std::size_t j = 0; j < n_; ++j) {
                if (i == j) continue;
                y[2 * i] += row[j];
                y[2 * j + 1] += row[j];
            }
        }
        for (auto& v : y) v *= 0.5 * scale;
    }

    template <class F>
    void for_each_in_column(std::size_t id, F&& f) const {
        const std::size_t w = id / n_, l = id % n_;
        if (w == l) return;
        f(2 * w, 0.5);
        f(2 * l + 1, 0.5);
    }

private:
    std::size_t n_;
};

inline std::pair<PrnetW, PrnetT> prnet_operators(std::size_t n_items) {
    if (n_items < 2) throw DataError("PRNet operators need at least 2 items");
    return {PrnetW(n_items), PrnetT(n_items)};
}

/// Column sum of any operator exposing for_each_in_column.
template <class Op>
double column_sum(const Op& op, std::size_t j) {
    double s = 0.0;
    op.for_each_in_column(j, [&](std::size_t, double w) { s += w; });
    return s;
}

// Binary snapshot: "IRUP", u32 version, u32 N_U, u32 N_I, u32 edge count, then
// (u32 user, u32 winner * N_I + loser) per edge. All little-endian.

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated UPNet snapshot");
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
           (std::uint32_t{b[3]} << 24);
}

}  // namespace detail

inline constexpr std::uint32_t kSnapshotVersion = 1;

inline void save_snapshot(std::ostream& out, const UPNet& g) {
    if (std::uint64_t{g.n_items()} * g.n_items() > 0xffffffffULL)
        throw DataError("item count too large for 32-bit snapshot preference ids");
    out.write("IRUP", 4);
    detail::put_u32(out, kSnapshotVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(g.n_users()));
    detail::put_u32(out, static_cast<std::uint32_t>(g.n_items()));
    detail::put_u32(out, static_cast<std::uint32_t>(g.n_edges()));
    for (const auto& [u, p] : g.edges()) {
        detail::put_u32(out, u);
        detail::put_u32(out, static_cast<std::uint32_t>(std::uint64_t{p.winner} * g.n_items() + p.loser));
    }
}

inline UPNet load_snapshot(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != "IRUP") throw DataError("not a UPNet snapshot");
    if (const auto v = detail::get_u32(in); v != kSnapshotVersion)
        throw DataError("unsupported UPNet snapshot version " + std::to_string(v));
    const auto n_users = detail::get_u32(in);
    const auto n_items = detail::get_u32(in);
    const auto n_edges = detail::get_u32(in);
    if (n_items == 0) throw DataError("snapshot declares zero items");
    PreferenceStore store(n_users, n_items);
    std::vector<std::vector<Preference>> per_user(n_users);
    for (std::uint32_t e = 0; e < n_edges; ++e) {
        const auto u = detail::get_u32(in);
        const auto id = detail::get_u32(in);
        if (u >= n_users) throw DataError("snapshot edge references unknown user");
        per_user[u].push_back(store.decode(id));
    }
    for (UserId u = 0; u < n_users; ++u) store.assign(u, std::move(per_user[u]));
    if (store.total() == 0) return UPNet(n_users, n_items);
    return UPNet::build(store);
}

}  // namespace iterank
