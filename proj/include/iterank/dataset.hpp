#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iterank/error.hpp"

namespace iterank {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

struct Rating {
    UserId user;
    ItemId item;
    double value;

    friend bool operator==(const Rating&, const Rating&) = default;
};

/// Bijection between raw tokens found in an input file and dense ids [0, size()).
class IdMap {
public:
    std::uint32_t intern(std::string_view raw) {
        auto it = dense_.find(std::string(raw));
        if (it != dense_.end()) return it->second;
        const auto id = static_cast<std::uint32_t>(raw_.size());
        raw_.emplace_back(raw);
        dense_.emplace(raw_.back(), id);
        return id;
    }

    std::optional<std::uint32_t> find(std::string_view raw) const {
        auto it = dense_.find(std::string(raw));
        if (it == dense_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& raw(std::uint32_t dense) const { return raw_.at(dense); }
    std::size_t size() const noexcept { return raw_.size(); }

    /// Appends a synthetic raw token; used when ids are created programmatically.
    std::uint32_t append_generated() { return intern("#" + std::to_string(raw_.size())); }

private:
    std::vector<std::string> raw_;
    std::unordered_map<std::string, std::uint32_t> dense_;
};

enum class RatingsFormat { tsv_umr, csv_umr };

inline char separator(RatingsFormat f) { return f == RatingsFormat::csv_umr ? ',' : '\t'; }

inline RatingsFormat parse_format(std::string_view name) {
    if (name == "tsv" || name == "tsv_umr") return RatingsFormat::tsv_umr;
    if (name == "csv" || name == "csv_umr") return RatingsFormat::csv_umr;
    throw UsageError("unknown ratings format '" + std::string(name) + "' (expected tsv or csv)");
}

struct RatingsDataset {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::vector<Rating> ratings;
    IdMap user_ids;
    IdMap item_ids;

    /// Ratings grouped by user, each group in dataset order.
    std::vector<std::vector<Rating>> by_user() const {
        std::vector<std::vector<Rating>> groups(n_users);
        for (const auto& r : ratings) groups[r.user].push_back(r);
        return groups;
    }

    /// Dataset sharing this one's id space but holding no ratings.
    RatingsDataset empty_like() const {
        RatingsDataset d;
        d.n_users = n_users;
        d.n_items = n_items;
        d.user_ids = user_ids;
        d.item_ids = item_ids;
        return d;
    }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Parses `user<sep>item<sep>rating[<sep>timestamp]` records. Blank lines are skipped.
/// A repeated (user, item) pair keeps the value and position of its last occurrence.
inline RatingsDataset parse_ratings(std::istream& in, RatingsFormat format) {
    RatingsDataset d;
    const char sep = separator(format);
    struct Row {
        UserId user;
        ItemId item;
        double value;
        bool live;
    };
    std::vector<Row> rows;
    std::unordered_map<std::uint64_t, std::size_t> last_row;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = detail::trim(line);
        if (body.empty()) continue;
        const auto fields = detail::split_fields(body, sep);
        if (fields.size() < 3 || fields.size() > 4)
            throw ParseError(line_no, "expected 3 or 4 fields, found " + std::to_string(fields.size()));
        const auto user_tok = detail::trim(fields[0]);
        const auto item_tok = detail::trim(fields[1]);
        const auto rating_tok = detail::trim(fields[2]);
        if (user_tok.empty() || item_tok.empty()) throw ParseError(line_no, "empty user or item id");
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(rating_tok.data(), rating_tok.data() + rating_tok.size(), value);
        if (ec != std::errc{} || ptr != rating_tok.data() + rating_tok.size() || !std::isfinite(value))
            throw ParseError(line_no, "invalid rating '" + std::string(rating_tok) + "'");

        const UserId u = d.user_ids.intern(user_tok);
        const ItemId i = d.item_ids.intern(item_tok);
        const std::uint64_t key = (std::uint64_t{u} << 32) | i;
        if (auto it = last_row.find(key); it != last_row.end()) rows[it->second].live = false;
        last_row[key] = rows.size();
        rows.push_back({u, i, value, true});
    }
    if (rows.empty()) throw EmptyDatasetError("ratings input contains no records");

    d.n_users = d.user_ids.size();
    d.n_items = d.item_ids.size();
    d.ratings.reserve(last_row.size());
    for (const auto& r : rows)
        if (r.live) d.ratings.push_back({r.user, r.item, r.value});
    return d;
}

inline RatingsDataset load_ratings(const std::string& path, RatingsFormat format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ratings file '" + path + "'");
    return parse_ratings(in, format);
}

inline void write_ratings(std::ostream& out, const RatingsDataset& d, RatingsFormat format) {
    const char sep = separator(format);
    char buf[64];
    for (const auto& r : d.ratings) {
        const auto res = std::to_chars(buf, buf + sizeof buf, r.value);
        out << d.user_ids.raw(r.user) << sep << d.item_ids.raw(r.item) << sep
            << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
    }
}

inline void save_ratings(const std::string& path, const RatingsDataset& d, RatingsFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_ratings(out, d, format);
}

/// Ordered pair: the user prefers `winner` over `loser`.
struct Preference {
    ItemId winner;
    ItemId loser;

    Preference reversed() const { return {loser, winner}; }
    friend auto operator<=>(const Preference&, const Preference&) = default;
};

/// Sparse realization of the user x item x item concordance tensor: per-user sorted
/// preference lists. Sorting by (winner, loser) equals sorting by the canonical id
/// winner * n_items + loser.
class PreferenceStore {
public:
    PreferenceStore(std::size_t n_users, std::size_t n_items) : n_items_(n_items), prefs_(n_users) {}

    std::size_t n_users() const noexcept { return prefs_.size(); }
    std::size_t n_items() const noexcept { return n_items_; }
    std::size_t total() const noexcept { return total_; }

    std::span<const Preference> of(UserId u) const { return prefs_.at(u); }

    std::uint64_t encode(Preference p) const { return std::uint64_t{p.winner} * n_items_ + p.loser; }
    Preference decode(std::uint64_t id) const {
        return {static_cast<ItemId>(id / n_items_), static_cast<ItemId>(id % n_items_)};
    }

    /// Replaces the preferences of `u`. Throws on self-pairs, out-of-range items and
    /// reversed pairs held together.
    void assign(UserId u, std::vector<Preference> prefs) {
        std::sort(prefs.begin(), prefs.end());
        prefs.erase(std::unique(prefs.begin(), prefs.end()), prefs.end());
        for (const auto& p : prefs) {
            if (p.winner == p.loser) throw DataError("preference with winner == loser");
            if (p.winner >= n_items_ || p.loser >= n_items_) throw DataError("preference item out of range");
            if (std::binary_search(prefs.begin(), prefs.end(), p.reversed()))
                throw ConflictError("user " + std::to_string(u) + " holds both orientations of a pair");
        }
        auto& slot = prefs_.at(u);
        total_ = total_ - slot.size() + prefs.size();
        slot = std::move(prefs);
    }

private:
    std::size_t n_items_;
    std::vector<std::vector<Preference>> prefs_;
    std::size_t total_ = 0;
};

/// Strict-inequality conversion: a pair of rated items yields a preference only when
/// the two ratings differ. Ties yield nothing.
inline PreferenceStore derive_preferences(const RatingsDataset& d) {
    PreferenceStore store(d.n_users, d.n_items);
    const auto groups = d.by_user();
    for (UserId u = 0; u < groups.size(); ++u) {
        const auto& g = groups[u];
        std::vector<Preference> prefs;
        for (std::size_t a = 0; a < g.size(); ++a) {
            for (std::size_t b = a + 1; b < g.size(); ++b) {
                if (g[a].value > g[b].value) prefs.push_back({g[a].item, g[b].item});
                else if (g[b].value > g[a].value) prefs.push_back({g[b].item, g[a].item});
            }
        }
        store.assign(u, std::move(prefs));
    }
    return store;
}

struct SplitSpec {
    std::size_t upl = 10;
    std::size_t min_test = 10;
    std::uint64_t seed = 0;
    std::size_t repetitions = 5;

    void validate() const {
        if (upl < 1) throw UsageError("upl must be >= 1");
        if (min_test < 1) throw UsageError("min_test must be >= 1");
        if (repetitions < 1) throw UsageError("repetitions must be >= 1");
    }
};

struct Split {
    RatingsDataset train;
    RatingsDataset test;
    std::vector<UserId> kept_users;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Unbiased draw from [0, n). std::uniform_int_distribution is implementation-defined,
// which would make splits differ between standard libraries.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (true) {
        const std::uint64_t x = rng();
        if (x >= threshold) return x % n;
    }
}

}  // namespace detail

/// User-profile-length split. Users with at least upl + min_test ratings put exactly
/// `upl` uniformly sampled ratings in train and the rest in test; the others are
/// dropped from both. Both outputs keep the input's id space and rating order.
inline Split upl_split(const RatingsDataset& d, const SplitSpec& spec, std::size_t repetition = 0) {
    spec.validate();
    std::mt19937_64 rng(detail::splitmix64(spec.seed ^ detail::splitmix64(repetition + 1)));

    std::vector<std::vector<std::size_t>> rows_of(d.n_users);
    for (std::size_t k = 0; k < d.ratings.size(); ++k) rows_of[d.ratings[k].user].push_back(k);

    std::vector<char> in_train(d.ratings.size(), 0);
    std::vector<char> in_test(d.ratings.size(), 0);
    Split out{d.empty_like(), d.empty_like(), {}};
    for (UserId u = 0; u < d.n_users; ++u) {
        auto rows = rows_of[u];
        if (rows.size() < spec.upl + spec.min_test) continue;
        for (std::size_t k = 0; k < spec.upl; ++k) {
            const auto j = k + detail::uniform_below(rng, rows.size() - k);
            std::swap(rows[k], rows[j]);
        }
        for (std::size_t k = 0; k < rows.size(); ++k) (k < spec.upl ? in_train : in_test)[rows[k]] = 1;
        out.kept_users.push_back(u);
    }
    if (out.kept_users.empty())
        throw EmptySplitError("no user has at least " + std::to_string(spec.upl + spec.min_test) + " ratings");

    for (std::size_t k = 0; k < d.ratings.size(); ++k) {
        if (in_train[k]) out.train.ratings.push_back(d.ratings[k]);
        else if (in_test[k]) out.test.ratings.push_back(d.ratings[k]);
    }
    return out;
}

}  // namespace iterank
