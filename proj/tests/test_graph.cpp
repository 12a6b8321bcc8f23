#include <gtest/gtest.h>

#include <random>
#include <fstream>
#include <sstream>

#include "iterank/graph.hpp"
#include "iterank/oracle.hpp"
#include "test_support.hpp"

using namespace iterank;

namespace {

constexpr ItemId A = 0, B = 1, C = 2;

UPNet two_user_graph() {
    PreferenceStore s(2, 3);
    s.assign(0, {{A, B}});
    s.assign(1, {{A, B}, {B, C}});
    return UPNet::build(s);
}

}  // namespace

TEST(UPNet, BuildCountsNodesAndEdges) {
    const auto g = two_user_graph();
    EXPECT_EQ(g.n_prefs(), 2u);
    EXPECT_EQ(g.n_edges(), 3u);
    EXPECT_EQ(g.pref_degree(*g.index_of({A, B})), 2u);
    EXPECT_FALSE(g.index_of({B, A}).has_value());

    PreferenceStore single(1, 5);
    single.assign(0, {{0, 1}, {0, 2}, {3, 4}, {1, 4}});
    const auto h = UPNet::build(single);
    EXPECT_EQ(h.n_prefs(), 4u);
    EXPECT_EQ(h.n_edges(), 4u);
}

TEST(UPNet, EmptyStoreIsAnError) {
    EXPECT_THROW(UPNet::build(PreferenceStore(3, 3)), EmptyGraphError);
}

TEST(UPNetOperators, UniformNormalization) {
    const auto g = two_user_graph();
    const auto [L, M] = upnet_operators(g);
    const auto ab = *g.index_of({A, B});
    std::vector<double> col;
    L.for_each_in_column(ab, [&](std::size_t, double w) { col.push_back(w); });
    EXPECT_EQ(col, (std::vector<double>{0.5, 0.5}));

    PreferenceStore s(1, 5);
    s.assign(0, {{0, 1}, {0, 2}, {3, 4}, {1, 4}});
    const auto [L4, M4] = upnet_operators(UPNet::build(s));
    std::size_t count = 0;
    M4.for_each_in_column(0, [&](std::size_t, double w) {
        EXPECT_EQ(w, 0.25);
        ++count;
    });
    EXPECT_EQ(count, 4u);
}

TEST(UPNetOperators, ColumnsSumToOneAndMatchDenseConstruction) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = UPNet::build(synth::random_nonempty_store(rng, 20, 15));
        const auto [L, M] = upnet_operators(g);
        for (std::size_t k = 0; k < L.cols(); ++k) EXPECT_NEAR(column_sum(L, k), 1.0, 1e-12);
        for (std::size_t u = 0; u < M.cols(); ++u)
            if (g.user_degree(static_cast<UserId>(u)) > 0) EXPECT_NEAR(column_sum(M, u), 1.0, 1e-12);
            else EXPECT_EQ(column_sum(M, u), 0.0);

        const auto A = oracle::dense_upnet_adjacency(g);
        const auto dL = oracle::column_normalized(A);
        const auto dM = oracle::column_normalized(oracle::transposed(A));
        const auto sL = oracle::to_dense(L);
        const auto sM = oracle::to_dense(M);
        for (std::size_t k = 0; k < dL.a.size(); ++k) EXPECT_NEAR(sL.a[k], dL.a[k], 1e-15);
        for (std::size_t k = 0; k < dM.a.size(); ++k) EXPECT_NEAR(sM.a[k], dM.a[k], 1e-15);
    }
}

TEST(UPNetOperators, SparseApplyMatchesDenseProduct) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = UPNet::build(synth::random_nonempty_store(rng, synth::pick(rng, 1, 10),
                                                                   synth::pick(rng, 2, 10)));
        const auto [L, M] = upnet_operators(g);
        std::vector<double> x(g.n_prefs()), y(g.n_users());
        for (auto& v : x) v = unit(rng);
        L.apply(x, y);
        const auto ref = oracle::to_dense(L) * x;
        for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y[k], ref[k], 1e-12);

        std::vector<double> xu(g.n_users()), yp(g.n_prefs());
        for (auto& v : xu) v = unit(rng);
        M.apply(xu, yp);
        const auto refp = oracle::to_dense(M) * xu;
        for (std::size_t k = 0; k < yp.size(); ++k) EXPECT_NEAR(yp[k], refp[k], 1e-12);
    }
}

TEST(PRNet, CountsAndEncoding) {
    const PRNet net(3);
    EXPECT_EQ(net.n_preferences(), 6u);
    EXPECT_EQ(net.n_representatives(), 6u);
    EXPECT_EQ(net.encode({2, 0}), 6u);
    EXPECT_EQ(net.decode(6), (Preference{2, 0}));
    EXPECT_FALSE(net.is_preference(4));
    EXPECT_TRUE(net.is_preference(5));
    EXPECT_THROW(PRNet(1), DataError);
}

TEST(PRNet, TransitionGivesHalfToEachSupportedRepresentative) {
    const std::size_t n = 5;
    const PRNet net(n);
    const PrnetT T(n);
    for (ItemId i = 0; i < n; ++i) {
        for (ItemId j = 0; j < n; ++j) {
            if (i == j) continue;
            std::vector<std::pair<std::size_t, double>> col;
            T.for_each_in_column(net.encode({i, j}), [&](std::size_t r, double w) { col.emplace_back(r, w); });
            ASSERT_EQ(col.size(), 2u);
            std::sort(col.begin(), col.end());
            const auto sup = PRNet::supported({i, j});
            std::vector<std::pair<std::size_t, double>> expect{{sup[0], 0.5}, {sup[1], 0.5}};
            std::sort(expect.begin(), expect.end());
            EXPECT_EQ(col, expect);
            EXPECT_EQ(sup[0], PRNet::desirable(i));
            EXPECT_EQ(sup[1], PRNet::undesirable(j));
        }
    }
}

TEST(PRNet, WColumnsHaveNMinusOneEntriesAndMatchDense) {
    const std::size_t n = 4;
    const PrnetW W(n);
    for (std::size_t r = 0; r < 2 * n; ++r) {
        std::size_t count = 0;
        W.for_each_in_column(r, [&](std::size_t, double w) {
            EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
            ++count;
        });
        EXPECT_EQ(count, 3u);
    }
    const auto dense = oracle::column_normalized(oracle::dense_prnet_incidence(n));
    const auto universe = oracle::preference_universe(n);
    const auto sparse = oracle::to_dense(W);
    const PRNet net(n);
    for (std::size_t k = 0; k < universe.size(); ++k)
        for (std::size_t r = 0; r < 2 * n; ++r) EXPECT_EQ(sparse(net.encode(universe[k]), r), dense(k, r));
}

TEST(PRNet, ImplicitApplyMatchesDense) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t n = 2; n <= 10; ++n) {
        const auto [W, T] = prnet_operators(n);
        std::vector<double> x(2 * n), y(n * n);
        for (auto& v : x) v = unit(rng);
        W.apply(x, y);
        const auto ref = oracle::to_dense(W) * x;
        for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y[k], ref[k], 1e-12);

        std::vector<double> xp(n * n, 0.0), yr(2 * n);
        for (std::size_t k = 0; k < n * n; ++k)
            if (k / n != k % n) xp[k] = unit(rng);
        T.apply(xp, yr);
        const auto refr = oracle::to_dense(T) * xp;
        for (std::size_t k = 0; k < yr.size(); ++k) EXPECT_NEAR(yr[k], refr[k], 1e-12);
        for (std::size_t r = 0; r < 2 * n; ++r) EXPECT_NEAR(column_sum(W, r), 1.0, 1e-12);
    }
}

TEST(PRNet, AddItemGrowsUniverse) {
    PRNet net(3);
    EXPECT_EQ(net.add_item(), 3u);
    EXPECT_EQ(net.n_items(), 4u);
    EXPECT_EQ(net.n_preferences(), 12u);
    const PrnetW W(net.n_items());
    std::size_t count = 0;
    W.for_each_in_column(PRNet::desirable(3), [&](std::size_t, double) { ++count; });
    EXPECT_EQ(count, 3u);
}

TEST(UPNetUpdates, AddPreferenceUpdatesDegrees) {
    PreferenceStore s(2, 6);
    s.assign(0, {{0, 1}, {2, 3}, {4, 5}});
    s.assign(1, {{0, 1}});
    auto g = UPNet::build(s);
    EXPECT_TRUE(g.add_preference(0, {A, C}));
    EXPECT_EQ(g.user_degree(0), 4u);
    const auto [L, M] = upnet_operators(g);
    M.for_each_in_column(0, [&](std::size_t, double w) { EXPECT_EQ(w, 0.25); });

    const auto edges = g.n_edges();
    EXPECT_FALSE(g.add_preference(0, {A, C}));
    EXPECT_EQ(g.n_edges(), edges);
    EXPECT_EQ(g.user_degree(0), 4u);

    EXPECT_THROW(g.add_preference(0, {C, A}), ConflictError);
    EXPECT_THROW(g.add_preference(0, {2, 2}), DataError);
}

TEST(UPNetUpdates, AddUserAndItem) {
    UPNet g;
    EXPECT_EQ(g.add_user(), 0u);
    EXPECT_EQ(g.n_edges(), 0u);
    UPNet h(2, 3);
    EXPECT_EQ(h.add_item(), 3u);
    EXPECT_EQ(h.n_items(), 4u);
    EXPECT_EQ(PRNet(h.n_items()).n_preferences(), 12u);
}

TEST(UPNetUpdates, ReplayInAnyOrderEqualsBuild) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t nu = synth::pick(rng, 1, 10), ni = synth::pick(rng, 2, 10);
        const auto store = synth::random_nonempty_store(rng, nu, ni);
        const auto built = UPNet::build(store);
        auto edges = built.edges();
        std::shuffle(edges.begin(), edges.end(), rng);
        UPNet replay(nu, ni);
        for (const auto& [u, p] : edges) EXPECT_TRUE(replay.add_preference(u, p));
        EXPECT_EQ(replay, built);
    }
}

TEST(UPNetSnapshot, RoundTrip) {
    std::mt19937_64 rng(5);
    const auto g = UPNet::build(synth::random_nonempty_store(rng, 8, 7));
    std::stringstream buf;
    save_snapshot(buf, g);
    const auto bytes = buf.str();
    EXPECT_EQ(bytes.substr(0, 4), "IRUP");
    EXPECT_EQ(bytes.size(), 20 + 8 * g.n_edges());
    EXPECT_EQ(load_snapshot(buf), g);

    std::stringstream bad("XXXX");
    EXPECT_THROW(load_snapshot(bad), DataError);
}

TEST(Reachability, FollowsSharedPreferences) {
    PreferenceStore s(4, 4);
    s.assign(0, {{0, 1}});
    s.assign(1, {{0, 1}, {2, 3}});
    s.assign(2, {{2, 3}});
    s.assign(3, {{1, 2}});
    const auto r = reachable_users(UPNet::build(s), 0);
    EXPECT_EQ(r, (std::vector<char>{1, 1, 1, 0}));
}

TEST(UPNet, MovieLensEdgeCountMatchesPairCount) {
    const std::string path = ITERANK_ML100K_PATH;
    if (!std::ifstream(path)) GTEST_SKIP() << "ML-100K not found at " << path;
    const auto data = load_ratings(path, RatingsFormat::tsv_umr);
    const auto split = upl_split(data, {50, 10, 3, 1});
    std::size_t expected = 0;
    for (const auto& group : split.train.by_user())
        for (std::size_t a = 0; a < group.size(); ++a)
            for (std::size_t b = a + 1; b < group.size(); ++b) expected += group[a].value != group[b].value;
    const auto g = UPNet::build(derive_preferences(split.train));
    EXPECT_EQ(g.n_edges(), expected);
}

TEST(UplSplit, MovieLensLongProfilesMatchDirectCount) {
    const std::string path = ITERANK_ML100K_PATH;
    if (!std::ifstream(path)) GTEST_SKIP() << "ML-100K not found at " << path;
    const auto data = load_ratings(path, RatingsFormat::tsv_umr);
    std::vector<std::size_t> per_user(data.n_users, 0);
    for (const auto& r : data.ratings) ++per_user[r.user];
    const auto longest = *std::max_element(per_user.begin(), per_user.end());
    for (std::size_t upl : {500u, 700u, 800u}) {
        const auto expected = static_cast<std::size_t>(
            std::count_if(per_user.begin(), per_user.end(), [&](std::size_t n) { return n >= upl + 10; }));
        if (expected == 0) {
            EXPECT_THROW(upl_split(data, {upl, 10, 0, 1}), EmptySplitError) << "upl=" << upl;
        } else {
            EXPECT_EQ(upl_split(data, {upl, 10, 0, 1}).kept_users.size(), expected) << "upl=" << upl;
        }
    }
    EXPECT_LT(longest, 810u);
}
