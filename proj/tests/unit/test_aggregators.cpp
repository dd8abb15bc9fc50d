#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "qfl/aggregators.hpp"
#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

using namespace qfl;
using namespace qfl::agg;

namespace {

std::vector<ClientUpdate> make(const std::vector<std::vector<double>>& deltas) {
    std::vector<ClientUpdate> out;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        out.push_back({static_cast<int>(i), 0, deltas[i], 1.0 / static_cast<double>(deltas.size())});
    return out;
}

}  // namespace

TEST_CASE("fedavg is the weighted mean and normalization rescales weights") {
    std::vector<ClientUpdate> u{{0, 0, {1, 2}, 1.0}, {1, 0, {3, 6}, 3.0}};
    normalize_weights(u);
    CHECK(u[0].weight == doctest::Approx(0.25));
    const auto g = fedavg(u);
    CHECK(g[0] == doctest::Approx(2.5));
    CHECK(g[1] == doctest::Approx(5.0));
    std::vector<ClientUpdate> empty;
    CHECK_THROWS_AS(normalize_weights(empty), ProtocolError);
    std::vector<ClientUpdate> neg{{0, 0, {1}, -1.0}};
    CHECK_THROWS_AS(normalize_weights(neg), ProtocolError);
    std::vector<ClientUpdate> ragged{{0, 0, {1}, 1.0}, {1, 0, {1, 2}, 1.0}};
    CHECK_THROWS_AS(normalize_weights(ragged), ProtocolError);
}

TEST_CASE("Krum and Multi-Krum agree with brute force") {
    Rng rng(1);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> nsize(3, 10);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = nsize(rng);
        const int f = std::uniform_int_distribution<int>(0, n - 3)(rng);
        std::vector<std::vector<double>> v(n, std::vector<double>(5));
        for (auto& row : v)
            for (auto& x : row) x = nd(rng) * (1 + trial % 3);
        const auto u = make(v);
        const auto ref = oracle::krum_scores(v, f);
        const auto got = krum_scores(u, f);
        for (int i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        const auto best = std::min_element(ref.begin(), ref.end()) - ref.begin();
        CHECK(krum(u, f) == v[best]);
        const int m = std::max(1, n - f - 2);
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ref[a] < ref[b]; });
        std::vector<int> expect(order.begin(), order.begin() + m);
        std::sort(expect.begin(), expect.end());
        auto sel = multi_krum_selection(u, f, m);
        std::sort(sel.begin(), sel.end());
        CHECK(sel == expect);
        const auto mk = multi_krum(u, f, m);
        for (int k = 0; k < 5; ++k) {
            double s = 0.0;
            for (int i : expect) s += v[i][k];
            CHECK(mk[k] == doctest::Approx(s / m).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(krum(make({{1.0}, {2.0}, {3.0}}), 1), ConfigError);
}

TEST_CASE("Krum ties go to the lowest client id") {
    const auto u = make({{1.0}, {1.0}, {1.0}, {1.0}});
    const auto sel = multi_krum_selection(u, 1, 1);
    CHECK(sel == std::vector<int>{0});
}

TEST_CASE("FoolsGold zeroes identical sybils") {
    AggregatorState state;
    const auto u = make({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0.6, 0.8}});
    const auto g = foolsgold(u, state);
    const auto w = foolsgold_weights(u, state);
    CHECK(w == std::vector<double>{0.0, 0.0, 1.0, 1.0});
    CHECK(g[0] == doctest::Approx(0.0));
    CHECK(g[1] == doctest::Approx(0.8));
    CHECK(g[2] == doctest::Approx(0.4));
}

TEST_CASE("FoolsGold weights with pardoning, computed by hand") {
    // cs(s1,s2) = 0.8, cs(s2,h1) = 0.6, others 0. h1 is pardoned against s2:
    // 0.6 * 0.6 / 0.8 = 0.45. wv = [0.2, 0.2, 0.55, 1] -> logit + 0.5.
    AggregatorState state;
    const auto u = make({{1, 0, 0}, {0.8, 0.6, 0}, {0, 1, 0}, {0, 0, 1}});
    state.accumulate(u);
    const auto w = foolsgold_weights(u, state);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == 0.0);
    CHECK(w[2] == doctest::Approx(std::log(0.55 / 0.45) + 0.5).epsilon(1e-12));
    CHECK(w[3] == 1.0);
}

TEST_CASE("FoolsGold accumulates history across rounds") {
    AggregatorState state;
    foolsgold(make({{1, 0}, {0, 1}, {1, 1}}), state);
    foolsgold(make({{1, 0}, {0, 1}, {1, 1}}), state);
    CHECK(state.history.at(2) == std::vector<double>{2, 2});
}

TEST_CASE("Mud-HoG keeps the majority direction") {
    AggregatorState state;
    const auto u = make({{1, 0.1}, {1, -0.1}, {0.9, 0}, {1.1, 0.05}, {-1, 0}, {-1, 0.1}});
    const auto labels = mudhog_clusters(u, [&] { AggregatorState s; s.accumulate(u); return s; }(), {});
    REQUIRE(labels.size() == 6);
    CHECK(labels[0] == labels[3]);
    CHECK(labels[4] == labels[5]);
    CHECK(labels[0] != labels[4]);
    const auto g = mudhog(u, state);
    CHECK(g[0] == doctest::Approx((1 + 1 + 0.9 + 1.1) / 4));
    AggregatorState same;
    const auto tight = make({{1, 0}, {1, 0.01}, {1, -0.01}});
    same.accumulate(tight);
    CHECK(mudhog_clusters(tight, same, {}).empty());
}

TEST_CASE("FLGuardian drops norm outliers and opposing updates") {
    std::vector<std::vector<double>> v{{1, 0}, {1.1, 0.1}, {0.9, -0.1}, {1, 0.05}, {1.05, 0}, {0.95, 0}, {1, 0.1},
                                       {60, 0}, {-1, 0}};
    const auto u = make(v);
    const auto ids = flguardian_survivors(u, {});
    CHECK(ids == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
    const auto g = flguardian_screen(u, {});
    CHECK(g[0] == doctest::Approx((1 + 1.1 + 0.9 + 1 + 1.05 + 0.95 + 1) / 7));
    const auto med = coordinate_median(make({{1, 5}, {3, 2}, {2, 9}, {10, 0}}));
    CHECK(med == std::vector<double>{2.5, 3.5});
    CHECK_THROWS_AS(flguardian_survivors(make({{1.0}, {2.0}}), {}), ConfigError);
}

TEST_CASE("server apply rejects non-finite aggregates") {
    std::vector<double> theta{1, 2};
    server_apply(theta, std::vector<double>{0.5, -1}, 2.0);
    CHECK(theta == std::vector<double>{2, 0});
    CHECK_THROWS_AS(server_apply(theta, std::vector<double>{std::numeric_limits<double>::infinity(), 0}, 1.0),
                    NumericFault);
    CHECK(theta == std::vector<double>{2, 0});
    CHECK_THROWS_AS(server_apply(theta, std::vector<double>{1}, 1.0), ShapeError);
}

TEST_CASE("aggregator front-end resolves f and sorts by id") {
    Aggregator a(Rule::MultiKrum, {}, 0.2);
    CHECK(a.krum_f(5) == 1);
    CHECK(a.krum_f(20) == 4);
    std::vector<ClientUpdate> u{{3, 0, {3.0}, 1}, {0, 0, {0.0}, 1}, {1, 0, {1.0}, 1}, {2, 0, {2.0}, 1}, {4, 0, {100.0}, 1}};
    // f = 1, m = 2: the two most central of {0, 1, 2, 3, 100}.
    const auto g = a.aggregate(u);
    CHECK(g[0] == doctest::Approx(1.5));
    CHECK(record_name(Rule::MudHog) == "mudhog-proxy");
    CHECK(record_name(Rule::FlGuardian) == "flguardian-proxy");
    CHECK(record_name(Rule::Krum) == "krum");
    CHECK(parse_rule("foolsgold") == Rule::FoolsGold);
    CHECK_THROWS_AS(parse_rule("median"), ConfigError);
}
