// Copyright 2026 The evopt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "evopt/features.hpp"
#include "support/random_ledger.hpp"

using namespace evopt;

namespace {

constexpr Timestamp h = seconds_per_hour;

using Row = std::array<double, 2>;

std::vector<Row> ramp(std::size_t n)
{
    std::vector<Row> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({static_cast<double>(i), 10.0 * static_cast<double>(i)});
    return out;
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("address without history has a zero vector")
{
    const Ledger ledger = Ledger::build({{"t0", h, {}, {{"a", 100}}, 0}});
    CHECK(address_features(ledger, "nobody", 10 * h) == AddressFeatureVector{});
    CHECK(address_features(ledger, "a", h - 1) == AddressFeatureVector{});
}

TEST_CASE("one receive, two hours later")
{
    const Ledger ledger = Ledger::build({{"t0", h, {}, {{"a", 100}}, 0}});
    const auto f = address_features(ledger, "a", 3 * h);
    CHECK(f[0] == 100);
    CHECK(f[1] == 1);
    CHECK(f[2] == 0);
    CHECK(f[3] == 1);
    CHECK(f[4] == 0);
    CHECK(f[5] == 100);
    CHECK(f[6] == 0);
    CHECK(f[7] == doctest::Approx(2.0));
    // One active hour over a two-hour life.
    CHECK(f[8] == doctest::Approx(0.5));
}

TEST_CASE("receive then spend")
{
    const Ledger ledger = Ledger::build({
        {"t0", h, {}, {{"a", 100}}, 0},
        {"t1", 3 * h + 60, {{"t0", "a", 100}}, {{"b", 70}, {"a", 20}}, 10},
    });
    const auto f = address_features(ledger, "a", 5 * h);
    CHECK(f[0] == doctest::Approx(20));
    CHECK(f[1] == 2);
    CHECK(f[2] == 1);
    CHECK(f[3] == doctest::Approx(2.0 / 3.0));
    CHECK(f[5] == 100);
    CHECK(f[6] == 100);
    CHECK(f[7] == doctest::Approx(4.0));
    CHECK(f[8] == doctest::Approx(2.0 / 4.0));
}

TEST_CASE("amount-typed entries scale with amounts, counts do not")
{
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        auto txs = testing::random_transactions(rng);
        auto scaled = txs;
        for (auto& tx : scaled) {
            for (auto& in : tx.inputs)
                in.amount *= 10;
            for (auto& out : tx.outputs)
                out.amount *= 10;
            tx.fee *= 10;
        }
        const Ledger a = Ledger::build(txs);
        const Ledger b = Ledger::build(scaled);
        const Timestamp t = a.time(static_cast<TxIndex>(a.size() - 1));
        for (const auto& addr : a.addresses()) {
            const auto fa = address_features(a, addr, t);
            const auto fb = address_features(b, addr, t);
            for (std::size_t k : {0u, 5u, 6u})
                CHECK(fb[k] == doctest::Approx(10 * fa[k]));
            for (std::size_t k : {1u, 2u, 3u, 4u, 7u, 8u})
                CHECK(fb[k] == fa[k]);
            CHECK(address_features(a, addr, t) == fa);
        }
    }
}

TEST_CASE("tx features on a three-tx chain")
{
    const Ledger ledger = Ledger::build({
        {"t0", h, {}, {{"a", 300}}, 0},
        {"t1", 2 * h, {{"t0", "a", 300}}, {{"b", 200}, {"c", 90}}, 10},
        {"t2", 3 * h, {{"t1", "b", 200}}, {{"d", 200}}, 0},
    });
    AssetTransferPath p;
    p.direction = Direction::backward;
    p.anchor = 2;
    p.nodes = {{0, 1.0}, {1, 1.0}, {2, 1.0}};

    const auto terminal = tx_features(ledger, p, 0, 3 * h);
    CHECK(terminal[0] == 0);
    CHECK(terminal[1] == 1.0);
    CHECK(terminal[2] == 300);
    CHECK(terminal[4] == 0);
    CHECK(terminal[9] == 300);
    CHECK(terminal[14] == 0);
    CHECK(terminal[15] == 1);

    const auto mid = tx_features(ledger, p, 1, 3 * h);
    CHECK(mid[0] == 1);
    CHECK(mid[2] == 200);
    CHECK(mid[3] == 10);
    CHECK(mid[4] == 300);
    CHECK(mid[9] == 290);
    CHECK(mid[10] == 200);
    CHECK(mid[11] == 90);
    CHECK(mid[12] == 145);
    CHECK(mid[13] == doctest::Approx(55.0 * 55.0));

    const auto anchor = tx_features(ledger, p, 2, 3 * h);
    CHECK(anchor[0] == 2);
    CHECK(anchor[2] == 0);
    // Single input and output: min = max = avg, zero variance.
    CHECK(anchor[5] == anchor[6]);
    CHECK(anchor[6] == anchor[7]);
    CHECK(anchor[8] == 0);
    CHECK(anchor[13] == 0);
    CHECK_THROWS_AS(tx_features(ledger, p, 3, 3 * h), std::out_of_range);
    CHECK(path_features(ledger, p, 3 * h).size() == 3);
}

TEST_CASE("uniform resampling")
{
    const auto same = ramp(6);
    CHECK(uniform_resample<Row>(same, 6) == same);

    const auto twelve = ramp(12);
    const auto down = uniform_resample<Row>(twelve, 6);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(down[i][0] == doctest::Approx((2.0 * i + 2.0 * i + 1) / 2));

    const auto three = ramp(3);
    const auto up = uniform_resample<Row>(three, 6);
    const std::vector<Row> expected{three[0], three[0], three[1], three[1], three[2], three[2]};
    CHECK(up == expected);

    CHECK_THROWS_AS(uniform_resample<Row>(std::vector<Row>{}, 6), std::invalid_argument);
    CHECK_THROWS_AS(uniform_resample<Row>(three, 0), std::invalid_argument);
}

TEST_CASE("resample windows cover every source node")
{
    for (std::size_t lo = 1; lo <= 64; ++lo)
        for (std::size_t lu = 1; lu <= 64; ++lu) {
            std::vector<int> seen(lo, 0);
            for (std::size_t i = 0; i < lu; ++i) {
                const auto [first, last] = resample_window(i, lo, lu);
                REQUIRE(first <= last);
                REQUIRE(last < lo);
                for (std::size_t k = first; k <= last; ++k)
                    seen[k] = 1;
            }
            CHECK(std::count(seen.begin(), seen.end(), 0) == 0);
        }
}

TEST_CASE("resampling keeps the mean when the length divides")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (std::size_t lu : {1u, 2u, 3u, 6u})
        for (std::size_t mult : {1u, 2u, 5u}) {
            std::vector<Row> seq;
            for (std::size_t i = 0; i < lu * mult; ++i)
                seq.push_back({g(rng), g(rng)});
            const auto out = uniform_resample<Row>(seq, lu);
            for (std::size_t c = 0; c < 2; ++c) {
                double a = 0, b = 0;
                for (const auto& r : seq)
                    a += r[c];
                for (const auto& r : out)
                    b += r[c];
                CHECK(b / static_cast<double>(lu) == doctest::Approx(a / static_cast<double>(seq.size())));
            }
        }
}

TEST_CASE("scaler standardizes signed logs")
{
    const std::vector<double> rows{0, -10, 100, 5, 1000, 1};
    const auto s = FeatureScaler::fit(rows, 2);
    const double l0 = std::log1p(0.0), l1 = std::log1p(100.0), l2 = std::log1p(1000.0);
    const double mean = (l0 + l1 + l2) / 3;
    CHECK(s.mean()[0] == doctest::Approx(mean));
    std::vector<double> x = rows;
    s.transform(x);
    double m0 = 0, v0 = 0;
    for (std::size_t r = 0; r < 3; ++r)
        m0 += x[r * 2];
    for (std::size_t r = 0; r < 3; ++r)
        v0 += x[r * 2] * x[r * 2];
    CHECK(m0 == doctest::Approx(0).epsilon(1e-12));
    CHECK(v0 / 3 == doctest::Approx(1));
    CHECK(x[1] < 0);

    // Constant columns keep unit spread.
    const auto flat = FeatureScaler::fit(std::vector<double>{3, 3, 3}, 1);
    CHECK(flat.stddev()[0] == 1.0);
    CHECK_THROWS_AS(FeatureScaler::fit(rows, 4), std::invalid_argument);
}

TEST_CASE("feature headers keep the fixed order")
{
    std::ostringstream a, t;
    write_address_feature_header(a);
    write_tx_feature_header(t);
    CHECK(a.str() == "balance,receive_count,spend_count,receive_ratio,spend_ratio,max_receive_amount,max_spend_amount,"
                     "life_span_hours,active_rate");
    CHECK(t.str().rfind("hop_interval,score,prev_input_amount,fee,", 0) == 0);
}

}
