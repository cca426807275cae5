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

#include <random>
#include <sstream>

#include "evopt/ledger.hpp"
#include "support/random_ledger.hpp"

using namespace evopt;

namespace {

Transaction coinbase(std::string id, Timestamp time, std::string addr, Amount amount)
{
    return {std::move(id), time, {}, {{std::move(addr), amount}}, 0};
}

LedgerError::Kind parse_error_kind(const std::string& text)
{
    std::istringstream in(text);
    try {
        parse_ledger(in);
    } catch (const LedgerError& e) {
        return e.kind();
    }
    FAIL("expected a ledger error");
    return LedgerError::Kind::parse;
}

} // namespace

TEST_SUITE("ledger") {

TEST_CASE("single balanced transaction loads")
{
    std::istringstream in(
        R"({"tx":"t0","time":100,"inputs":[],"outputs":[{"addr":"a0","amount":100}],"fee":0})" "\n"
        R"({"tx":"t1","time":200,"inputs":[{"src":"t0","addr":"a0","amount":100}],"outputs":[{"addr":"a2","amount":90}],"fee":10})" "\n");
    const Ledger ledger = parse_ledger(in);
    CHECK(ledger.size() == 2);
    CHECK(ledger.input_total(1) == 100);
    CHECK(ledger.output_total(1) == 90);
    CHECK(ledger.tx(1).fee == 10);
}

TEST_CASE("validation errors carry a kind and line")
{
    const std::string t0 = R"({"tx":"t0","time":100,"inputs":[],"outputs":[{"addr":"a0","amount":100}],"fee":0})" "\n";
    CHECK(parse_error_kind(t0 + R"({"tx":"t1","time":200,"inputs":[{"src":"t0","addr":"a0","amount":100}],"outputs":[{"addr":"a2","amount":95}],"fee":10})")
        == LedgerError::Kind::conservation);
    CHECK(parse_error_kind(t0 + R"({"tx":"t1","time":200,"inputs":[{"src":"tx","addr":"a0","amount":100}],"outputs":[{"addr":"a2","amount":100}],"fee":0})")
        == LedgerError::Kind::dangling_source);
    CHECK(parse_error_kind(t0 + R"({"tx":"t1","time":100,"inputs":[{"src":"t0","addr":"a0","amount":100}],"outputs":[{"addr":"a2","amount":100}],"fee":0})")
        == LedgerError::Kind::provenance_time);
    CHECK(parse_error_kind(t0 + R"({"tx":"t1","time":200,"inputs":[{"src":"t0","addr":"a0","amount":150}],"outputs":[{"addr":"a2","amount":150}],"fee":0})")
        == LedgerError::Kind::overspend);
    CHECK(parse_error_kind(t0 + t0) == LedgerError::Kind::duplicate_id);
    CHECK(parse_error_kind(R"({"tx":"t0","time":100,"inputs":[],"outputs":[],"fee":0})") == LedgerError::Kind::invalid_slot);
    CHECK(parse_error_kind("{not json") == LedgerError::Kind::parse);

    std::istringstream in(t0 + "\n" + "garbage\n");
    try {
        parse_ledger(in);
        FAIL("expected a parse error");
    } catch (const LedgerError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("transactions are sorted by time and indexed per address")
{
    std::vector<Transaction> txs{
        {"t2", 300, {{"t1", "a1", 90}}, {{"a0", 90}}, 0},
        coinbase("t0", 100, "a0", 100),
        {"t1", 200, {{"t0", "a0", 100}}, {{"a1", 90}}, 10},
    };
    const Ledger ledger = Ledger::build(txs);
    REQUIRE(ledger.size() == 3);
    CHECK(ledger.tx(0).id == "t0");
    CHECK(ledger.tx(2).id == "t2");
    CHECK(ledger.index_of("t1") == 1);
    CHECK_FALSE(ledger.find("nope").has_value());
    CHECK_THROWS_AS(ledger.index_of("nope"), std::out_of_range);

    CHECK(ledger.activity("a0").receive == std::vector<TxIndex>{0, 2});
    CHECK(ledger.activity("a0").spend == std::vector<TxIndex>{1});
    CHECK(ledger.activity("unknown").receive.empty());

    // a1 receives in t1 and spends in t2; a cut between them shows only t1.
    const auto a1 = ledger.txs_of_address("a1", 250);
    CHECK(a1.receive == std::vector<TxIndex>{1});
    CHECK(a1.spend.empty());
    CHECK(ledger.txs_of_address("zz", 1000).receive.empty());
}

TEST_CASE("time windows are half-open")
{
    const Ledger ledger = Ledger::build({coinbase("t0", 100, "a", 1), coinbase("t1", 200, "b", 1), coinbase("t2", 300, "c", 1)});
    CHECK(ledger.tx_window(150, 150).empty());
    CHECK(ledger.tx_window(0, 1000).size() == 3);
    CHECK(ledger.tx_window(100, 300) == std::vector<TxIndex>{0, 1});
    CHECK_THROWS_AS(ledger.tx_window(300, 100), std::invalid_argument);
    CHECK(ledger.count_until(200) == 2);
    CHECK(ledger.count_until(99) == 0);
}

TEST_CASE("flows group slots by source and by spender")
{
    std::vector<Transaction> txs{
        {"t0", 100, {}, {{"a", 60}, {"b", 40}}, 0},
        {"t1", 200, {{"t0", "a", 60}, {"t0", "b", 40}}, {{"c", 100}}, 0},
    };
    const Ledger ledger = Ledger::build(txs);
    REQUIRE(ledger.sources(1).size() == 1);
    CHECK(ledger.sources(1)[0].tx == 0);
    CHECK(ledger.sources(1)[0].amount == 100);
    REQUIRE(ledger.spenders(0).size() == 1);
    CHECK(ledger.spenders(0)[0].amount == 100);
}

TEST_CASE("ledger and labels round-trip through their file formats")
{
    std::mt19937_64 rng(3);
    const auto txs = testing::random_transactions(rng);
    const Ledger ledger = Ledger::build(txs);
    std::stringstream buf;
    write_ledger(buf, ledger.transactions());
    const Ledger again = parse_ledger(buf);
    REQUIRE(again.size() == ledger.size());
    for (TxIndex i = 0; i < ledger.size(); ++i)
        CHECK(again.tx(i) == ledger.tx(i));

    std::vector<LabelRecord> labels{{"a0", 1, 100}, {"a1", 0, 200}};
    std::stringstream lb;
    write_labels(lb, labels);
    CHECK(lb.str().rfind("address,label,first_seen_time", 0) == 0);
    CHECK(parse_labels(lb) == labels);

    std::istringstream bad("address,label,first_seen_time\na0,2,100\n");
    CHECK_THROWS_AS(parse_labels(bad), LedgerError);
}

TEST_CASE("random ledgers satisfy every invariant")
{
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const auto txs = testing::random_transactions(rng);
        const Ledger ledger = Ledger::build(txs);
        for (TxIndex i = 0; i < ledger.size(); ++i) {
            const auto& tx = ledger.tx(i);
            if (!tx.is_coinbase())
                CHECK(tx.input_total() == tx.output_total() + tx.fee);
            for (const auto& l : ledger.sources(i))
                CHECK(ledger.time(l.tx) < tx.time);
        }
    }
}

}
