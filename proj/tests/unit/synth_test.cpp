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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "evopt/graphs.hpp"
#include "evopt/synth.hpp"
#include "support/oracle.hpp"

using namespace evopt;

namespace {

const SynthResult& default_synth()
{
    static const SynthResult r = generate(SynthConfig{});
    return r;
}

std::string ledger_text(const SynthResult& r)
{
    std::ostringstream out;
    write_ledger(out, r.txs);
    return out.str();
}

} // namespace

TEST_SUITE("synth") {

TEST_CASE("no malicious fraction gives only negatives")
{
    SynthConfig c;
    c.addresses = 60;
    c.malicious_fraction = 0;
    const auto r = generate(c);
    REQUIRE(r.labels.size() == 60);
    for (const auto& l : r.labels)
        CHECK(l.label == 0);
}

TEST_CASE("fixed seed gives a byte-identical ledger")
{
    SynthConfig c;
    c.addresses = 80;
    const auto a = generate(c);
    const auto b = generate(c);
    CHECK(ledger_text(a) == ledger_text(b));
    c.seed = 8;
    CHECK(ledger_text(generate(c)) != ledger_text(a));
}

TEST_CASE("generated ledgers pass every ledger check")
{
    const auto& r = default_synth();
    std::istringstream in(ledger_text(r));
    const Ledger ledger = parse_ledger(in);
    CHECK(ledger.size() == r.txs.size());
    for (const auto& tx : r.txs) {
        Amount in_total = 0, out_total = 0;
        for (const auto& i : tx.inputs)
            in_total += i.amount;
        for (const auto& o : tx.outputs)
            out_total += o.amount;
        if (!tx.inputs.empty())
            CHECK(in_total == out_total + tx.fee);
    }
}

TEST_CASE("class counts and mix follow the config")
{
    const auto& r = default_synth();
    std::size_t pos = 0;
    std::map<Pattern, std::size_t> counts;
    for (const auto& l : r.labels) {
        pos += l.label;
        ++counts[r.patterns.at(l.address)];
        CHECK(l.label == (is_malicious(r.patterns.at(l.address)) ? 1 : 0));
    }
    CHECK(r.labels.size() == 1000);
    CHECK(pos == 100);
    CHECK(counts[Pattern::hack] == 35);
    CHECK(counts[Pattern::ransomware] == 35);
    CHECK(counts[Pattern::darknet] == 30);
    CHECK(counts[Pattern::ordinary] == 495);
    CHECK(std::is_sorted(r.labels.begin(), r.labels.end(),
        [](const auto& a, const auto& b) { return std::tie(a.first_seen, a.address) < std::tie(b.first_seen, b.address); }));
}

TEST_CASE("darknet backward paths are long")
{
    const auto& r = default_synth();
    const Ledger ledger = Ledger::build(r.txs);
    const TraceParams p;
    const auto s = describe(ledger, r.labels, p, 24, r.patterns);
    const std::size_t mode = s.groups.at("darknet").backward_length_mode();
    CHECK(mode >= 6);
    CHECK(mode <= 10);
    CHECK(s.positives + s.negatives == 1000);
    CHECK(s.pn_ratio == doctest::Approx(0.1));
    CHECK(s.groups.at("label=1").addresses == 100);
}

TEST_CASE("describe matches the path oracle")
{
    const auto& r = default_synth();
    const Ledger ledger = Ledger::build(r.txs);
    const TraceParams p;
    std::vector<LabelRecord> some;
    for (const auto& l : r.labels)
        if (r.patterns.at(l.address) == Pattern::darknet || r.patterns.at(l.address) == Pattern::merchant)
            if (some.size() < 12)
                some.push_back(l);
    const auto s = describe(ledger, some, p, 24);
    std::map<std::size_t, std::size_t> backward, forward;
    for (const auto& l : some) {
        const Timestamp as_of = l.first_seen + 24 * seconds_per_hour;
        for (const auto& tx : r.txs) {
            if (tx.time > as_of)
                continue;
            const bool receives = std::any_of(tx.outputs.begin(), tx.outputs.end(), [&](const auto& o) { return o.addr == l.address; });
            const bool spends = std::any_of(tx.inputs.begin(), tx.inputs.end(), [&](const auto& i) { return i.addr == l.address; });
            if (receives)
                for (const auto& path : evopt::testing::oracle_backward(r.txs, tx.id, p.theta, p.span))
                    ++backward[path.size()];
            if (spends)
                for (const auto& path : evopt::testing::oracle_forward(r.txs, tx.id, p.theta, p.span, as_of))
                    ++forward[path.size()];
        }
    }
    std::map<std::size_t, std::size_t> got_b, got_f;
    for (const auto& [name, g] : s.groups) {
        for (const auto& [len, k] : g.backward_lengths)
            got_b[len] += k;
        for (const auto& [len, k] : g.forward_lengths)
            got_f[len] += k;
    }
    CHECK(got_b == backward);
    CHECK(got_f == forward);
}

TEST_CASE("hack fan-outs converge at the planted sink")
{
    const auto& r = default_synth();
    const Ledger ledger = Ledger::build(r.txs);
    std::size_t ok = 0, n = 0;
    for (const auto& l : r.labels) {
        if (r.patterns.at(l.address) != Pattern::hack)
            continue;
        ++n;
        const auto set = build_path_set(ledger, l.address, l.first_seen + 24 * seconds_per_hour, TraceParams{});
        const auto g = build_path_graph(set.forward(), Direction::forward);
        const TxIndex sink = ledger.index_of(r.sinks.at(l.address));
        ok += std::any_of(g.components.begin(), g.components.end(), [&](const auto& c) { return c.terminal == sink && c.members.size() >= 2; });
    }
    REQUIRE(n > 0);
    CHECK(static_cast<double>(ok) >= 0.95 * static_cast<double>(n));
}

TEST_CASE("infeasible configs are rejected")
{
    SynthConfig c;
    c.malicious_fraction = 1.5;
    CHECK_THROWS_AS(generate(c), std::invalid_argument);
    c = SynthConfig{};
    c.addresses = 4;
    CHECK_THROWS_AS(generate(c), std::invalid_argument);
    c = SynthConfig{};
    c.horizon = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SynthConfig{};
    c.shadow_min = 11;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("config JSON round-trip and written artifacts")
{
    SynthConfig c;
    c.addresses = 50;
    c.seed = 99;
    c.benign_mix = {1, 0, 0, 0};
    const SynthConfig back = synth_config_from_json(to_json(c));
    CHECK(back.addresses == 50);
    CHECK(back.seed == 99);
    CHECK(back.benign_mix == c.benign_mix);

    const auto r = generate(c);
    const auto dir = std::filesystem::temp_directory_path() / "evopt_synth_test";
    std::filesystem::remove_all(dir);
    write_synth(dir.string(), r);
    const Ledger ledger = load_ledger((dir / "ledger.jsonl").string());
    CHECK(ledger.size() == r.txs.size());
    CHECK(load_labels((dir / "labels.csv").string()).size() == 50);
    std::ifstream m(dir / "manifest.json");
    const auto j = nlohmann::json::parse(m);
    CHECK(j["seed"] == 99);
    CHECK(j["labels"]["positive"] == 5);
    std::filesystem::remove_all(dir);
}

}
