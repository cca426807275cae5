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

#include "evopt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace evopt {

namespace {

constexpr Timestamp origin_time = 1'700'000'000;
constexpr Timestamp minute = 60;
constexpr double median_amount = 1e6;
constexpr Amount min_amount = 20'000;

constexpr std::array<Pattern, 3> malicious_patterns{Pattern::hack, Pattern::ransomware, Pattern::darknet};
constexpr std::array<Pattern, 4> benign_patterns{Pattern::ordinary, Pattern::fast_mover, Pattern::splitter, Pattern::merchant};

struct Coin {
    std::string tx;
    std::string addr;
    Amount amount = 0;
    Timestamp time = 0;
};

struct CoinLater {
    bool operator()(const Coin& a, const Coin& b) const { return a.time > b.time; }
};

// Splits `total` over `weights.size()` counts, largest remainder first.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights)
{
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> out(weights.size(), 0);
    if (total == 0 || sum <= 0)
        return out;
    std::vector<std::pair<double, std::size_t>> rest;
    std::size_t used = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        out[i] = static_cast<std::size_t>(std::floor(exact));
        used += out[i];
        rest.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; used < total; ++k, ++used)
        ++out[rest[k % rest.size()].second];
    return out;
}

class Generator {
public:
    explicit Generator(const SynthConfig& config) : config_(config), rng_(config.seed)
    {
        for (int i = 0; i < 16; ++i)
            exchanges_.push_back(new_address());
        const std::size_t pool = std::max<std::size_t>(100, config.addresses / 4);
        for (std::size_t i = 0; i < pool; ++i)
            background_.push_back(new_address());
    }

    SynthResult run();

private:
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
    bool chance(double p) { return uniform(0.0, 1.0) < p; }
    Timestamp minutes(double lo, double hi) { return static_cast<Timestamp>(std::llround(uniform(lo, hi) * minute)); }
    Amount fee() { return static_cast<Amount>(pick(200, 2000)); }
    Amount lognormal(double median, double sigma)
    {
        const double z = std::normal_distribution<double>(0.0, 1.0)(rng_);
        return std::max<Amount>(min_amount, static_cast<Amount>(std::llround(median * std::exp(sigma * z))));
    }

    std::string hex_id(int words)
    {
        static constexpr char digits[] = "0123456789abcdef";
        std::string s;
        for (int w = 0; w < words; ++w) {
            auto v = rng_();
            for (int k = 0; k < 16; ++k, v >>= 4)
                s.push_back(digits[v & 0xf]);
        }
        return s;
    }
    std::string new_address()
    {
        for (;;) {
            auto s = hex_id(3).substr(0, 40);
            if (ids_.insert(s).second)
                return s;
        }
    }
    std::string new_tx_id()
    {
        for (;;) {
            auto s = hex_id(4);
            if (ids_.insert(s).second)
                return s;
        }
    }

    Coin mint(const std::string& addr, Amount amount, Timestamp t)
    {
        Transaction tx;
        tx.id = new_tx_id();
        tx.time = t;
        tx.outputs.push_back({addr, amount});
        txs_.push_back(tx);
        return {tx.id, addr, amount, t};
    }

    std::vector<Coin> spend(const std::vector<Coin>& in, const std::vector<std::pair<std::string, Amount>>& out, Timestamp t)
    {
        Transaction tx;
        tx.id = new_tx_id();
        tx.time = t;
        Amount in_total = 0, out_total = 0;
        for (const auto& c : in) {
            if (c.time >= t)
                throw std::logic_error("synth: coin spent before it exists");
            tx.inputs.push_back({c.tx, c.addr, c.amount});
            in_total += c.amount;
        }
        for (const auto& [addr, amount] : out) {
            if (amount <= 0)
                throw std::logic_error("synth: non-positive output");
            tx.outputs.push_back({addr, amount});
            out_total += amount;
        }
        if (out_total > in_total)
            throw std::logic_error("synth: outputs exceed inputs");
        tx.fee = in_total - out_total;
        std::vector<Coin> coins;
        for (const auto& o : tx.outputs)
            coins.push_back({tx.id, o.addr, o.amount, t});
        txs_.push_back(std::move(tx));
        return coins;
    }

    Coin relay(const Coin& c, const std::string& to, Timestamp t) { return spend({c}, {{to, c.amount - fee()}}, t).front(); }

    // Exchange payout: a fresh mint to an exchange address, then one tx paying
    // the recipients plus `extras` background outputs.
    std::vector<Coin> payout(const std::vector<std::pair<std::string, Amount>>& recipients, Timestamp t, std::size_t extras)
    {
        auto out = recipients;
        for (std::size_t i = 0; i < extras; ++i)
            out.emplace_back(background_[pick(0, background_.size() - 1)], lognormal(median_amount, 1.0));
        Amount total = fee();
        for (const auto& o : out)
            total += o.second;
        const Coin m = mint(exchanges_[pick(0, exchanges_.size() - 1)], total, t - minutes(5, 60));
        auto coins = spend({m}, out, t);
        for (std::size_t i = recipients.size(); i < coins.size(); ++i)
            background_coins_.push_back(coins[i]);
        coins.resize(recipients.size());
        return coins;
    }

    std::size_t payout_width() { return pick(7, 13); }

    // About `amount` reaching `to` at time `at`, `hops` relays after a payout.
    Coin funded_inflow(const std::string& to, Amount amount, Timestamp at, std::size_t hops)
    {
        std::vector<Timestamp> times(hops + 1);
        times[hops] = at;
        for (std::size_t j = hops; j-- > 0;)
            times[j] = times[j + 1] - minutes(5, 30);
        const std::string first = hops == 0 ? to : new_address();
        Coin c = payout({{first, amount + static_cast<Amount>(hops) * 2000}}, times[0], payout_width() - 1).front();
        for (std::size_t j = 1; j <= hops; ++j)
            c = relay(c, j == hops ? to : new_address(), times[j]);
        return c;
    }

    std::vector<Timestamp> inflow_times(Timestamp first, std::size_t n, double lo, double hi)
    {
        std::vector<Timestamp> t{first};
        for (std::size_t i = 1; i < n; ++i)
            t.push_back(first + minutes(lo, hi));
        std::sort(t.begin(), t.end());
        return t;
    }

    void sweep(const std::string& owner, Timestamp t, std::size_t outputs)
    {
        std::vector<Coin> in;
        Amount total = 0;
        for (const auto& c : held_[owner])
            if (c.time < t) {
                in.push_back(c);
                total += c.amount;
            }
        if (in.empty())
            return;
        total -= fee();
        std::vector<std::pair<std::string, Amount>> out;
        for (std::size_t i = 0; i < outputs; ++i)
            out.emplace_back(new_address(), i + 1 == outputs ? total - (total / static_cast<Amount>(outputs)) * static_cast<Amount>(outputs - 1)
                                                             : total / static_cast<Amount>(outputs));
        spend(in, out, t);
        std::erase_if(held_[owner], [t](const Coin& c) { return c.time < t; });
    }

    void ordinary(const std::string& a, Timestamp f)
    {
        const bool large = chance(0.4);
        for (Timestamp t : inflow_times(f, pick(2, 4), 10, 360)) {
            const Amount amount = large ? lognormal(10 * median_amount, 0.5) : lognormal(median_amount, 0.8);
            held_[a].push_back(funded_inflow(a, amount, t, chance(0.4) ? 2 : 0));
        }
        if (chance(0.5))
            sweep(a, f + minutes(120, 600), pick(1, 2));
    }

    void darknet(const std::string& a, Timestamp f)
    {
        for (Timestamp t : inflow_times(f, pick(2, 4), 10, 240)) {
            const std::size_t nodes = pick(config_.shadow_min, config_.shadow_max);
            const Amount target = lognormal(10 * median_amount, 0.5);
            std::vector<Timestamp> times(nodes);
            times[nodes - 1] = t;
            for (std::size_t j = nodes - 1; j-- > 0;)
                times[j] = times[j + 1] - minutes(10, 40);
            Coin c = mint(new_address(), static_cast<Amount>(static_cast<double>(target) * std::pow(1.11, nodes - 1)), times[0]);
            for (std::size_t j = 1; j < nodes; ++j) {
                std::vector<Coin> in{c};
                if (chance(0.15)) {
                    const auto side = static_cast<Amount>(static_cast<double>(c.amount) * uniform(0.08, 0.15));
                    in.push_back(mint(new_address(), side, times[j] - minutes(3, 9)));
                }
                Amount total = 0;
                for (const auto& x : in)
                    total += x.amount;
                const auto peel = static_cast<Amount>(static_cast<double>(total) * uniform(0.05, 0.15));
                const std::string next = j + 1 == nodes ? a : new_address();
                c = spend(in, {{new_address(), peel}, {next, total - peel - fee()}}, times[j])[1];
            }
            held_[a].push_back(c);
        }
        if (chance(0.5))
            sweep(a, f + minutes(120, 600), pick(1, 2));
    }

    // Ransomware-like (shared payouts) and merchant (one payout per payer).
    void victims(const std::string& a, Timestamp f, bool shared)
    {
        const std::size_t n = pick(5, 12);
        std::vector<Timestamp> times{f, f + minutes(5, 50)};
        for (std::size_t i = 2; i < n; ++i)
            times.push_back(f + minutes(60, 300));
        std::sort(times.begin() + 2, times.end());
        const std::size_t groups = shared ? pick(1, 2) : n;
        const std::size_t per_group = (n + groups - 1) / groups;

        struct Payer {
            std::string addr;
            Amount ransom = 0;
            Amount received = 0;
            std::vector<Timestamp> relays;
            Timestamp receive_time = 0;
        };
        std::vector<Payer> payers(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& p = payers[i];
            p.addr = new_address();
            p.ransom = lognormal(3 * median_amount, 0.5);
            const std::size_t hops = chance(0.5) ? 3 : 0;
            p.received = static_cast<Amount>(static_cast<double>(p.ransom) / uniform(0.6, 0.9)) + static_cast<Amount>(hops + 1) * 2000;
            Timestamp t = times[i];
            p.relays.resize(hops);
            for (std::size_t j = hops; j-- > 0;)
                t = p.relays[j] = t - minutes(5, 20);
            p.receive_time = t - minutes(5, 30);
        }
        std::vector<Coin> coins(n);
        for (std::size_t g = 0; g * per_group < n; ++g) {
            const std::size_t lo = g * per_group, hi = std::min(n, lo + per_group);
            std::vector<std::pair<std::string, Amount>> out;
            Timestamp t = payers[lo].receive_time;
            for (std::size_t i = lo; i < hi; ++i) {
                out.emplace_back(payers[i].addr, payers[i].received);
                t = std::min(t, payers[i].receive_time);
            }
            const std::size_t width = payout_width();
            auto paid = payout(out, t, width > out.size() ? width - out.size() : 1);
            std::copy(paid.begin(), paid.end(), coins.begin() + static_cast<std::ptrdiff_t>(lo));
        }
        for (std::size_t i = 0; i < n; ++i) {
            Coin c = coins[i];
            for (Timestamp t : payers[i].relays)
                c = relay(c, new_address(), t);
            const Amount change = c.amount - payers[i].ransom - fee();
            held_[a].push_back(spend({c}, {{a, payers[i].ransom}, {new_address(), change}}, times[i]).front());
        }
        if (chance(0.5))
            sweep(a, f + minutes(360, 720), 1);
    }

    // Hack-like fan out and its two decoys.
    void fan_out(const std::string& a, Timestamp f, Pattern p)
    {
        const Coin in = funded_inflow(a, lognormal(10 * median_amount, 0.5), f, chance(0.4) ? 2 : 0);
        const Timestamp tx_time = f + minutes(3, 20);
        const std::size_t k = pick(config_.fan_in_min, config_.fan_in_max);
        const std::size_t chains = p == Pattern::fast_mover ? 1 : k;
        std::vector<double> w(chains);
        for (auto& x : w)
            x = uniform(0.7, 1.3);
        const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
        const Amount avail = in.amount - fee();
        std::vector<std::pair<std::string, Amount>> out;
        for (double x : w)
            out.emplace_back(new_address(), static_cast<Amount>(static_cast<double>(avail) * x / wsum));
        std::vector<Coin> ends;
        for (Coin c : spend({in}, out, tx_time)) {
            const std::size_t hops = chance(0.5) ? 4 : 1;
            Timestamp t = tx_time;
            for (std::size_t j = 0; j < hops; ++j) {
                t += minutes(2, 8);
                c = relay(c, new_address(), t);
            }
            ends.push_back(c);
        }
        if (p == Pattern::hack) {
            Timestamp t = 0;
            Amount total = 0;
            for (const auto& e : ends) {
                t = std::max(t, e.time);
                total += e.amount;
            }
            const auto sink = spend(ends, {{new_address(), total - fee()}}, t + minutes(2, 5));
            sinks_[a] = sink.front().tx;
            return;
        }
        for (const auto& e : ends) {
            const Timestamp t = e.time + minutes(2, 5);
            std::vector<Coin> in_coins{e};
            Amount total = e.amount;
            for (std::size_t i = 1; i < k; ++i) {
                const auto amount = static_cast<Amount>(static_cast<double>(e.amount) * uniform(0.7, 1.3));
                in_coins.push_back(mint(new_address(), amount, t - minutes(10, 60)));
                total += amount;
            }
            spend(in_coins, {{new_address(), total - fee()}}, t);
        }
    }

    void background(Timestamp start, Timestamp end)
    {
        const double hours = static_cast<double>(end - start) / static_cast<double>(seconds_per_hour);
        const auto count = static_cast<std::size_t>(std::llround(config_.background_rate * hours));
        std::vector<Timestamp> times(count);
        for (auto& t : times)
            t = start + static_cast<Timestamp>(std::llround(uniform(0.0, static_cast<double>(end - start))));
        std::sort(times.begin(), times.end());
        std::priority_queue<Coin, std::vector<Coin>, CoinLater> pending(CoinLater{}, background_coins_);
        std::vector<Coin> ready;
        for (Timestamp t : times) {
            while (!pending.empty() && pending.top().time < t) {
                ready.push_back(pending.top());
                pending.pop();
            }
            if (ready.empty())
                continue;
            std::vector<Coin> in;
            for (std::size_t n = pick(1, 2); n > 0 && !ready.empty(); --n) {
                const std::size_t i = pick(0, ready.size() - 1);
                in.push_back(ready[i]);
                ready[i] = ready.back();
                ready.pop_back();
            }
            Amount total = -fee();
            for (const auto& c : in)
                total += c.amount;
            const std::size_t outputs = pick(1, 3);
            std::vector<std::pair<std::string, Amount>> out;
            Amount left = total;
            for (std::size_t i = 0; i < outputs; ++i) {
                std::string to;
                if (chance(0.3)) {
                    to = new_address();
                    background_.push_back(to);
                } else {
                    to = background_[pick(0, background_.size() - 1)];
                }
                const Amount amount = i + 1 == outputs ? left : static_cast<Amount>(static_cast<double>(left) * uniform(0.2, 0.8));
                left -= amount;
                out.emplace_back(std::move(to), amount);
            }
            std::erase_if(out, [](const auto& o) { return o.second <= 0; });
            if (out.empty())
                continue;
            for (const auto& c : spend(in, out, t))
                pending.push(c);
        }
    }

    const SynthConfig& config_;
    std::mt19937_64 rng_;
    std::unordered_set<std::string> ids_;
    std::vector<std::string> exchanges_;
    std::vector<std::string> background_;
    std::vector<Coin> background_coins_;
    std::vector<Transaction> txs_;
    std::map<std::string, std::vector<Coin>> held_;
    std::map<std::string, std::string> sinks_;
};

SynthResult Generator::run()
{
    const std::size_t positives = static_cast<std::size_t>(std::llround(config_.malicious_fraction * static_cast<double>(config_.addresses)));
    const auto mal = apportion(positives, config_.malicious_mix);
    const auto ben = apportion(config_.addresses - positives, config_.benign_mix);
    std::vector<Pattern> kinds;
    for (std::size_t i = 0; i < mal.size(); ++i)
        kinds.insert(kinds.end(), mal[i], malicious_patterns[i]);
    for (std::size_t i = 0; i < ben.size(); ++i)
        kinds.insert(kinds.end(), ben[i], benign_patterns[i]);
    std::shuffle(kinds.begin(), kinds.end(), rng_);

    SynthResult result;
    result.config = config_;
    const Timestamp first_window = origin_time + 12 * seconds_per_hour;
    Timestamp last_seen = first_window;
    Timestamp earliest = first_window;
    for (Pattern p : kinds) {
        const std::string a = new_address();
        const Timestamp f = first_window + static_cast<Timestamp>(std::llround(uniform(0.0, 72.0 * seconds_per_hour)));
        last_seen = std::max(last_seen, f);
        switch (p) {
        case Pattern::ordinary:
            ordinary(a, f);
            break;
        case Pattern::darknet:
            darknet(a, f);
            break;
        case Pattern::ransomware:
        case Pattern::merchant:
            victims(a, f, p == Pattern::ransomware);
            break;
        case Pattern::hack:
        case Pattern::fast_mover:
        case Pattern::splitter:
            fan_out(a, f, p);
            break;
        }
        result.labels.push_back({a, is_malicious(p) ? 1 : 0, f});
        result.patterns.emplace(a, p);
    }
    for (const auto& tx : txs_)
        earliest = std::min(earliest, tx.time);
    background(earliest, last_seen + static_cast<Timestamp>(config_.horizon) * seconds_per_hour);

    std::sort(txs_.begin(), txs_.end(), [](const Transaction& x, const Transaction& y) { return std::tie(x.time, x.id) < std::tie(y.time, y.id); });
    std::sort(result.labels.begin(), result.labels.end(),
        [](const LabelRecord& x, const LabelRecord& y) { return std::tie(x.first_seen, x.address) < std::tie(y.first_seen, y.address); });
    result.txs = std::move(txs_);
    result.sinks = std::move(sinks_);
    return result;
}

void add_stats(PathStats& s, const PathSet& set)
{
    ++s.addresses;
    s.backward_paths += set.backward().size();
    s.forward_paths += set.forward().size();
    for (const auto& p : set.backward())
        ++s.backward_lengths[p.length()];
    for (const auto& p : set.forward())
        ++s.forward_lengths[p.length()];
    ++s.backward_counts[set.backward().size()];
    ++s.forward_counts[set.forward().size()];
}

nlohmann::ordered_json histogram(const std::map<std::size_t, std::size_t>& h)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : h)
        j[std::to_string(k)] = v;
    return j;
}

} // namespace

const char* to_string(Pattern p)
{
    switch (p) {
    case Pattern::hack:
        return "hack";
    case Pattern::ransomware:
        return "ransomware";
    case Pattern::darknet:
        return "darknet";
    case Pattern::ordinary:
        return "ordinary";
    case Pattern::fast_mover:
        return "fast_mover";
    case Pattern::splitter:
        return "splitter";
    case Pattern::merchant:
        return "merchant";
    }
    return "unknown";
}

bool is_malicious(Pattern p)
{
    return p == Pattern::hack || p == Pattern::ransomware || p == Pattern::darknet;
}

void SynthConfig::validate() const
{
    if (addresses == 0)
        throw std::invalid_argument("synth config: address count must be positive");
    if (!(malicious_fraction >= 0 && malicious_fraction <= 1))
        throw std::invalid_argument("synth config: malicious fraction must lie in [0, 1]");
    for (double x : malicious_mix)
        if (!(x >= 0 && x <= 1))
            throw std::invalid_argument("synth config: malicious mix entries must lie in [0, 1]");
    for (double x : benign_mix)
        if (!(x >= 0 && x <= 1))
            throw std::invalid_argument("synth config: benign mix entries must lie in [0, 1]");
    if (malicious_fraction > 0 && std::accumulate(malicious_mix.begin(), malicious_mix.end(), 0.0) <= 0)
        throw std::invalid_argument("synth config: malicious mix is all zero");
    if (malicious_fraction < 1 && std::accumulate(benign_mix.begin(), benign_mix.end(), 0.0) <= 0)
        throw std::invalid_argument("synth config: benign mix is all zero");
    if (!(background_rate >= 0))
        throw std::invalid_argument("synth config: background rate must be non-negative");
    if (shadow_min < 2 || shadow_min > shadow_max)
        throw std::invalid_argument("synth config: shadow-chain range must satisfy 2 <= min <= max");
    if (fan_in_min < 2 || fan_in_min > fan_in_max)
        throw std::invalid_argument("synth config: fan-in range must satisfy 2 <= min <= max");
    if (fan_in_max > addresses)
        throw std::invalid_argument("synth config: fan-in exceeds the address count");
    if (horizon == 0)
        throw std::invalid_argument("synth config: horizon must be at least 1");
}

nlohmann::json to_json(const SynthConfig& c)
{
    return {
        {"addresses", c.addresses},
        {"malicious_fraction", c.malicious_fraction},
        {"malicious_mix", {{"hack", c.malicious_mix[0]}, {"ransomware", c.malicious_mix[1]}, {"darknet", c.malicious_mix[2]}}},
        {"benign_mix",
            {{"ordinary", c.benign_mix[0]}, {"fast_mover", c.benign_mix[1]}, {"splitter", c.benign_mix[2]}, {"merchant", c.benign_mix[3]}}},
        {"background_rate", c.background_rate},
        {"shadow_min", c.shadow_min},
        {"shadow_max", c.shadow_max},
        {"fan_in_min", c.fan_in_min},
        {"fan_in_max", c.fan_in_max},
        {"horizon", c.horizon},
        {"seed", c.seed},
    };
}

SynthConfig synth_config_from_json(const nlohmann::json& j)
{
    SynthConfig c;
    c.addresses = j.value("addresses", c.addresses);
    c.malicious_fraction = j.value("malicious_fraction", c.malicious_fraction);
    if (j.contains("malicious_mix")) {
        const auto& m = j.at("malicious_mix");
        c.malicious_mix = {m.value("hack", c.malicious_mix[0]), m.value("ransomware", c.malicious_mix[1]), m.value("darknet", c.malicious_mix[2])};
    }
    if (j.contains("benign_mix")) {
        const auto& m = j.at("benign_mix");
        c.benign_mix = {m.value("ordinary", c.benign_mix[0]), m.value("fast_mover", c.benign_mix[1]), m.value("splitter", c.benign_mix[2]),
            m.value("merchant", c.benign_mix[3])};
    }
    c.background_rate = j.value("background_rate", c.background_rate);
    c.shadow_min = j.value("shadow_min", c.shadow_min);
    c.shadow_max = j.value("shadow_max", c.shadow_max);
    c.fan_in_min = j.value("fan_in_min", c.fan_in_min);
    c.fan_in_max = j.value("fan_in_max", c.fan_in_max);
    c.horizon = j.value("horizon", c.horizon);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

nlohmann::ordered_json SynthResult::manifest() const
{
    nlohmann::ordered_json j;
    j["config"] = to_json(config);
    j["seed"] = config.seed;
    j["transactions"] = txs.size();
    std::size_t pos = 0;
    std::map<std::string, std::size_t> counts;
    for (const auto& l : labels) {
        pos += l.label;
        ++counts[to_string(patterns.at(l.address))];
    }
    j["labels"] = {{"positive", pos}, {"negative", labels.size() - pos}};
    j["pattern_counts"] = counts;
    if (!txs.empty())
        j["time_range"] = {txs.front().time, txs.back().time};
    nlohmann::ordered_json pats = nlohmann::ordered_json::object();
    for (const auto& [a, p] : patterns)
        pats[a] = to_string(p);
    j["patterns"] = std::move(pats);
    j["sinks"] = sinks;
    return j;
}

SynthResult generate(const SynthConfig& config)
{
    config.validate();
    return Generator(config).run();
}

void write_synth(const std::string& dir, const SynthResult& result)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out)
            throw std::runtime_error("synth: cannot write " + (fs::path(dir) / name).string());
        return out;
    };
    {
        auto out = open("ledger.jsonl");
        write_ledger(out, result.txs);
    }
    {
        auto out = open("labels.csv");
        write_labels(out, result.labels);
    }
    auto out = open("manifest.json");
    out << result.manifest().dump(2) << '\n';
}

std::size_t PathStats::backward_length_mode() const
{
    std::size_t best = 0, count = 0;
    for (const auto& [len, n] : backward_lengths)
        if (n > count) {
            best = len;
            count = n;
        }
    return best;
}

SynthSummary describe(const Ledger& ledger, std::span<const LabelRecord> labels, const TraceParams& params, std::size_t horizon,
    const std::map<std::string, Pattern>& patterns)
{
    SynthSummary s;
    for (const auto& rec : labels) {
        (rec.label ? s.positives : s.negatives) += 1;
        const auto set = build_path_set(ledger, rec.address, rec.first_seen + static_cast<Timestamp>(horizon) * seconds_per_hour, params);
        add_stats(s.groups["label=" + std::to_string(rec.label)], set);
        if (auto it = patterns.find(rec.address); it != patterns.end())
            add_stats(s.groups[to_string(it->second)], set);
    }
    if (!labels.empty())
        s.pn_ratio = static_cast<double>(s.positives) / static_cast<double>(labels.size());
    return s;
}

nlohmann::ordered_json to_json(const SynthSummary& s)
{
    nlohmann::ordered_json j;
    j["positives"] = s.positives;
    j["negatives"] = s.negatives;
    j["pn_ratio"] = s.pn_ratio;
    nlohmann::ordered_json groups = nlohmann::ordered_json::object();
    for (const auto& [name, g] : s.groups) {
        nlohmann::ordered_json x;
        x["addresses"] = g.addresses;
        x["backward_paths"] = g.backward_paths;
        x["forward_paths"] = g.forward_paths;
        x["backward_length_mode"] = g.backward_length_mode();
        x["backward_lengths"] = histogram(g.backward_lengths);
        x["forward_lengths"] = histogram(g.forward_lengths);
        x["backward_counts"] = histogram(g.backward_counts);
        x["forward_counts"] = histogram(g.forward_counts);
        groups[name] = std::move(x);
    }
    j["groups"] = std::move(groups);
    return j;
}

} // namespace evopt
