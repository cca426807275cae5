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

#include "evopt/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

namespace evopt {

const std::array<const char*, address_feature_dim> address_feature_names = {
    "balance",
    "receive_count",
    "spend_count",
    "receive_ratio",
    "spend_ratio",
    "max_receive_amount",
    "max_spend_amount",
    "life_span_hours",
    "active_rate",
};

const std::array<const char*, tx_feature_dim> tx_feature_names = {
    "hop_interval",
    "score",
    "prev_input_amount",
    "fee",
    "receive_total",
    "receive_max",
    "receive_min",
    "receive_avg",
    "receive_var",
    "spend_total",
    "spend_max",
    "spend_min",
    "spend_avg",
    "spend_var",
    "receive_count",
    "spend_count",
};

namespace {

struct Moments {
    double total = 0, max = 0, min = 0, avg = 0, var = 0;
};

template <typename Slots>
Moments moments(const Slots& slots)
{
    Moments m;
    if (slots.empty())
        return m;
    m.min = static_cast<double>(slots.front().amount);
    m.max = m.min;
    for (const auto& s : slots) {
        const auto v = static_cast<double>(s.amount);
        m.total += v;
        m.max = std::max(m.max, v);
        m.min = std::min(m.min, v);
    }
    const auto n = static_cast<double>(slots.size());
    m.avg = m.total / n;
    for (const auto& s : slots) {
        const double d = static_cast<double>(s.amount) - m.avg;
        m.var += d * d;
    }
    m.var /= n;
    return m;
}

} // namespace

AddressFeatureVector address_features(const Ledger& ledger, std::string_view addr, Timestamp t)
{
    AddressFeatureVector f{};
    const auto& act = ledger.activity(addr);
    auto before = [&](const std::vector<TxIndex>& list) {
        return static_cast<std::size_t>(std::upper_bound(list.begin(), list.end(), t,
                                            [&](Timestamp v, TxIndex i) { return v < ledger.time(i); }) -
            list.begin());
    };
    const std::size_t n_receive = before(act.receive);
    const std::size_t n_spend = before(act.spend);
    if (n_receive + n_spend == 0)
        return f;

    double received = 0, spent = 0, max_receive = 0, max_spend = 0;
    Timestamp first = std::numeric_limits<Timestamp>::max();
    std::vector<Timestamp> times;
    times.reserve(n_receive + n_spend);
    for (std::size_t k = 0; k < n_receive; ++k) {
        const auto& tx = ledger.tx(act.receive[k]);
        double amount = 0;
        for (const auto& out : tx.outputs)
            if (out.addr == addr)
                amount += static_cast<double>(out.amount);
        received += amount;
        max_receive = std::max(max_receive, amount);
        first = std::min(first, tx.time);
        times.push_back(tx.time);
    }
    for (std::size_t k = 0; k < n_spend; ++k) {
        const auto& tx = ledger.tx(act.spend[k]);
        double amount = 0;
        for (const auto& in : tx.inputs)
            if (in.addr == addr)
                amount += static_cast<double>(in.amount);
        spent += amount;
        max_spend = std::max(max_spend, amount);
        first = std::min(first, tx.time);
        times.push_back(tx.time);
    }

    std::set<Timestamp> active_hours;
    for (Timestamp time : times)
        active_hours.insert((time - first) / seconds_per_hour);
    const double hours = static_cast<double>(t - first) / static_cast<double>(seconds_per_hour);
    const double total_count = static_cast<double>(n_receive + n_spend);

    f[0] = received - spent;
    f[1] = static_cast<double>(n_receive);
    f[2] = static_cast<double>(n_spend);
    f[3] = static_cast<double>(n_receive) / total_count;
    f[4] = static_cast<double>(n_spend) / total_count;
    f[5] = max_receive;
    f[6] = max_spend;
    f[7] = hours;
    f[8] = static_cast<double>(active_hours.size()) / std::max(1.0, hours);
    return f;
}

TxFeatureVector tx_features(const Ledger& ledger, const AssetTransferPath& path, std::size_t node_index, Timestamp /*t*/)
{
    if (node_index >= path.nodes.size())
        throw std::out_of_range("tx_features: node index out of range");
    TxFeatureVector f{};
    const std::size_t n = path.nodes.size();
    const bool backward = path.direction == Direction::backward;
    const std::size_t terminal_index = backward ? 0 : n - 1;
    const auto& node = path.nodes[node_index];
    const auto& tx = ledger.tx(node.tx);

    f[0] = static_cast<double>(node_index > terminal_index ? node_index - terminal_index : terminal_index - node_index);
    f[1] = node.score;
    // The anchor has no predecessor.
    const bool has_prev = backward ? node_index + 1 < n : node_index > 0;
    if (has_prev) {
        const std::size_t prev = backward ? node_index + 1 : node_index - 1;
        f[2] = static_cast<double>(ledger.input_total(path.nodes[prev].tx));
    }
    f[3] = static_cast<double>(tx.fee);
    const auto recv = moments(tx.inputs);
    const auto spend = moments(tx.outputs);
    f[4] = recv.total;
    f[5] = recv.max;
    f[6] = recv.min;
    f[7] = recv.avg;
    f[8] = recv.var;
    f[9] = spend.total;
    f[10] = spend.max;
    f[11] = spend.min;
    f[12] = spend.avg;
    f[13] = spend.var;
    f[14] = static_cast<double>(tx.inputs.size());
    f[15] = static_cast<double>(tx.outputs.size());
    return f;
}

std::vector<TxFeatureVector> path_features(const Ledger& ledger, const AssetTransferPath& path, Timestamp t)
{
    std::vector<TxFeatureVector> rows;
    rows.reserve(path.nodes.size());
    for (std::size_t k = 0; k < path.nodes.size(); ++k)
        rows.push_back(tx_features(ledger, path, k, t));
    return rows;
}

std::pair<std::size_t, std::size_t> resample_window(std::size_t i, std::size_t original_length, std::size_t uniform_length)
{
    // floor(i * R) .. ceil((i + 1) * R) - 1 with R = original / uniform, in
    // integer arithmetic.
    const std::size_t first = (i * original_length) / uniform_length;
    const std::size_t upper = ((i + 1) * original_length + uniform_length - 1) / uniform_length;
    const std::size_t last = std::max(first, std::min(upper, original_length) - 1);
    return {first, last};
}

FeatureScaler::FeatureScaler(std::vector<double> mean, std::vector<double> stddev) : mean_(std::move(mean)), stddev_(std::move(stddev))
{
    if (mean_.size() != stddev_.size())
        throw std::invalid_argument("FeatureScaler: mean/stddev size mismatch");
}

namespace {

double signed_log(double x)
{
    return std::copysign(std::log1p(std::abs(x)), x);
}

} // namespace

FeatureScaler FeatureScaler::fit(std::span<const double> rows, std::size_t dim)
{
    if (dim == 0 || rows.size() % dim != 0)
        throw std::invalid_argument("FeatureScaler::fit: rows not a multiple of dim");
    FeatureScaler s(dim);
    const std::size_t n = rows.size() / dim;
    if (n == 0)
        return s;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c)
            s.mean_[c] += signed_log(rows[r * dim + c]);
    for (auto& m : s.mean_)
        m /= static_cast<double>(n);
    std::vector<double> var(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c) {
            const double d = signed_log(rows[r * dim + c]) - s.mean_[c];
            var[c] += d * d;
        }
    for (std::size_t c = 0; c < dim; ++c) {
        const double sd = std::sqrt(var[c] / static_cast<double>(n));
        s.stddev_[c] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

void FeatureScaler::transform(std::span<double> rows) const
{
    const std::size_t d = dim();
    if (d == 0 || rows.size() % d != 0)
        throw std::invalid_argument("FeatureScaler::transform: rows not a multiple of dim");
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t c = k % d;
        rows[k] = (signed_log(rows[k]) - mean_[c]) / stddev_[c];
    }
}

void write_address_feature_header(std::ostream& out)
{
    for (std::size_t k = 0; k < address_feature_names.size(); ++k)
        out << (k ? "," : "") << address_feature_names[k];
}

void write_tx_feature_header(std::ostream& out)
{
    for (std::size_t k = 0; k < tx_feature_names.size(); ++k)
        out << (k ? "," : "") << tx_feature_names[k];
}

} // namespace evopt
