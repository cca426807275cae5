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

#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace evopt::testing {

namespace {

const Transaction& by_id(std::span<const Transaction> txs, const std::string& id)
{
    for (const auto& tx : txs)
        if (tx.id == id)
            return tx;
    throw std::out_of_range("oracle: unknown tx " + id);
}

bool contains(const OraclePath& chain, const std::string& id)
{
    return std::any_of(chain.begin(), chain.end(), [&](const auto& n) { return n.first == id; });
}

void dfs_backward(std::span<const Transaction> txs, OraclePath& chain, Timestamp anchor_time, double theta, Timestamp span,
    std::vector<OraclePath>& out)
{
    const Transaction& tx = by_id(txs, chain.back().first);
    Amount total = 0;
    std::map<std::string, Amount> per_source;
    for (const auto& in : tx.inputs) {
        total += in.amount;
        per_source[in.src_tx] += in.amount;
    }
    bool extended = false;
    for (const auto& [src, amount] : per_source) {
        const double score = static_cast<double>(amount) / static_cast<double>(total) * chain.back().second;
        if (score < theta || anchor_time - by_id(txs, src).time > span || contains(chain, src))
            continue;
        extended = true;
        chain.emplace_back(src, score);
        dfs_backward(txs, chain, anchor_time, theta, span, out);
        chain.pop_back();
    }
    if (!extended)
        out.emplace_back(chain.rbegin(), chain.rend());
}

void dfs_forward(std::span<const Transaction> txs, OraclePath& chain, Timestamp anchor_time, double theta, Timestamp span,
    Timestamp as_of, std::vector<OraclePath>& out)
{
    const Transaction& tx = by_id(txs, chain.back().first);
    Amount total = 0;
    for (const auto& o : tx.outputs)
        total += o.amount;
    bool extended = false;
    for (const auto& next : txs) {
        Amount amount = 0;
        for (const auto& in : next.inputs)
            if (in.src_tx == tx.id)
                amount += in.amount;
        if (amount == 0 || next.time > as_of)
            continue;
        const double score = static_cast<double>(amount) / static_cast<double>(total) * chain.back().second;
        if (score < theta || next.time - anchor_time > span || contains(chain, next.id))
            continue;
        extended = true;
        chain.emplace_back(next.id, score);
        dfs_forward(txs, chain, anchor_time, theta, span, as_of, out);
        chain.pop_back();
    }
    if (!extended)
        out.push_back(chain);
}

} // namespace

std::vector<OraclePath> oracle_backward(std::span<const Transaction> txs, const std::string& anchor, double theta, Timestamp span)
{
    std::vector<OraclePath> out;
    OraclePath chain{{anchor, 1.0}};
    dfs_backward(txs, chain, by_id(txs, anchor).time, theta, span, out);
    return out;
}

std::vector<OraclePath> oracle_forward(std::span<const Transaction> txs, const std::string& anchor, double theta, Timestamp span,
    Timestamp as_of)
{
    std::vector<OraclePath> out;
    OraclePath chain{{anchor, 1.0}};
    dfs_forward(txs, chain, by_id(txs, anchor).time, theta, span, as_of, out);
    return out;
}

std::vector<OraclePath> to_oracle_form(const Ledger& ledger, std::span<const AssetTransferPath> paths)
{
    std::vector<OraclePath> out;
    for (const auto& p : paths) {
        OraclePath q;
        for (const auto& n : p.nodes)
            q.emplace_back(ledger.tx(n.tx).id, n.score);
        out.push_back(std::move(q));
    }
    return out;
}

bool same_paths(std::vector<OraclePath> a, std::vector<OraclePath> b)
{
    if (a.size() != b.size())
        return false;
    auto ids = [](const OraclePath& p) {
        std::vector<std::string> v;
        for (const auto& n : p)
            v.push_back(n.first);
        return v;
    };
    auto less = [&](const OraclePath& x, const OraclePath& y) { return ids(x) < ids(y); };
    std::sort(a.begin(), a.end(), less);
    std::sort(b.begin(), b.end(), less);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (ids(a[i]) != ids(b[i]))
            return false;
        for (std::size_t k = 0; k < a[i].size(); ++k)
            if (std::abs(a[i][k].second - b[i][k].second) > 1e-12)
                return false;
    }
    return true;
}

} // namespace evopt::testing
