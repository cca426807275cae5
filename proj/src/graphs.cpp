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

#include "evopt/graphs.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include <json.hpp>

namespace evopt {

bool PathGraph::has_edge(int a, int b) const
{
    if (a > b)
        std::swap(a, b);
    return std::any_of(edges.begin(), edges.end(), [&](const PathEdge& e) { return e.i == a && e.j == b; });
}

PathGraph build_path_graph(std::span<const AssetTransferPath> paths, Direction direction)
{
    PathGraph g;
    g.direction = direction;
    g.node_count = static_cast<int>(paths.size());
    std::map<TxIndex, std::vector<int>> groups;
    for (std::size_t k = 0; k < paths.size(); ++k) {
        if (paths[k].direction != direction)
            throw std::invalid_argument("build_path_graph: mixed path directions");
        groups[paths[k].terminal()].push_back(static_cast<int>(k));
    }
    for (auto& [terminal, members] : groups) {
        for (std::size_t a = 0; a < members.size(); ++a)
            for (std::size_t b = a + 1; b < members.size(); ++b)
                g.edges.push_back({members[a], members[b], terminal});
        g.components.push_back({terminal, std::move(members)});
    }
    return g;
}

const std::string& binding_address(const Ledger& ledger, TxIndex tx)
{
    const auto& outputs = ledger.tx(tx).outputs;
    // Sum per address first; an address may appear in several output slots.
    std::unordered_map<std::string_view, Amount> per_addr;
    for (const auto& out : outputs)
        per_addr[out.addr] += out.amount;
    const std::string* best = nullptr;
    Amount best_amount = -1;
    for (const auto& out : outputs) {
        const Amount a = per_addr[out.addr];
        if (a > best_amount || (a == best_amount && out.addr < *best)) {
            best = &out.addr;
            best_amount = a;
        }
    }
    return *best;
}

EdgeFeatures::EdgeFeatures(const PathGraph& graph, std::vector<AddressFeatureVector> values)
    : edges_(graph.edges), values_(std::move(values))
{
    if (edges_.size() != values_.size())
        throw std::invalid_argument("EdgeFeatures: one feature vector per edge expected");
}

const AddressFeatureVector& EdgeFeatures::at(int i, int j) const
{
    if (i > j)
        std::swap(i, j);
    for (std::size_t k = 0; k < edges_.size(); ++k)
        if (edges_[k].i == i && edges_[k].j == j)
            return values_[k];
    throw std::out_of_range("EdgeFeatures: no edge between the given paths");
}

EdgeFeatures edge_features(const PathGraph& graph, const Ledger& ledger, Timestamp t)
{
    std::map<TxIndex, AddressFeatureVector> per_terminal;
    std::vector<AddressFeatureVector> values;
    values.reserve(graph.edges.size());
    for (const auto& e : graph.edges) {
        auto it = per_terminal.find(e.binding_tx);
        if (it == per_terminal.end())
            it = per_terminal.emplace(e.binding_tx, address_features(ledger, binding_address(ledger, e.binding_tx), t)).first;
        values.push_back(it->second);
    }
    return EdgeFeatures(graph, std::move(values));
}

std::string graph_to_json(const Ledger& ledger, const PathGraph& graph)
{
    nlohmann::ordered_json j;
    j["direction"] = to_string(graph.direction);
    j["nodes"] = graph.node_count;
    auto comps = nlohmann::ordered_json::array();
    for (const auto& c : graph.components)
        comps.push_back({{"terminal", ledger.tx(c.terminal).id}, {"members", c.members}});
    j["components"] = std::move(comps);
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : graph.edges)
        edges.push_back(nlohmann::ordered_json::array({e.i, e.j, ledger.tx(e.binding_tx).id}));
    j["edges"] = std::move(edges);
    return j.dump();
}

} // namespace evopt
