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

#ifndef EVOPT_GRAPHS_HPP
#define EVOPT_GRAPHS_HPP

#include <span>
#include <string>
#include <vector>

#include "evopt/features.hpp"
#include "evopt/pathfind.hpp"

namespace evopt {

struct PathEdge {
    int i = 0;
    int j = 0;
    /// Shared terminal transaction binding the two paths.
    TxIndex binding_tx = 0;

    bool operator==(const PathEdge&) const = default;
};

struct PathComponent {
    TxIndex terminal = 0;
    std::vector<int> members;

    bool operator==(const PathComponent&) const = default;
};

/// Nodes are paths (index i refers to the i-th input path). Paths sharing a
/// terminal transaction form a clique; edges are stored once with i < j.
struct PathGraph {
    Direction direction = Direction::backward;
    int node_count = 0;
    std::vector<PathEdge> edges;
    /// Components ordered by terminal tx index, members ascending.
    std::vector<PathComponent> components;

    bool has_edge(int a, int b) const;
};

PathGraph build_path_graph(std::span<const AssetTransferPath> paths, Direction direction);

/// Output address receiving the largest amount of `tx` (ties: smallest id).
const std::string& binding_address(const Ledger& ledger, TxIndex tx);

/// Binding-address features at time t, one entry per `graph.edges` element.
class EdgeFeatures {
public:
    EdgeFeatures(const PathGraph& graph, std::vector<AddressFeatureVector> values);

    const std::vector<AddressFeatureVector>& values() const { return values_; }
    /// Symmetric lookup; throws when (i, j) is not an edge.
    const AddressFeatureVector& at(int i, int j) const;

private:
    std::vector<PathEdge> edges_;
    std::vector<AddressFeatureVector> values_;
};

EdgeFeatures edge_features(const PathGraph& graph, const Ledger& ledger, Timestamp t);

std::string graph_to_json(const Ledger& ledger, const PathGraph& graph);

} // namespace evopt

#endif // EVOPT_GRAPHS_HPP
