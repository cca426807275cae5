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

#ifndef EVOPT_PATHFIND_HPP
#define EVOPT_PATHFIND_HPP

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "evopt/ledger.hpp"

namespace evopt {

enum class Direction { backward, forward };
enum class PairKind { influence, trust };

const char* to_string(Direction d);

/// A significant flow between two transactions. For influence pairs the
/// proportion is the share of `to_tx`'s total input provided by `from_tx`;
/// for trust pairs it is the share of `from_tx`'s total output consumed by
/// `to_tx`.
struct TxPair {
    TxIndex from_tx = 0;
    TxIndex to_tx = 0;
    PairKind kind = PairKind::influence;
    double proportion = 0.0;
};

constexpr Timestamp no_time_limit = std::numeric_limits<Timestamp>::max();

/// Pairs (src -> tx) whose share of tx's input is >= theta.
std::vector<TxPair> influence_pairs(const Ledger& ledger, TxIndex tx, double theta);
/// Pairs (tx -> receiver) whose share of tx's output is >= theta. Only
/// receivers with time <= until_time are considered.
std::vector<TxPair> trust_pairs(const Ledger& ledger, TxIndex tx, double theta, Timestamp until_time = no_time_limit);

struct PathNode {
    TxIndex tx = 0;
    /// Product of proportions from the anchor down to this node.
    double score = 1.0;

    bool operator==(const PathNode&) const = default;
};

/// Chain of influence (backward) or trust (forward) pairs anchored at one of
/// the owner's transactions. Backward nodes run terminal -> anchor, forward
/// nodes run anchor -> terminal.
struct AssetTransferPath {
    Direction direction = Direction::backward;
    TxIndex anchor = 0;
    std::vector<PathNode> nodes;

    TxIndex terminal() const { return direction == Direction::backward ? nodes.front().tx : nodes.back().tx; }
    const PathNode& terminal_node() const { return direction == Direction::backward ? nodes.front() : nodes.back(); }
    std::size_t length() const { return nodes.size(); }

    bool operator==(const AssetTransferPath&) const = default;
};

struct TraceParams {
    double theta = 0.01;
    Timestamp span = 24 * seconds_per_hour;
    std::size_t path_cap = 256;

    void validate() const;
};

/// Trace tree rooted at an anchor. Every root-to-leaf chain is a maximal path.
struct TraceTree {
    struct Node {
        TxIndex tx = 0;
        double score = 1.0;
        int parent = -1;
        std::vector<int> children;
    };
    std::vector<Node> nodes;
};

/// Paths of a single anchor together with the tree they were materialized from.
struct AnchorTrace {
    Direction direction = Direction::backward;
    TxIndex anchor = 0;
    TraceTree tree;
    std::vector<AssetTransferPath> paths;
    /// Number of maximal chains before capping.
    std::size_t enumerated = 0;

    bool capped() const { return enumerated > paths.size(); }
};

AnchorTrace trace_backward(const Ledger& ledger, TxIndex anchor, const TraceParams& params);
AnchorTrace trace_forward(const Ledger& ledger, TxIndex anchor, const TraceParams& params, Timestamp as_of = no_time_limit);

/// Grows a forward trace built at prev_as_of so that it equals a trace built
/// at new_as_of. Returns nullptr when nothing changed.
std::shared_ptr<const AnchorTrace> extend_forward_trace(const Ledger& ledger, const AnchorTrace& prev, const TraceParams& params,
    Timestamp prev_as_of, Timestamp new_as_of);

std::vector<AssetTransferPath> backward_paths(const Ledger& ledger, TxIndex anchor, const TraceParams& params);
std::vector<AssetTransferPath> forward_paths(const Ledger& ledger, TxIndex anchor, const TraceParams& params,
    Timestamp as_of = no_time_limit);

using PathList = std::vector<AssetTransferPath>;

/// All backward/forward paths of one address as of a point in time. Unchanged
/// anchors and path lists are shared between successive sets, so pointer
/// identity of `backward_list()`/`forward_list()` signals reuse.
class PathSet {
public:
    const std::string& owner() const { return owner_; }
    Timestamp as_of() const { return as_of_; }
    const TraceParams& params() const { return params_; }

    const PathList& backward() const { return *backward_list_; }
    const PathList& forward() const { return *forward_list_; }
    const PathList& paths(Direction d) const { return d == Direction::backward ? backward() : forward(); }
    const std::shared_ptr<const PathList>& backward_list() const { return backward_list_; }
    const std::shared_ptr<const PathList>& forward_list() const { return forward_list_; }
    const std::shared_ptr<const PathList>& list(Direction d) const { return d == Direction::backward ? backward_list_ : forward_list_; }

    const std::vector<std::shared_ptr<const AnchorTrace>>& backward_anchors() const { return backward_anchors_; }
    const std::vector<std::shared_ptr<const AnchorTrace>>& forward_anchors() const { return forward_anchors_; }

    std::size_t capped_anchors() const;

    /// Structural equality: owner, time and both path lists.
    bool operator==(const PathSet& other) const;

    friend PathSet build_path_set(const Ledger&, const std::string&, Timestamp, const TraceParams&);
    friend PathSet extend_path_set(const PathSet&, const Ledger&, Timestamp);

private:
    void rebuild_lists(bool backward_changed, bool forward_changed, const PathSet* prev);

    std::string owner_;
    Timestamp as_of_ = 0;
    TraceParams params_;
    std::vector<std::shared_ptr<const AnchorTrace>> backward_anchors_;
    std::vector<std::shared_ptr<const AnchorTrace>> forward_anchors_;
    std::shared_ptr<const PathList> backward_list_;
    std::shared_ptr<const PathList> forward_list_;
};

/// From-scratch construction: backward paths of every receive tx and forward
/// paths of every spend tx with time <= as_of.
PathSet build_path_set(const Ledger& ledger, const std::string& owner, Timestamp as_of, const TraceParams& params);

/// Incremental construction. New receive/spend txs spawn new anchors, forward
/// traces whose nodes gained spenders are grown, everything else is shared.
PathSet extend_path_set(const PathSet& prev, const Ledger& ledger, Timestamp new_as_of);

/// `{"direction":..,"anchor":..,"nodes":[[tx,score],..]}`
std::string path_to_json(const Ledger& ledger, const AssetTransferPath& path);

} // namespace evopt

#endif // EVOPT_PATHFIND_HPP
