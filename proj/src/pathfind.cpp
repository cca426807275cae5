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

#include "evopt/pathfind.hpp"

#include <algorithm>

#include <json.hpp>

namespace evopt {

namespace {

void check_tx(const Ledger& ledger, TxIndex tx)
{
    if (tx >= ledger.size())
        throw std::out_of_range("unknown transaction index " + std::to_string(tx));
}

bool on_chain(const TraceTree& tree, int node, TxIndex tx)
{
    for (int n = node; n >= 0; n = tree.nodes[n].parent)
        if (tree.nodes[n].tx == tx)
            return true;
    return false;
}

int add_child(TraceTree& tree, int parent, TxIndex tx, double score)
{
    TraceTree::Node node;
    node.tx = tx;
    node.score = score;
    node.parent = parent;
    tree.nodes.push_back(std::move(node));
    const int id = static_cast<int>(tree.nodes.size()) - 1;
    tree.nodes[parent].children.push_back(id);
    return id;
}

void grow_backward(const Ledger& ledger, TraceTree& tree, int start, Timestamp anchor_time, const TraceParams& p)
{
    std::vector<int> stack{start};
    while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        const TxIndex tx = tree.nodes[n].tx;
        const double parent_score = tree.nodes[n].score;
        const Amount total = ledger.input_total(tx);
        if (total <= 0)
            continue;
        for (const auto& link : ledger.sources(tx)) {
            const double prop = static_cast<double>(link.amount) / static_cast<double>(total);
            const double score = prop * parent_score;
            if (score < p.theta || anchor_time - ledger.time(link.tx) > p.span)
                continue;
            if (on_chain(tree, n, link.tx))
                continue;
            stack.push_back(add_child(tree, n, link.tx, score));
        }
    }
}

// Expands spenders of `start` with time in (after, as_of], and then the full
// subtree below every node added.
void grow_forward(const Ledger& ledger, TraceTree& tree, int start, Timestamp anchor_time, const TraceParams& p, Timestamp after,
    Timestamp as_of)
{
    std::vector<std::pair<int, Timestamp>> stack{{start, after}};
    while (!stack.empty()) {
        const auto [n, lower] = stack.back();
        stack.pop_back();
        const TxIndex tx = tree.nodes[n].tx;
        const double parent_score = tree.nodes[n].score;
        const Amount total = ledger.output_total(tx);
        for (const auto& link : ledger.spenders(tx)) {
            const Timestamp t = ledger.time(link.tx);
            if (t <= lower)
                continue;
            if (t > as_of)
                break;
            const double prop = static_cast<double>(link.amount) / static_cast<double>(total);
            const double score = prop * parent_score;
            if (score < p.theta || t - anchor_time > p.span)
                continue;
            if (on_chain(tree, n, link.tx))
                continue;
            stack.emplace_back(add_child(tree, n, link.tx, score), std::numeric_limits<Timestamp>::min());
        }
    }
}

bool canonical_less(const Ledger& ledger, const AssetTransferPath& a, const AssetTransferPath& b)
{
    const auto& ta = ledger.tx(a.terminal()).id;
    const auto& tb = ledger.tx(b.terminal()).id;
    if (ta != tb)
        return ta < tb;
    if (a.length() != b.length())
        return a.length() < b.length();
    for (std::size_t k = 0; k < a.length(); ++k) {
        const auto& ia = ledger.tx(a.nodes[k].tx).id;
        const auto& ib = ledger.tx(b.nodes[k].tx).id;
        if (ia != ib)
            return ia < ib;
    }
    return false;
}

void materialize(const Ledger& ledger, AnchorTrace& trace, const TraceParams& p)
{
    trace.paths.clear();
    const auto& nodes = trace.tree.nodes;
    for (std::size_t leaf = 0; leaf < nodes.size(); ++leaf) {
        if (!nodes[leaf].children.empty())
            continue;
        AssetTransferPath path;
        path.direction = trace.direction;
        path.anchor = trace.anchor;
        for (int n = static_cast<int>(leaf); n >= 0; n = nodes[n].parent)
            path.nodes.push_back({nodes[n].tx, nodes[n].score});
        // Collected leaf -> root; backward paths are stored terminal -> anchor
        // which is exactly that order.
        if (trace.direction == Direction::forward)
            std::reverse(path.nodes.begin(), path.nodes.end());
        trace.paths.push_back(std::move(path));
    }
    trace.enumerated = trace.paths.size();
    if (trace.paths.size() > p.path_cap) {
        std::sort(trace.paths.begin(), trace.paths.end(), [&](const auto& a, const auto& b) {
            const double sa = a.terminal_node().score;
            const double sb = b.terminal_node().score;
            if (sa != sb)
                return sa > sb;
            const Timestamp ta = ledger.time(a.terminal());
            const Timestamp tb = ledger.time(b.terminal());
            if (ta != tb)
                return ta < tb;
            return canonical_less(ledger, a, b);
        });
        trace.paths.resize(p.path_cap);
    }
    std::sort(trace.paths.begin(), trace.paths.end(),
        [&](const auto& a, const auto& b) { return canonical_less(ledger, a, b); });
}

AnchorTrace root_trace(Direction d, TxIndex anchor)
{
    AnchorTrace trace;
    trace.direction = d;
    trace.anchor = anchor;
    trace.tree.nodes.push_back({anchor, 1.0, -1, {}});
    return trace;
}

} // namespace

const char* to_string(Direction d)
{
    return d == Direction::backward ? "backward" : "forward";
}

void TraceParams::validate() const
{
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("theta must lie in (0, 1]");
    if (span <= 0)
        throw std::invalid_argument("time span must be positive");
    if (path_cap == 0)
        throw std::invalid_argument("path cap must be positive");
}

std::vector<TxPair> influence_pairs(const Ledger& ledger, TxIndex tx, double theta)
{
    check_tx(ledger, tx);
    std::vector<TxPair> out;
    const Amount total = ledger.input_total(tx);
    if (total <= 0)
        return out;
    for (const auto& link : ledger.sources(tx)) {
        const double prop = static_cast<double>(link.amount) / static_cast<double>(total);
        if (prop >= theta)
            out.push_back({link.tx, tx, PairKind::influence, prop});
    }
    return out;
}

std::vector<TxPair> trust_pairs(const Ledger& ledger, TxIndex tx, double theta, Timestamp until_time)
{
    check_tx(ledger, tx);
    std::vector<TxPair> out;
    const Amount total = ledger.output_total(tx);
    for (const auto& link : ledger.spenders(tx)) {
        if (ledger.time(link.tx) > until_time)
            break;
        const double prop = static_cast<double>(link.amount) / static_cast<double>(total);
        if (prop >= theta)
            out.push_back({tx, link.tx, PairKind::trust, prop});
    }
    return out;
}

AnchorTrace trace_backward(const Ledger& ledger, TxIndex anchor, const TraceParams& params)
{
    check_tx(ledger, anchor);
    auto trace = root_trace(Direction::backward, anchor);
    grow_backward(ledger, trace.tree, 0, ledger.time(anchor), params);
    materialize(ledger, trace, params);
    return trace;
}

AnchorTrace trace_forward(const Ledger& ledger, TxIndex anchor, const TraceParams& params, Timestamp as_of)
{
    check_tx(ledger, anchor);
    auto trace = root_trace(Direction::forward, anchor);
    grow_forward(ledger, trace.tree, 0, ledger.time(anchor), params, std::numeric_limits<Timestamp>::min(), as_of);
    materialize(ledger, trace, params);
    return trace;
}

std::shared_ptr<const AnchorTrace> extend_forward_trace(const Ledger& ledger, const AnchorTrace& prev, const TraceParams& params,
    Timestamp prev_as_of, Timestamp new_as_of)
{
    const Timestamp anchor_time = ledger.time(prev.anchor);
    if (new_as_of <= prev_as_of || prev_as_of >= anchor_time + params.span)
        return nullptr;

    // Cheap scan first: does any node have a spender that arrived in the interval?
    bool touched = false;
    for (const auto& node : prev.tree.nodes) {
        const auto spenders = ledger.spenders(node.tx);
        auto it = std::upper_bound(spenders.begin(), spenders.end(), prev_as_of,
            [&](Timestamp t, const FlowLink& link) { return t < ledger.time(link.tx); });
        if (it != spenders.end() && ledger.time(it->tx) <= new_as_of) {
            touched = true;
            break;
        }
    }
    if (!touched)
        return nullptr;

    auto next = std::make_shared<AnchorTrace>();
    next->direction = prev.direction;
    next->anchor = prev.anchor;
    next->tree = prev.tree;
    const auto existing = static_cast<int>(next->tree.nodes.size());
    for (int n = 0; n < existing; ++n)
        grow_forward(ledger, next->tree, n, anchor_time, params, prev_as_of, new_as_of);
    if (static_cast<int>(next->tree.nodes.size()) == existing)
        return nullptr;
    materialize(ledger, *next, params);
    return next;
}

std::vector<AssetTransferPath> backward_paths(const Ledger& ledger, TxIndex anchor, const TraceParams& params)
{
    return trace_backward(ledger, anchor, params).paths;
}

std::vector<AssetTransferPath> forward_paths(const Ledger& ledger, TxIndex anchor, const TraceParams& params, Timestamp as_of)
{
    return trace_forward(ledger, anchor, params, as_of).paths;
}

std::size_t PathSet::capped_anchors() const
{
    std::size_t n = 0;
    for (const auto& a : backward_anchors_)
        n += a->capped() ? 1 : 0;
    for (const auto& a : forward_anchors_)
        n += a->capped() ? 1 : 0;
    return n;
}

bool PathSet::operator==(const PathSet& other) const
{
    return owner_ == other.owner_ && as_of_ == other.as_of_ && backward() == other.backward() && forward() == other.forward();
}

void PathSet::rebuild_lists(bool backward_changed, bool forward_changed, const PathSet* prev)
{
    auto flatten = [](const std::vector<std::shared_ptr<const AnchorTrace>>& anchors) {
        auto list = std::make_shared<PathList>();
        for (const auto& a : anchors)
            list->insert(list->end(), a->paths.begin(), a->paths.end());
        return std::shared_ptr<const PathList>(std::move(list));
    };
    backward_list_ = (prev && !backward_changed) ? prev->backward_list_ : flatten(backward_anchors_);
    forward_list_ = (prev && !forward_changed) ? prev->forward_list_ : flatten(forward_anchors_);
}

PathSet build_path_set(const Ledger& ledger, const std::string& owner, Timestamp as_of, const TraceParams& params)
{
    params.validate();
    PathSet set;
    set.owner_ = owner;
    set.as_of_ = as_of;
    set.params_ = params;
    const auto activity = ledger.txs_of_address(owner, as_of);
    for (TxIndex tx : activity.receive)
        set.backward_anchors_.push_back(std::make_shared<const AnchorTrace>(trace_backward(ledger, tx, params)));
    for (TxIndex tx : activity.spend)
        set.forward_anchors_.push_back(std::make_shared<const AnchorTrace>(trace_forward(ledger, tx, params, as_of)));
    set.rebuild_lists(true, true, nullptr);
    return set;
}

PathSet extend_path_set(const PathSet& prev, const Ledger& ledger, Timestamp new_as_of)
{
    if (new_as_of < prev.as_of_)
        throw std::invalid_argument("extend_path_set: time regression");
    PathSet set;
    set.owner_ = prev.owner_;
    set.as_of_ = new_as_of;
    set.params_ = prev.params_;
    set.backward_anchors_ = prev.backward_anchors_;
    set.forward_anchors_ = prev.forward_anchors_;
    if (new_as_of == prev.as_of_) {
        set.backward_list_ = prev.backward_list_;
        set.forward_list_ = prev.forward_list_;
        return set;
    }

    bool backward_changed = false;
    bool forward_changed = false;
    for (auto& anchor : set.forward_anchors_) {
        if (auto grown = extend_forward_trace(ledger, *anchor, set.params_, prev.as_of_, new_as_of)) {
            anchor = std::move(grown);
            forward_changed = true;
        }
    }

    const auto& activity = ledger.activity(prev.owner_);
    auto in_interval = [&](TxIndex tx) { return ledger.time(tx) > prev.as_of_ && ledger.time(tx) <= new_as_of; };
    for (TxIndex tx : activity.receive) {
        if (!in_interval(tx))
            continue;
        set.backward_anchors_.push_back(std::make_shared<const AnchorTrace>(trace_backward(ledger, tx, set.params_)));
        backward_changed = true;
    }
    for (TxIndex tx : activity.spend) {
        if (!in_interval(tx))
            continue;
        set.forward_anchors_.push_back(std::make_shared<const AnchorTrace>(trace_forward(ledger, tx, set.params_, new_as_of)));
        forward_changed = true;
    }
    set.rebuild_lists(backward_changed, forward_changed, &prev);
    return set;
}

std::string path_to_json(const Ledger& ledger, const AssetTransferPath& path)
{
    nlohmann::ordered_json j;
    j["direction"] = to_string(path.direction);
    j["anchor"] = ledger.tx(path.anchor).id;
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : path.nodes)
        nodes.push_back(nlohmann::ordered_json::array({ledger.tx(n.tx).id, n.score}));
    j["nodes"] = std::move(nodes);
    return j.dump();
}

} // namespace evopt
