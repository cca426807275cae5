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

#include "evopt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_set>

namespace evopt {

void FeatureConfig::validate() const
{
    trace.validate();
    if (interval <= 0)
        throw std::invalid_argument("feature config: interval must be positive");
    if (horizon == 0 || uniform_length == 0)
        throw std::invalid_argument("feature config: horizon and uniform length must be positive");
}

nlohmann::json to_json(const FeatureConfig& c)
{
    return {
        {"theta", c.trace.theta},
        {"tspan_hours", static_cast<double>(c.trace.span) / static_cast<double>(seconds_per_hour)},
        {"path_cap", c.trace.path_cap},
        {"interval_hours", static_cast<double>(c.interval) / static_cast<double>(seconds_per_hour)},
        {"horizon", c.horizon},
        {"uniform_length", c.uniform_length},
    };
}

FeatureConfig feature_config_from_json(const nlohmann::json& j)
{
    FeatureConfig c;
    c.trace.theta = j.value("theta", c.trace.theta);
    c.trace.span = static_cast<Timestamp>(std::llround(j.value("tspan_hours", 24.0) * seconds_per_hour));
    c.trace.path_cap = j.value("path_cap", c.trace.path_cap);
    c.interval = static_cast<Timestamp>(std::llround(j.value("interval_hours", 1.0) * seconds_per_hour));
    c.horizon = j.value("horizon", c.horizon);
    c.uniform_length = j.value("uniform_length", c.uniform_length);
    c.validate();
    return c;
}

std::shared_ptr<const RawBranch> make_raw_branch(const Ledger& ledger, const PathList& paths, Direction direction,
    std::size_t uniform_length)
{
    auto raw = std::make_shared<RawBranch>();
    const std::size_t n = paths.size();
    raw->path_count = n;
    raw->nodes.assign(uniform_length * n * tx_feature_dim, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto rows = path_features(ledger, paths[k], no_time_limit);
        const auto uniform = uniform_resample<TxFeatureVector>(rows, uniform_length);
        for (std::size_t i = 0; i < uniform_length; ++i)
            std::copy(uniform[i].begin(), uniform[i].end(),
                raw->nodes.begin() + static_cast<std::ptrdiff_t>((i * n + k) * tx_feature_dim));
    }
    const PathGraph graph = build_path_graph(paths, direction);
    auto cliques = std::make_shared<std::vector<std::vector<int>>>();
    for (const auto& comp : graph.components) {
        if (comp.members.size() < 2)
            continue;
        cliques->push_back(comp.members);
        raw->binding_txs.push_back(comp.terminal);
    }
    raw->cliques = std::move(cliques);
    return raw;
}

namespace {

std::vector<double> binding_features(const Ledger& ledger, const RawBranch& branch, Timestamp as_of)
{
    std::vector<double> out;
    out.reserve(branch.binding_txs.size() * address_feature_dim);
    for (TxIndex tx : branch.binding_txs) {
        const auto f = address_features(ledger, binding_address(ledger, tx), as_of);
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

} // namespace

StepFeaturizer::StepFeaturizer(const Ledger& ledger, std::string address, Timestamp origin, const FeatureConfig& config)
    : ledger_(&ledger), address_(std::move(address)), origin_(origin), config_(config)
{
    config_.validate();
}

RawStep StepFeaturizer::next()
{
    ++t_;
    const Timestamp as_of = origin_ + static_cast<Timestamp>(t_) * config_.interval;
    std::shared_ptr<const PathList> prev_backward, prev_forward;
    if (paths_) {
        prev_backward = paths_->backward_list();
        prev_forward = paths_->forward_list();
        paths_ = std::make_unique<PathSet>(extend_path_set(*paths_, *ledger_, as_of));
    } else {
        paths_ = std::make_unique<PathSet>(build_path_set(*ledger_, address_, as_of, config_.trace));
    }
    if (backward_ && paths_->backward_list() == prev_backward)
        ++reused_;
    else
        backward_ = make_raw_branch(*ledger_, paths_->backward(), Direction::backward, config_.uniform_length);
    if (forward_ && paths_->forward_list() == prev_forward)
        ++reused_;
    else
        forward_ = make_raw_branch(*ledger_, paths_->forward(), Direction::forward, config_.uniform_length);

    RawStep step;
    step.t = t_;
    step.as_of = as_of;
    step.address = address_features(*ledger_, address_, as_of);
    step.backward = backward_;
    step.forward = forward_;
    step.backward_cliques = binding_features(*ledger_, *backward_, as_of);
    step.forward_cliques = binding_features(*ledger_, *forward_, as_of);
    return step;
}

RawSample build_raw_sample(const Ledger& ledger, const LabelRecord& record, const FeatureConfig& config)
{
    RawSample s;
    s.address = record.address;
    s.label = record.label;
    s.first_seen = record.first_seen;
    StepFeaturizer featurizer(ledger, record.address, record.first_seen, config);
    s.steps.reserve(config.horizon);
    for (std::size_t t = 0; t < config.horizon; ++t)
        s.steps.push_back(featurizer.next());
    return s;
}

NamedTensors FeatureScalers::to_tensors() const
{
    NamedTensors out;
    auto put = [&](const std::string& kind, const FeatureScaler& s) {
        out.emplace("scaler." + kind + ".mean", Tensor::constant({1, s.dim()}, s.mean()));
        out.emplace("scaler." + kind + ".std", Tensor::constant({1, s.dim()}, s.stddev()));
    };
    put("address", address);
    put("tx", tx);
    put("edge", edge);
    return out;
}

FeatureScalers FeatureScalers::from_tensors(const NamedTensors& tensors)
{
    auto get = [&](const std::string& kind, std::size_t dim) {
        auto m = tensors.find("scaler." + kind + ".mean");
        auto s = tensors.find("scaler." + kind + ".std");
        if (m == tensors.end() || s == tensors.end())
            throw std::runtime_error("checkpoint: missing scaler statistics for '" + kind + "'");
        if (m->second.size() != dim || s->second.size() != dim)
            throw std::runtime_error("checkpoint: scaler '" + kind + "' has the wrong dimension");
        return FeatureScaler(m->second.values(), s->second.values());
    };
    return {get("address", address_feature_dim), get("tx", tx_feature_dim), get("edge", address_feature_dim)};
}

FeatureScalers fit_scalers(std::span<const RawSample> samples, std::span<const std::size_t> indices)
{
    std::vector<double> address_rows, tx_rows, edge_rows;
    std::unordered_set<const RawBranch*> seen;
    for (std::size_t i : indices) {
        for (const auto& step : samples[i].steps) {
            address_rows.insert(address_rows.end(), step.address.begin(), step.address.end());
            edge_rows.insert(edge_rows.end(), step.backward_cliques.begin(), step.backward_cliques.end());
            edge_rows.insert(edge_rows.end(), step.forward_cliques.begin(), step.forward_cliques.end());
            for (const auto* branch : {step.backward.get(), step.forward.get()})
                if (branch && seen.insert(branch).second)
                    tx_rows.insert(tx_rows.end(), branch->nodes.begin(), branch->nodes.end());
        }
    }
    return {FeatureScaler::fit(address_rows, address_feature_dim), FeatureScaler::fit(tx_rows, tx_feature_dim),
        FeatureScaler::fit(edge_rows, address_feature_dim)};
}

StepEncoder::StepEncoder(const FeatureScalers& scalers, std::size_t uniform_length)
    : scalers_(&scalers), uniform_length_(uniform_length)
{
}

BranchInput StepEncoder::encode_branch(const std::shared_ptr<const RawBranch>& raw, const std::vector<double>& clique_features,
    std::size_t slot)
{
    BranchInput in;
    if (!raw || raw->path_count == 0)
        return in;
    if (raw != last_raw_[slot]) {
        const std::size_t n = raw->path_count;
        const std::size_t block = n * tx_feature_dim;
        std::vector<Tensor> nodes;
        nodes.reserve(uniform_length_);
        for (std::size_t i = 0; i < uniform_length_; ++i) {
            std::vector<double> values(raw->nodes.begin() + static_cast<std::ptrdiff_t>(i * block),
                raw->nodes.begin() + static_cast<std::ptrdiff_t>((i + 1) * block));
            scalers_->tx.transform(values);
            nodes.push_back(Tensor::constant({n, tx_feature_dim}, std::move(values)));
        }
        last_raw_[slot] = raw;
        last_nodes_[slot] = std::move(nodes);
    }
    in.nodes = last_nodes_[slot];
    in.cliques = raw->cliques;
    if (!raw->cliques->empty()) {
        std::vector<double> values = clique_features;
        scalers_->edge.transform(values);
        in.clique_features = Tensor::constant({raw->cliques->size(), address_feature_dim}, std::move(values));
    }
    return in;
}

StepInput StepEncoder::encode(const RawStep& step)
{
    StepInput in;
    in.t = step.t;
    std::vector<double> address(step.address.begin(), step.address.end());
    scalers_->address.transform(address);
    in.address = Tensor::constant({1, address_feature_dim}, std::move(address));
    in.backward = encode_branch(step.backward, step.backward_cliques, 0);
    in.forward = encode_branch(step.forward, step.forward_cliques, 1);
    return in;
}

Sample encode_sample(const RawSample& raw, const FeatureScalers& scalers, std::size_t uniform_length)
{
    Sample s;
    s.address = raw.address;
    s.label = raw.label;
    s.first_seen = raw.first_seen;
    StepEncoder encoder(scalers, uniform_length);
    s.steps.reserve(raw.steps.size());
    for (const auto& step : raw.steps)
        s.steps.push_back(encoder.encode(step));
    return s;
}

Split stratified_split(std::span<const int> labels, std::uint64_t seed, double train_ratio, double validation_ratio)
{
    if (train_ratio <= 0 || validation_ratio < 0 || train_ratio + validation_ratio > 1.0)
        throw std::invalid_argument("stratified_split: invalid ratios");
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_label[labels[i]].push_back(i);
    std::mt19937_64 rng(seed);
    Split split;
    for (auto& [label, idx] : by_label) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n = static_cast<double>(idx.size());
        const auto n_train = static_cast<std::size_t>(std::llround(n * train_ratio));
        const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(n * validation_ratio)));
        split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.validation.insert(split.validation.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
            idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

Dataset build_dataset(const Ledger& ledger, std::span<const LabelRecord> labels, const FeatureConfig& config, std::uint64_t seed)
{
    config.validate();
    Dataset ds;
    ds.features = config;
    std::vector<RawSample> raw;
    raw.reserve(labels.size());
    std::vector<int> y;
    for (const auto& rec : labels) {
        raw.push_back(build_raw_sample(ledger, rec, config));
        y.push_back(rec.label);
    }
    ds.split = stratified_split(y, seed);
    ds.scalers = fit_scalers(raw, ds.split.train);
    ds.samples.reserve(raw.size());
    for (auto& r : raw) {
        ds.samples.push_back(encode_sample(r, ds.scalers, config.uniform_length));
        r.steps.clear();
        r.steps.shrink_to_fit();
    }
    return ds;
}

} // namespace evopt
