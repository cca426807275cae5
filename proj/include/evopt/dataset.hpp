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

#ifndef EVOPT_DATASET_HPP
#define EVOPT_DATASET_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evopt/features.hpp"
#include "evopt/graphs.hpp"
#include "evopt/model.hpp"
#include "evopt/pathfind.hpp"

namespace evopt {

struct FeatureConfig {
    TraceParams trace;
    /// Seconds between two timesteps.
    Timestamp interval = seconds_per_hour;
    std::size_t horizon = 24;
    std::size_t uniform_length = 6;

    void validate() const;
};

nlohmann::json to_json(const FeatureConfig& config);
FeatureConfig feature_config_from_json(const nlohmann::json& j);

/// Unscaled encoder input derived from one path list. Depends only on the
/// list, so it is shared for as long as the list is.
struct RawBranch {
    std::size_t path_count = 0;
    /// uniform_length × path_count × tx_dim, node-major.
    std::vector<double> nodes;
    /// Path-graph components with at least two members.
    std::shared_ptr<const std::vector<std::vector<int>>> cliques;
    /// Shared terminal tx of every clique.
    std::vector<TxIndex> binding_txs;
};

struct RawStep {
    std::size_t t = 0;
    Timestamp as_of = 0;
    AddressFeatureVector address{};
    std::shared_ptr<const RawBranch> backward;
    std::shared_ptr<const RawBranch> forward;
    /// |cliques| × address_dim binding-address features at as_of.
    std::vector<double> backward_cliques;
    std::vector<double> forward_cliques;
};

std::shared_ptr<const RawBranch> make_raw_branch(const Ledger& ledger, const PathList& paths, Direction direction,
    std::size_t uniform_length);

/// Produces the raw inputs of one address step by step, extending its path
/// set incrementally and reusing branch data whose path list is unchanged.
class StepFeaturizer {
public:
    StepFeaturizer(const Ledger& ledger, std::string address, Timestamp origin, const FeatureConfig& config);

    /// Raw inputs for timestep t() + 1 at origin + (t() + 1)·interval.
    RawStep next();

    std::size_t t() const { return t_; }
    const PathSet& path_set() const { return *paths_; }
    /// Steps whose backward/forward branch data was reused from the previous step.
    std::size_t reused_branches() const { return reused_; }

private:
    const Ledger* ledger_;
    std::string address_;
    Timestamp origin_;
    FeatureConfig config_;
    std::size_t t_ = 0;
    std::unique_ptr<PathSet> paths_;
    std::shared_ptr<const RawBranch> backward_;
    std::shared_ptr<const RawBranch> forward_;
    std::size_t reused_ = 0;
};

struct RawSample {
    std::string address;
    int label = 0;
    Timestamp first_seen = 0;
    std::vector<RawStep> steps;
};

RawSample build_raw_sample(const Ledger& ledger, const LabelRecord& record, const FeatureConfig& config);

/// Scalers for address features, path node features and edge features.
struct FeatureScalers {
    FeatureScaler address;
    FeatureScaler tx;
    FeatureScaler edge;

    /// Stored alongside model tensors as "scaler.<kind>.mean|std".
    NamedTensors to_tensors() const;
    static FeatureScalers from_tensors(const NamedTensors& tensors);
};

FeatureScalers fit_scalers(std::span<const RawSample> samples, std::span<const std::size_t> indices);

/// Scales raw steps into model inputs. Branch tensors are cached per raw
/// branch so shared branches stay shared.
class StepEncoder {
public:
    StepEncoder(const FeatureScalers& scalers, std::size_t uniform_length);

    StepInput encode(const RawStep& step);

private:
    BranchInput encode_branch(const std::shared_ptr<const RawBranch>& raw, const std::vector<double>& clique_features, std::size_t slot);

    const FeatureScalers* scalers_;
    std::size_t uniform_length_;
    std::array<std::shared_ptr<const RawBranch>, 2> last_raw_;
    std::array<std::vector<Tensor>, 2> last_nodes_;
};

struct Sample {
    std::string address;
    int label = 0;
    Timestamp first_seen = 0;
    std::vector<StepInput> steps;
};

Sample encode_sample(const RawSample& raw, const FeatureScalers& scalers, std::size_t uniform_length);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Per-label seeded shuffle, then 70/15/15 (or the given ratios) per label.
Split stratified_split(std::span<const int> labels, std::uint64_t seed, double train_ratio = 0.70, double validation_ratio = 0.15);

struct Dataset {
    std::vector<Sample> samples;
    Split split;
    FeatureScalers scalers;
    FeatureConfig features;
};

/// Featurizes every labeled address, splits, fits scalers on the training
/// split and encodes all samples.
Dataset build_dataset(const Ledger& ledger, std::span<const LabelRecord> labels, const FeatureConfig& config, std::uint64_t seed);

} // namespace evopt

#endif // EVOPT_DATASET_HPP
