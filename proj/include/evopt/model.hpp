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

#ifndef EVOPT_MODEL_HPP
#define EVOPT_MODEL_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evopt/pathfind.hpp"
#include "evopt/tensor.hpp"

namespace evopt {

/// Branch order used for LSTMs T-1..T-5 and their hazards.
enum Branch : std::size_t {
    branch_address = 0,
    branch_backward_path = 1,
    branch_backward_graph = 2,
    branch_forward_path = 3,
    branch_forward_graph = 4,
};
constexpr std::size_t branch_count = 5;

struct ModelConfig {
    std::size_t hidden = 32;
    std::size_t address_dim = 9;
    std::size_t tx_dim = 16;
    std::size_t uniform_length = 6;
    std::size_t heads = 4;
    std::size_t path_cap = 256;
    std::size_t horizon = 24;
    /// Ablation switches. Disabled branches emit a zero rate.
    bool use_paths = true;
    bool use_graphs = true;

    void validate() const;
    bool branch_active(std::size_t branch) const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

class ModelParams {
public:
    ModelParams() = default;
    ModelParams(ModelConfig config, NamedTensors tensors);

    const ModelConfig& config() const { return config_; }
    const NamedTensors& tensors() const { return tensors_; }
    NamedTensors& tensors() { return tensors_; }
    const Tensor& get(const std::string& name) const;
    /// Parameters in name order.
    std::vector<Tensor> list() const;
    std::size_t parameter_count() const;
    void zero_grad();
    /// Deep copy with fresh storage.
    ModelParams clone() const;

private:
    ModelConfig config_;
    NamedTensors tensors_;
};

/// Uniform in ±1/sqrt(fan_in), LSTM forget-gate biases shifted by +1.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
/// Expected name -> shape table for a config.
std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& config);

struct LstmState {
    Tensor h;
    Tensor c;
};

/// Recurrent state of one or more addresses; row i of every tensor belongs
/// to address i.
struct ModelState {
    std::array<LstmState, branch_count> lstm;
    /// Last timestep processed; 0 before the first step.
    std::size_t t = 0;

    std::size_t rows() const { return lstm[0].h.rows(); }
};

ModelState initial_state(const ModelConfig& config, std::size_t rows = 1);
/// Stacks single-address states at a common timestep.
ModelState stack_states(std::span<const ModelState* const> states);
ModelState state_row(const ModelState& state, std::size_t row);

/// Paths of one direction at one timestep, resampled to the uniform length.
struct BranchInput {
    /// uniform_length tensors of shape N×tx_dim; node k of every path.
    std::vector<Tensor> nodes;
    /// Path-graph components with at least two members. Every component is a
    /// clique bound by one terminal tx.
    std::shared_ptr<const std::vector<std::vector<int>>> cliques;
    /// |cliques|×address_dim binding-address features; undefined without cliques.
    Tensor clique_features;

    std::size_t path_count() const { return nodes.empty() ? 0 : nodes.front().rows(); }
};

struct StepInput {
    std::size_t t = 0;
    /// 1×address_dim.
    Tensor address;
    BranchInput backward;
    BranchInput forward;
};

struct StepResult {
    ModelState state;
    /// Each 1×1; zero constants for disabled branches.
    std::array<Tensor, branch_count> lambda;
    /// Σ_j λ_j as 1×1.
    Tensor lambda_total;
};

/// Rates and survival values of one address, one entry per processed step.
struct HazardTrace {
    std::vector<std::array<double, branch_count>> lambda;
    /// Σ_{i<=t} Σ_j λ_{j,i}.
    std::vector<double> cumulative;
    std::vector<double> survival;

    std::size_t size() const { return survival.size(); }
    /// Σ_j λ_{j,t} for 1-based t.
    double step_total(std::size_t t) const;
    void append(const StepResult& step);
    void append(const std::array<double, branch_count>& rates);
};

/// Row-vector LSTM cell: gates = [x ∥ h]·W + b in i, f, g, o order.
LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w, const Tensor& b);

LstmState encode_address_step(const ModelParams& params, const LstmState& state, const Tensor& address_features);

/// Encodes every path (rows of `nodes[k]`) with gate weights generated from
/// the 1×2d context. Returns N×d final hidden states.
Tensor evolve_path_encode(const ModelParams& params, Direction direction, const Tensor& context, std::span<const Tensor> nodes);

/// Multi-head attention over the rows of `vectors` (N×d). Returns 1×d.
Tensor attention_aggregate(const ModelParams& params, std::size_t branch, const Tensor& vectors, const Tensor& h_address);

/// One evolve path-graph convolution. Returns N×d.
Tensor evolve_gcn(const ModelParams& params, Direction direction, const Tensor& path_vectors,
    const std::shared_ptr<const std::vector<std::vector<int>>>& cliques, const Tensor& clique_features, const Tensor& context);

/// λ_j = tanh(h_j · w_j) for the active branches.
std::array<Tensor, branch_count> hazards(const ModelParams& params, const std::array<Tensor, branch_count>& hidden);

/// exp(-relu(cumulative)).
double survival(double cumulative_rate);
Tensor survival(const Tensor& cumulative_rate);

StepResult step_address(const ModelParams& params, const ModelState& state, const StepInput& input);

struct BatchStepResult {
    ModelState state;
    /// Each B×1; zero constants for disabled branches.
    std::array<Tensor, branch_count> lambda;
    Tensor lambda_total;

    /// Rates of row i.
    std::array<double, branch_count> rates(std::size_t row) const;
};

/// Steps B addresses that share a timestep. Equivalent to B separate
/// step_address calls; the weight generators run as one product per step.
BatchStepResult step_batch(const ModelParams& params, const ModelState& state, std::span<const StepInput* const> inputs);

} // namespace evopt

#endif // EVOPT_MODEL_HPP
