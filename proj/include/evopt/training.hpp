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

#ifndef EVOPT_TRAINING_HPP
#define EVOPT_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "evopt/dataset.hpp"
#include "evopt/metrics.hpp"
#include "evopt/model.hpp"

namespace evopt {

struct TrainConfig {
    double gamma = 1.0;
    double learning_rate = 1e-3;
    std::size_t max_epochs = 40;
    std::size_t patience = 5;
    std::size_t batch_size = 16;
    /// Positives are oversampled up to this many per negative in each epoch.
    double positive_per_negative = 0.25;
    /// Upper bound on the L2 norm of the batch-mean gradient; 0 disables.
    double clip_norm = 500;
    std::uint64_t seed = 7;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Negative log-likelihood of the survival value for cumulative rate S:
/// relu(S) for label 1 and -ln(1 - e^{-S}) for label 0. Below S = 0.05 the
/// label-0 term continues along its tangent, so it stays finite and sloped.
double prediction_loss(double cumulative_rate, int label);
Tensor prediction_loss(const Tensor& cumulative_rate, int label);

/// 1 when the per-timestep totals at t_m-1 and t_m have strictly opposite
/// signs, else 0. The total before the first step is 0.
double consistency_loss(const HazardTrace& trace, std::size_t t_m);

/// Σ_t √t (loss^P_t + γ·loss^C_t) for one sample over its steps. The trace
/// of the forward pass is appended to `trace` when given.
Tensor sample_loss(const ModelParams& params, const Sample& sample, double gamma, HazardTrace* trace = nullptr);

/// Sum of sample_loss over samples with equal step counts, run in lockstep.
/// Per-sample traces are written to `traces` when given.
Tensor batch_loss(const ModelParams& params, std::span<const Sample* const> samples, double gamma,
    std::vector<HazardTrace>* traces = nullptr);

/// Inference pass without recording.
HazardTrace run_sample(const ModelParams& params, const Sample& sample);
std::vector<HazardTrace> run_batch(const ModelParams& params, std::span<const Sample* const> samples);

/// survival series of the selected samples.
std::vector<std::vector<double>> predict(const ModelParams& params, std::span<const Sample> samples,
    std::span<const std::size_t> indices);

EvaluationReport evaluate(const ModelParams& params, std::span<const Sample> samples, std::span<const std::size_t> indices);

/// Adaptive moment estimation over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    /// Applies the current grads multiplied by `grad_scale`.
    void step(double grad_scale = 1.0);
    std::size_t steps() const { return t_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    /// Mean per-sample loss over the epoch's (oversampled) training batches.
    double train_loss = 0;
    double val_f1_early = 0;
    double val_f1_consistent = 0;
    double val_final_f1 = 0;
    /// Mean L2 norm of the batch-mean gradient before clipping.
    double grad_norm = 0;
    double seconds = 0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_f1_early = -1;
};

/// Epoch sample order: shuffled training indices with positives repeated up
/// to the configured ratio.
std::vector<std::size_t> epoch_order(std::span<const Sample> samples, std::span<const std::size_t> train, double positive_per_negative,
    std::uint64_t seed, std::size_t epoch);

TrainResult train(const Dataset& data, const ModelConfig& model_config, const TrainConfig& config,
    const std::function<void(const EpochRecord&)>& on_epoch = {});

/// CSV: epoch,train_loss,val_F1E,val_F1C.
void write_training_log(std::ostream& out, std::span<const EpochRecord> history);

/// Model tensors plus scaler statistics in the checkpoint format.
void write_model_checkpoint(std::ostream& out, const ModelParams& params, const FeatureScalers& scalers);
/// Validates tensor shapes against `config`.
std::pair<ModelParams, FeatureScalers> read_model_checkpoint(std::istream& in, const ModelConfig& config);

} // namespace evopt

#endif // EVOPT_TRAINING_HPP
