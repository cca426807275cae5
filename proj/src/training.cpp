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

#include "evopt/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

namespace evopt {

namespace {

// Below this cumulative rate the label-0 term continues linearly with the
// slope it has there, so negatives scored as malicious keep a gradient.
constexpr double negative_knee = 0.05;
constexpr std::size_t inference_batch = 64;

} // namespace

void TrainConfig::validate() const
{
    if (!(gamma >= 0))
        throw std::invalid_argument("train config: gamma must be non-negative");
    if (!(learning_rate > 0))
        throw std::invalid_argument("train config: learning rate must be positive");
    if (max_epochs == 0 || batch_size == 0)
        throw std::invalid_argument("train config: epochs and batch size must be positive");
    if (!(positive_per_negative >= 0))
        throw std::invalid_argument("train config: oversampling ratio must be non-negative");
    if (!(clip_norm >= 0))
        throw std::invalid_argument("train config: clip norm must be non-negative");
}

nlohmann::json to_json(const TrainConfig& c)
{
    return {
        {"gamma", c.gamma},
        {"learning_rate", c.learning_rate},
        {"max_epochs", c.max_epochs},
        {"patience", c.patience},
        {"batch_size", c.batch_size},
        {"positive_per_negative", c.positive_per_negative},
        {"clip_norm", c.clip_norm},
        {"seed", c.seed},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j)
{
    TrainConfig c;
    c.gamma = j.value("gamma", c.gamma);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.positive_per_negative = j.value("positive_per_negative", c.positive_per_negative);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

namespace {

double knee_slope()
{
    return 1.0 / std::expm1(negative_knee);
}

// -ln(1 - e^{-S}) for S >= knee, linear below.
Tensor negative_loss(const Tensor& s)
{
    Tensor log_term = neg(log(sub(Tensor::scalar(1.0), exp(neg(clamp_min(s, negative_knee))))));
    return add(log_term, scale(relu(sub(Tensor::scalar(negative_knee), s)), knee_slope()));
}

} // namespace

double prediction_loss(double s, int label)
{
    if (label == 1)
        return std::max(0.0, s);
    const double m = std::max(s, negative_knee);
    return -std::log(-std::expm1(-m)) + knee_slope() * std::max(0.0, negative_knee - s);
}

Tensor prediction_loss(const Tensor& s, int label)
{
    return label == 1 ? relu(s) : negative_loss(s);
}

double consistency_loss(const HazardTrace& trace, std::size_t t_m)
{
    if (t_m == 0 || t_m > trace.size())
        throw std::out_of_range("consistency_loss: timestep outside the trace");
    const double prev = t_m == 1 ? 0.0 : trace.step_total(t_m - 1);
    const double cur = trace.step_total(t_m);
    return prev * cur >= 0 ? 0.0 : 1.0;
}

Tensor batch_loss(const ModelParams& params, std::span<const Sample* const> samples, double gamma, std::vector<HazardTrace>* traces)
{
    if (samples.empty())
        throw std::invalid_argument("batch_loss: no samples");
    const std::size_t rows = samples.size();
    const std::size_t steps = samples.front()->steps.size();
    std::vector<double> labels, labels_complement;
    for (const auto* s : samples) {
        if (s->steps.size() != steps)
            throw std::invalid_argument("batch_loss: samples differ in step count");
        labels.push_back(s->label);
        labels_complement.push_back(1.0 - s->label);
    }
    const bool any_negative = std::find(labels.begin(), labels.end(), 0.0) != labels.end();
    const Tensor l = Tensor::constant({rows, 1}, labels);
    const Tensor not_l = Tensor::constant({rows, 1}, labels_complement);
    std::vector<HazardTrace> local(rows);
    ModelState state = initial_state(params.config(), rows);
    Tensor cumulative;
    Tensor total = Tensor::scalar(0.0);
    double constant_part = 0;
    std::vector<const StepInput*> inputs(rows);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < rows; ++i)
            inputs[i] = &samples[i]->steps[t];
        BatchStepResult r = step_batch(params, state, inputs);
        cumulative = cumulative.defined() ? add(cumulative, r.lambda_total) : r.lambda_total;
        const double w = std::sqrt(static_cast<double>(r.state.t));
        // Each row keeps only the term of its own label.
        Tensor loss = mul(l, relu(cumulative));
        if (any_negative)
            loss = add(loss, mul(not_l, negative_loss(cumulative)));
        total = add(total, scale(sum(loss), w));
        for (std::size_t i = 0; i < rows; ++i) {
            local[i].append(r.rates(i));
            constant_part += w * gamma * consistency_loss(local[i], local[i].size());
        }
        state = std::move(r.state);
    }
    if (traces)
        *traces = std::move(local);
    // The consistency term is piecewise constant in the parameters.
    return add(total, Tensor::scalar(constant_part));
}

Tensor sample_loss(const ModelParams& params, const Sample& sample, double gamma, HazardTrace* trace)
{
    const Sample* one = &sample;
    std::vector<HazardTrace> traces;
    Tensor loss = batch_loss(params, std::span<const Sample* const>(&one, 1), gamma, trace ? &traces : nullptr);
    if (trace) {
        const auto& t = traces.front();
        trace->lambda.insert(trace->lambda.end(), t.lambda.begin(), t.lambda.end());
        trace->cumulative.insert(trace->cumulative.end(), t.cumulative.begin(), t.cumulative.end());
        trace->survival.insert(trace->survival.end(), t.survival.begin(), t.survival.end());
    }
    return loss;
}

HazardTrace run_sample(const ModelParams& params, const Sample& sample)
{
    const Sample* one = &sample;
    return run_batch(params, std::span<const Sample* const>(&one, 1)).front();
}

std::vector<HazardTrace> run_batch(const ModelParams& params, std::span<const Sample* const> samples)
{
    NoGradScope no_grad;
    std::vector<HazardTrace> traces;
    batch_loss(params, samples, 0.0, &traces);
    return traces;
}

std::vector<std::vector<double>> predict(const ModelParams& params, std::span<const Sample> samples,
    std::span<const std::size_t> indices)
{
    std::vector<std::vector<double>> out;
    out.reserve(indices.size());
    std::vector<const Sample*> chunk;
    for (std::size_t k = 0; k < indices.size(); k += inference_batch) {
        chunk.clear();
        for (std::size_t m = k; m < std::min(indices.size(), k + inference_batch); ++m)
            chunk.push_back(&samples[indices[m]]);
        for (auto& tr : run_batch(params, chunk))
            out.push_back(std::move(tr.survival));
    }
    return out;
}

EvaluationReport evaluate(const ModelParams& params, std::span<const Sample> samples, std::span<const std::size_t> indices)
{
    std::vector<int> labels;
    for (std::size_t i : indices)
        labels.push_back(samples[i].label);
    return evaluate_series(predict(params, samples, indices), labels);
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps)
{
    for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step(double grad_scale)
{
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& g = params_[i].grad();
        auto& w = params_[i].mutable_values();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = g.empty() ? 0.0 : g[k] * grad_scale;
            m[k] = beta1_ * m[k] + (1 - beta1_) * gk;
            v[k] = beta2_ * v[k] + (1 - beta2_) * gk * gk;
            w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
        }
    }
}

std::vector<std::size_t> epoch_order(std::span<const Sample> samples, std::span<const std::size_t> train, double positive_per_negative,
    std::uint64_t seed, std::size_t epoch)
{
    std::vector<std::size_t> pos, neg;
    for (std::size_t i : train)
        (samples[i].label ? pos : neg).push_back(i);
    std::mt19937_64 rng(seed * 1000003ULL + epoch);
    std::vector<std::size_t> order = neg;
    const auto target = static_cast<std::size_t>(std::ceil(static_cast<double>(neg.size()) * positive_per_negative));
    if (pos.size() >= target || pos.empty()) {
        order.insert(order.end(), pos.begin(), pos.end());
    } else {
        std::vector<std::size_t> pool = pos;
        std::size_t added = 0;
        while (added < target) {
            std::shuffle(pool.begin(), pool.end(), rng);
            for (std::size_t k = 0; k < pool.size() && added < target; ++k, ++added)
                order.push_back(pool[k]);
        }
    }
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

TrainResult train(const Dataset& data, const ModelConfig& model_config, const TrainConfig& config,
    const std::function<void(const EpochRecord&)>& on_epoch)
{
    config.validate();
    model_config.validate();
    bool has_pos = false, has_neg = false;
    for (std::size_t i : data.split.train)
        (data.samples[i].label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw std::invalid_argument("train: the training split must contain both classes");
    if (data.split.validation.empty())
        throw std::invalid_argument("train: empty validation split");

    TrainResult result;
    ModelParams params = init_params(model_config, config.seed);
    Adam opt(params.list(), config.learning_rate);
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const auto order = epoch_order(data.samples, data.split.train, config.positive_per_negative, config.seed, epoch);
        double loss_sum = 0, norm_sum = 0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            params.zero_grad();
            const std::size_t end = std::min(order.size(), b + config.batch_size);
            std::vector<const Sample*> batch;
            for (std::size_t k = b; k < end; ++k)
                batch.push_back(&data.samples[order[k]]);
            {
                Tape tape;
                TapeScope scope(tape);
                Tensor loss = batch_loss(params, batch, config.gamma);
                tape.backward(loss);
                loss_sum += loss.item();
            }
            // The loss sums over the batch; clipping acts on the per-sample mean.
            double sq = 0;
            for (const Tensor& p : params.list())
                for (double g : p.grad())
                    sq += g * g;
            const double norm = std::sqrt(sq) / static_cast<double>(batch.size());
            norm_sum += norm;
            ++batches;
            const double clip = config.clip_norm > 0 && norm > config.clip_norm ? config.clip_norm / norm : 1.0;
            opt.step(clip);
        }
        const auto report = evaluate(params, data.samples, data.split.validation);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, order.size()));
        rec.val_f1_early = report.f1_early;
        rec.val_f1_consistent = report.f1_consistent;
        rec.val_final_f1 = report.per_step.back().f1;
        rec.grad_norm = norm_sum / static_cast<double>(std::max<std::size_t>(1, batches));
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.history.push_back(rec);
        if (on_epoch)
            on_epoch(rec);
        if (rec.val_f1_early > result.best_val_f1_early) {
            result.best_val_f1_early = rec.val_f1_early;
            result.best_epoch = epoch;
            result.params = params.clone();
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    return result;
}

void write_training_log(std::ostream& out, std::span<const EpochRecord> history)
{
    out << "epoch,train_loss,val_F1E,val_F1C\n";
    for (const auto& r : history)
        out << r.epoch << ',' << r.train_loss << ',' << r.val_f1_early << ',' << r.val_f1_consistent << '\n';
}

void write_model_checkpoint(std::ostream& out, const ModelParams& params, const FeatureScalers& scalers)
{
    NamedTensors all = params.tensors();
    for (auto& [name, t] : scalers.to_tensors())
        all.emplace(name, t);
    write_checkpoint(out, all);
}

std::pair<ModelParams, FeatureScalers> read_model_checkpoint(std::istream& in, const ModelConfig& config)
{
    NamedTensors stored = read_checkpoint(in);
    NamedTensors scaler_part, model_part;
    for (auto& [name, t] : stored)
        (name.starts_with("scaler.") ? scaler_part : model_part).emplace(name, t);
    NamedTensors target;
    for (const auto& [name, shape] : param_shapes(config))
        target.emplace(name, Tensor::parameter(shape, std::vector<double>(shape_size(shape), 0.0)));
    load_into(target, model_part);
    return {ModelParams(config, std::move(target)), FeatureScalers::from_tensors(scaler_part)};
}

} // namespace evopt
