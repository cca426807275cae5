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

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "evopt/training.hpp"
#include "support/fixtures.hpp"

using namespace evopt;
using evopt::testing::micro_config;
using evopt::testing::random_sample;

namespace {

// Closed-form references, written independently of the library.
double nll_positive(double s)
{
    return s > 0 ? s : 0.0;
}

double nll_negative(double s)
{
    return -std::log(1.0 - std::exp(-s));
}

// Samples whose address features carry the label, so a model can learn.
Dataset toy_dataset(const ModelConfig& c, std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i % 4 == 0 ? 1 : 0;
        Sample s = random_sample(c, c.horizon, label, rng, 1 + i % 2);
        for (auto& step : s.steps) {
            auto v = step.address.values();
            v[0] = label ? 2.0 : -2.0;
            step.address = Tensor::constant({1, c.address_dim}, v);
        }
        data.samples.push_back(std::move(s));
    }
    std::vector<int> labels;
    for (const auto& s : data.samples)
        labels.push_back(s.label);
    data.split = stratified_split(labels, seed);
    return data;
}

} // namespace

TEST_SUITE("training") {

TEST_CASE("prediction loss closed forms")
{
    CHECK(prediction_loss(1.0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(prediction_loss(1.0, 0) == doctest::Approx(0.45867514538708193).epsilon(1e-12));
    CHECK(prediction_loss(0.0, 1) == 0.0);
    CHECK(prediction_loss(-2.0, 1) == 0.0);
    const Tensor s = Tensor::scalar(1.0);
    CHECK(prediction_loss(s, 1).item() == doctest::Approx(1.0));
    CHECK(prediction_loss(s, 0).item() == doctest::Approx(nll_negative(1.0)));
}

TEST_CASE("prediction loss is non-negative, finite and ordered")
{
    double prev = -1;
    for (double s = -5; s <= 5; s += 0.01) {
        const double p = prediction_loss(s, 1);
        const double n = prediction_loss(s, 0);
        CHECK(p >= 0);
        CHECK(n >= 0);
        CHECK(std::isfinite(n));
        CHECK(p >= prev);
        if (s > 0.01)
            CHECK(p > prev);
        prev = p;
        if (s >= 0.05)
            CHECK(n == doctest::Approx(nll_negative(s)).epsilon(1e-12));
        CHECK(prediction_loss(Tensor::scalar(s), 0).item() == doctest::Approx(n).epsilon(1e-12));
        CHECK(prediction_loss(Tensor::scalar(s), 1).item() == doctest::Approx(nll_positive(s)).epsilon(1e-12));
    }
    // Label 0 keeps decreasing in S across the knee.
    CHECK(prediction_loss(-1.0, 0) > prediction_loss(0.0, 0));
    CHECK(prediction_loss(0.0, 0) > prediction_loss(0.1, 0));
}

TEST_CASE("consistency loss cases")
{
    HazardTrace tr;
    tr.append({0.5, 0, 0, 0, 0});
    tr.append({0.3, 0, 0, 0, 0});
    tr.append({-0.1, -0.1, 0, 0, 0});
    tr.append({0, 0, 0, 0, 0});
    CHECK(consistency_loss(tr, 1) == 0);
    CHECK(consistency_loss(tr, 2) == 0);
    CHECK(consistency_loss(tr, 3) == 1);
    CHECK(consistency_loss(tr, 4) == 0);
    CHECK_THROWS_AS(consistency_loss(tr, 0), std::out_of_range);
    CHECK_THROWS_AS(consistency_loss(tr, 5), std::out_of_range);

    HazardTrace first;
    first.append({-0.7, 0, 0, 0, 0});
    CHECK(consistency_loss(first, 1) == 0);
}

TEST_CASE("total loss matches a hand computation on two samples")
{
    const ModelConfig c = micro_config();
    const ModelParams p = init_params(c, 31);
    std::mt19937_64 rng(32);
    const Sample a = random_sample(c, 2, 1, rng);
    const Sample b = random_sample(c, 2, 0, rng);
    for (double gamma : {0.0, 1.0, 2.5}) {
        double expected = 0;
        for (const Sample* s : {&a, &b}) {
            const HazardTrace tr = run_sample(p, *s);
            double prev_total = 0;
            for (std::size_t t = 1; t <= 2; ++t) {
                const double total = tr.step_total(t);
                const double lp = s->label ? nll_positive(tr.cumulative[t - 1]) : prediction_loss(tr.cumulative[t - 1], 0);
                const double lc = prev_total * total < 0 ? 1.0 : 0.0;
                expected += std::sqrt(static_cast<double>(t)) * (lp + gamma * lc);
                prev_total = total;
            }
        }
        const std::vector<const Sample*> batch{&a, &b};
        CHECK(batch_loss(p, batch, gamma).item() == doctest::Approx(expected).epsilon(1e-12));
        CHECK(sample_loss(p, a, gamma).item() + sample_loss(p, b, gamma).item() == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("square-root weighting")
{
    // Equal per-step losses: the t = 4 term weighs twice the t = 1 term.
    CHECK(std::sqrt(4.0) / std::sqrt(1.0) == 2.0);
    const ModelConfig c = micro_config();
    const ModelParams p = init_params(c, 33);
    std::mt19937_64 rng(34);
    const Sample s = random_sample(c, 1, 1, rng);
    const HazardTrace tr = run_sample(p, s);
    CHECK(sample_loss(p, s, 0.0).item() == doctest::Approx(nll_positive(tr.cumulative[0])).epsilon(1e-12));
}

TEST_CASE("total loss gradient passes the finite-difference check")
{
    const ModelConfig c = micro_config();
    const ModelParams p = init_params(c, 35);
    std::mt19937_64 rng(36);
    const Sample pos = random_sample(c, 2, 1, rng);
    const Sample neg = random_sample(c, 2, 0, rng);
    const std::vector<const Sample*> batch{&pos, &neg};
    const auto f = [&] {
        return batch_loss(p, batch, 1.0);
    };
    const auto params = p.list();
    CHECK(grad_check(f, params, 1e-5) <= 1e-4);
}

TEST_CASE("Adam moves each coordinate by about the learning rate at first")
{
    Tensor x = Tensor::parameter({1, 3}, {1.0, -2.0, 0.5});
    Adam opt({x}, 0.1);
    {
        Tape tape;
        TapeScope scope(tape);
        tape.backward(sum(mul(x, x)));
    }
    opt.step();
    CHECK(x.values()[0] == doctest::Approx(0.9));
    CHECK(x.values()[1] == doctest::Approx(-1.9));
    CHECK(opt.steps() == 1);
    for (int k = 0; k < 500; ++k) {
        x.zero_grad();
        Tape tape;
        TapeScope scope(tape);
        tape.backward(sum(mul(x, x)));
        opt.step();
    }
    for (double v : x.values())
        CHECK(std::abs(v) < 0.05);
}

TEST_CASE("epoch order oversamples positives to the configured ratio")
{
    std::vector<Sample> samples(100);
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i].label = i < 5 ? 1 : 0;
        train.push_back(i);
    }
    const auto order = epoch_order(samples, train, 0.25, 7, 1);
    std::size_t pos = 0;
    for (std::size_t i : order)
        pos += samples[i].label;
    CHECK(order.size() == 95 + 24);
    CHECK(pos == 24);
    CHECK(order == epoch_order(samples, train, 0.25, 7, 1));
    CHECK(order != epoch_order(samples, train, 0.25, 7, 2));
}

TEST_CASE("training learns a toy signal deterministically")
{
    ModelConfig c = micro_config();
    Dataset data = toy_dataset(c, 60, 40);
    TrainConfig tc;
    tc.max_epochs = 6;
    tc.patience = 10;
    tc.learning_rate = 0.02;
    tc.batch_size = 16;
    const TrainResult a = train(data, c, tc);
    REQUIRE(a.history.size() == 6);
    CHECK(a.history[2].train_loss < a.history[0].train_loss);
    CHECK(a.best_val_f1_early >= 0);
    const TrainResult b = train(data, c, tc);
    for (std::size_t k = 0; k < a.history.size(); ++k) {
        CHECK(a.history[k].train_loss == b.history[k].train_loss);
        CHECK(a.history[k].val_f1_early == b.history[k].val_f1_early);
    }

    std::ostringstream log;
    write_training_log(log, a.history);
    CHECK(log.str().rfind("epoch,train_loss,val_F1E,val_F1C\n", 0) == 0);

    for (auto& s : data.samples)
        s.label = 0;
    CHECK_THROWS_AS(train(data, c, tc), std::invalid_argument);
}

TEST_CASE("early stopping honours the patience")
{
    ModelConfig c = micro_config();
    const Dataset data = toy_dataset(c, 40, 41);
    TrainConfig tc;
    tc.max_epochs = 30;
    tc.patience = 1;
    tc.learning_rate = 1e-9;
    const TrainResult r = train(data, c, tc);
    CHECK(r.history.size() < 30);
    CHECK(r.history.size() - r.best_epoch <= 1);
}

TEST_CASE("model checkpoints round-trip with scalers")
{
    const ModelConfig c = micro_config();
    const ModelParams p = init_params(c, 50);
    FeatureScalers sc{FeatureScaler({1, 2, 3, 4, 5, 6, 7, 8, 9}, std::vector<double>(9, 2.0)), FeatureScaler(16), FeatureScaler(9)};
    std::stringstream buf;
    write_model_checkpoint(buf, p, sc);
    const auto [q, back] = read_model_checkpoint(buf, c);
    for (const auto& [name, t] : p.tensors())
        CHECK(q.get(name).values() == t.values());
    CHECK(back.address.mean() == sc.address.mean());
    CHECK(back.tx.dim() == 16);

    std::stringstream again;
    write_model_checkpoint(again, p, sc);
    ModelConfig other = c;
    other.hidden = 8;
    CHECK_THROWS(read_model_checkpoint(again, other));
}

TEST_CASE("train config validation and JSON")
{
    TrainConfig tc;
    tc.gamma = 0.5;
    tc.max_epochs = 3;
    const TrainConfig back = train_config_from_json(to_json(tc));
    CHECK(back.gamma == 0.5);
    CHECK(back.max_epochs == 3);
    CHECK(back.clip_norm == tc.clip_norm);
    tc.gamma = -1;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc.gamma = 1;
    tc.clip_norm = -1;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}

TEST_CASE("Adam applies the gradient scale")
{
    Tensor x = Tensor::parameter({1, 2}, {1.0, -1.0});
    Adam opt({x}, 0.1);
    {
        Tape tape;
        TapeScope scope(tape);
        tape.backward(sum(mul(x, x)));
    }
    // A zero scale leaves both moments at zero, so nothing moves.
    opt.step(0.0);
    CHECK(x.values()[0] == 1.0);
    CHECK(x.values()[1] == -1.0);
    // The first non-zero step has magnitude lr whatever the scale.
    Adam fresh({x}, 0.1);
    fresh.step(1e-3);
    CHECK(x.values()[0] == doctest::Approx(0.9));
    CHECK(x.values()[1] == doctest::Approx(-0.9));
}

}
