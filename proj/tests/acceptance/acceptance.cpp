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

// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evopt/dataset.hpp"
#include "evopt/metrics.hpp"
#include "evopt/monitor.hpp"
#include "evopt/pathfind.hpp"
#include "evopt/synth.hpp"
#include "evopt/training.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"
#include "support/random_ledger.hpp"

using namespace evopt;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Path enumeration agrees with the exhaustive oracle.
Outcome oracle_equality()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::size_t anchors = 0, mismatches = 0;
    for (int rep = 0; rep < 200; ++rep) {
        testing::RandomLedgerOptions o;
        o.txs = 10 + rng() % 41;
        o.addresses = 4 + rng() % 9;
        const auto txs = testing::random_transactions(rng, o);
        const Ledger ledger = Ledger::build(txs);
        for (double theta : {0.01, 0.05, 0.2}) {
            TraceParams p;
            p.theta = theta;
            p.path_cap = 1'000'000;
            for (TxIndex a = 0; a < ledger.size(); ++a) {
                const auto& id = ledger.tx(a).id;
                ++anchors;
                if (!testing::same_paths(testing::to_oracle_form(ledger, backward_paths(ledger, a, p)),
                        testing::oracle_backward(txs, id, theta, p.span)))
                    ++mismatches;
                if (!testing::same_paths(testing::to_oracle_form(ledger, forward_paths(ledger, a, p)),
                        testing::oracle_forward(txs, id, theta, p.span)))
                    ++mismatches;
            }
        }
    }
    const double s = seconds_since(t0);
    return {mismatches == 0 && s < 10, fmt("%zu anchors x 2 directions, %zu mismatches, %.2f s (limit 10 s)", anchors, mismatches, s)};
}

// 2. Incremental path sets equal from-scratch builds at every step.
Outcome incremental_equality()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(102);
    std::size_t checks = 0, mismatches = 0;
    for (int rep = 0; rep < 50; ++rep) {
        testing::RandomLedgerOptions o;
        o.txs = 50;
        o.max_gap = seconds_per_hour;
        const Ledger ledger = Ledger::build(testing::random_transactions(rng, o));
        const Timestamp start = ledger.time(0);
        const TraceParams p;
        for (std::size_t i = 0; i < o.addresses; ++i) {
            const auto addr = testing::address_name(i);
            PathSet set = build_path_set(ledger, addr, start, p);
            for (Timestamp step = 1; step <= 24; ++step) {
                const Timestamp at = start + step * seconds_per_hour;
                set = extend_path_set(set, ledger, at);
                ++checks;
                if (!(set == build_path_set(ledger, addr, at, p)))
                    ++mismatches;
            }
        }
    }
    const double s = seconds_since(t0);
    return {mismatches == 0 && s < 30, fmt("%zu address-steps, %zu mismatches, %.2f s (limit 30 s)", checks, mismatches, s)};
}

// 3. Full-model gradient check on the micro configuration.
Outcome gradient_check()
{
    const auto t0 = Clock::now();
    const ModelConfig c = testing::micro_config();
    const ModelParams params = init_params(c, 103);
    std::mt19937_64 rng(104);
    const Sample pos = testing::random_sample(c, 2, 1, rng, 2);
    const Sample neg = testing::random_sample(c, 2, 0, rng, 2);
    const std::vector<const Sample*> batch{&pos, &neg};
    const auto list = params.list();
    const double err = grad_check([&] { return batch_loss(params, batch, 1.0); }, list, 1e-5);
    const double s = seconds_since(t0);
    return {err <= 1e-4 && s < 60,
        fmt("d=%zu M=%zu T=2, %zu parameters, max error %.3g (limit 1e-4), %.2f s (limit 60 s)", c.hidden, c.heads,
            params.parameter_count(), err, s)};
}

// 4. Closed forms.
Outcome closed_forms()
{
    std::vector<std::pair<std::string, double>> errors;
    const auto check = [&](const std::string& what, double got, double want) { errors.emplace_back(what, std::abs(got - want)); };
    check("survival(0)", survival(0.0), 1.0);
    check("survival(3)", survival(3.0), std::exp(-3.0));
    check("survival(-2)", survival(-2.0), 1.0);
    check("loss(l=1,S=1)", prediction_loss(1.0, 1), 1.0);
    check("loss(l=0,S=1)", prediction_loss(1.0, 0), -std::log(1.0 - std::exp(-1.0)));
    check("loss(l=1,S=0)", prediction_loss(0.0, 1), 0.0);
    HazardTrace tr;
    for (double v : {0.4, -0.3, -0.1, 0.0})
        tr.append({v, 0, 0, 0, 0});
    check("consistency(t=1)", consistency_loss(tr, 1), 0.0);
    check("consistency(sign flip)", consistency_loss(tr, 2), 1.0);
    check("consistency(same sign)", consistency_loss(tr, 3), 0.0);
    check("consistency(zero)", consistency_loss(tr, 4), 0.0);
    const std::vector<double> ones(5, 1.0), late{0, 1}, early{1, 0};
    check("F1E(const 1)", f1_early(ones), 1.0);
    check("F1E([0,1])", f1_early(late), (1 / std::sqrt(2.0)) / (1 + 1 / std::sqrt(2.0)));
    check("F1E([1,0])", f1_early(early), 1 / (1 + 1 / std::sqrt(2.0)));
    const std::vector<double> f1{1, 1, 1}, c{1, 0};
    check("F1C(N=3,[1,0])", f1_consistent(f1, c), 1 / (1 + std::sqrt(2.0)));
    double worst = 0;
    std::string which;
    for (const auto& [w, e] : errors)
        if (e >= worst) {
            worst = e;
            which = w;
        }
    return {worst <= 1e-9, fmt("%zu closed forms, worst |error| %.3g at %s (limit 1e-9)", errors.size(), worst, which.c_str())};
}

// Shared synthetic experiment for criteria 5 to 7.
struct Experiment {
    SynthResult synth;
    Ledger ledger;
    FeatureConfig features;
    Dataset data;
    double build_seconds = 0;
};

Experiment& experiment()
{
    static Experiment e = [] {
        const auto t0 = Clock::now();
        Experiment x;
        x.synth = generate(SynthConfig{});
        x.ledger = Ledger::build(x.synth.txs);
        x.data = build_dataset(x.ledger, x.synth.labels, x.features, 7);
        x.build_seconds = seconds_since(t0);
        return x;
    }();
    return e;
}

struct Trained {
    TrainResult result;
    EvaluationReport test;
    double seconds = 0;
};

const Trained& trained(int ablation)
{
    static std::map<int, Trained> cache;
    if (auto it = cache.find(ablation); it != cache.end())
        return it->second;
    const auto t0 = Clock::now();
    Experiment& x = experiment();
    ModelConfig mc;
    mc.use_paths = ablation >= 1;
    mc.use_graphs = ablation >= 2;
    static const char* names[] = {"AF", "AF+paths", "AF+paths+graphs"};
    Trained t;
    t.result = train(x.data, mc, TrainConfig{}, [&](const EpochRecord& r) {
        std::printf("  [%s] epoch %zu loss %.3f val F1E %.3f (%.1f s)\n", names[ablation], r.epoch, r.train_loss, r.val_f1_early, r.seconds);
        std::fflush(stdout);
    });
    t.test = evaluate(t.result.params, x.data.samples, x.data.split.test);
    t.seconds = seconds_since(t0) + (ablation == 2 ? x.build_seconds : 0.0);
    return cache.emplace(ablation, std::move(t)).first->second;
}

// 5. End-to-end on the default synthetic data.
Outcome end_to_end()
{
    experiment();
    const Trained& t = trained(2);
    const double final_f1 = t.test.per_step.back().f1;
    return {final_f1 >= 0.90 && t.test.f1_early >= 0.80 && t.seconds < 900,
        fmt("test final F1 %.4f (>= 0.90), F1E %.4f (>= 0.80), %zu epochs, %.0f s (limit 900 s)", final_f1, t.test.f1_early,
            t.result.history.size(), t.seconds)};
}

// 6. Ablation ordering.
Outcome ablation_ordering()
{
    const double af = trained(0).test.f1_early;
    const double paths = trained(1).test.f1_early;
    const double full = trained(2).test.f1_early;
    return {paths - af >= 0.02 && full - paths >= 0.02, fmt("test F1E: AF %.4f < +paths %.4f < +graphs %.4f (margin 0.02)", af, paths, full)};
}

// 7. Early stop on a benign-majority replay.
Outcome early_stop()
{
    Experiment& x = experiment();
    const Trained& t = trained(2);
    const auto& params = t.result.params;

    std::vector<HazardTrace> val_traces;
    std::vector<int> val_labels;
    for (std::size_t i : x.data.split.validation) {
        val_traces.push_back(run_sample(params, x.data.samples[i]));
        val_labels.push_back(x.data.samples[i].label);
    }
    std::vector<double> grid;
    for (int k = 1; k <= 40; ++k)
        grid.push_back(0.25 * k);
    const double tau = calibrate_threshold(val_traces, val_labels, grid, 0.0);

    // Test-split negatives plus one positive per 19 negatives.
    std::vector<LabelRecord> replay;
    std::size_t negatives = 0;
    for (std::size_t i : x.data.split.test)
        negatives += x.data.samples[i].label == 0;
    const auto positives_wanted = static_cast<std::size_t>(std::llround(static_cast<double>(negatives) / 19.0));
    std::size_t positives = 0;
    for (std::size_t i : x.data.split.test) {
        const auto& s = x.data.samples[i];
        if (s.label == 1 && positives == positives_wanted)
            continue;
        positives += s.label;
        replay.push_back({s.address, s.label, s.first_seen});
    }

    const auto run = [&](double threshold, std::vector<double>* skip) {
        Watchlist list = open_watchlist(x.ledger, params, x.data.scalers, x.features, replay, threshold);
        for (std::size_t step = 1; step <= x.features.horizon; ++step) {
            const StepReport r = list.advance(step);
            if (skip)
                skip->push_back(r.skip_ratio);
        }
        std::vector<int> pred, truth;
        for (const auto& rec : replay) {
            pred.push_back(list.prediction(rec.address));
            truth.push_back(rec.label);
        }
        return confusion_metrics(pred, truth).recall;
    };
    std::vector<double> skip;
    const double recall_tau = run(tau, &skip);
    const double recall_inf = run(early_stop_disabled, nullptr);
    const double skip4 = skip.size() >= 4 ? skip[3] : 0.0;
    return {std::isfinite(tau) && skip4 >= 0.6 && recall_tau >= recall_inf - 0.02,
        fmt("tau %.2f, replay %zu addresses (%zu positive), skip ratio at step 4 %.3f (>= 0.6), recall %.4f vs %.4f without early stop", tau,
            replay.size(), positives, skip4, recall_tau, recall_inf)};
}

// 8. Metric properties over random series.
Outcome metric_properties()
{
    std::mt19937_64 rng(108);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 30;
        std::vector<double> f(n);
        for (auto& v : f)
            v = u(rng);
        // Mass moved from a later step to an earlier one never lowers F1E.
        const std::size_t j = 1 + rng() % (n - 1), i = rng() % j;
        auto g = f;
        const double delta = std::min(g[j], 1.0 - g[i]) * u(rng);
        g[i] += delta;
        g[j] -= delta;
        if (f1_early(g) < f1_early(f) - 1e-12)
            ++violations;
        // Degenerate consistency cases.
        double num = 0, den = 0;
        for (std::size_t k = 1; k < n; ++k) {
            num += std::sqrt(static_cast<double>(k)) * f[k - 1];
            den += std::sqrt(static_cast<double>(k));
        }
        const std::vector<double> all(n - 1, 1.0), none(n - 1, 0.0);
        if (std::abs(f1_consistent(f, all) - num / den) > 1e-12 || f1_consistent(f, none) != 0.0)
            ++violations;
        // Series that never cross 0.5 are consistent; alternating ones never are.
        std::vector<std::vector<double>> steady(4), flipping(4);
        for (std::size_t s = 0; s < 4; ++s)
            for (std::size_t k = 0; k < n; ++k) {
                const bool high = (s % 2) == 0;
                steady[s].push_back(high ? 0.5 + 0.5 * u(rng) + 1e-9 : 0.5 * u(rng));
                flipping[s].push_back(((k + s) % 2) ? 0.5 + 0.5 * u(rng) + 1e-9 : 0.5 * u(rng));
            }
        for (double c : consistency_fractions(steady))
            violations += c != 1.0;
        for (double c : consistency_fractions(flipping))
            violations += c != 0.0;
    }
    return {violations == 0, fmt("1000 random series, %zu violations", violations)};
}

// 9. Incremental extension against repeated extraction.
Outcome bench_ratio()
{
    Experiment& x = experiment();
    const auto& fc = x.features;
    const auto at = [&](const LabelRecord& r, std::size_t t) { return r.first_seen + static_cast<Timestamp>(t) * fc.interval; };
    const auto& labels = x.synth.labels;
    std::size_t sink = 0;
    auto t0 = Clock::now();
    for (const auto& r : labels)
        for (std::size_t t = 1; t <= fc.horizon; ++t)
            sink += build_path_set(x.ledger, r.address, at(r, t), fc.trace).backward().size();
    const double batch = seconds_since(t0);
    t0 = Clock::now();
    for (const auto& r : labels) {
        PathSet set = build_path_set(x.ledger, r.address, at(r, 1), fc.trace);
        sink -= set.backward().size();
        for (std::size_t t = 2; t <= fc.horizon; ++t) {
            set = extend_path_set(set, x.ledger, at(r, t));
            sink -= set.backward().size();
        }
    }
    const double incremental = seconds_since(t0);
    const double ratio = incremental / batch;
    return {sink == 0 && ratio <= 0.5, fmt("%zu addresses x %zu steps: from scratch %.3f s, incremental %.3f s, ratio %.3f (limit 0.5)",
                                           labels.size(), fc.horizon, batch, incremental, ratio)};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"path oracle equality", oracle_equality},
        {"incremental equals batch", incremental_equality},
        {"gradient check", gradient_check},
        {"closed forms", closed_forms},
        {"synthetic end-to-end", end_to_end},
        {"ablation ordering", ablation_ordering},
        {"early stop", early_stop},
        {"metric properties", metric_properties},
        {"incremental path cost", bench_ratio},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.insert(std::stoi(argv[i]));
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && !selected.count(id))
            continue;
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %d (%s): %s - %s\n", id, criteria[k].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
