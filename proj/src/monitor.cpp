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

#include "evopt/monitor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "evopt/metrics.hpp"

namespace evopt {

const char* to_string(WatchStatus s)
{
    switch (s) {
    case WatchStatus::active:
        return "active";
    case WatchStatus::removed_benevolent:
        return "removed_benevolent";
    case WatchStatus::flagged_malicious:
        return "flagged_malicious";
    }
    return "unknown";
}

Watchlist::Watchlist(const Ledger& ledger, ModelParams params, FeatureScalers scalers, FeatureConfig features, double tau)
    : ledger_(&ledger),
      params_(std::move(params)),
      scalers_(std::make_shared<const FeatureScalers>(std::move(scalers))),
      features_(features),
      tau_(tau)
{
    features_.validate();
    if (!(tau > 0))
        throw std::invalid_argument("watchlist: early-stop threshold must be positive or infinite");
    if (features_.uniform_length != params_.config().uniform_length)
        throw std::invalid_argument("watchlist: uniform length differs between features and model");
}

void Watchlist::join(const std::string& address, Timestamp origin)
{
    if (entries_.count(address))
        throw std::invalid_argument("watchlist: duplicate address '" + address + "'");
    WatchEntry e;
    e.address = address;
    e.origin = origin;
    e.joined_at = current_;
    e.state = initial_state(params_.config());
    e.featurizer = std::make_unique<StepFeaturizer>(*ledger_, address, origin, features_);
    e.encoder = std::make_unique<StepEncoder>(*scalers_, features_.uniform_length);
    entries_.emplace(address, std::move(e));
}

StepReport Watchlist::advance(std::size_t t)
{
    if (t != current_ + 1)
        throw std::invalid_argument("watchlist: expected timestep " + std::to_string(current_ + 1) + ", got " + std::to_string(t));
    current_ = t;
    StepReport report;
    report.t = t;
    NoGradScope no_grad;
    using clock = std::chrono::steady_clock;

    struct Pending {
        WatchEntry* entry;
        StepInput input;
    };
    std::vector<Pending> pending;
    const auto t0 = clock::now();
    for (auto& [address, e] : entries_) {
        if (e.status == WatchStatus::removed_benevolent || e.local_t() >= features_.horizon)
            continue;
        RawStep raw = e.featurizer->next();
        pending.push_back({&e, e.encoder->encode(raw)});
    }
    const auto t1 = clock::now();

    // Addresses that joined at different times sit at different local steps;
    // each group of equal local step runs as one batch.
    std::map<std::size_t, std::vector<Pending*>> groups;
    for (auto& p : pending)
        groups[p.entry->local_t()].push_back(&p);
    for (auto& [local, group] : groups)
        for (std::size_t lo = 0; lo < group.size(); lo += watch_batch) {
            const std::size_t hi = std::min(group.size(), lo + watch_batch);
            std::vector<const ModelState*> states;
            std::vector<const StepInput*> inputs;
            for (std::size_t i = lo; i < hi; ++i) {
                states.push_back(&group[i]->entry->state);
                inputs.push_back(&group[i]->input);
            }
            BatchStepResult r = step_batch(params_, stack_states(states), inputs);
            for (std::size_t i = lo; i < hi; ++i) {
                WatchEntry& e = *group[i]->entry;
                e.trace.append(r.rates(i - lo));
                e.state = state_row(r.state, i - lo);
            }
        }
    const auto t2 = clock::now();
    report.path_seconds = std::chrono::duration<double>(t1 - t0).count();
    report.model_seconds = std::chrono::duration<double>(t2 - t1).count();

    for (auto& p : pending) {
        WatchEntry& e = *p.entry;
        const double y = e.trace.survival.back();
        e.high_streak = hard_label(y) == 1 ? e.high_streak + 1 : 0;
        if (e.status == WatchStatus::active) {
            if (e.trace.cumulative.back() >= tau_) {
                e.status = WatchStatus::removed_benevolent;
                e.status_changed_at = t;
                ++removed_;
                report.removed_now.push_back(e.address);
            } else if (e.high_streak >= flag_after_steps) {
                e.status = WatchStatus::flagged_malicious;
                e.status_changed_at = t;
                report.flagged_now.push_back(e.address);
            }
        }
        report.scores.push_back({e.address, e.local_t(), y, e.trace.cumulative.back(), e.status});
    }
    for (const auto& [address, e] : entries_) {
        if (e.status == WatchStatus::active)
            ++report.active;
        else if (e.status == WatchStatus::removed_benevolent)
            ++report.removed;
        else
            ++report.flagged;
    }
    report.skip_ratio = skip_ratio();
    return report;
}

double Watchlist::skip_ratio() const
{
    return entries_.empty() ? 0.0 : static_cast<double>(removed_) / static_cast<double>(entries_.size());
}

const WatchEntry& Watchlist::entry(const std::string& address) const
{
    auto it = entries_.find(address);
    if (it == entries_.end())
        throw std::out_of_range("watchlist: unknown address '" + address + "'");
    return it->second;
}

int Watchlist::prediction(const std::string& address) const
{
    const auto& e = entry(address);
    if (e.status == WatchStatus::removed_benevolent || e.trace.size() == 0)
        return 0;
    return hard_label(e.trace.survival.back());
}

Watchlist open_watchlist(const Ledger& ledger, const ModelParams& params, const FeatureScalers& scalers,
    const FeatureConfig& features, std::span<const LabelRecord> addresses, double tau)
{
    Watchlist w(ledger, params, scalers, features, tau);
    for (const auto& rec : addresses)
        w.join(rec.address, rec.first_seen);
    return w;
}

void write_step_report(std::ostream& out, const StepReport& report)
{
    nlohmann::ordered_json j;
    j["t"] = report.t;
    j["active"] = report.active;
    j["removed"] = report.removed;
    j["flagged"] = report.flagged;
    j["skip_ratio"] = report.skip_ratio;
    nlohmann::ordered_json scores = nlohmann::ordered_json::object();
    for (const auto& s : report.scores)
        scores[s.address] = s.survival;
    j["scores"] = std::move(scores);
    j["removed_now"] = report.removed_now;
    j["flagged_now"] = report.flagged_now;
    out << j.dump() << '\n';
}

EarlyStopOutcome apply_early_stop(std::span<const HazardTrace> traces, std::span<const int> labels, double tau)
{
    if (traces.size() != labels.size())
        throw std::invalid_argument("apply_early_stop: one trace per label expected");
    std::size_t horizon = 0;
    for (const auto& tr : traces)
        horizon = std::max(horizon, tr.size());
    EarlyStopOutcome out;
    out.skip_ratio.assign(horizon, 0.0);
    out.final_prediction.assign(traces.size(), 0);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& tr = traces[i];
        std::optional<std::size_t> removed_at;
        for (std::size_t t = 0; t < tr.size(); ++t)
            if (tr.cumulative[t] >= tau) {
                removed_at = t;
                break;
            }
        if (removed_at)
            for (std::size_t t = *removed_at; t < horizon; ++t)
                out.skip_ratio[t] += 1.0;
        out.final_prediction[i] = removed_at || tr.size() == 0 ? 0 : hard_label(tr.survival.back());
    }
    if (!traces.empty())
        for (auto& v : out.skip_ratio)
            v /= static_cast<double>(traces.size());
    const auto m = confusion_metrics(out.final_prediction, labels);
    out.recall = m.recall;
    out.precision = m.precision;
    return out;
}

double calibrate_threshold(std::span<const HazardTrace> traces, std::span<const int> labels, std::span<const double> grid,
    double tolerance)
{
    const double baseline = apply_early_stop(traces, labels, early_stop_disabled).recall;
    std::vector<double> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    for (double tau : sorted)
        if (apply_early_stop(traces, labels, tau).recall >= baseline - tolerance)
            return tau;
    return early_stop_disabled;
}

} // namespace evopt
