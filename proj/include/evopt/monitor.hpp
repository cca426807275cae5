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

#ifndef EVOPT_MONITOR_HPP
#define EVOPT_MONITOR_HPP

#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evopt/dataset.hpp"
#include "evopt/model.hpp"

namespace evopt {

constexpr double early_stop_disabled = std::numeric_limits<double>::infinity();
constexpr double default_early_stop_threshold = 2.5;
/// Consecutive steps with survival >= 0.5 before an address is flagged.
constexpr std::size_t flag_after_steps = 2;
/// Addresses stepped together by the model.
constexpr std::size_t watch_batch = 64;

enum class WatchStatus { active, removed_benevolent, flagged_malicious };

const char* to_string(WatchStatus s);

struct WatchEntry {
    std::string address;
    Timestamp origin = 0;
    /// Global timestep after which the address joined.
    std::size_t joined_at = 0;
    WatchStatus status = WatchStatus::active;
    ModelState state;
    HazardTrace trace;
    std::size_t high_streak = 0;
    std::optional<std::size_t> status_changed_at;
    std::unique_ptr<StepFeaturizer> featurizer;
    std::unique_ptr<StepEncoder> encoder;

    /// Steps this address has been scored.
    std::size_t local_t() const { return trace.size(); }
};

struct AddressScore {
    std::string address;
    std::size_t local_t = 0;
    double survival = 1;
    double cumulative = 0;
    WatchStatus status = WatchStatus::active;
};

struct StepReport {
    std::size_t t = 0;
    std::size_t active = 0;
    std::size_t removed = 0;
    std::size_t flagged = 0;
    double skip_ratio = 0;
    /// Addresses scored at this step, address-sorted.
    std::vector<AddressScore> scores;
    std::vector<std::string> removed_now;
    std::vector<std::string> flagged_now;
    double path_seconds = 0;
    double model_seconds = 0;
};

/// Replay state over an immutable ledger. Each address follows its own clock:
/// its k-th scored step looks at the ledger as of origin + k·interval.
class Watchlist {
public:
    Watchlist(const Ledger& ledger, ModelParams params, FeatureScalers scalers, FeatureConfig features, double tau);

    /// Adds an address at the current timestep with zero state. Throws on duplicates.
    void join(const std::string& address, Timestamp origin);

    /// Scores every non-removed address for one more step. `t` must be current() + 1.
    /// Path extension runs per address; model steps run batched.
    StepReport advance(std::size_t t);

    std::size_t current() const { return current_; }
    double tau() const { return tau_; }
    std::size_t size() const { return entries_.size(); }
    double skip_ratio() const;
    const WatchEntry& entry(const std::string& address) const;
    const std::map<std::string, WatchEntry>& entries() const { return entries_; }

    /// Final hard label per address: 0 once removed, else from the last survival.
    int prediction(const std::string& address) const;

private:
    const Ledger* ledger_;
    ModelParams params_;
    std::shared_ptr<const FeatureScalers> scalers_;
    FeatureConfig features_;
    double tau_;
    std::size_t current_ = 0;
    std::size_t removed_ = 0;
    std::map<std::string, WatchEntry> entries_;
};

/// All addresses active at timestep 0. τ must be positive (or infinite).
Watchlist open_watchlist(const Ledger& ledger, const ModelParams& params, const FeatureScalers& scalers,
    const FeatureConfig& features, std::span<const LabelRecord> addresses, double tau);

/// One JSON object per line: {t, active, removed, flagged, skip_ratio, scores}.
void write_step_report(std::ostream& out, const StepReport& report);

/// Early stop applied offline to full traces. Removal never changes the
/// traces of the addresses that stay, so this equals a live replay.
struct EarlyStopOutcome {
    /// skip ratio after each step.
    std::vector<double> skip_ratio;
    std::vector<int> final_prediction;
    double recall = 0;
    double precision = 0;
};

EarlyStopOutcome apply_early_stop(std::span<const HazardTrace> traces, std::span<const int> labels, double tau);

/// Smallest τ of the grid whose recall stays within `tolerance` of the
/// recall without early stop; infinity when none does.
double calibrate_threshold(std::span<const HazardTrace> traces, std::span<const int> labels, std::span<const double> grid,
    double tolerance);

} // namespace evopt

#endif // EVOPT_MONITOR_HPP
