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

#ifndef EVOPT_SYNTH_HPP
#define EVOPT_SYNTH_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "evopt/ledger.hpp"
#include "evopt/pathfind.hpp"

namespace evopt {

enum class Pattern { hack, ransomware, darknet, ordinary, fast_mover, splitter, merchant };

const char* to_string(Pattern p);
bool is_malicious(Pattern p);

struct SynthConfig {
    std::size_t addresses = 1000;
    double malicious_fraction = 0.10;
    /// hack, ransomware, darknet.
    std::array<double, 3> malicious_mix{0.35, 0.35, 0.30};
    /// ordinary, fast mover, splitter, merchant. The last three copy the
    /// address-level behaviour of a malicious pattern with benign paths.
    std::array<double, 4> benign_mix{0.55, 0.15, 0.15, 0.15};
    /// Background transactions per hour of ledger time.
    double background_rate = 20.0;
    /// Node count of the peel chains feeding darknet-like addresses.
    std::size_t shadow_min = 6;
    std::size_t shadow_max = 10;
    /// Number of relay chains joined at a hack sink.
    std::size_t fan_in_min = 5;
    std::size_t fan_in_max = 10;
    /// Hours of activity generated after the last first-seen time.
    std::size_t horizon = 24;
    std::uint64_t seed = 7;

    /// Throws std::invalid_argument for infeasible settings.
    void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthResult {
    SynthConfig config;
    /// Ledger order (time, then id).
    std::vector<Transaction> txs;
    /// Sorted by first-seen time, then address.
    std::vector<LabelRecord> labels;
    std::map<std::string, Pattern> patterns;
    /// Planted sink per hack-like address.
    std::map<std::string, std::string> sinks;

    nlohmann::ordered_json manifest() const;
};

SynthResult generate(const SynthConfig& config);

/// Writes ledger.jsonl, labels.csv and manifest.json into `dir`.
void write_synth(const std::string& dir, const SynthResult& result);

struct PathStats {
    std::size_t addresses = 0;
    std::size_t backward_paths = 0;
    std::size_t forward_paths = 0;
    /// Node count -> number of paths.
    std::map<std::size_t, std::size_t> backward_lengths;
    std::map<std::size_t, std::size_t> forward_lengths;
    /// Paths per address -> number of addresses.
    std::map<std::size_t, std::size_t> backward_counts;
    std::map<std::size_t, std::size_t> forward_counts;

    std::size_t backward_length_mode() const;
};

struct SynthSummary {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    /// Positives over all labeled addresses.
    double pn_ratio = 0;
    /// Keyed by "label=0" / "label=1", plus pattern names when known.
    std::map<std::string, PathStats> groups;
};

/// Path statistics per class as of first_seen + window, where window is
/// `horizon` hours. `patterns` may be empty.
SynthSummary describe(const Ledger& ledger, std::span<const LabelRecord> labels, const TraceParams& params, std::size_t horizon,
    const std::map<std::string, Pattern>& patterns = {});

nlohmann::ordered_json to_json(const SynthSummary& summary);

} // namespace evopt

#endif // EVOPT_SYNTH_HPP
