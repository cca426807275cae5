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

#ifndef EVOPT_METRICS_HPP
#define EVOPT_METRICS_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace evopt {

constexpr double decision_threshold = 0.5;

/// Score >= 0.5 means malicious (label 1).
inline int hard_label(double score)
{
    return score >= decision_threshold ? 1 : 0;
}

struct ConfusionMetrics {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

/// Precision/recall/F1 are 0 when their denominator is 0.
ConfusionMetrics confusion_metrics(std::span<const int> predicted, std::span<const int> labels);

/// Σ F1_i/√i / Σ 1/√i over i = 1..N.
double f1_early(std::span<const double> f1);

/// Σ_{i<N} √i·F1_i·c_i / Σ_{i<N} √i where c has N-1 entries; only the
/// first c.size() entries of f1 are used.
double f1_consistent(std::span<const double> f1, std::span<const double> consistency);

/// c_i = fraction of series whose scores at i and i+1 lie strictly on the same
/// side of 0.5. Series must share one length N >= 2.
std::vector<double> consistency_fractions(const std::vector<std::vector<double>>& scores);

/// Smallest 1-based t from which every hard label up to the end equals `label`.
std::optional<std::size_t> first_confident_time(std::span<const double> scores, int label);

struct EvaluationReport {
    std::vector<ConfusionMetrics> per_step;
    double f1_early = 0;
    double f1_consistent = 0;
    /// Mean over samples that have a confident time; nullopt when none has.
    std::optional<double> mean_first_confident;
    std::size_t confident_count = 0;
};

/// `scores[s][t]` is sample s's survival value at timestep t+1.
EvaluationReport evaluate_series(const std::vector<std::vector<double>>& scores, std::span<const int> labels);

/// CSV: timestep,acc,prec,rec,f1 rows, then a summary row.
void write_metrics_csv(std::ostream& out, const EvaluationReport& report);

} // namespace evopt

#endif // EVOPT_METRICS_HPP
