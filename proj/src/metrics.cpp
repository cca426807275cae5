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

#include "evopt/metrics.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace evopt {

ConfusionMetrics confusion_metrics(std::span<const int> predicted, std::span<const int> labels)
{
    if (predicted.size() != labels.size())
        throw std::invalid_argument("confusion_metrics: length mismatch");
    ConfusionMetrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predicted[i] != 0;
        const bool l = labels[i] != 0;
        if (p && l)
            ++m.tp;
        else if (p)
            ++m.fp;
        else if (l)
            ++m.fn;
        else
            ++m.tn;
    }
    const auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
    m.accuracy = ratio(m.tp + m.tn, labels.size());
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

double f1_early(std::span<const double> f1)
{
    if (f1.empty())
        throw std::invalid_argument("f1_early: empty series");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < f1.size(); ++i) {
        const double w = 1.0 / std::sqrt(static_cast<double>(i + 1));
        num += w * f1[i];
        den += w;
    }
    return num / den;
}

double f1_consistent(std::span<const double> f1, std::span<const double> consistency)
{
    if (consistency.empty())
        throw std::invalid_argument("f1_consistent: needs at least two timesteps");
    if (f1.size() < consistency.size())
        throw std::invalid_argument("f1_consistent: fewer F1 values than consistency factors");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < consistency.size(); ++i) {
        const double w = std::sqrt(static_cast<double>(i + 1));
        num += w * f1[i] * consistency[i];
        den += w;
    }
    return num / den;
}

std::vector<double> consistency_fractions(const std::vector<std::vector<double>>& scores)
{
    if (scores.empty())
        throw std::invalid_argument("consistency_fractions: no series");
    const std::size_t n = scores.front().size();
    if (n < 2)
        throw std::invalid_argument("consistency_fractions: series shorter than 2");
    std::vector<double> c(n - 1, 0.0);
    for (const auto& s : scores) {
        if (s.size() != n)
            throw std::invalid_argument("consistency_fractions: series lengths differ");
        for (std::size_t i = 0; i + 1 < n; ++i)
            if ((s[i] - decision_threshold) * (s[i + 1] - decision_threshold) > 0)
                c[i] += 1.0;
    }
    for (auto& v : c)
        v /= static_cast<double>(scores.size());
    return c;
}

std::optional<std::size_t> first_confident_time(std::span<const double> scores, int label)
{
    std::optional<std::size_t> t;
    for (std::size_t i = scores.size(); i-- > 0;) {
        if (hard_label(scores[i]) != label)
            break;
        t = i + 1;
    }
    return t;
}

EvaluationReport evaluate_series(const std::vector<std::vector<double>>& scores, std::span<const int> labels)
{
    if (scores.size() != labels.size())
        throw std::invalid_argument("evaluate_series: one score series per label expected");
    if (scores.empty())
        throw std::invalid_argument("evaluate_series: no samples");
    const std::size_t horizon = scores.front().size();
    EvaluationReport r;
    std::vector<double> f1;
    std::vector<int> predicted(labels.size());
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t s = 0; s < scores.size(); ++s) {
            if (scores[s].size() != horizon)
                throw std::invalid_argument("evaluate_series: series lengths differ");
            predicted[s] = hard_label(scores[s][t]);
        }
        r.per_step.push_back(confusion_metrics(predicted, labels));
        f1.push_back(r.per_step.back().f1);
    }
    r.f1_early = f1_early(f1);
    r.f1_consistent = horizon >= 2 ? f1_consistent(f1, consistency_fractions(scores)) : 0.0;
    double total = 0;
    for (std::size_t s = 0; s < scores.size(); ++s)
        if (auto t = first_confident_time(scores[s], labels[s])) {
            total += static_cast<double>(*t);
            ++r.confident_count;
        }
    if (r.confident_count > 0)
        r.mean_first_confident = total / static_cast<double>(r.confident_count);
    return r;
}

void write_metrics_csv(std::ostream& out, const EvaluationReport& report)
{
    out << "timestep,acc,prec,rec,f1\n";
    for (std::size_t t = 0; t < report.per_step.size(); ++t) {
        const auto& m = report.per_step[t];
        out << t + 1 << ',' << m.accuracy << ',' << m.precision << ',' << m.recall << ',' << m.f1 << '\n';
    }
    out << "summary,f1_early=" << report.f1_early << ",f1_consistent=" << report.f1_consistent << ",mean_first_confident=";
    if (report.mean_first_confident)
        out << *report.mean_first_confident;
    else
        out << "none";
    out << ",confident=" << report.confident_count << '\n';
}

} // namespace evopt
