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

#ifndef EVOPT_FEATURES_HPP
#define EVOPT_FEATURES_HPP

#include <array>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "evopt/ledger.hpp"
#include "evopt/pathfind.hpp"

namespace evopt {

constexpr std::size_t address_feature_dim = 9;
constexpr std::size_t tx_feature_dim = 16;

/// balance, #receive, #spend, receive ratio, spend ratio, max receive amount,
/// max spend amount, life span (hours), active rate. The order is part of the
/// CSV dump format.
using AddressFeatureVector = std::array<double, address_feature_dim>;

/// hop interval to terminal, cumulative score, input amount of the previous
/// tx, fee, receive amounts (total, max, min, avg, var), spend amounts (total,
/// max, min, avg, var), #receive slots, #spend slots.
using TxFeatureVector = std::array<double, tx_feature_dim>;

extern const std::array<const char*, address_feature_dim> address_feature_names;
extern const std::array<const char*, tx_feature_dim> tx_feature_names;

/// Statistics over every tx of `addr` with time <= t. Zero vector when the
/// address has no history by t.
AddressFeatureVector address_features(const Ledger& ledger, std::string_view addr, Timestamp t);

/// Features of `path.nodes[node_index]`. "Previous" is the neighbour the node
/// was traced from (the one closer to the anchor).
TxFeatureVector tx_features(const Ledger& ledger, const AssetTransferPath& path, std::size_t node_index, Timestamp t);

std::vector<TxFeatureVector> path_features(const Ledger& ledger, const AssetTransferPath& path, Timestamp t);

/// Source window [first, last] averaged into uniform node `i`.
std::pair<std::size_t, std::size_t> resample_window(std::size_t i, std::size_t original_length, std::size_t uniform_length);

/// Resamples a sequence of equal-width rows to exactly `uniform_length` rows;
/// row i is the elementwise mean of the rows in `resample_window(i, ...)`.
template <typename Row>
std::vector<Row> uniform_resample(std::span<const Row> seq, std::size_t uniform_length)
{
    if (seq.empty())
        throw std::invalid_argument("uniform_resample: empty path");
    if (uniform_length == 0)
        throw std::invalid_argument("uniform_resample: uniform length must be positive");
    std::vector<Row> out;
    out.reserve(uniform_length);
    for (std::size_t i = 0; i < uniform_length; ++i) {
        const auto [first, last] = resample_window(i, seq.size(), uniform_length);
        Row row = seq[first];
        for (std::size_t k = first + 1; k <= last; ++k)
            for (std::size_t c = 0; c < row.size(); ++c)
                row[c] += seq[k][c];
        const double count = static_cast<double>(last - first + 1);
        for (auto& v : row)
            v /= count;
        out.push_back(std::move(row));
    }
    return out;
}

/// Per-dimension standardization: x -> (slog(x) - mean) / std with
/// slog(x) = sign(x) * log1p(|x|). Statistics are frozen at fit time.
class FeatureScaler {
public:
    FeatureScaler() = default;
    explicit FeatureScaler(std::size_t dim) : mean_(dim, 0.0), stddev_(dim, 1.0) {}
    FeatureScaler(std::vector<double> mean, std::vector<double> stddev);

    /// Rows are flattened with stride `dim()`.
    static FeatureScaler fit(std::span<const double> rows, std::size_t dim);

    std::size_t dim() const { return mean_.size(); }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& stddev() const { return stddev_; }

    void transform(std::span<double> rows) const;

private:
    std::vector<double> mean_;
    std::vector<double> stddev_;
};

void write_address_feature_header(std::ostream& out);
void write_tx_feature_header(std::ostream& out);

} // namespace evopt

#endif // EVOPT_FEATURES_HPP
