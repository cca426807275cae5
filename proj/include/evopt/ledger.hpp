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

#ifndef EVOPT_LEDGER_HPP
#define EVOPT_LEDGER_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evopt {

/// Dense index of a transaction inside a loaded ledger. Index order is time
/// order (ties broken by transaction id).
using TxIndex = std::uint32_t;
using Amount = std::int64_t;
using Timestamp = std::int64_t;

constexpr Timestamp seconds_per_hour = 3600;

struct InputSlot {
    std::string src_tx;
    std::string addr;
    Amount amount = 0;

    bool operator==(const InputSlot&) const = default;
};

struct OutputSlot {
    std::string addr;
    Amount amount = 0;

    bool operator==(const OutputSlot&) const = default;
};

struct Transaction {
    std::string id;
    Timestamp time = 0;
    std::vector<InputSlot> inputs;
    std::vector<OutputSlot> outputs;
    Amount fee = 0;

    bool is_coinbase() const { return inputs.empty(); }
    Amount input_total() const;
    Amount output_total() const;

    bool operator==(const Transaction&) const = default;
};

/// Transactions an address takes part in, as ledger indices in time order.
struct AddressActivity {
    std::vector<TxIndex> spend;
    std::vector<TxIndex> receive;
};

/// One flow edge between two transactions: `amount` of `from`'s outputs are
/// consumed by inputs of `to`.
struct FlowLink {
    TxIndex tx = 0;
    Amount amount = 0;
};

class LedgerError : public std::runtime_error {
public:
    enum class Kind { parse, conservation, dangling_source, provenance_time, overspend, duplicate_id, invalid_slot };

    LedgerError(Kind kind, std::size_t line, const std::string& what);

    Kind kind() const noexcept { return kind_; }
    /// 1-based line of the offending record, 0 when not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

/// Immutable, validated UTXO-style ledger with per-address and per-tx flow
/// indices. Safe for concurrent readers once constructed.
class Ledger {
public:
    Ledger() = default;

    /// Validates and indexes `txs`. `lines[i]` (optional) is the source line
    /// of `txs[i]` for error reporting.
    static Ledger build(std::vector<Transaction> txs, std::span<const std::size_t> lines = {});

    std::size_t size() const noexcept { return txs_.size(); }
    bool empty() const noexcept { return txs_.empty(); }

    const Transaction& tx(TxIndex i) const { return txs_.at(i); }
    std::span<const Transaction> transactions() const noexcept { return txs_; }

    std::optional<TxIndex> find(std::string_view tx_id) const;
    TxIndex index_of(std::string_view tx_id) const;

    /// Sources feeding `i`, grouped per source tx, in source index order.
    std::span<const FlowLink> sources(TxIndex i) const { return sources_.at(i); }
    /// Receivers spending outputs of `i`, grouped per receiving tx, in index order.
    std::span<const FlowLink> spenders(TxIndex i) const { return spenders_.at(i); }

    Amount input_total(TxIndex i) const { return input_totals_.at(i); }
    Amount output_total(TxIndex i) const { return output_totals_.at(i); }
    Timestamp time(TxIndex i) const { return txs_.at(i).time; }

    /// Full activity of an address; empty lists when the address is unknown.
    const AddressActivity& activity(std::string_view addr) const;
    /// Activity restricted to txs with time <= until_time.
    AddressActivity txs_of_address(std::string_view addr, Timestamp until_time) const;

    /// Indices of txs with from_time <= time < to_time.
    std::vector<TxIndex> tx_window(Timestamp from_time, Timestamp to_time) const;

    /// Number of txs with time <= t.
    std::size_t count_until(Timestamp t) const;

    std::vector<std::string> addresses() const;

private:
    std::vector<Transaction> txs_;
    std::unordered_map<std::string, TxIndex> by_id_;
    std::unordered_map<std::string, AddressActivity> by_address_;
    std::vector<std::vector<FlowLink>> sources_;
    std::vector<std::vector<FlowLink>> spenders_;
    std::vector<Amount> input_totals_;
    std::vector<Amount> output_totals_;
};

Ledger load_ledger(const std::string& path);
Ledger parse_ledger(std::istream& in);

/// One JSON object per line, in ledger (time) order.
void write_ledger(std::ostream& out, std::span<const Transaction> txs);
std::string transaction_to_json(const Transaction& tx);

struct LabelRecord {
    std::string address;
    int label = 0;
    Timestamp first_seen = 0;

    bool operator==(const LabelRecord&) const = default;
};

/// `address,label,first_seen_time`; a header line is accepted and skipped.
std::vector<LabelRecord> load_labels(const std::string& path);
std::vector<LabelRecord> parse_labels(std::istream& in);
void write_labels(std::ostream& out, std::span<const LabelRecord> labels);

} // namespace evopt

#endif // EVOPT_LEDGER_HPP
