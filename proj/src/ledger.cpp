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

#include "evopt/ledger.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace evopt {

namespace {

std::string located(std::size_t line, const std::string& what)
{
    if (line == 0)
        return what;
    return "line " + std::to_string(line) + ": " + what;
}

const AddressActivity& empty_activity()
{
    static const AddressActivity empty;
    return empty;
}

Transaction transaction_from_json(const nlohmann::json& j)
{
    Transaction tx;
    tx.id = j.at("tx").get<std::string>();
    tx.time = j.at("time").get<Timestamp>();
    for (const auto& in : j.at("inputs"))
        tx.inputs.push_back({in.at("src").get<std::string>(), in.at("addr").get<std::string>(), in.at("amount").get<Amount>()});
    for (const auto& out : j.at("outputs"))
        tx.outputs.push_back({out.at("addr").get<std::string>(), out.at("amount").get<Amount>()});
    tx.fee = j.value("fee", Amount{0});
    return tx;
}

} // namespace

Amount Transaction::input_total() const
{
    Amount s = 0;
    for (const auto& in : inputs)
        s += in.amount;
    return s;
}

Amount Transaction::output_total() const
{
    Amount s = 0;
    for (const auto& out : outputs)
        s += out.amount;
    return s;
}

LedgerError::LedgerError(Kind kind, std::size_t line, const std::string& what)
    : std::runtime_error(located(line, what)), kind_(kind), line_(line)
{
}

Ledger Ledger::build(std::vector<Transaction> txs, std::span<const std::size_t> lines)
{
    auto line_of = [&](std::size_t original) -> std::size_t {
        return original < lines.size() ? lines[original] : 0;
    };

    // Sort by (time, id) while remembering the original position for errors.
    std::vector<std::size_t> order(txs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (txs[a].time != txs[b].time)
            return txs[a].time < txs[b].time;
        return txs[a].id < txs[b].id;
    });

    Ledger ledger;
    ledger.txs_.reserve(txs.size());
    std::vector<std::size_t> src_line;
    src_line.reserve(txs.size());
    for (std::size_t k : order) {
        src_line.push_back(line_of(k));
        ledger.txs_.push_back(std::move(txs[k]));
    }

    const std::size_t n = ledger.txs_.size();
    ledger.by_id_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& tx = ledger.txs_[i];
        if (!ledger.by_id_.emplace(tx.id, static_cast<TxIndex>(i)).second)
            throw LedgerError(LedgerError::Kind::duplicate_id, src_line[i], "duplicate transaction id '" + tx.id + "'");
    }

    ledger.sources_.resize(n);
    ledger.spenders_.resize(n);
    ledger.input_totals_.resize(n);
    ledger.output_totals_.resize(n);

    // Per (source tx, address): amount still available to spend.
    std::map<std::pair<TxIndex, std::string>, Amount> available;

    for (std::size_t i = 0; i < n; ++i) {
        const auto& tx = ledger.txs_[i];
        const auto line = src_line[i];
        if (tx.outputs.empty())
            throw LedgerError(LedgerError::Kind::invalid_slot, line, "transaction '" + tx.id + "' has no outputs");
        for (const auto& out : tx.outputs) {
            if (out.amount <= 0)
                throw LedgerError(LedgerError::Kind::invalid_slot, line, "non-positive output amount in '" + tx.id + "'");
            available[{static_cast<TxIndex>(i), out.addr}] += out.amount;
        }
        ledger.output_totals_[i] = tx.output_total();
        ledger.input_totals_[i] = tx.input_total();
        if (tx.is_coinbase()) {
            if (tx.fee != 0)
                throw LedgerError(LedgerError::Kind::conservation, line, "coinbase-like transaction '" + tx.id + "' must have zero fee");
        } else if (tx.fee < 0 || ledger.input_totals_[i] != ledger.output_totals_[i] + tx.fee) {
            throw LedgerError(LedgerError::Kind::conservation, line,
                "conservation violated in '" + tx.id + "': inputs " + std::to_string(ledger.input_totals_[i]) + " != outputs " +
                    std::to_string(ledger.output_totals_[i]) + " + fee " + std::to_string(tx.fee));
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& tx = ledger.txs_[i];
        const auto line = src_line[i];
        std::map<TxIndex, Amount> grouped;
        for (const auto& in : tx.inputs) {
            if (in.amount <= 0)
                throw LedgerError(LedgerError::Kind::invalid_slot, line, "non-positive input amount in '" + tx.id + "'");
            auto it = ledger.by_id_.find(in.src_tx);
            if (it == ledger.by_id_.end())
                throw LedgerError(LedgerError::Kind::dangling_source, line, "input of '" + tx.id + "' refers to unknown tx '" + in.src_tx + "'");
            const TxIndex src = it->second;
            if (ledger.txs_[src].time >= tx.time)
                throw LedgerError(LedgerError::Kind::provenance_time, line,
                    "input of '" + tx.id + "' refers to '" + in.src_tx + "' which is not strictly earlier");
            auto avail = available.find({src, in.addr});
            if (avail == available.end() || avail->second < in.amount)
                throw LedgerError(LedgerError::Kind::overspend, line,
                    "input of '" + tx.id + "' spends more than '" + in.src_tx + "' paid to " + in.addr);
            avail->second -= in.amount;
            grouped[src] += in.amount;
        }
        for (const auto& [src, amount] : grouped) {
            ledger.sources_[i].push_back({src, amount});
            ledger.spenders_[src].push_back({static_cast<TxIndex>(i), amount});
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& tx = ledger.txs_[i];
        const auto idx = static_cast<TxIndex>(i);
        for (const auto& in : tx.inputs) {
            auto& list = ledger.by_address_[in.addr].spend;
            if (list.empty() || list.back() != idx)
                list.push_back(idx);
        }
        for (const auto& out : tx.outputs) {
            auto& list = ledger.by_address_[out.addr].receive;
            if (list.empty() || list.back() != idx)
                list.push_back(idx);
        }
    }
    return ledger;
}

std::optional<TxIndex> Ledger::find(std::string_view tx_id) const
{
    auto it = by_id_.find(std::string(tx_id));
    if (it == by_id_.end())
        return std::nullopt;
    return it->second;
}

TxIndex Ledger::index_of(std::string_view tx_id) const
{
    auto idx = find(tx_id);
    if (!idx)
        throw std::out_of_range("unknown transaction '" + std::string(tx_id) + "'");
    return *idx;
}

const AddressActivity& Ledger::activity(std::string_view addr) const
{
    auto it = by_address_.find(std::string(addr));
    return it == by_address_.end() ? empty_activity() : it->second;
}

AddressActivity Ledger::txs_of_address(std::string_view addr, Timestamp until_time) const
{
    const auto& all = activity(addr);
    auto cut = [&](const std::vector<TxIndex>& list) {
        auto end = std::upper_bound(list.begin(), list.end(), until_time,
            [&](Timestamp t, TxIndex i) { return t < txs_[i].time; });
        return std::vector<TxIndex>(list.begin(), end);
    };
    return {cut(all.spend), cut(all.receive)};
}

std::vector<TxIndex> Ledger::tx_window(Timestamp from_time, Timestamp to_time) const
{
    if (from_time > to_time)
        throw std::invalid_argument("tx_window: inverted window");
    auto by_time = [](const Transaction& tx, Timestamp t) { return tx.time < t; };
    auto lo = std::lower_bound(txs_.begin(), txs_.end(), from_time, by_time);
    auto hi = std::lower_bound(txs_.begin(), txs_.end(), to_time, by_time);
    std::vector<TxIndex> out;
    out.reserve(static_cast<std::size_t>(hi - lo));
    for (auto it = lo; it != hi; ++it)
        out.push_back(static_cast<TxIndex>(it - txs_.begin()));
    return out;
}

std::size_t Ledger::count_until(Timestamp t) const
{
    auto it = std::upper_bound(txs_.begin(), txs_.end(), t, [](Timestamp v, const Transaction& tx) { return v < tx.time; });
    return static_cast<std::size_t>(it - txs_.begin());
}

std::vector<std::string> Ledger::addresses() const
{
    std::vector<std::string> out;
    out.reserve(by_address_.size());
    for (const auto& [addr, _] : by_address_)
        out.push_back(addr);
    std::sort(out.begin(), out.end());
    return out;
}

Ledger parse_ledger(std::istream& in)
{
    std::vector<Transaction> txs;
    std::vector<std::size_t> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            txs.push_back(transaction_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw LedgerError(LedgerError::Kind::parse, line_no, e.what());
        }
        lines.push_back(line_no);
    }
    return Ledger::build(std::move(txs), lines);
}

Ledger load_ledger(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open ledger file '" + path + "'");
    return parse_ledger(in);
}

std::string transaction_to_json(const Transaction& tx)
{
    nlohmann::ordered_json j;
    j["tx"] = tx.id;
    j["time"] = tx.time;
    auto inputs = nlohmann::ordered_json::array();
    for (const auto& in : tx.inputs)
        inputs.push_back({{"src", in.src_tx}, {"addr", in.addr}, {"amount", in.amount}});
    auto outputs = nlohmann::ordered_json::array();
    for (const auto& out : tx.outputs)
        outputs.push_back({{"addr", out.addr}, {"amount", out.amount}});
    j["inputs"] = std::move(inputs);
    j["outputs"] = std::move(outputs);
    j["fee"] = tx.fee;
    return j.dump();
}

void write_ledger(std::ostream& out, std::span<const Transaction> txs)
{
    for (const auto& tx : txs)
        out << transaction_to_json(tx) << '\n';
}

std::vector<LabelRecord> parse_labels(std::istream& in)
{
    std::vector<LabelRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line_no == 1 && line.rfind("address,", 0) == 0)
            continue;
        std::stringstream ss(line);
        std::string addr, label, first_seen;
        if (!std::getline(ss, addr, ',') || !std::getline(ss, label, ',') || !std::getline(ss, first_seen, ','))
            throw LedgerError(LedgerError::Kind::parse, line_no, "expected address,label,first_seen_time");
        LabelRecord rec;
        rec.address = addr;
        try {
            rec.label = std::stoi(label);
            rec.first_seen = std::stoll(first_seen);
        } catch (const std::exception&) {
            throw LedgerError(LedgerError::Kind::parse, line_no, "malformed label record");
        }
        if (rec.label != 0 && rec.label != 1)
            throw LedgerError(LedgerError::Kind::parse, line_no, "label must be 0 or 1");
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<LabelRecord> load_labels(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open labels file '" + path + "'");
    return parse_labels(in);
}

void write_labels(std::ostream& out, std::span<const LabelRecord> labels)
{
    out << "address,label,first_seen_time\n";
    for (const auto& rec : labels)
        out << rec.address << ',' << rec.label << ',' << rec.first_seen << '\n';
}

} // namespace evopt
