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

// Command-line entry point: synth, paths, features, train, monitor, eval, bench.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evopt/dataset.hpp"
#include "evopt/graphs.hpp"
#include "evopt/metrics.hpp"
#include "evopt/monitor.hpp"
#include "evopt/synth.hpp"
#include "evopt/training.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace evopt;

namespace {

constexpr const char* version = "0.1.0";

enum Exit { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_internal = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::uint64_t seed = 7;
    SynthConfig synth;
    FeatureConfig features;
    ModelConfig model;
    TrainConfig train;
    double tau = default_early_stop_threshold;
};

ordered_json to_json(const RunConfig& c)
{
    ordered_json j;
    j["seed"] = c.seed;
    j["synth"] = evopt::to_json(c.synth);
    j["features"] = evopt::to_json(c.features);
    j["model"] = evopt::to_json(c.model);
    j["train"] = evopt::to_json(c.train);
    // JSON has no infinity; null disables early stop.
    j["monitor"] = {{"tau", std::isinf(c.tau) ? nlohmann::json(nullptr) : nlohmann::json(c.tau)}};
    return j;
}

void merge_file(RunConfig& c, const nlohmann::json& file)
{
    const nlohmann::json& j = file.contains("config") ? file.at("config") : file;
    c.seed = j.value("seed", c.seed);
    if (j.contains("synth"))
        c.synth = synth_config_from_json(j.at("synth"));
    if (j.contains("features"))
        c.features = feature_config_from_json(j.at("features"));
    if (j.contains("model"))
        c.model = model_config_from_json(j.at("model"));
    if (j.contains("train"))
        c.train = train_config_from_json(j.at("train"));
    if (j.contains("monitor") && j.at("monitor").contains("tau")) {
        const auto& t = j.at("monitor").at("tau");
        c.tau = t.is_null() ? early_stop_disabled : t.get<double>();
    }
}

/// Shared flags. Unset optionals keep the file or default value.
struct Flags {
    std::string config_file;
    std::optional<double> theta, tspan, gamma, tau, interval_hours, lr;
    std::optional<std::size_t> lu, hidden, heads, horizon, epochs, patience, path_cap;
    std::optional<std::uint64_t> seed;
    bool no_early_stop = false;

    void add_to(CLI::App& app)
    {
        app.add_option("--config", config_file, "JSON run config or a previous manifest");
        app.add_option("--theta", theta, "path score threshold");
        app.add_option("--tspan", tspan, "path time span in hours");
        app.add_option("--lu", lu, "uniform path length");
        app.add_option("--hidden", hidden, "hidden size d");
        app.add_option("--heads", heads, "attention heads");
        app.add_option("--gamma", gamma, "consistency loss weight");
        app.add_option("--tau", tau, "early-stop threshold on the cumulative rate");
        app.add_flag("--no-early-stop", no_early_stop, "disable early-stop removal");
        app.add_option("--interval-hours", interval_hours, "hours per timestep");
        app.add_option("--horizon", horizon, "timesteps per address");
        app.add_option("--seed", seed, "seed for generation, splits and initialization");
        app.add_option("--epochs", epochs, "maximum training epochs");
        app.add_option("--patience", patience, "early-stopping patience in epochs");
        app.add_option("--lr", lr, "learning rate");
        app.add_option("--path-cap", path_cap, "maximum paths per anchor");
    }
};

nlohmann::json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("'" + path + "': " + e.what());
    }
}

RunConfig resolve(const Flags& f, const std::string& fallback_file = {})
{
    RunConfig c;
    const std::string file = !f.config_file.empty() ? f.config_file : fallback_file;
    if (!file.empty()) {
        try {
            merge_file(c, read_json_file(file));
        } catch (const std::runtime_error& e) {
            throw UsageError(std::string("config: ") + e.what());
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("config: ") + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("config: ") + e.what());
        }
    }
    if (f.seed) {
        c.seed = *f.seed;
        c.synth.seed = *f.seed;
        c.train.seed = *f.seed;
    }
    if (f.theta)
        c.features.trace.theta = *f.theta;
    if (f.tspan)
        c.features.trace.span = static_cast<Timestamp>(std::llround(*f.tspan * seconds_per_hour));
    if (f.path_cap) {
        c.features.trace.path_cap = *f.path_cap;
        c.model.path_cap = *f.path_cap;
    }
    if (f.interval_hours)
        c.features.interval = static_cast<Timestamp>(std::llround(*f.interval_hours * seconds_per_hour));
    if (f.horizon) {
        c.features.horizon = *f.horizon;
        c.model.horizon = *f.horizon;
        c.synth.horizon = *f.horizon;
    }
    if (f.lu) {
        c.features.uniform_length = *f.lu;
        c.model.uniform_length = *f.lu;
    }
    if (f.hidden)
        c.model.hidden = *f.hidden;
    if (f.heads)
        c.model.heads = *f.heads;
    if (f.gamma)
        c.train.gamma = *f.gamma;
    if (f.epochs)
        c.train.max_epochs = *f.epochs;
    if (f.patience)
        c.train.patience = *f.patience;
    if (f.lr)
        c.train.learning_rate = *f.lr;
    if (f.tau)
        c.tau = *f.tau;
    if (f.no_early_stop)
        c.tau = early_stop_disabled;
    try {
        c.synth.validate();
        c.features.validate();
        c.model.validate();
        c.train.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (!(c.tau > 0))
        throw UsageError("--tau must be positive");
    return c;
}

class Output {
public:
    Output(const std::string& dir, std::string command, const RunConfig& config) : dir_(dir)
    {
        fs::create_directories(dir_);
        manifest_["command"] = std::move(command);
        manifest_["version"] = version;
        manifest_["config"] = to_json(config);
        manifest_["inputs"] = ordered_json::object();
        manifest_["outputs"] = ordered_json::array();
    }

    std::ofstream open(const std::string& name)
    {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write '" + (dir_ / name).string() + "'");
        manifest_["outputs"].push_back(name);
        return out;
    }

    void text(const std::string& name, const std::string& content) { open(name) << content; }

    void input(const std::string& key, const std::string& value) { manifest_["inputs"][key] = value; }
    ordered_json& manifest() { return manifest_; }

    void finish()
    {
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write manifest in '" + dir_.string() + "'");
        out << manifest_.dump(2) << '\n';
    }

private:
    fs::path dir_;
    ordered_json manifest_;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> split_indices(const Split& split, const std::string& which, std::size_t n)
{
    if (which == "train")
        return split.train;
    if (which == "validation")
        return split.validation;
    if (which == "test")
        return split.test;
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i)
        all[i] = i;
    return all;
}

// synth ----------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::optional<std::size_t> addresses;
    std::optional<double> malicious_fraction, background_rate;
};

void run_synth(const Flags& flags, const SynthArgs& a)
{
    RunConfig c = resolve(flags);
    if (a.addresses)
        c.synth.addresses = *a.addresses;
    if (a.malicious_fraction)
        c.synth.malicious_fraction = *a.malicious_fraction;
    if (a.background_rate)
        c.synth.background_rate = *a.background_rate;
    try {
        c.synth.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const SynthResult r = generate(c.synth);
    write_synth(a.out, r);
    const Ledger ledger = Ledger::build(r.txs);
    const SynthSummary s = describe(ledger, r.labels, c.features.trace, c.synth.horizon, r.patterns);
    std::ofstream summary(fs::path(a.out) / "summary.json", std::ios::binary);
    summary << evopt::to_json(s).dump(2) << '\n';
    ordered_json manifest = r.manifest();
    manifest["command"] = "synth";
    manifest["version"] = version;
    manifest["config"] = to_json(c);
    manifest["outputs"] = {"ledger.jsonl", "labels.csv", "summary.json"};
    std::ofstream m(fs::path(a.out) / "manifest.json", std::ios::binary);
    m << manifest.dump(2) << '\n';
    std::cout << "synth: " << r.txs.size() << " transactions, " << s.positives << " positive / " << s.negatives << " negative addresses\n";
}

// paths ----------------------------------------------------------------------

struct PathsArgs {
    std::string ledger, address, out;
    std::optional<Timestamp> as_of;
};

void run_paths(const Flags& flags, const PathsArgs& a)
{
    const RunConfig c = resolve(flags);
    Output out(a.out, "paths", c);
    out.input("ledger", a.ledger);
    out.input("address", a.address);
    const Ledger ledger = load_ledger(a.ledger);
    const auto& activity = ledger.activity(a.address);
    if (activity.spend.empty() && activity.receive.empty())
        throw std::invalid_argument("address '" + a.address + "' does not occur in the ledger");
    const Timestamp as_of = a.as_of ? *a.as_of : ledger.tx(static_cast<TxIndex>(ledger.size() - 1)).time;
    const PathSet set = build_path_set(ledger, a.address, as_of, c.features.trace);
    {
        auto f = out.open("paths.jsonl");
        for (const auto& p : set.backward())
            f << path_to_json(ledger, p) << '\n';
        for (const auto& p : set.forward())
            f << path_to_json(ledger, p) << '\n';
    }
    {
        auto f = out.open("graphs.jsonl");
        f << graph_to_json(ledger, build_path_graph(set.backward(), Direction::backward)) << '\n';
        f << graph_to_json(ledger, build_path_graph(set.forward(), Direction::forward)) << '\n';
    }
    out.manifest()["as_of"] = as_of;
    out.manifest()["summary"] = {{"backward_paths", set.backward().size()}, {"forward_paths", set.forward().size()},
        {"capped_anchors", set.capped_anchors()}};
    out.finish();
    std::cout << "paths: " << set.backward().size() << " backward, " << set.forward().size() << " forward\n";
}

// features -------------------------------------------------------------------

struct FeaturesArgs {
    std::string ledger, labels, out, address;
};

void run_features(const Flags& flags, const FeaturesArgs& a)
{
    const RunConfig c = resolve(flags);
    Output out(a.out, "features", c);
    out.input("ledger", a.ledger);
    out.input("labels", a.labels);
    const Ledger ledger = load_ledger(a.ledger);
    const auto labels = load_labels(a.labels);
    const auto& fc = c.features;
    {
        auto f = out.open("address_features.csv");
        f << "address,label,t,as_of,";
        write_address_feature_header(f);
        f << '\n';
        f.precision(17);
        for (const auto& rec : labels)
            for (std::size_t t = 1; t <= fc.horizon; ++t) {
                const Timestamp as_of = rec.first_seen + static_cast<Timestamp>(t) * fc.interval;
                f << rec.address << ',' << rec.label << ',' << t << ',' << as_of;
                for (double v : address_features(ledger, rec.address, as_of))
                    f << ',' << v;
                f << '\n';
            }
    }
    if (!a.address.empty()) {
        auto rec = std::find_if(labels.begin(), labels.end(), [&](const LabelRecord& r) { return r.address == a.address; });
        if (rec == labels.end())
            throw std::invalid_argument("address '" + a.address + "' is not labeled");
        auto f = out.open("path_features.csv");
        f << "address,t,direction,path,node,";
        write_tx_feature_header(f);
        f << '\n';
        f.precision(17);
        StepFeaturizer feat(ledger, rec->address, rec->first_seen, fc);
        for (std::size_t t = 1; t <= fc.horizon; ++t) {
            feat.next();
            const Timestamp as_of = rec->first_seen + static_cast<Timestamp>(t) * fc.interval;
            for (Direction d : {Direction::backward, Direction::forward}) {
                const auto& list = d == Direction::backward ? feat.path_set().backward() : feat.path_set().forward();
                for (std::size_t p = 0; p < list.size(); ++p) {
                    const auto rows = path_features(ledger, list[p], as_of);
                    for (std::size_t n = 0; n < rows.size(); ++n) {
                        f << rec->address << ',' << t << ',' << to_string(d) << ',' << p << ',' << n;
                        for (double v : rows[n])
                            f << ',' << v;
                        f << '\n';
                    }
                }
            }
        }
    }
    out.manifest()["summary"] = {{"addresses", labels.size()}, {"horizon", fc.horizon}};
    out.finish();
    std::cout << "features: " << labels.size() << " addresses x " << fc.horizon << " steps\n";
}

// train / eval -----------------------------------------------------------------

struct TrainArgs {
    std::string ledger, labels, out;
    bool plots = false;
};

void write_f1_plot(Output& out, const std::string& name, const EvaluationReport& r, const std::string& title)
{
    tools::Series f1{"F1", {}}, recall{"recall", {}}, precision{"precision", {}};
    for (const auto& m : r.per_step) {
        f1.y.push_back(m.f1);
        recall.y.push_back(m.recall);
        precision.y.push_back(m.precision);
    }
    out.text(name, tools::line_chart(title, "timestep", {f1, precision, recall}));
}

ordered_json report_json(const EvaluationReport& r)
{
    ordered_json j;
    j["f1_early"] = r.f1_early;
    j["f1_consistent"] = r.f1_consistent;
    j["final_f1"] = r.per_step.empty() ? 0.0 : r.per_step.back().f1;
    j["mean_first_confident"] = r.mean_first_confident ? nlohmann::json(*r.mean_first_confident) : nlohmann::json(nullptr);
    j["confident_count"] = r.confident_count;
    return j;
}

void run_train(const Flags& flags, const TrainArgs& a)
{
    const RunConfig c = resolve(flags);
    Output out(a.out, "train", c);
    out.input("ledger", a.ledger);
    out.input("labels", a.labels);
    const Ledger ledger = load_ledger(a.ledger);
    const auto labels = load_labels(a.labels);
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset data = build_dataset(ledger, labels, c.features, c.seed);
    const double prep = seconds_since(t0);
    std::cout << "train: " << data.split.train.size() << " train / " << data.split.validation.size() << " validation / "
              << data.split.test.size() << " test addresses, features in " << prep << " s\n";
    const TrainResult r = train(data, c.model, c.train, [](const EpochRecord& e) {
        std::cout << "epoch " << e.epoch << " loss " << e.train_loss << " val F1E " << e.val_f1_early << " val F1C " << e.val_f1_consistent
                  << " (" << e.seconds << " s)\n";
    });
    {
        auto f = out.open("model.json");
        write_model_checkpoint(f, r.params, data.scalers);
    }
    {
        auto f = out.open("training_log.csv");
        write_training_log(f, r.history);
    }
    const EvaluationReport test = evaluate(r.params, data.samples, data.split.test);
    {
        auto f = out.open("test_metrics.csv");
        write_metrics_csv(f, test);
    }
    if (a.plots) {
        tools::Series e{"val F1E", {}}, cc{"val F1C", {}};
        for (const auto& h : r.history) {
            e.y.push_back(h.val_f1_early);
            cc.y.push_back(h.val_f1_consistent);
        }
        out.text("training.svg", tools::line_chart("Validation scores", "epoch", {e, cc}));
        write_f1_plot(out, "test_f1.svg", test, "Test split per timestep");
    }
    out.manifest()["summary"] = {{"epochs", r.history.size()}, {"best_epoch", r.best_epoch}, {"best_val_f1_early", r.best_val_f1_early},
        {"parameters", r.params.parameter_count()}, {"feature_seconds", prep}, {"test", report_json(test)}};
    out.finish();
    std::cout << "test F1E " << test.f1_early << " F1C " << test.f1_consistent << " final F1 " << test.per_step.back().f1 << '\n';
}

struct EvalArgs {
    std::string ledger, labels, model, out, split = "test";
    bool plots = false;
};

std::pair<ModelParams, FeatureScalers> load_model(const std::string& dir, const RunConfig& c)
{
    std::ifstream in(fs::path(dir) / "model.json");
    if (!in)
        throw std::runtime_error("cannot open '" + (fs::path(dir) / "model.json").string() + "'");
    return read_model_checkpoint(in, c.model);
}

std::string model_manifest(const std::string& dir)
{
    const auto p = fs::path(dir) / "manifest.json";
    return fs::exists(p) ? p.string() : std::string();
}

void run_eval(const Flags& flags, const EvalArgs& a)
{
    const RunConfig c = resolve(flags, model_manifest(a.model));
    Output out(a.out, "eval", c);
    out.input("ledger", a.ledger);
    out.input("labels", a.labels);
    out.input("model", a.model);
    out.input("split", a.split);
    const Ledger ledger = load_ledger(a.ledger);
    const auto labels = load_labels(a.labels);
    const auto [params, scalers] = load_model(a.model, c);
    const auto split = [&] {
        std::vector<int> y;
        for (const auto& l : labels)
            y.push_back(l.label);
        return stratified_split(y, c.seed);
    }();
    const auto idx = split_indices(split, a.split, labels.size());
    std::vector<Sample> samples;
    std::vector<std::size_t> local;
    for (std::size_t i : idx) {
        samples.push_back(encode_sample(build_raw_sample(ledger, labels[i], c.features), scalers, c.features.uniform_length));
        local.push_back(local.size());
    }
    const EvaluationReport r = evaluate(params, samples, local);
    {
        auto f = out.open("metrics.csv");
        write_metrics_csv(f, r);
    }
    if (a.plots)
        write_f1_plot(out, "f1.svg", r, "Per-timestep scores (" + a.split + ")");
    out.manifest()["summary"] = report_json(r);
    out.manifest()["summary"]["addresses"] = samples.size();
    out.finish();
    std::cout << "eval (" << a.split << ", " << samples.size() << " addresses): F1E " << r.f1_early << " F1C " << r.f1_consistent
              << " final F1 " << r.per_step.back().f1 << '\n';
}

// monitor --------------------------------------------------------------------

void run_monitor(const Flags& flags, const EvalArgs& a)
{
    const RunConfig c = resolve(flags, model_manifest(a.model));
    Output out(a.out, "monitor", c);
    out.input("ledger", a.ledger);
    out.input("labels", a.labels);
    out.input("model", a.model);
    out.input("split", a.split);
    const Ledger ledger = load_ledger(a.ledger);
    const auto labels = load_labels(a.labels);
    const auto [params, scalers] = load_model(a.model, c);
    std::vector<int> y;
    for (const auto& l : labels)
        y.push_back(l.label);
    std::vector<LabelRecord> watched;
    for (std::size_t i : split_indices(stratified_split(y, c.seed), a.split, labels.size()))
        watched.push_back(labels[i]);
    Watchlist list = open_watchlist(ledger, params, scalers, c.features, watched, c.tau);
    tools::Series skip{"skip ratio", {}};
    double path_s = 0, model_s = 0;
    {
        auto f = out.open("replay.jsonl");
        for (std::size_t t = 1; t <= c.features.horizon; ++t) {
            const StepReport r = list.advance(t);
            write_step_report(f, r);
            skip.y.push_back(r.skip_ratio);
            path_s += r.path_seconds;
            model_s += r.model_seconds;
        }
    }
    std::vector<int> pred, truth;
    for (const auto& rec : watched) {
        pred.push_back(list.prediction(rec.address));
        truth.push_back(rec.label);
    }
    const auto m = confusion_metrics(pred, truth);
    if (a.plots)
        out.text("skip_ratio.svg", tools::line_chart("Addresses removed by early stop", "timestep", {skip}));
    out.manifest()["summary"] = {{"addresses", watched.size()}, {"skip_ratio", skip.y}, {"recall", m.recall}, {"precision", m.precision},
        {"f1", m.f1}, {"path_seconds", path_s}, {"model_seconds", model_s}};
    out.finish();
    std::cout << "monitor: " << watched.size() << " addresses, final skip ratio " << (skip.y.empty() ? 0.0 : skip.y.back()) << ", recall "
              << m.recall << ", precision " << m.precision << '\n';
}

// bench ----------------------------------------------------------------------

struct BenchArgs {
    std::string ledger, labels, out;
    std::size_t addresses = 100;
};

void run_bench(const Flags& flags, const BenchArgs& a)
{
    const RunConfig c = resolve(flags);
    Output out(a.out, "bench", c);
    out.input("ledger", a.ledger);
    out.input("labels", a.labels);
    const Ledger ledger = load_ledger(a.ledger);
    auto labels = load_labels(a.labels);
    if (labels.size() > a.addresses)
        labels.resize(a.addresses);
    const auto& fc = c.features;
    const auto at = [&](const LabelRecord& r, std::size_t t) { return r.first_seen + static_cast<Timestamp>(t) * fc.interval; };

    std::size_t batch_paths = 0, incremental_paths = 0;
    auto t0 = std::chrono::steady_clock::now();
    for (const auto& r : labels)
        for (std::size_t t = 1; t <= fc.horizon; ++t)
            batch_paths += build_path_set(ledger, r.address, at(r, t), fc.trace).backward().size();
    const double batch_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    for (const auto& r : labels) {
        PathSet set = build_path_set(ledger, r.address, at(r, 1), fc.trace);
        incremental_paths += set.backward().size();
        for (std::size_t t = 2; t <= fc.horizon; ++t) {
            set = extend_path_set(set, ledger, at(r, t));
            incremental_paths += set.backward().size();
        }
    }
    const double incremental_s = seconds_since(t0);
    if (batch_paths != incremental_paths)
        throw std::logic_error("bench: incremental and batch path counts differ");

    // Model cost per address-step, unbatched and batched.
    const ModelParams params = init_params(c.model, c.seed);
    const FeatureScalers scalers{FeatureScaler(address_feature_dim), FeatureScaler(tx_feature_dim), FeatureScaler(address_feature_dim)};
    std::vector<Sample> samples;
    for (const auto& r : labels)
        samples.push_back(encode_sample(build_raw_sample(ledger, r, fc), scalers, fc.uniform_length));
    NoGradScope no_grad;
    t0 = std::chrono::steady_clock::now();
    for (const auto& s : samples)
        run_sample(params, s);
    const double single_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    for (std::size_t lo = 0; lo < samples.size(); lo += watch_batch) {
        std::vector<const Sample*> group;
        for (std::size_t i = lo; i < std::min(samples.size(), lo + watch_batch); ++i)
            group.push_back(&samples[i]);
        run_batch(params, group);
    }
    const double batched_s = seconds_since(t0);

    const double steps = static_cast<double>(labels.size() * fc.horizon);
    {
        auto f = out.open("bench.csv");
        f << "stage,method,addresses,steps,seconds,ms_per_address_step\n";
        const auto row = [&](const char* stage, const char* method, double s) {
            f << stage << ',' << method << ',' << labels.size() << ',' << fc.horizon << ',' << s << ',' << 1000.0 * s / steps << '\n';
        };
        row("path_extraction", "batch", batch_s);
        row("path_extraction", "incremental", incremental_s);
        row("model_step", "single", single_s);
        row("model_step", "batched", batched_s);
    }
    out.manifest()["summary"] = {{"incremental_over_batch", incremental_s / batch_s}, {"batch_seconds", batch_s},
        {"incremental_seconds", incremental_s}, {"model_single_seconds", single_s}, {"model_batched_seconds", batched_s}};
    out.finish();
    std::cout << "bench: path extraction batch " << batch_s << " s, incremental " << incremental_s << " s (ratio "
              << incremental_s / batch_s << "); model " << single_s << " s single, " << batched_s << " s batched\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Early detection of malicious addresses from evolving asset-transfer paths"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);
    Flags flags;
    flags.add_to(app);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic ledger");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--addresses", synth_args.addresses, "labeled addresses");
    synth->add_option("--malicious-fraction", synth_args.malicious_fraction, "share of malicious addresses");
    synth->add_option("--background-rate", synth_args.background_rate, "background transactions per hour");

    PathsArgs paths_args;
    auto* paths = app.add_subcommand("paths", "dump the paths and path graphs of one address");
    paths->add_option("--ledger", paths_args.ledger, "ledger JSONL")->required();
    paths->add_option("--address", paths_args.address, "address to trace")->required();
    paths->add_option("--as-of", paths_args.as_of, "ledger time limit (seconds); default the last transaction");
    paths->add_option("--out", paths_args.out, "output directory")->required();

    FeaturesArgs features_args;
    auto* features = app.add_subcommand("features", "write address (and optionally path) feature CSVs");
    features->add_option("--ledger", features_args.ledger, "ledger JSONL")->required();
    features->add_option("--labels", features_args.labels, "labels CSV")->required();
    features->add_option("--address", features_args.address, "also dump path node features of this address");
    features->add_option("--out", features_args.out, "output directory")->required();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    train_cmd->add_option("--ledger", train_args.ledger, "ledger JSONL")->required();
    train_cmd->add_option("--labels", train_args.labels, "labels CSV")->required();
    train_cmd->add_option("--out", train_args.out, "output directory")->required();
    train_cmd->add_flag("--plots", train_args.plots, "write SVG plots");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "score a split with a trained model");
    EvalArgs monitor_args;
    auto* monitor = app.add_subcommand("monitor", "replay a split through the watchlist");
    for (auto [cmd, args] : {std::pair{eval, &eval_args}, std::pair{monitor, &monitor_args}}) {
        cmd->add_option("--ledger", args->ledger, "ledger JSONL")->required();
        cmd->add_option("--labels", args->labels, "labels CSV")->required();
        cmd->add_option("--model", args->model, "directory written by train")->required();
        cmd->add_option("--out", args->out, "output directory")->required();
        cmd->add_option("--split", args->split, "train, validation, test or all")
            ->check(CLI::IsMember({"train", "validation", "test", "all"}));
        cmd->add_flag("--plots", args->plots, "write SVG plots");
    }

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "time path extraction and model steps");
    bench->add_option("--ledger", bench_args.ledger, "ledger JSONL")->required();
    bench->add_option("--labels", bench_args.labels, "labels CSV")->required();
    bench->add_option("--out", bench_args.out, "output directory")->required();
    bench->add_option("--addresses", bench_args.addresses, "addresses to time");

    for (auto* sub : app.get_subcommands({}))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (synth->parsed())
            run_synth(flags, synth_args);
        else if (paths->parsed())
            run_paths(flags, paths_args);
        else if (features->parsed())
            run_features(flags, features_args);
        else if (train_cmd->parsed())
            run_train(flags, train_args);
        else if (eval->parsed())
            run_eval(flags, eval_args);
        else if (monitor->parsed())
            run_monitor(flags, monitor_args);
        else if (bench->parsed())
            run_bench(flags, bench_args);
    } catch (const UsageError& e) {
        std::cerr << "evopt: " << e.what() << '\n';
        return exit_usage;
    } catch (const LedgerError& e) {
        std::cerr << "evopt: data error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::invalid_argument& e) {
        std::cerr << "evopt: data error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::runtime_error& e) {
        std::cerr << "evopt: data error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "evopt: internal error: " << e.what() << '\n';
        return exit_internal;
    }
    return exit_ok;
}
