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

#include "evopt/model.hpp"

#include <cmath>
#include <random>

namespace evopt {

namespace {

const char* const branch_tags[branch_count] = {"address", "bpath", "bgraph", "fpath", "fgraph"};

std::string lstm_name(std::size_t branch, const char* part)
{
    return "t" + std::to_string(branch + 1) + "." + part;
}

const char* dir_tag(Direction d)
{
    return d == Direction::backward ? "e1" : "e2";
}

const char* gcn_tag(Direction d)
{
    return d == Direction::backward ? "gcn_b" : "gcn_f";
}

} // namespace

LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w, const Tensor& b);

namespace {

// Path LSTM over uniform_length node tensors with generated weights.
Tensor encode_paths(const ModelConfig& c, const Tensor& w, const Tensor& b, std::span<const Tensor> nodes)
{
    const std::size_t d = c.hidden;
    if (nodes.size() != c.uniform_length)
        throw ShapeError("evolve_path_encode: expected " + std::to_string(c.uniform_length) + " path nodes");
    const std::size_t n = nodes.front().rows();
    LstmState s{Tensor::zeros({n, d}), Tensor::zeros({n, d})};
    for (const auto& x : nodes) {
        if (x.rank() != 2 || x.rows() != n || x.cols() != c.tx_dim)
            throw ShapeError("evolve_path_encode: path node tensor has shape " + shape_to_string(x.shape()));
        s = lstm_cell(x, s, w, b);
    }
    return s.h;
}

// Graph convolution with generated projections; `projector` is only read
// when there are cliques.
Tensor propagate_paths(const ModelConfig& c, const Tensor& path_vectors, const Tensor& proj, const Tensor& projector,
    const std::shared_ptr<const std::vector<std::vector<int>>>& cliques, const Tensor& clique_features)
{
    Tensor z = matmul(path_vectors, proj);
    const std::size_t clique_count = cliques ? cliques->size() : 0;
    if (clique_count == 0)
        return relu(z);
    if (!clique_features.defined() || clique_features.rank() != 2 || clique_features.rows() != clique_count ||
        clique_features.cols() != c.address_dim)
        throw ShapeError("evolve_gcn: clique features must be |cliques|×address_dim");
    Tensor weights = sigmoid(matmul(clique_features, transpose(projector)));
    return relu(clique_propagate(z, weights, cliques));
}

} // namespace

void ModelConfig::validate() const
{
    if (hidden == 0 || address_dim == 0 || tx_dim == 0 || uniform_length == 0 || heads == 0 || path_cap == 0 || horizon == 0)
        throw std::invalid_argument("model config: all sizes must be positive");
    if (hidden % heads != 0)
        throw std::invalid_argument("model config: hidden size must be divisible by the number of heads");
    if (use_graphs && !use_paths)
        throw std::invalid_argument("model config: graph branches require path branches");
}

bool ModelConfig::branch_active(std::size_t branch) const
{
    switch (branch) {
    case branch_address:
        return true;
    case branch_backward_path:
    case branch_forward_path:
        return use_paths;
    default:
        return use_paths && use_graphs;
    }
}

nlohmann::json to_json(const ModelConfig& c)
{
    return {
        {"hidden", c.hidden},
        {"address_dim", c.address_dim},
        {"tx_dim", c.tx_dim},
        {"uniform_length", c.uniform_length},
        {"heads", c.heads},
        {"path_cap", c.path_cap},
        {"horizon", c.horizon},
        {"use_paths", c.use_paths},
        {"use_graphs", c.use_graphs},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j)
{
    ModelConfig c;
    c.hidden = j.value("hidden", c.hidden);
    c.address_dim = j.value("address_dim", c.address_dim);
    c.tx_dim = j.value("tx_dim", c.tx_dim);
    c.uniform_length = j.value("uniform_length", c.uniform_length);
    c.heads = j.value("heads", c.heads);
    c.path_cap = j.value("path_cap", c.path_cap);
    c.horizon = j.value("horizon", c.horizon);
    c.use_paths = j.value("use_paths", c.use_paths);
    c.use_graphs = j.value("use_graphs", c.use_graphs);
    c.validate();
    return c;
}

ModelParams::ModelParams(ModelConfig config, NamedTensors tensors) : config_(config), tensors_(std::move(tensors))
{
    config_.validate();
    for (const auto& [name, shape] : param_shapes(config_)) {
        auto it = tensors_.find(name);
        if (it == tensors_.end())
            throw std::invalid_argument("model params: missing tensor '" + name + "'");
        if (it->second.shape() != shape)
            throw std::invalid_argument("model params: tensor '" + name + "' has shape " + shape_to_string(it->second.shape()) +
                ", expected " + shape_to_string(shape));
    }
    if (tensors_.size() != param_shapes(config_).size())
        throw std::invalid_argument("model params: unexpected extra tensors");
}

const Tensor& ModelParams::get(const std::string& name) const
{
    auto it = tensors_.find(name);
    if (it == tensors_.end())
        throw std::out_of_range("model params: no tensor '" + name + "'");
    return it->second;
}

std::vector<Tensor> ModelParams::list() const
{
    std::vector<Tensor> out;
    out.reserve(tensors_.size());
    for (const auto& [name, t] : tensors_)
        out.push_back(t);
    return out;
}

std::size_t ModelParams::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& [name, t] : tensors_)
        n += t.size();
    return n;
}

void ModelParams::zero_grad()
{
    for (auto& [name, t] : tensors_)
        t.zero_grad();
}

ModelParams ModelParams::clone() const
{
    NamedTensors copy;
    for (const auto& [name, t] : tensors_)
        copy.emplace(name, Tensor::parameter(t.shape(), t.values()));
    return ModelParams(config_, std::move(copy));
}

double HazardTrace::step_total(std::size_t t) const
{
    const auto& l = lambda.at(t - 1);
    double total = 0;
    for (double v : l)
        total += v;
    return total;
}

void HazardTrace::append(const StepResult& step)
{
    std::array<double, branch_count> l{};
    for (std::size_t j = 0; j < branch_count; ++j)
        l[j] = step.lambda[j].item();
    append(l);
}

void HazardTrace::append(const std::array<double, branch_count>& rates)
{
    lambda.push_back(rates);
    double total = 0;
    for (double v : rates)
        total += v;
    const double prev = cumulative.empty() ? 0.0 : cumulative.back();
    cumulative.push_back(prev + total);
    survival.push_back(evopt::survival(cumulative.back()));
}

std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& c)
{
    const std::size_t d = c.hidden;
    std::vector<std::pair<std::string, Shape>> out;
    for (std::size_t j = 0; j < branch_count; ++j) {
        const std::size_t in = j == branch_address ? c.address_dim : d;
        out.emplace_back(lstm_name(j, "w"), Shape{in + d, 4 * d});
        out.emplace_back(lstm_name(j, "b"), Shape{1, 4 * d});
        out.emplace_back("hz." + std::to_string(j + 1), Shape{d, 1});
    }
    for (Direction dir : {Direction::backward, Direction::forward}) {
        const std::string e = dir_tag(dir);
        // Generated gate weights, flattened row-major from (tx_dim + d)×4d.
        out.emplace_back(e + ".wgen", Shape{2 * d, (c.tx_dim + d) * 4 * d});
        out.emplace_back(e + ".bgen", Shape{2 * d, 4 * d});
        out.emplace_back(e + ".b", Shape{1, 4 * d});
        const std::string g = gcn_tag(dir);
        out.emplace_back(g + ".wg", Shape{2 * d, d * d});
        out.emplace_back(g + ".we", Shape{2 * d, d * c.address_dim});
    }
    for (std::size_t j = 1; j < branch_count; ++j) {
        const std::string a = std::string("att.") + branch_tags[j];
        out.emplace_back(a + ".wpu", Shape{2 * d, d});
        out.emplace_back(a + ".wa", Shape{d / c.heads, c.heads});
    }
    return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed)
{
    config.validate();
    const std::size_t d = config.hidden;
    std::mt19937_64 rng(seed);
    NamedTensors tensors;
    for (const auto& [name, shape] : param_shapes(config)) {
        // Generator tensors produce weights through a 2d context, so their
        // fan-in is the context width times the generated layer's fan-in.
        std::size_t fan_in = shape[0];
        bool lstm_bias = false;
        if (name.ends_with(".wgen") || name.ends_with(".bgen"))
            fan_in = 2 * d * (config.tx_dim + d);
        else if (name.ends_with(".wg"))
            fan_in = 2 * d * d;
        else if (name.ends_with(".we"))
            fan_in = 2 * d * config.address_dim;
        else if (name == "e1.b" || name == "e2.b") {
            fan_in = config.tx_dim + d;
            lstm_bias = true;
        } else if (name.size() == 4 && name[0] == 't' && name.ends_with(".b")) {
            const std::size_t branch = static_cast<std::size_t>(name[1] - '1');
            fan_in = (branch == branch_address ? config.address_dim : d) + d;
            lstm_bias = true;
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> values(shape_size(shape));
        for (auto& v : values)
            v = dist(rng);
        if (lstm_bias)
            for (std::size_t k = d; k < 2 * d; ++k)
                values[k] += 1.0;
        tensors.emplace(name, Tensor::parameter(shape, std::move(values)));
    }
    return ModelParams(config, std::move(tensors));
}

ModelState initial_state(const ModelConfig& config, std::size_t rows)
{
    ModelState s;
    for (auto& l : s.lstm) {
        l.h = Tensor::zeros({rows, config.hidden});
        l.c = Tensor::zeros({rows, config.hidden});
    }
    return s;
}

ModelState stack_states(std::span<const ModelState* const> states)
{
    if (states.empty())
        throw std::invalid_argument("stack_states: no states");
    ModelState out;
    out.t = states.front()->t;
    for (const auto* s : states)
        if (s->t != out.t)
            throw std::invalid_argument("stack_states: states at different timesteps");
    std::vector<Tensor> h, c;
    for (std::size_t j = 0; j < branch_count; ++j) {
        h.clear();
        c.clear();
        for (const auto* s : states) {
            h.push_back(s->lstm[j].h);
            c.push_back(s->lstm[j].c);
        }
        out.lstm[j] = {concat(h, 0), concat(c, 0)};
    }
    return out;
}

ModelState state_row(const ModelState& state, std::size_t row)
{
    ModelState out;
    out.t = state.t;
    for (std::size_t j = 0; j < branch_count; ++j)
        out.lstm[j] = {slice(state.lstm[j].h, 0, row, 1), slice(state.lstm[j].c, 0, row, 1)};
    return out;
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w, const Tensor& b)
{
    const std::size_t n = x.rows();
    const std::size_t d = state.h.cols();
    if (state.h.rows() != n || state.c.rows() != n || w.rows() != x.cols() + d || w.cols() != 4 * d)
        throw ShapeError("lstm_cell: inconsistent shapes");
    Tensor hc = lstm_gates(matmul(concat({x, state.h}, 1), w), b, state.c);
    return {slice(hc, 1, 0, d), slice(hc, 1, d, d)};
}

LstmState encode_address_step(const ModelParams& params, const LstmState& state, const Tensor& address_features)
{
    const auto& c = params.config();
    if (address_features.rank() != 2 || address_features.rows() != state.h.rows() || address_features.cols() != c.address_dim)
        throw ShapeError("encode_address_step: expected one row of " + std::to_string(c.address_dim) + " address features per state row");
    return lstm_cell(address_features, state, params.get("t1.w"), params.get("t1.b"));
}

Tensor evolve_path_encode(const ModelParams& params, Direction direction, const Tensor& context, std::span<const Tensor> nodes)
{
    const auto& c = params.config();
    const std::size_t d = c.hidden;
    if (context.rank() != 2 || context.rows() != 1 || context.cols() != 2 * d)
        throw ShapeError("evolve_path_encode: context must be 1×2d");
    if (nodes.size() != c.uniform_length)
        throw ShapeError("evolve_path_encode: expected " + std::to_string(c.uniform_length) + " path nodes");
    const std::string e = dir_tag(direction);
    Tensor w = reshape(matmul(context, params.get(e + ".wgen")), {c.tx_dim + d, 4 * d});
    Tensor b = add(matmul(context, params.get(e + ".bgen")), params.get(e + ".b"));
    return encode_paths(c, w, b, nodes);
}

Tensor attention_aggregate(const ModelParams& params, std::size_t branch, const Tensor& vectors, const Tensor& h_address)
{
    const auto& c = params.config();
    const std::size_t d = c.hidden;
    if (branch == branch_address || branch >= branch_count)
        throw std::invalid_argument("attention_aggregate: not a path or graph branch");
    if (vectors.rank() != 2 || vectors.cols() != d || vectors.rows() == 0)
        throw ShapeError("attention_aggregate: expected N×d vectors with N >= 1");
    const std::size_t n = vectors.rows();
    const std::string a = std::string("att.") + branch_tags[branch];
    Tensor u = matmul(concat({vectors, n == 1 ? h_address : repeat_rows(h_address, n)}, 1), params.get(a + ".wpu"));
    return attention_pool(u, params.get(a + ".wa"));
}

Tensor evolve_gcn(const ModelParams& params, Direction direction, const Tensor& path_vectors,
    const std::shared_ptr<const std::vector<std::vector<int>>>& cliques, const Tensor& clique_features, const Tensor& context)
{
    const auto& c = params.config();
    const std::size_t d = c.hidden;
    if (context.rank() != 2 || context.rows() != 1 || context.cols() != 2 * d)
        throw ShapeError("evolve_gcn: context must be 1×2d");
    if (path_vectors.rank() != 2 || path_vectors.cols() != d)
        throw ShapeError("evolve_gcn: path vectors must be N×d");
    const std::string g = gcn_tag(direction);
    Tensor proj = reshape(matmul(context, params.get(g + ".wg")), {d, d});
    Tensor projector;
    if (cliques && !cliques->empty())
        projector = reshape(matmul(context, params.get(g + ".we")), {d, c.address_dim});
    return propagate_paths(c, path_vectors, proj, projector, cliques, clique_features);
}

std::array<Tensor, branch_count> hazards(const ModelParams& params, const std::array<Tensor, branch_count>& hidden)
{
    std::array<Tensor, branch_count> out;
    for (std::size_t j = 0; j < branch_count; ++j) {
        if (params.config().branch_active(j))
            out[j] = tanh(matmul(hidden[j], params.get("hz." + std::to_string(j + 1))));
        else
            out[j] = Tensor::zeros({hidden[j].rows(), 1});
    }
    return out;
}

double survival(double cumulative_rate)
{
    return std::exp(-std::max(0.0, cumulative_rate));
}

Tensor survival(const Tensor& cumulative_rate)
{
    return exp(neg(relu(cumulative_rate)));
}

std::array<double, branch_count> BatchStepResult::rates(std::size_t row) const
{
    std::array<double, branch_count> out{};
    for (std::size_t j = 0; j < branch_count; ++j)
        out[j] = lambda[j].values().at(row);
    return out;
}

BatchStepResult step_batch(const ModelParams& params, const ModelState& state, std::span<const StepInput* const> inputs)
{
    const auto& c = params.config();
    const std::size_t d = c.hidden;
    const std::size_t rows = inputs.size();
    if (rows == 0 || state.rows() != rows)
        throw std::invalid_argument("step_batch: state rows must match the number of inputs");
    std::vector<Tensor> parts;
    for (const auto* in : inputs) {
        if (in->t != state.t + 1)
            throw std::invalid_argument("step_address: expected timestep " + std::to_string(state.t + 1) + ", got " +
                std::to_string(in->t));
        if (in->address.rank() != 2 || in->address.rows() != 1 || in->address.cols() != c.address_dim)
            throw ShapeError("encode_address_step: expected 1×" + std::to_string(c.address_dim) + " address features");
        parts.push_back(in->address);
    }
    BatchStepResult r;
    r.state = state;
    r.state.t = state.t + 1;
    r.state.lstm[branch_address] = encode_address_step(params, state.lstm[branch_address], rows == 1 ? parts[0] : concat(parts, 0));
    const Tensor& h1 = r.state.lstm[branch_address].h;

    if (c.use_paths) {
        for (Direction dir : {Direction::backward, Direction::forward}) {
            const bool backward = dir == Direction::backward;
            const std::size_t pb = backward ? branch_backward_path : branch_forward_path;
            const std::size_t gb = pb + 1;
            bool any_paths = false, any_cliques = false;
            for (const auto* in : inputs) {
                const BranchInput& b = backward ? in->backward : in->forward;
                any_paths = any_paths || b.path_count() > 0;
                any_cliques = any_cliques || (b.path_count() > 0 && b.cliques && !b.cliques->empty());
            }
            Tensor gen_w, gen_b, gen_proj, gen_edge, h1_rows;
            if (any_paths) {
                const std::string e = dir_tag(dir);
                Tensor ctx = concat({h1, state.lstm[pb].h}, 1);
                gen_w = matmul(ctx, params.get(e + ".wgen"));
                gen_b = add(matmul(ctx, params.get(e + ".bgen")), rows == 1 ? params.get(e + ".b") : repeat_rows(params.get(e + ".b"), rows));
                if (c.use_graphs) {
                    const std::string g = gcn_tag(dir);
                    Tensor gctx = concat({h1, state.lstm[gb].h}, 1);
                    gen_proj = matmul(gctx, params.get(g + ".wg"));
                    if (any_cliques)
                        gen_edge = matmul(gctx, params.get(g + ".we"));
                }
            }
            std::vector<Tensor> path_rows(rows), graph_rows(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                const BranchInput& in = backward ? inputs[i]->backward : inputs[i]->forward;
                if (in.path_count() == 0) {
                    path_rows[i] = Tensor::zeros({1, d});
                    graph_rows[i] = path_rows[i];
                    continue;
                }
                Tensor h1_i = rows == 1 ? h1 : slice(h1, 0, i, 1);
                Tensor f = encode_paths(c, row_reshape(gen_w, i, {c.tx_dim + d, 4 * d}), slice(gen_b, 0, i, 1), in.nodes);
                path_rows[i] = attention_aggregate(params, pb, f, h1_i);
                if (c.use_graphs) {
                    Tensor projector;
                    if (in.cliques && !in.cliques->empty())
                        projector = row_reshape(gen_edge, i, {d, c.address_dim});
                    Tensor g = propagate_paths(c, f, row_reshape(gen_proj, i, {d, d}), projector, in.cliques, in.clique_features);
                    graph_rows[i] = attention_aggregate(params, gb, g, h1_i);
                }
            }
            const auto stack = [rows](const std::vector<Tensor>& v) { return rows == 1 ? v[0] : concat(v, 0); };
            r.state.lstm[pb] = lstm_cell(stack(path_rows), state.lstm[pb], params.get(lstm_name(pb, "w")), params.get(lstm_name(pb, "b")));
            if (c.use_graphs)
                r.state.lstm[gb] =
                    lstm_cell(stack(graph_rows), state.lstm[gb], params.get(lstm_name(gb, "w")), params.get(lstm_name(gb, "b")));
        }
    }

    std::array<Tensor, branch_count> hidden;
    for (std::size_t j = 0; j < branch_count; ++j)
        hidden[j] = r.state.lstm[j].h;
    r.lambda = hazards(params, hidden);
    r.lambda_total = r.lambda[0];
    for (std::size_t j = 1; j < branch_count; ++j)
        if (c.branch_active(j))
            r.lambda_total = add(r.lambda_total, r.lambda[j]);
    return r;
}

StepResult step_address(const ModelParams& params, const ModelState& state, const StepInput& input)
{
    const StepInput* in = &input;
    BatchStepResult b = step_batch(params, state, std::span<const StepInput* const>(&in, 1));
    return {std::move(b.state), std::move(b.lambda), std::move(b.lambda_total)};
}

} // namespace evopt
