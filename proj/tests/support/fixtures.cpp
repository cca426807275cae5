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

#include "fixtures.hpp"

namespace evopt::testing {

ModelConfig micro_config()
{
    ModelConfig c;
    c.hidden = 4;
    c.heads = 2;
    c.uniform_length = 3;
    c.horizon = 2;
    return c;
}

Tensor random_constant(std::mt19937_64& rng, Shape shape, double scale)
{
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v)
        x = g(rng);
    return Tensor::constant(std::move(shape), std::move(v));
}

namespace {

BranchInput random_branch(const ModelConfig& c, std::mt19937_64& rng, std::size_t paths, bool clique)
{
    BranchInput b;
    if (paths == 0)
        return b;
    for (std::size_t k = 0; k < c.uniform_length; ++k)
        b.nodes.push_back(random_constant(rng, {paths, c.tx_dim}));
    if (clique && paths >= 2) {
        b.cliques = std::make_shared<const std::vector<std::vector<int>>>(std::vector<std::vector<int>>{{0, 1}});
        b.clique_features = random_constant(rng, {1, c.address_dim});
    }
    return b;
}

} // namespace

StepInput random_step_input(const ModelConfig& c, std::size_t t, std::mt19937_64& rng, std::size_t paths, bool clique)
{
    StepInput in;
    in.t = t;
    in.address = random_constant(rng, {1, c.address_dim});
    in.backward = random_branch(c, rng, paths, clique);
    in.forward = random_branch(c, rng, paths, clique);
    return in;
}

Sample random_sample(const ModelConfig& c, std::size_t steps, int label, std::mt19937_64& rng, std::size_t paths)
{
    Sample s;
    s.address = "s" + std::to_string(rng() % 100000);
    s.label = label;
    for (std::size_t t = 1; t <= steps; ++t)
        s.steps.push_back(random_step_input(c, t, rng, paths, true));
    return s;
}

} // namespace evopt::testing
