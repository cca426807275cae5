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

#ifndef EVOPT_TESTS_FIXTURES_HPP
#define EVOPT_TESTS_FIXTURES_HPP

#include <random>

#include "evopt/dataset.hpp"
#include "evopt/model.hpp"

namespace evopt::testing {

/// d = 4, two heads, uniform length 3.
ModelConfig micro_config();

Tensor random_constant(std::mt19937_64& rng, Shape shape, double scale = 1.0);

/// Step input with `paths` random paths per direction; when `clique` is
/// set the first two paths of each direction share a terminal.
StepInput random_step_input(const ModelConfig& config, std::size_t t, std::mt19937_64& rng, std::size_t paths, bool clique);

/// Labeled sample of `steps` random step inputs.
Sample random_sample(const ModelConfig& config, std::size_t steps, int label, std::mt19937_64& rng, std::size_t paths = 2);

} // namespace evopt::testing

#endif // EVOPT_TESTS_FIXTURES_HPP
