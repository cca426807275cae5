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

#ifndef EVOPT_TOOLS_SVG_HPP
#define EVOPT_TOOLS_SVG_HPP

#include <string>
#include <vector>

namespace evopt::tools {

struct Series {
    std::string name;
    std::vector<double> y;
};

/// Line chart over x = 1..n with a fixed [y_min, y_max] axis.
std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series, double y_min = 0.0,
    double y_max = 1.0);

} // namespace evopt::tools

#endif // EVOPT_TOOLS_SVG_HPP
