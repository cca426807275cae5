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

#include "svg.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace evopt::tools {

namespace {

constexpr double width = 640, height = 400;
constexpr double left = 60, right = 20, top = 40, bottom = 50;
constexpr std::array<const char*, 6> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

} // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series, double y_min, double y_max)
{
    std::size_t n = 1;
    for (const auto& s : series)
        n = std::max(n, s.y.size());
    const double pw = width - left - right, ph = height - top - bottom;
    const auto px = [&](std::size_t i) { return left + (n == 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(n - 1)); };
    const auto py = [&](double v) { return top + ph * (1.0 - (std::clamp(v, y_min, y_max) - y_min) / (y_max - y_min)); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = y_min + (y_max - y_min) * k / 4.0;
        o << "<line x1=\"" << left << "\" x2=\"" << width - right << "\" y1=\"" << num(py(v)) << "\" y2=\"" << num(py(v))
          << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << left - 6 << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
    const std::size_t step = std::max<std::size_t>(1, n / 12);
    for (std::size_t i = 0; i < n; i += step)
        o << "<text x=\"" << num(px(i)) << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\">" << i + 1 << "</text>\n";
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % colors.size()];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < series[s].y.size(); ++i)
            o << (i ? " " : "") << num(px(i)) << ',' << num(py(series[s].y[i]));
        o << "\"/>\n";
        o << "<text x=\"" << left + 10 << "\" y=\"" << top + 16 + 16 * static_cast<double>(s) << "\" fill=\"" << color << "\">"
          << escape(series[s].name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

} // namespace evopt::tools
