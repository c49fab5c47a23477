#include "lfm/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "lfm/powerflow.hpp"

namespace lfm {

namespace {

bool finite(double v) { return std::isfinite(v); }

std::string bus_label(long long label) { return "bus " + std::to_string(label); }
std::string line_label(long long label) { return "line " + std::to_string(label); }

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

const char* to_string(LineEnd end) { return end == LineEnd::from ? "from" : "to"; }

double MarginReport::min_margin() const {
    return margin.empty() ? 0.0 : *std::min_element(margin.begin(), margin.end());
}

Admittance admittance_from_impedance(double r, double x) {
    const double den = r * r + x * x;
    if (!(den > 0.0) || !finite(den)) {
        throw NetworkError("line impedance must be non-zero and finite");
    }
    return {r / den, -x / den};
}

Network validate_network(Network raw) {
    if (raw.buses.size() < 2) {
        throw NetworkError("network needs at least 2 buses");
    }
    if (raw.lines.empty()) {
        throw NetworkError("network needs at least 1 line");
    }
    if (!(raw.base_mva > 0.0) || !finite(raw.base_mva)) {
        throw NetworkError("base_mva must be positive");
    }

    std::sort(raw.buses.begin(), raw.buses.end(),
              [](const BusSpec& a, const BusSpec& b) { return a.index < b.index; });
    std::sort(raw.lines.begin(), raw.lines.end(),
              [](const LineSpec& a, const LineSpec& b) { return a.index < b.index; });

    std::map<std::size_t, std::size_t> dense_bus;
    for (std::size_t k = 0; k < raw.buses.size(); ++k) {
        auto& bus = raw.buses[k];
        const auto label = static_cast<long long>(bus.index);
        if (!dense_bus.emplace(bus.index, k).second) {
            throw NetworkError("duplicate " + bus_label(label));
        }
        if (!finite(bus.u_min) || !finite(bus.u_max) || !(bus.u_min > 0.0) || !(bus.u_min < bus.u_max)) {
            throw NetworkError(bus_label(label) + ": voltage limits must satisfy 0 < u_min < u_max");
        }
    }

    std::vector<std::size_t> slack_candidates;
    for (std::size_t k = 0; k < raw.buses.size(); ++k) {
        if (raw.buses[k].slack) {
            slack_candidates.push_back(k);
        }
    }
    if (raw.slack_bus != kNoBus) {
        auto it = dense_bus.find(raw.slack_bus);
        if (it == dense_bus.end()) {
            throw NetworkError("slack bus " + std::to_string(raw.slack_bus) + " does not exist");
        }
        if (std::find(slack_candidates.begin(), slack_candidates.end(), it->second) == slack_candidates.end()) {
            slack_candidates.push_back(it->second);
        }
    }
    if (slack_candidates.empty()) {
        throw NetworkError("missing slack bus");
    }
    if (slack_candidates.size() > 1) {
        throw NetworkError("more than one slack bus declared");
    }

    Network net;
    net.base_mva = raw.base_mva;
    net.slack_bus = slack_candidates.front();
    net.buses.reserve(raw.buses.size());
    for (std::size_t k = 0; k < raw.buses.size(); ++k) {
        BusSpec bus = raw.buses[k];
        bus.label = static_cast<long long>(bus.index);
        bus.index = k;
        bus.slack = (k == net.slack_bus);
        net.buses.push_back(bus);
    }

    std::map<std::size_t, bool> seen_line;
    net.lines.reserve(raw.lines.size());
    for (std::size_t m = 0; m < raw.lines.size(); ++m) {
        LineSpec line = raw.lines[m];
        const auto label = static_cast<long long>(line.index);
        if (!seen_line.emplace(line.index, true).second) {
            throw NetworkError("duplicate " + line_label(label));
        }
        auto from = dense_bus.find(line.from_bus);
        auto to = dense_bus.find(line.to_bus);
        if (from == dense_bus.end() || to == dense_bus.end()) {
            throw NetworkError(line_label(label) + ": endpoint is not a known bus");
        }
        if (from->second == to->second) {
            throw NetworkError(line_label(label) + ": self-loop");
        }
        if (!(line.s_max > 0.0) || !finite(line.s_max)) {
            throw NetworkError(line_label(label) + ": s_max must be positive");
        }
        if (!(line.g >= 0.0) || !finite(line.g) || !finite(line.b)) {
            throw NetworkError(line_label(label) + ": series conductance must be non-negative and finite");
        }
        if (line.g == 0.0 && line.b == 0.0) {
            throw NetworkError(line_label(label) + ": zero series admittance");
        }
        for (double v : {line.g_shunt_from, line.b_shunt_from, line.g_shunt_to, line.b_shunt_to}) {
            if (!finite(v)) {
                throw NetworkError(line_label(label) + ": shunt admittance must be finite");
            }
        }
        line.label = label;
        line.index = m;
        line.from_bus = from->second;
        line.to_bus = to->second;
        net.lines.push_back(line);
    }

    std::vector<std::size_t> parent(net.buses.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    for (const auto& line : net.lines) {
        parent[find_root(parent, line.from_bus)] = find_root(parent, line.to_bus);
    }
    const std::size_t root = find_root(parent, 0);
    for (std::size_t k = 1; k < parent.size(); ++k) {
        if (find_root(parent, k) != root) {
            throw NetworkError("network is not connected: " + bus_label(net.buses[k].label) +
                               " is unreachable from " + bus_label(net.buses[0].label));
        }
    }
    return net;
}

MarginReport compute_margins(const Network& net, const PowerFlowSolution& sol) {
    const std::size_t n = net.bus_count();
    const std::size_t m = net.line_count();
    if (sol.u.size() != n || sol.s_flow.size() != 2 * m) {
        throw DimensionError("power flow solution does not match network dimensions");
    }
    MarginReport report;
    report.s_max.resize(2 * m);
    report.s_current.resize(2 * m);
    report.margin.resize(2 * m);
    for (std::size_t row = 0; row < 2 * m; ++row) {
        const auto& line = net.lines[end_ref(row, m).line];
        report.s_max[row] = line.s_max;
        report.s_current[row] = sol.s_flow[row] * net.base_mva;
        report.margin[row] = report.s_max[row] - report.s_current[row];
    }
    for (std::size_t line = 0; line < m; ++line) {
        if (report.margin[line] < 0.0 || report.margin[m + line] < 0.0) {
            report.violated_lines.push_back(line);
        }
    }
    report.u = sol.u;
    report.headroom_up.resize(n);
    report.headroom_down.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        report.headroom_up[k] = net.buses[k].u_max - sol.u[k];
        report.headroom_down[k] = sol.u[k] - net.buses[k].u_min;
    }
    return report;
}

}  // namespace lfm
