#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfm {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when a network description breaks a structural invariant.
class NetworkError : public Error {
  public:
    using Error::Error;
};

/// Raised when vectors handed to a routine do not match the network size.
class DimensionError : public Error {
  public:
    using Error::Error;
};

inline constexpr std::size_t kNoBus = std::numeric_limits<std::size_t>::max();

struct BusSpec {
    std::size_t index = 0;
    double u_min = 0.95;  // pu
    double u_max = 1.05;  // pu
    bool slack = false;
    long long label = 0;  // index as written in the input file
};

/// Pi-section line. Series admittance g + jb, shunt admittance per end.
struct LineSpec {
    std::size_t index = 0;
    std::size_t from_bus = 0;
    std::size_t to_bus = 0;
    double g = 0.0;
    double b = 0.0;
    double g_shunt_from = 0.0;
    double b_shunt_from = 0.0;
    double g_shunt_to = 0.0;
    double b_shunt_to = 0.0;
    double s_max = 0.0;  // MVA
    long long label = 0;
};

struct Network {
    std::size_t slack_bus = kNoBus;
    double base_mva = 1.0;
    std::vector<BusSpec> buses;
    std::vector<LineSpec> lines;

    [[nodiscard]] std::size_t bus_count() const { return buses.size(); }
    [[nodiscard]] std::size_t line_count() const { return lines.size(); }
    /// Both ends of every line are tracked: rows [0, M) are from-ends, [M, 2M) to-ends.
    [[nodiscard]] std::size_t end_count() const { return 2 * lines.size(); }
};

enum class LineEnd { from, to };

struct LineEndRef {
    std::size_t line = 0;
    LineEnd end = LineEnd::from;

    friend bool operator==(const LineEndRef&, const LineEndRef&) = default;
};

[[nodiscard]] inline std::size_t end_row(LineEndRef ref, std::size_t line_count) {
    return ref.end == LineEnd::from ? ref.line : line_count + ref.line;
}

[[nodiscard]] inline LineEndRef end_ref(std::size_t row, std::size_t line_count) {
    return row < line_count ? LineEndRef{row, LineEnd::from} : LineEndRef{row - line_count, LineEnd::to};
}

[[nodiscard]] const char* to_string(LineEnd end);

/// Net withdrawal per bus, load positive. Slack entries are ignored by the solver.
struct NodalState {
    std::vector<double> p_mw;
    std::vector<double> q_mvar;

    static NodalState zeros(std::size_t bus_count) {
        return {std::vector<double>(bus_count, 0.0), std::vector<double>(bus_count, 0.0)};
    }
};

struct PowerFlowSolution;

/// Remaining thermal margins per line end and voltage headroom per bus.
struct MarginReport {
    std::vector<double> s_max;      // MVA, per line end
    std::vector<double> s_current;  // MVA, per line end
    std::vector<double> margin;     // MVA, s_max - s_current
    std::vector<double> u;          // pu, per bus
    std::vector<double> headroom_up;
    std::vector<double> headroom_down;
    std::vector<std::size_t> violated_lines;  // ascending

    [[nodiscard]] bool end_violated(std::size_t row) const { return margin[row] < 0.0; }
    [[nodiscard]] bool any_violation() const { return !violated_lines.empty(); }
    [[nodiscard]] double min_margin() const;
};

/// Checks structural invariants and renumbers buses and lines densely from zero
/// (ordered by their input labels). Throws NetworkError.
[[nodiscard]] Network validate_network(Network raw);

[[nodiscard]] MarginReport compute_margins(const Network& net, const PowerFlowSolution& sol);

/// Series admittance from series impedance.
struct Admittance {
    double g;
    double b;
};
[[nodiscard]] Admittance admittance_from_impedance(double r, double x);

}  // namespace lfm
