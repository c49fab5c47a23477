#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfm/grid_model.hpp"
#include "lfm/order.hpp"
#include "lfm/sensitivity.hpp"

namespace lfm {

/// What the DSO hands the market operator for one MTU: sensitivities,
/// remaining line margins and bus voltage headrooms, all at one operating point.
struct GridData {
    SensitivityBundle bundle;
    MarginReport margins;
    MtuId mtu;
    std::uint64_t snapshot_id = 0;
};

class StaleSnapshotError : public Error {
  public:
    using Error::Error;
};

/// A line end or a bus.
struct Constraint {
    enum class Kind { line_end, bus };
    Kind kind = Kind::line_end;
    std::size_t index = 0;
    LineEnd end = LineEnd::from;

    friend bool operator==(const Constraint&, const Constraint&) = default;
};

[[nodiscard]] std::string to_string(const Constraint& c);

enum class BoundRule {
    thermal,           // non-violated line end
    thermal_violated,  // violated line end: full-resolution quantity
    voltage,
};

[[nodiscard]] const char* to_string(BoundRule rule);

struct BoundCandidate {
    Constraint source;
    BoundRule rule = BoundRule::thermal;
    double coefficient = 0.0;  // the k_diff entry
    std::optional<double> lower;
    std::optional<double> upper;
};

enum class Verdict {
    no_violation,        // nothing to fix: the market does not trade
    reject_not_helpful,  // some violated end would not be relieved, or no headroom
    clearable,
};

[[nodiscard]] const char* to_string(Verdict v);

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();
inline constexpr double kZeroSensitivity = 1e-12;

struct DiffSensitivities {
    std::vector<double> flow;  // per line end, MVA per MW traded
    std::vector<double> volt;  // per bus, pu per MW traded
};

struct PairAssessment {
    std::vector<double> k_diff_flow;
    std::vector<double> k_diff_volt;
    double q_lower_full = 0.0;     // MW to clear every violation
    double q_upper = kUnbounded;   // MW before any limit is newly hit
    Verdict verdict = Verdict::no_violation;
    std::optional<Constraint> binding_constraint;  // source of q_upper
    std::optional<Constraint> blocking_constraint;  // violated end that is not relieved
    std::vector<BoundCandidate> bounds;
    double q_clear = 0.0;  // set by assess_pair

    [[nodiscard]] bool trades() const { return verdict == Verdict::clearable && q_clear > 0.0; }
    [[nodiscard]] bool fully_resolves() const { return q_clear >= q_lower_full - 1e-9; }
};

/// Column of the buy bus minus column of the sell bus, for both matrices.
[[nodiscard]] DiffSensitivities diff_sensitivities(const GridData& gd, std::size_t buy_bus, std::size_t sell_bus);

/// Feasible traded-quantity band for a given pair of sensitivity differences.
[[nodiscard]] PairAssessment quantity_range(const GridData& gd, std::span<const double> k_diff_flow,
                                            std::span<const double> k_diff_volt);

/// Full network check of one buy/sell pair. q_clear is the smallest of both
/// remaining quantities and q_upper. `latest_snapshot`, when given, must not be
/// newer than gd.snapshot_id.
[[nodiscard]] PairAssessment assess_pair(const GridData& gd, const Order& buy, const Order& sell,
                                         std::optional<std::uint64_t> latest_snapshot = std::nullopt);

}  // namespace lfm
