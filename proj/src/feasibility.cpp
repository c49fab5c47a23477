#include "lfm/feasibility.hpp"

#include <algorithm>
#include <cmath>

namespace lfm {

std::string to_string(const Constraint& c) {
    if (c.kind == Constraint::Kind::bus) {
        return "bus " + std::to_string(c.index);
    }
    return "line " + std::to_string(c.index) + " " + to_string(c.end);
}

const char* to_string(BoundRule rule) {
    switch (rule) {
        case BoundRule::thermal:
            return "thermal";
        case BoundRule::thermal_violated:
            return "thermal_violated";
        case BoundRule::voltage:
            return "voltage";
    }
    return "?";
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::no_violation:
            return "NO_VIOLATION";
        case Verdict::reject_not_helpful:
            return "REJECT_NOT_HELPFUL";
        case Verdict::clearable:
            return "CLEARABLE";
    }
    return "?";
}

DiffSensitivities diff_sensitivities(const GridData& gd, std::size_t buy_bus, std::size_t sell_bus) {
    const auto& k_sp = gd.bundle.k_sp;
    const auto& k_up = gd.bundle.k_up;
    const auto n = static_cast<std::size_t>(k_up.cols());
    if (buy_bus >= n || sell_bus >= n || static_cast<std::size_t>(k_sp.cols()) != n) {
        throw DimensionError("bus index out of range for the sensitivity bundle");
    }
    const auto b = static_cast<Eigen::Index>(buy_bus);
    const auto s = static_cast<Eigen::Index>(sell_bus);
    DiffSensitivities d;
    d.flow.resize(static_cast<std::size_t>(k_sp.rows()));
    d.volt.resize(static_cast<std::size_t>(k_up.rows()));
    for (Eigen::Index r = 0; r < k_sp.rows(); ++r) {
        d.flow[static_cast<std::size_t>(r)] = k_sp(r, b) - k_sp(r, s);
    }
    for (Eigen::Index r = 0; r < k_up.rows(); ++r) {
        d.volt[static_cast<std::size_t>(r)] = k_up(r, b) - k_up(r, s);
    }
    return d;
}

PairAssessment quantity_range(const GridData& gd, std::span<const double> k_diff_flow,
                              std::span<const double> k_diff_volt) {
    const auto& mr = gd.margins;
    const std::size_t ends = mr.margin.size();
    const std::size_t buses = mr.u.size();
    if (k_diff_flow.size() != ends || k_diff_volt.size() != buses || mr.headroom_up.size() != buses ||
        mr.headroom_down.size() != buses) {
        throw DimensionError("sensitivity differences do not match the grid data");
    }
    const auto all_finite = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!all_finite(k_diff_flow) || !all_finite(k_diff_volt)) {
        throw Error("non-finite sensitivity difference");
    }

    PairAssessment out;
    out.k_diff_flow.assign(k_diff_flow.begin(), k_diff_flow.end());
    out.k_diff_volt.assign(k_diff_volt.begin(), k_diff_volt.end());
    out.bounds.reserve(ends + buses);
    const std::size_t m = ends / 2;

    auto offer_upper = [&](double bound, const Constraint& source) {
        if (bound < out.q_upper) {
            out.q_upper = bound;
            out.binding_constraint = source;
        }
    };

    for (std::size_t row = 0; row < ends; ++row) {
        const auto ref = end_ref(row, m);
        BoundCandidate cand{{Constraint::Kind::line_end, ref.line, ref.end}, BoundRule::thermal, k_diff_flow[row],
                            std::nullopt, std::nullopt};
        const double k = k_diff_flow[row];
        const double margin = mr.margin[row];
        if (mr.end_violated(row)) {
            cand.rule = BoundRule::thermal_violated;
            if (k < -kZeroSensitivity) {
                cand.lower = margin / k;
                out.q_lower_full = std::max(out.q_lower_full, *cand.lower);
            } else if (!out.blocking_constraint) {
                out.blocking_constraint = cand.source;
            }
        } else if (k > kZeroSensitivity) {
            cand.upper = margin / k;
            offer_upper(*cand.upper, cand.source);
        } else if (k < -kZeroSensitivity) {
            cand.lower = margin / k;
        }
        out.bounds.push_back(cand);
    }

    for (std::size_t bus = 0; bus < buses; ++bus) {
        BoundCandidate cand{{Constraint::Kind::bus, bus, LineEnd::from}, BoundRule::voltage, k_diff_volt[bus],
                            std::nullopt, std::nullopt};
        const double k = k_diff_volt[bus];
        if (k > kZeroSensitivity) {
            cand.upper = mr.headroom_up[bus] / k;
            cand.lower = -mr.headroom_down[bus] / k;
        } else if (k < -kZeroSensitivity) {
            cand.upper = mr.headroom_down[bus] / -k;
            cand.lower = mr.headroom_up[bus] / k;
        }
        if (cand.upper) {
            offer_upper(*cand.upper, cand.source);
        }
        out.bounds.push_back(cand);
    }

    if (!mr.any_violation()) {
        out.verdict = Verdict::no_violation;
    } else if (out.blocking_constraint || !(out.q_upper > 0.0)) {
        out.verdict = Verdict::reject_not_helpful;
    } else {
        out.verdict = Verdict::clearable;
    }
    return out;
}

PairAssessment assess_pair(const GridData& gd, const Order& buy, const Order& sell,
                           std::optional<std::uint64_t> latest_snapshot) {
    if (buy.direction != Direction::buy || sell.direction != Direction::sell) {
        throw Error("assess_pair expects a buy order and a sell order");
    }
    if (buy.mtu != sell.mtu || buy.mtu != gd.mtu) {
        throw Error("orders and grid data refer to different MTUs");
    }
    if (latest_snapshot && *latest_snapshot > gd.snapshot_id) {
        throw StaleSnapshotError("grid data snapshot " + std::to_string(gd.snapshot_id) +
                                 " is older than the latest snapshot " + std::to_string(*latest_snapshot));
    }
    const DiffSensitivities d = diff_sensitivities(gd, buy.node, sell.node);
    PairAssessment out = quantity_range(gd, d.flow, d.volt);
    if (out.verdict == Verdict::clearable) {
        out.q_clear = std::max(0.0, std::min({buy.remaining, sell.remaining, out.q_upper}));
    }
    return out;
}

}  // namespace lfm
