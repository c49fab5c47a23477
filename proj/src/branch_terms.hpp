#pragma once

#include <cmath>

#include "lfm/grid_model.hpp"

namespace lfm::detail {

/// One end of a pi-section: near bus i, far bus j, angle difference theta_i - theta_j.
struct EndParams {
    std::size_t near_bus;
    std::size_t far_bus;
    double g;
    double b;
    double g_shunt;
    double b_shunt;
};

inline EndParams end_params(const LineSpec& line, LineEnd end) {
    if (end == LineEnd::from) {
        return {line.from_bus, line.to_bus, line.g, line.b, line.g_shunt_from, line.b_shunt_from};
    }
    return {line.to_bus, line.from_bus, line.g, line.b, line.g_shunt_to, line.b_shunt_to};
}

/// Flow at one line end and its partials with respect to (theta_i, theta_j, U_i, U_j).
struct EndFlow {
    double p;
    double q;
    double dp[4];
    double dq[4];
};

inline EndFlow end_flow(const EndParams& e, double ui, double uj, double ti, double tj) {
    const double t = ti - tj;
    const double c = std::cos(t);
    const double s = std::sin(t);
    const double gc_bs = e.g * c + e.b * s;
    const double gs_bc = e.g * s - e.b * c;

    EndFlow f{};
    f.p = ui * ui * (e.g + e.g_shunt) - ui * uj * gc_bs;
    f.q = -ui * ui * (e.b + e.b_shunt) - ui * uj * gs_bc;

    f.dp[0] = ui * uj * gs_bc;
    f.dp[1] = -f.dp[0];
    f.dp[2] = 2.0 * ui * (e.g + e.g_shunt) - uj * gc_bs;
    f.dp[3] = -ui * gc_bs;

    f.dq[0] = -ui * uj * gc_bs;
    f.dq[1] = -f.dq[0];
    f.dq[2] = -2.0 * ui * (e.b + e.b_shunt) - uj * gs_bc;
    f.dq[3] = -ui * gs_bc;
    return f;
}

}  // namespace lfm::detail
