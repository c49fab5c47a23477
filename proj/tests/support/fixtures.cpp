#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "lfm/feasibility.hpp"
#include "lfm/network_io.hpp"

#ifndef LFM_DATA_DIR
#error "LFM_DATA_DIR must point at the data/ directory"
#endif

namespace lfm::testing {

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::string data_path(const std::string& rel) { return std::string(LFM_DATA_DIR) + "/" + rel; }

Network demo_network() { return load_network(data_path("five_bus.json")); }

Scenario demo_scenario() { return load_scenario(data_path("scenarios/five_bus_overload.json")); }

NodalState demo_baseline() { return demo_scenario().baseline.begin()->second; }

Network random_network(Rng& rng, const RandomNetworkOptions& opt) {
    const std::size_t n = pick(rng, opt.min_buses, opt.max_buses);
    Network net;
    net.base_mva = opt.base_mva;
    net.slack_bus = 0;
    for (std::size_t k = 0; k < n; ++k) {
        net.buses.push_back(BusSpec{k, opt.u_min, opt.u_max, false, {}});
    }
    std::set<std::pair<std::size_t, std::size_t>> used;
    auto add_line = [&](std::size_t a, std::size_t b) {
        const auto key = std::minmax(a, b);
        if (a == b || !used.insert(key).second) {
            return;
        }
        const auto y = admittance_from_impedance(uniform(rng, opt.r_lo, opt.r_hi), uniform(rng, opt.x_lo, opt.x_hi));
        LineSpec l;
        l.index = net.lines.size();
        l.from_bus = a;
        l.to_bus = b;
        l.g = y.g;
        l.b = y.b;
        l.s_max = opt.s_max;
        net.lines.push_back(l);
    };
    for (std::size_t k = 1; k < n; ++k) {
        add_line(pick(rng, 0, k - 1), k);
    }
    const auto chords = static_cast<std::size_t>(opt.mesh_fraction * static_cast<double>(n - 1));
    for (std::size_t c = 0; c < chords; ++c) {
        add_line(pick(rng, 0, n - 1), pick(rng, 0, n - 1));
    }
    return validate_network(std::move(net));
}

NodalState random_load_shape(Rng& rng, std::size_t n) {
    for (;;) {
        NodalState s = NodalState::zeros(n);
        double total = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            // one bus in five carries net generation
            const double p = uniform(rng, 0.0, 1.0) < 0.2 ? -uniform(rng, 0.1, 0.6) : uniform(rng, 0.2, 1.0);
            s.p_mw[k] = p;
            s.q_mvar[k] = p * uniform(rng, 0.1, 0.4);
            total += p;
        }
        // an exporting feeder scaled up runs to 2 pu voltages and hops between branches
        if (total > 0.0) {
            return s;
        }
    }
}

NodalState scaled(const NodalState& shape, double factor) {
    NodalState s = shape;
    for (auto& v : s.p_mw) {
        v *= factor;
    }
    for (auto& v : s.q_mvar) {
        v *= factor;
    }
    return s;
}

namespace {

bool converges(const Network& net, const NodalState& s) {
    try {
        return solve(net, s).converged;
    } catch (const SingularJacobianError&) {
        return false;
    }
}

}  // namespace

double loadability(const Network& net, const NodalState& shape) {
    double lo = 0.0;
    double hi = 1.0;
    while (converges(net, scaled(shape, hi))) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) {
            return lo;
        }
    }
    while (hi - lo > 0.01 * hi) {
        const double mid = 0.5 * (lo + hi);
        (converges(net, scaled(shape, mid)) ? lo : hi) = mid;
    }
    return lo;
}

LoadedCase random_loaded_case(Rng& rng, double lo, double hi, const RandomNetworkOptions& opt) {
    LoadedCase c;
    c.net = random_network(rng, opt);
    const NodalState shape = random_load_shape(rng, c.net.bus_count());
    c.fraction = uniform(rng, lo, hi);
    c.state = scaled(shape, c.fraction * loadability(c.net, shape));
    return c;
}

NodalState transfer(const NodalState& s, std::size_t buy, std::size_t sell, double q) {
    NodalState out = s;
    out.p_mw[buy] += q;
    out.p_mw[sell] -= q;
    return out;
}

std::vector<double> exact_flows(const Network& net, const NodalState& state) {
    const PowerFlowSolution sol = solve(net, state);
    if (!sol.converged) {
        throw NotConvergedError("oracle solve did not converge");
    }
    std::vector<double> s(sol.s_flow.size());
    for (std::size_t e = 0; e < s.size(); ++e) {
        s[e] = sol.s_flow[e] * net.base_mva;
    }
    return s;
}

FiniteDifference finite_difference(const Network& net, const NodalState& state, double h_mw) {
    const std::size_t n = net.bus_count();
    const std::size_t ends = net.end_count();
    const PowerFlowSolution base = solve(net, state);
    FiniteDifference fd;
    fd.k_up = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    fd.k_sp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ends), static_cast<Eigen::Index>(n));
    fd.s_base.resize(static_cast<Eigen::Index>(ends));
    for (std::size_t e = 0; e < ends; ++e) {
        fd.s_base[static_cast<Eigen::Index>(e)] = base.s_flow[e] * net.base_mva;
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (j == net.slack_bus) {
            continue;
        }
        NodalState up = state;
        NodalState dn = state;
        up.p_mw[j] += h_mw;
        dn.p_mw[j] -= h_mw;
        // warm starts keep both solves on the same branch
        const PowerFlowSolution a = solve(net, up, {}, &base);
        const PowerFlowSolution b = solve(net, dn, {}, &base);
        if (!a.converged || !b.converged) {
            throw NotConvergedError("finite-difference solve did not converge");
        }
        const auto col = static_cast<Eigen::Index>(j);
        for (std::size_t k = 0; k < n; ++k) {
            fd.k_up(static_cast<Eigen::Index>(k), col) = (a.u[k] - b.u[k]) / (2.0 * h_mw);
        }
        for (std::size_t e = 0; e < ends; ++e) {
            fd.k_sp(static_cast<Eigen::Index>(e), col) =
                (a.s_flow[e] - b.s_flow[e]) * net.base_mva / (2.0 * h_mw);
        }
    }
    return fd;
}

double exact_q_upper(const Network& net, const NodalState& state, std::size_t buy, std::size_t sell, double q_hi,
                     double tol) {
    const MarginReport m0 = compute_margins(net, solve(net, state));
    auto feasible = [&](double q) {
        const PowerFlowSolution sol = solve(net, transfer(state, buy, sell, q));
        if (!sol.converged) {
            return false;
        }
        const MarginReport m = compute_margins(net, sol);
        for (std::size_t e = 0; e < m.margin.size(); ++e) {
            if (m0.margin[e] >= 0.0 && m.margin[e] < 0.0) {
                return false;
            }
        }
        for (std::size_t k = 0; k < m.u.size(); ++k) {
            const bool ok0 = m0.headroom_up[k] >= 0.0 && m0.headroom_down[k] >= 0.0;
            if (ok0 && (m.headroom_up[k] < 0.0 || m.headroom_down[k] < 0.0)) {
                return false;
            }
        }
        return true;
    };
    if (feasible(q_hi)) {
        return q_hi;
    }
    double lo = 0.0;
    double hi = q_hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

OverloadCase make_overload_case(Rng& rng, const OverloadOptions& opt) {
    for (;;) {
        LoadedCase c = random_loaded_case(rng, opt.load_lo, opt.load_hi, {.min_buses = 5, .max_buses = 15});
        const std::size_t n = c.net.bus_count();
        const std::size_t m = c.net.line_count();
        const GridData gd = make_grid_data(c.net, c.state, {});
        const std::size_t buy = pick(rng, 1, n - 1);
        const std::size_t sell = pick(rng, 1, n - 1);
        if (buy == sell) {
            continue;
        }
        const DiffSensitivities d = diff_sensitivities(gd, buy, sell);
        const auto& s = gd.margins.s_current;
        std::vector<std::size_t> relieved, loaded;
        for (std::size_t e = 0; e < 2 * m; ++e) {
            if (d.flow[e] < -opt.min_share && s[e] > 0.2) {
                relieved.push_back(e);
            } else if (d.flow[e] > opt.min_share && s[e] > 0.2) {
                loaded.push_back(e);
            }
        }
        if (relieved.empty() || loaded.empty()) {
            continue;
        }
        const std::size_t v = relieved[pick(rng, 0, relieved.size() - 1)];
        const std::size_t b = loaded[pick(rng, 0, loaded.size() - 1)];
        const std::size_t v_line = end_ref(v, m).line;
        const std::size_t b_line = end_ref(b, m).line;
        if (v_line == b_line) {
            continue;
        }
        const double q_low = uniform(rng, opt.relief_lo, opt.relief_hi) * s[v] / -d.flow[v];
        const double q_up = q_low * uniform(rng, opt.band_lo, opt.band_hi);
        for (std::size_t l = 0; l < m; ++l) {
            c.net.lines[l].s_max = std::max(s[l], s[m + l]) + 10.0;
        }
        c.net.lines[v_line].s_max = s[v] + d.flow[v] * q_low;
        c.net.lines[b_line].s_max = s[b] + d.flow[b] * q_up;
        const std::size_t v_other = v < m ? v + m : v - m;
        const std::size_t b_other = b < m ? b + m : b - m;
        if (s[v_other] > c.net.lines[v_line].s_max &&
            (d.flow[v_other] >= 0.0 || (s[v_other] - c.net.lines[v_line].s_max) / -d.flow[v_other] > q_low)) {
            continue;  // the other end would set q_lower_full
        }
        if (s[b_other] >= c.net.lines[b_line].s_max) {
            continue;
        }
        const PowerFlowSolution base = solve(c.net, c.state);
        const PowerFlowSolution at_low = solve(c.net, transfer(c.state, buy, sell, q_low), {}, &base);
        const PowerFlowSolution at_up = solve(c.net, transfer(c.state, buy, sell, q_up), {}, &base);
        if (!at_low.converged || !at_up.converged) {
            continue;
        }
        auto accurate = [&](const PowerFlowSolution& sol, double q, std::size_t e) {
            const double predicted = d.flow[e] * q;
            const double exact = sol.s_flow[e] * c.net.base_mva - s[e];
            return std::abs(exact - predicted) <= opt.max_lin_error * std::abs(predicted);
        };
        if (!accurate(at_low, q_low, v) || !accurate(at_low, q_low, v_other) || !accurate(at_up, q_up, b) ||
            !accurate(at_up, q_up, b_other)) {
            continue;
        }
        return {c.net, c.state, buy, sell, v_line, b_line};
    }
}

}  // namespace lfm::testing
