#include "lfm/powerflow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <string>

#include "branch_terms.hpp"

namespace lfm {

namespace {

constexpr double kMinRcond = 1e-13;

void check_bus_vectors(const Network& net, std::span<const double> u, std::span<const double> theta) {
    if (u.size() != net.bus_count() || theta.size() != net.bus_count()) {
        throw DimensionError("voltage vectors must have one entry per bus");
    }
}

std::uint64_t fnv1a(std::uint64_t hash, double value) {
    auto bits = std::bit_cast<std::uint64_t>(value);
    for (int k = 0; k < 8; ++k) {
        hash ^= (bits >> (8 * k)) & 0xffU;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace

std::uint64_t PowerFlowSolution::id() const {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (double v : u) {
        hash = fnv1a(hash, v);
    }
    for (double v : theta) {
        hash = fnv1a(hash, v);
    }
    return hash;
}

Eigen::MatrixXd Jacobian::reduced() const {
    const auto n = static_cast<Eigen::Index>(bus_count());
    const auto s = static_cast<Eigen::Index>(slack);
    Eigen::MatrixXd out(2 * (n - 1), 2 * (n - 1));
    auto map = [&](Eigen::Index full_index) {
        const Eigen::Index block = full_index / n;
        const Eigen::Index bus = full_index % n;
        return block * (n - 1) + (bus < s ? bus : bus - 1);
    };
    for (Eigen::Index r = 0; r < 2 * n; ++r) {
        if (r % n == s) {
            continue;
        }
        for (Eigen::Index c = 0; c < 2 * n; ++c) {
            if (c % n == s) {
                continue;
            }
            out(map(r), map(c)) = full(r, c);
        }
    }
    return out;
}

Eigen::MatrixXcd admittance_matrix(const Network& net) {
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& line : net.lines) {
        const std::complex<double> series(line.g, line.b);
        const auto i = static_cast<Eigen::Index>(line.from_bus);
        const auto j = static_cast<Eigen::Index>(line.to_bus);
        y(i, i) += series + std::complex<double>(line.g_shunt_from, line.b_shunt_from);
        y(j, j) += series + std::complex<double>(line.g_shunt_to, line.b_shunt_to);
        y(i, j) -= series;
        y(j, i) -= series;
    }
    return y;
}

BusInjections bus_injections(const Network& net, std::span<const double> u, std::span<const double> theta) {
    check_bus_vectors(net, u, theta);
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    const Eigen::MatrixXcd y = admittance_matrix(net);
    Eigen::VectorXcd v(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        v(k) = std::polar(u[static_cast<std::size_t>(k)], theta[static_cast<std::size_t>(k)]);
    }
    const Eigen::VectorXcd current = y * v;
    BusInjections inj{std::vector<double>(net.bus_count()), std::vector<double>(net.bus_count())};
    for (Eigen::Index k = 0; k < n; ++k) {
        const std::complex<double> s = v(k) * std::conj(current(k));
        inj.p[static_cast<std::size_t>(k)] = s.real();
        inj.q[static_cast<std::size_t>(k)] = s.imag();
    }
    return inj;
}

LineFlows line_flows(const Network& net, std::span<const double> u, std::span<const double> theta) {
    check_bus_vectors(net, u, theta);
    const std::size_t m = net.line_count();
    LineFlows flows{std::vector<double>(2 * m), std::vector<double>(2 * m), std::vector<double>(2 * m)};
    for (std::size_t row = 0; row < 2 * m; ++row) {
        const auto ref = end_ref(row, m);
        const auto e = detail::end_params(net.lines[ref.line], ref.end);
        const auto f = detail::end_flow(e, u[e.near_bus], u[e.far_bus], theta[e.near_bus], theta[e.far_bus]);
        flows.p[row] = f.p;
        flows.q[row] = f.q;
        flows.s[row] = std::sqrt(f.p * f.p + f.q * f.q);
    }
    return flows;
}

Jacobian jacobian_at(const Network& net, std::span<const double> u, std::span<const double> theta) {
    check_bus_vectors(net, u, theta);
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    const Eigen::MatrixXcd y = admittance_matrix(net);
    const BusInjections inj = bus_injections(net, u, theta);

    Jacobian jac{Eigen::MatrixXd::Zero(2 * n, 2 * n), net.slack_bus};
    auto& j = jac.full;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const double ui = u[si];
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == i) {
                continue;
            }
            const auto sk = static_cast<std::size_t>(k);
            const double g = y(i, k).real();
            const double b = y(i, k).imag();
            if (g == 0.0 && b == 0.0) {
                continue;
            }
            const double t = theta[si] - theta[sk];
            const double gc_bs = g * std::cos(t) + b * std::sin(t);
            const double gs_bc = g * std::sin(t) - b * std::cos(t);
            j(i, k) = ui * u[sk] * gs_bc;
            j(i, n + k) = ui * gc_bs;
            j(n + i, k) = -ui * u[sk] * gc_bs;
            j(n + i, n + k) = ui * gs_bc;
        }
        const double gii = y(i, i).real();
        const double bii = y(i, i).imag();
        j(i, i) = -inj.q[si] - bii * ui * ui;
        j(i, n + i) = inj.p[si] / ui + gii * ui;
        j(n + i, i) = inj.p[si] - gii * ui * ui;
        j(n + i, n + i) = inj.q[si] / ui - bii * ui;
    }
    return jac;
}

Jacobian jacobian(const Network& net, const PowerFlowSolution& sol) {
    if (!sol.converged) {
        throw NotConvergedError("jacobian requested at a non-converged operating point");
    }
    return jacobian_at(net, sol.u, sol.theta);
}

PowerFlowSolution solve(const Network& net, const NodalState& state, const PowerFlowOptions& options,
                        const PowerFlowSolution* warm_start) {
    const std::size_t n = net.bus_count();
    const std::size_t slack = net.slack_bus;
    if (state.p_mw.size() != n || state.q_mvar.size() != n) {
        throw DimensionError("nodal state must have one entry per bus");
    }
    if (slack >= n) {
        throw NetworkError("network has no valid slack bus; validate it first");
    }

    PowerFlowSolution sol;
    if (warm_start != nullptr && warm_start->u.size() == n && warm_start->theta.size() == n) {
        sol.u = warm_start->u;
        sol.theta = warm_start->theta;
    } else {
        sol.u.assign(n, 1.0);
        sol.theta.assign(n, 0.0);
    }
    sol.u[slack] = options.slack_voltage;
    sol.theta[slack] = 0.0;

    std::vector<double> p_spec(n);
    std::vector<double> q_spec(n);
    for (std::size_t k = 0; k < n; ++k) {
        p_spec[k] = -state.p_mw[k] / net.base_mva;
        q_spec[k] = -state.q_mvar[k] / net.base_mva;
    }

    const auto nr = static_cast<Eigen::Index>(n - 1);
    Eigen::VectorXd mismatch(2 * nr);
    int iter = 0;
    for (;; ++iter) {
        const BusInjections inj = bus_injections(net, sol.u, sol.theta);
        for (std::size_t k = 0; k < n; ++k) {
            if (k == slack) {
                continue;
            }
            const Eigen::Index pos = reduced_position(k, slack);
            mismatch(pos) = p_spec[k] - inj.p[k];
            mismatch(nr + pos) = q_spec[k] - inj.q[k];
        }
        sol.mismatch_norm = nr > 0 ? mismatch.cwiseAbs().maxCoeff() : 0.0;
        if (!std::isfinite(sol.mismatch_norm)) {
            sol.converged = false;
            break;
        }
        if (sol.mismatch_norm <= options.tolerance) {
            sol.converged = true;
            break;
        }
        if (iter >= options.max_iterations) {
            sol.converged = false;
            break;
        }
        const Eigen::MatrixXd jr = jacobian_at(net, sol.u, sol.theta).reduced();
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jr);
        if (!(lu.rcond() > kMinRcond)) {
            throw SingularJacobianError("singular Jacobian at Newton iteration " + std::to_string(iter));
        }
        const Eigen::VectorXd step = lu.solve(mismatch);
        for (std::size_t k = 0; k < n; ++k) {
            if (k == slack) {
                continue;
            }
            const Eigen::Index pos = reduced_position(k, slack);
            sol.theta[k] += step(pos);
            sol.u[k] += step(nr + pos);
        }
    }
    sol.iterations = iter;

    LineFlows flows = line_flows(net, sol.u, sol.theta);
    sol.p_flow = std::move(flows.p);
    sol.q_flow = std::move(flows.q);
    sol.s_flow = std::move(flows.s);
    const BusInjections inj = bus_injections(net, sol.u, sol.theta);
    sol.slack_p = inj.p[slack];
    sol.slack_q = inj.q[slack];
    return sol;
}

}  // namespace lfm
