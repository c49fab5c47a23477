#include "lfm/sensitivity.hpp"

#include <cmath>

#include "branch_terms.hpp"

namespace lfm {

namespace {

constexpr double kMinRcond = 1e-13;

void check_inputs(const Network& net, const PowerFlowSolution& sol, const Jacobian& jac) {
    if (!sol.converged) {
        throw NotConvergedError("sensitivities requested at a non-converged operating point");
    }
    if (jac.bus_count() != net.bus_count() || sol.u.size() != net.bus_count() || jac.slack != net.slack_bus) {
        throw DimensionError("jacobian, solution and network disagree on bus count or slack");
    }
}

/// Columns of the reduced inverse Jacobian belonging to active-power injections,
/// i.e. d[theta; U]/dP_injection for every non-slack bus.
Eigen::MatrixXd active_power_response(const Jacobian& jac) {
    const Eigen::MatrixXd jr = jac.reduced();
    const Eigen::Index nr = jr.rows() / 2;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jr);
    if (!(lu.rcond() > kMinRcond)) {
        throw SingularJacobianError("reduced Jacobian is singular at this operating point");
    }
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(jr.rows(), nr);
    rhs.topRows(nr).setIdentity();
    return lu.solve(rhs);
}

Eigen::MatrixXd voltage_block(const Network& net, const Eigen::MatrixXd& response) {
    const std::size_t n = net.bus_count();
    const std::size_t slack = net.slack_bus;
    const Eigen::Index nr = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd k_up = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t bus = 0; bus < n; ++bus) {
        if (bus == slack) {
            continue;
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (k == slack) {
                continue;
            }
            // Withdrawal is negative injection; pu voltage per MW.
            k_up(static_cast<Eigen::Index>(bus), static_cast<Eigen::Index>(k)) =
                -response(nr + reduced_position(bus, slack), reduced_position(k, slack)) / net.base_mva;
        }
    }
    return k_up;
}

Eigen::MatrixXd flow_block(const Network& net, const FlowJacobian& fj, const Eigen::MatrixXd& response) {
    const std::size_t n = net.bus_count();
    const std::size_t slack = net.slack_bus;
    const Eigen::Index rows = fj.j_s.rows();
    const Eigen::Index nr = static_cast<Eigen::Index>(n - 1);
    if (rows != static_cast<Eigen::Index>(net.end_count()) || fj.j_s.cols() != static_cast<Eigen::Index>(2 * n)) {
        throw DimensionError("flow jacobian does not match network dimensions");
    }

    Eigen::MatrixXd js_reduced(rows, 2 * nr);
    for (std::size_t k = 0; k < n; ++k) {
        if (k == slack) {
            continue;
        }
        const Eigen::Index pos = reduced_position(k, slack);
        js_reduced.col(pos) = fj.j_s.col(static_cast<Eigen::Index>(k));
        js_reduced.col(nr + pos) = fj.j_s.col(static_cast<Eigen::Index>(n + k));
    }
    const Eigen::MatrixXd reduced = -(js_reduced * response);

    // S in pu per P in pu is already MVA per MW.
    Eigen::MatrixXd k_sp = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        if (k == slack) {
            continue;
        }
        k_sp.col(static_cast<Eigen::Index>(k)) = reduced.col(reduced_position(k, slack));
    }
    return k_sp;
}

}  // namespace

FlowJacobian flow_jacobian(const Network& net, const PowerFlowSolution& sol) {
    const std::size_t n = net.bus_count();
    const std::size_t m = net.line_count();
    if (sol.u.size() != n || sol.theta.size() != n) {
        throw DimensionError("solution does not match network dimensions");
    }
    FlowJacobian out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * m), static_cast<Eigen::Index>(2 * n)), {}};
    for (std::size_t row = 0; row < 2 * m; ++row) {
        const auto ref = end_ref(row, m);
        const auto e = detail::end_params(net.lines[ref.line], ref.end);
        const auto f = detail::end_flow(e, sol.u[e.near_bus], sol.u[e.far_bus], sol.theta[e.near_bus],
                                        sol.theta[e.far_bus]);
        const double s = std::sqrt(f.p * f.p + f.q * f.q);
        const Eigen::Index cols[4] = {
            static_cast<Eigen::Index>(e.near_bus), static_cast<Eigen::Index>(e.far_bus),
            static_cast<Eigen::Index>(n + e.near_bus), static_cast<Eigen::Index>(n + e.far_bus)};
        const auto r = static_cast<Eigen::Index>(row);
        if (s < kZeroFlowThreshold) {
            const double sign = f.p < 0.0 ? -1.0 : 1.0;
            for (int k = 0; k < 4; ++k) {
                out.j_s(r, cols[k]) += sign * f.dp[k];
            }
            out.regularized_rows.push_back(row);
            continue;
        }
        for (int k = 0; k < 4; ++k) {
            out.j_s(r, cols[k]) += (f.p * f.dp[k] + f.q * f.dq[k]) / s;
        }
    }
    return out;
}

Eigen::MatrixXd voltage_sensitivities(const Network& net, const PowerFlowSolution& sol, const Jacobian& jac) {
    check_inputs(net, sol, jac);
    return voltage_block(net, active_power_response(jac));
}

Eigen::MatrixXd flow_sensitivities(const Network& net, const PowerFlowSolution& sol, const Jacobian& jac,
                                   const FlowJacobian& j_s) {
    check_inputs(net, sol, jac);
    return flow_block(net, j_s, active_power_response(jac));
}

SensitivityBundle compute_sensitivities(const Network& net, const PowerFlowSolution& sol) {
    const Jacobian jac = jacobian(net, sol);
    check_inputs(net, sol, jac);
    const FlowJacobian fj = flow_jacobian(net, sol);
    const Eigen::MatrixXd response = active_power_response(jac);
    return {voltage_block(net, response), flow_block(net, fj, response), sol.id(), fj.regularized_rows};
}

}  // namespace lfm
