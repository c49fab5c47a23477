#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lfm/grid_model.hpp"

namespace lfm {

class SingularJacobianError : public Error {
  public:
    using Error::Error;
};

class NotConvergedError : public Error {
  public:
    using Error::Error;
};

struct PowerFlowOptions {
    double tolerance = 1e-8;  // pu, max absolute mismatch
    int max_iterations = 50;
    double slack_voltage = 1.0;  // pu
};

/// Converged (or last-iterate) AC operating point. Flows are per line end in
/// pu, ordered like MarginReport rows.
struct PowerFlowSolution {
    std::vector<double> u;
    std::vector<double> theta;
    std::vector<double> p_flow;
    std::vector<double> q_flow;
    std::vector<double> s_flow;
    double slack_p = 0.0;
    double slack_q = 0.0;
    bool converged = false;
    double mismatch_norm = 0.0;
    int iterations = 0;

    /// Content hash of (u, theta); binds derived data to this operating point.
    [[nodiscard]] std::uint64_t id() const;
};

struct LineFlows {
    std::vector<double> p;
    std::vector<double> q;
    std::vector<double> s;
};

struct BusInjections {
    std::vector<double> p;
    std::vector<double> q;
};

/// d[P; Q]/d[theta; U] of bus injections, full 2N x 2N.
struct Jacobian {
    Eigen::MatrixXd full;
    std::size_t slack = 0;

    [[nodiscard]] std::size_t bus_count() const { return static_cast<std::size_t>(full.rows() / 2); }
    /// Slack rows (P and Q) and columns (theta and U) removed.
    [[nodiscard]] Eigen::MatrixXd reduced() const;
};

/// Position of a non-slack bus in the reduced ordering.
[[nodiscard]] inline Eigen::Index reduced_position(std::size_t bus, std::size_t slack) {
    return static_cast<Eigen::Index>(bus < slack ? bus : bus - 1);
}

[[nodiscard]] Eigen::MatrixXcd admittance_matrix(const Network& net);

[[nodiscard]] BusInjections bus_injections(const Network& net, std::span<const double> u,
                                           std::span<const double> theta);

[[nodiscard]] LineFlows line_flows(const Network& net, std::span<const double> u,
                                   std::span<const double> theta);

[[nodiscard]] Jacobian jacobian_at(const Network& net, std::span<const double> u,
                                   std::span<const double> theta);

/// Throws NotConvergedError for a non-converged solution.
[[nodiscard]] Jacobian jacobian(const Network& net, const PowerFlowSolution& sol);

/// Full Newton-Raphson in polar coordinates. Returns a non-converged result
/// (last iterate) when the iteration limit is hit; throws SingularJacobianError
/// when a Newton step cannot be taken.
[[nodiscard]] PowerFlowSolution solve(const Network& net, const NodalState& state,
                                      const PowerFlowOptions& options = {},
                                      const PowerFlowSolution* warm_start = nullptr);

}  // namespace lfm
