#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lfm/grid_model.hpp"
#include "lfm/powerflow.hpp"

namespace lfm {

/// Sensitivities of bus voltages and line-end apparent flows to one extra MW
/// of WITHDRAWAL (load) at each bus, valid around a single operating point.
///
/// k_up is N x N in pu per MW; k_sp is 2M x N in MVA per MW with rows ordered
/// like MarginReport (from-ends, then to-ends). The slack column of both and
/// the slack row of k_up are zero: the slack absorbs any change.
struct SensitivityBundle {
    Eigen::MatrixXd k_up;
    Eigen::MatrixXd k_sp;
    std::uint64_t operating_point_id = 0;
    std::vector<std::size_t> regularized_rows;
};

/// dS/d[theta; U] for every line end (2M x 2N, at most four non-zeros per row).
struct FlowJacobian {
    Eigen::MatrixXd j_s;
    /// Rows whose apparent flow was below the zero-flow threshold and were
    /// replaced by the signed active-power partials.
    std::vector<std::size_t> regularized_rows;
};

inline constexpr double kZeroFlowThreshold = 1e-9;  // pu

[[nodiscard]] FlowJacobian flow_jacobian(const Network& net, const PowerFlowSolution& sol);

[[nodiscard]] Eigen::MatrixXd voltage_sensitivities(const Network& net, const PowerFlowSolution& sol,
                                                    const Jacobian& jac);

[[nodiscard]] Eigen::MatrixXd flow_sensitivities(const Network& net, const PowerFlowSolution& sol,
                                                 const Jacobian& jac, const FlowJacobian& j_s);

/// One factorization of the reduced Jacobian shared by both matrices.
[[nodiscard]] SensitivityBundle compute_sensitivities(const Network& net, const PowerFlowSolution& sol);

}  // namespace lfm
