#include "lfm/dso.hpp"

namespace lfm {

namespace {

/// Warm start first, flat start as a fallback.
PowerFlowSolution solve_with_fallback(const Network& net, const NodalState& state, const PowerFlowOptions& options,
                                      const PowerFlowSolution* previous) {
    if (previous != nullptr && previous->converged) {
        try {
            PowerFlowSolution warm = solve(net, state, options, previous);
            if (warm.converged) {
                return warm;
            }
        } catch (const SingularJacobianError&) {
        }
    }
    return solve(net, state, options);
}

}  // namespace

GridData make_grid_data(const Network& net, const NodalState& state, const PowerFlowOptions& options, MtuId mtu,
                        std::uint64_t snapshot_id) {
    const PowerFlowSolution sol = solve(net, state, options);
    if (!sol.converged) {
        throw NotConvergedError("power flow did not converge (mismatch " + std::to_string(sol.mismatch_norm) +
                                " pu after " + std::to_string(sol.iterations) + " iterations)");
    }
    return {compute_sensitivities(net, sol), compute_margins(net, sol), mtu, snapshot_id};
}

DsoGridService::DsoGridService(Network net, PowerFlowOptions options) : net_(std::move(net)), options_(options) {}

GridData DsoGridService::publish(MtuId mtu, NodalState withdrawal, const std::string& cause) {
    auto it = mtus_.find(mtu);
    const PowerFlowSolution* previous = it == mtus_.end() ? nullptr : &it->second.solution;

    PowerFlowSolution sol;
    try {
        sol = solve_with_fallback(net_, withdrawal, options_, previous);
    } catch (const Error& e) {
        throw GridServiceError("MTU " + std::to_string(mtu.value) + ": " + e.what());
    }
    if (!sol.converged) {
        throw GridServiceError("MTU " + std::to_string(mtu.value) + ": power flow did not converge (mismatch " +
                               std::to_string(sol.mismatch_norm) + " pu)");
    }

    GridData data;
    try {
        data = GridData{compute_sensitivities(net_, sol), compute_margins(net_, sol), mtu, next_snapshot_++};
    } catch (const Error& e) {
        throw GridServiceError("MTU " + std::to_string(mtu.value) + ": " + e.what());
    }

    snapshots_.push_back({data.snapshot_id, mtu, clock_, cause, withdrawal, sol, data.margins});
    MtuState& st = mtus_[mtu];
    st.withdrawal = std::move(withdrawal);
    st.solution = std::move(sol);
    st.data = data;
    st.snapshot_index = snapshots_.size() - 1;
    return data;
}

GridData DsoGridService::forecast(MtuId mtu, NodalState withdrawal, const std::string& cause) {
    if (withdrawal.p_mw.size() != net_.bus_count() || withdrawal.q_mvar.size() != net_.bus_count()) {
        throw DimensionError("forecast does not match the bus count");
    }
    return publish(mtu, std::move(withdrawal), cause);
}

GridData DsoGridService::grid_data(MtuId mtu) {
    auto it = mtus_.find(mtu);
    if (it == mtus_.end()) {
        throw GridServiceError("no forecast for MTU " + std::to_string(mtu.value));
    }
    return it->second.data;
}

GridData DsoGridService::apply_schedule_change(const NodalDelta& delta) {
    auto it = mtus_.find(delta.mtu);
    if (it == mtus_.end()) {
        throw GridServiceError("no forecast for MTU " + std::to_string(delta.mtu.value));
    }
    NodalState next = it->second.withdrawal;
    for (const auto& [bus, mw] : delta.withdrawal_mw) {
        if (bus >= next.p_mw.size()) {
            throw GridServiceError("schedule change refers to bus " + std::to_string(bus));
        }
        next.p_mw[bus] += mw;
    }
    return publish(delta.mtu, std::move(next), "trade");
}

const GridSnapshot& DsoGridService::latest(MtuId mtu) const {
    auto it = mtus_.find(mtu);
    if (it == mtus_.end()) {
        throw Error("no forecast for MTU " + std::to_string(mtu.value));
    }
    return snapshots_[it->second.snapshot_index];
}

}  // namespace lfm
