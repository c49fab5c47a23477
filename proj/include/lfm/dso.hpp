#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lfm/feasibility.hpp"
#include "lfm/market.hpp"
#include "lfm/powerflow.hpp"

namespace lfm {

/// Grid state recorded every time the DSO re-runs the power flow.
struct GridSnapshot {
    std::uint64_t id = 0;
    MtuId mtu;
    Tick tick = 0;
    std::string cause;
    NodalState withdrawal;
    PowerFlowSolution solution;
    MarginReport margins;
};

/// DSO side of the market: owns the physical withdrawal per MTU, runs the
/// power flow, derives sensitivities and margins, and versions the result.
class DsoGridService : public GridService {
  public:
    DsoGridService(Network net, PowerFlowOptions options);

    void set_clock(Tick tick) { clock_ = tick; }

    /// New forecast for an MTU: replaces its withdrawal and publishes fresh
    /// grid data. Throws GridServiceError if the power flow fails.
    GridData forecast(MtuId mtu, NodalState withdrawal, const std::string& cause = "forecast");

    GridData grid_data(MtuId mtu) override;
    GridData apply_schedule_change(const NodalDelta& delta) override;

    [[nodiscard]] const Network& network() const { return net_; }
    [[nodiscard]] const std::vector<GridSnapshot>& snapshots() const { return snapshots_; }
    [[nodiscard]] const GridSnapshot& latest(MtuId mtu) const;
    [[nodiscard]] bool has_mtu(MtuId mtu) const { return mtus_.contains(mtu); }

  private:
    struct MtuState {
        NodalState withdrawal;
        PowerFlowSolution solution;
        GridData data;
        std::size_t snapshot_index = 0;
    };

    GridData publish(MtuId mtu, NodalState withdrawal, const std::string& cause);

    Network net_;
    PowerFlowOptions options_;
    Tick clock_ = 0;
    std::uint64_t next_snapshot_ = 1;
    std::map<MtuId, MtuState> mtus_;
    std::vector<GridSnapshot> snapshots_;
};

/// Convenience for one-off checks: solve, derive sensitivities and margins.
/// Throws NotConvergedError if the power flow does not converge.
[[nodiscard]] GridData make_grid_data(const Network& net, const NodalState& state, const PowerFlowOptions& options,
                                      MtuId mtu = {}, std::uint64_t snapshot_id = 1);

}  // namespace lfm
