#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lfm/dso.hpp"
#include "lfm/market.hpp"
#include "lfm/network_io.hpp"

namespace lfm {

inline constexpr int kScenarioSchemaVersion = 1;

struct ScenarioConfig {
    double pf_tol = 1e-8;
    int max_iter = 50;
    double max_order_qty_mw = 0.0;  // required in the file
    double eps_lin = 0.02;          // fraction of s_max
    double slack_setpoint_pu = 1.0;

    [[nodiscard]] PowerFlowOptions power_flow() const { return {pf_tol, max_iter, slack_setpoint_pu}; }
};

struct MtuSpec {
    MtuId id;
    Tick gate_open = 0;
    Tick gate_close = 0;
    int duration_min = 60;  // metadata only
};

struct ForecastUpdate {
    MtuId mtu;
    NodalState withdrawal;
};

struct OrderSubmit {
    OrderRequest request;
};

struct OrderCancel {
    std::string id;
};

struct Event {
    Tick tick = 0;
    std::variant<ForecastUpdate, OrderSubmit, OrderCancel> payload;
};

[[nodiscard]] const char* event_kind(const Event& e);

struct Scenario {
    std::string name;
    Network network;
    ScenarioConfig config;
    std::vector<MtuSpec> mtus;
    std::map<MtuId, NodalState> baseline;
    std::vector<Event> events;  // stable-sorted by tick
    std::vector<std::string> warnings;
};

/// `base_dir` resolves a network given as a relative path.
[[nodiscard]] Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Simulation

struct InstanceRecord {
    Tick tick = 0;
    std::string trigger;  // "order_submit <id>" or "forecast_update"
    std::uint64_t snapshot_at_start = 0;
    InstanceResult result;
};

struct OrderOutcome {
    Order order;
    std::string status;  // open | filled | cancelled | expired | rejected
    std::optional<RejectReason> rejection;
};

struct ViolationPoint {
    Tick tick = 0;
    MtuId mtu;
    std::uint64_t snapshot_id = 0;
    std::vector<std::size_t> violated_lines;
};

struct FinalSchedule {
    MtuId mtu;
    NodalState baseline;
    std::vector<double> adjustment_mw;
};

struct RunReport {
    std::string scenario_name;
    Network network;
    double eps_lin = 0.02;
    std::size_t events_processed = 0;
    std::vector<InstanceRecord> instances;
    std::vector<GridSnapshot> snapshots;
    std::vector<ViolationPoint> violation_timeline;
    std::vector<OrderOutcome> orders;
    std::vector<FinalSchedule> schedules;
    std::vector<std::string> warnings;
    std::size_t violations_before = 0;
    std::size_t violations_after = 0;
    std::size_t prediction_breaches = 0;
    bool baseline_failed = false;
    bool instance_aborted = false;
    std::string failure;

    [[nodiscard]] std::vector<const ExecutedTrade*> trades() const;
    [[nodiscard]] const GridSnapshot* snapshot(std::uint64_t id) const;
    /// 0 ok, 3 baseline power flow failed, 4 an instance was aborted.
    [[nodiscard]] int exit_code() const;
};

/// Drives the whole trading timeline of a scenario.
[[nodiscard]] RunReport run(const Scenario& scenario);

}  // namespace lfm
