#include "lfm/scenario.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

namespace lfm {

namespace {

using nlohmann::json;

const json& member(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(where + "." + key + ": missing");
    }
    return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
    const json& v = member(obj, key, where);
    if (!v.is_number()) {
        throw SchemaError(where + "." + key + ": expected a number");
    }
    return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
    return obj.contains(key) ? number(obj, key, where) : fallback;
}

long long integer(const json& obj, const char* key, const std::string& where) {
    const json& v = member(obj, key, where);
    if (!v.is_number_integer()) {
        throw SchemaError(where + "." + key + ": expected an integer");
    }
    return v.get<long long>();
}

std::string text(const json& obj, const char* key, const std::string& where) {
    const json& v = member(obj, key, where);
    if (!v.is_string()) {
        throw SchemaError(where + "." + key + ": expected a string");
    }
    return v.get<std::string>();
}

std::vector<double> number_array(const json& obj, const char* key, std::size_t size, const std::string& where) {
    const json& v = member(obj, key, where);
    if (!v.is_array() || v.size() != size) {
        throw SchemaError(where + "." + key + ": expected an array of " + std::to_string(size) + " numbers");
    }
    std::vector<double> out;
    out.reserve(size);
    for (const auto& x : v) {
        if (!x.is_number()) {
            throw SchemaError(where + "." + key + ": expected numbers");
        }
        out.push_back(x.get<double>());
    }
    return out;
}

NodalState nodal_state(const json& obj, std::size_t buses, const std::string& where) {
    return {number_array(obj, "p_mw", buses, where), number_array(obj, "q_mvar", buses, where)};
}

MtuId mtu_ref(const json& obj, const std::set<MtuId>& known, const std::string& where) {
    const MtuId id{static_cast<int>(integer(obj, "mtu", where))};
    if (!known.contains(id)) {
        throw SchemaError(where + ".mtu: unknown MTU " + std::to_string(id.value));
    }
    return id;
}

ScenarioConfig parse_config(const json& doc) {
    const std::string at = "config";
    const json& c = member(doc, "config", "scenario");
    if (!c.is_object()) {
        throw SchemaError("scenario.config: expected an object");
    }
    ScenarioConfig cfg;
    cfg.pf_tol = number_or(c, "pf_tol", cfg.pf_tol, at);
    cfg.max_iter = c.contains("max_iter") ? static_cast<int>(integer(c, "max_iter", at)) : cfg.max_iter;
    cfg.max_order_qty_mw = number(c, "max_order_qty_mw", at);
    cfg.eps_lin = number_or(c, "eps_lin", cfg.eps_lin, at);
    cfg.slack_setpoint_pu = number_or(c, "slack_setpoint_pu", cfg.slack_setpoint_pu, at);
    if (!(cfg.pf_tol > 0.0) || cfg.max_iter < 1 || !(cfg.max_order_qty_mw > 0.0) || !(cfg.eps_lin > 0.0) ||
        !(cfg.slack_setpoint_pu > 0.0)) {
        throw SchemaError("config: pf_tol, max_iter, max_order_qty_mw, eps_lin and slack_setpoint_pu must be positive");
    }
    return cfg;
}

}  // namespace

const char* event_kind(const Event& e) {
    switch (e.payload.index()) {
        case 0:
            return "forecast_update";
        case 1:
            return "order_submit";
        default:
            return "order_cancel";
    }
}

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) {
        throw SchemaError("scenario: expected an object");
    }
    const long long version = integer(doc, "schema_version", "scenario");
    if (version != kScenarioSchemaVersion) {
        throw SchemaError("scenario.schema_version: unsupported version " + std::to_string(version));
    }

    Scenario sc;
    sc.name = doc.contains("name") ? text(doc, "name", "scenario") : "scenario";

    const json& jnet = member(doc, "network", "scenario");
    if (jnet.is_string()) {
        const std::filesystem::path p = base_dir / jnet.get<std::string>();
        sc.network = validate_network(parse_network(read_json_file(p), p.filename().string()));
    } else {
        sc.network = validate_network(parse_network(jnet, "scenario.network"));
    }
    sc.config = parse_config(doc);
    const std::size_t n = sc.network.bus_count();

    const json& jmtus = member(doc, "mtus", "scenario");
    if (!jmtus.is_array() || jmtus.empty()) {
        throw SchemaError("scenario.mtus: expected a non-empty array");
    }
    std::set<MtuId> known;
    std::map<MtuId, const MtuSpec*> by_id;
    for (std::size_t k = 0; k < jmtus.size(); ++k) {
        const std::string at = "mtus[" + std::to_string(k) + "]";
        const json& jm = jmtus[k];
        MtuSpec spec;
        spec.id = MtuId{static_cast<int>(integer(jm, "id", at))};
        spec.gate_open = integer(jm, "gate_open", at);
        spec.gate_close = integer(jm, "gate_close", at);
        if (jm.contains("duration_min")) {
            spec.duration_min = static_cast<int>(integer(jm, "duration_min", at));
        }
        if (spec.gate_close <= spec.gate_open) {
            throw SchemaError(at + ": gate_close must be after gate_open");
        }
        if (!known.insert(spec.id).second) {
            throw SchemaError(at + ".id: duplicate MTU " + std::to_string(spec.id.value));
        }
        sc.mtus.push_back(spec);
    }
    for (const auto& spec : sc.mtus) {
        by_id[spec.id] = &spec;
    }

    const json& jbase = member(doc, "baseline", "scenario");
    if (!jbase.is_array()) {
        throw SchemaError("scenario.baseline: expected an array");
    }
    for (std::size_t k = 0; k < jbase.size(); ++k) {
        const std::string at = "baseline[" + std::to_string(k) + "]";
        const MtuId id = mtu_ref(jbase[k], known, at);
        if (!sc.baseline.emplace(id, nodal_state(jbase[k], n, at)).second) {
            throw SchemaError(at + ".mtu: baseline given twice for MTU " + std::to_string(id.value));
        }
    }
    for (const auto& spec : sc.mtus) {
        if (!sc.baseline.contains(spec.id)) {
            throw SchemaError("scenario.baseline: missing baseline for MTU " + std::to_string(spec.id.value));
        }
    }

    const json empty = json::array();
    const json& jevents = doc.contains("events") ? doc["events"] : empty;
    if (!jevents.is_array()) {
        throw SchemaError("scenario.events: expected an array");
    }
    for (std::size_t k = 0; k < jevents.size(); ++k) {
        const std::string at = "events[" + std::to_string(k) + "]";
        const json& je = jevents[k];
        Event ev;
        ev.tick = integer(je, "tick", at);
        const std::string type = text(je, "type", at);
        if (type == "forecast_update") {
            ev.payload = ForecastUpdate{mtu_ref(je, known, at), nodal_state(je, n, at)};
        } else if (type == "order_submit") {
            OrderRequest req;
            req.id = text(je, "id", at);
            const std::string dir = text(je, "direction", at);
            if (dir != "buy" && dir != "sell") {
                throw SchemaError(at + ".direction: expected \"buy\" or \"sell\"");
            }
            req.direction = dir == "buy" ? Direction::buy : Direction::sell;
            const long long node = integer(je, "node", at);
            if (node < 0) {
                throw SchemaError(at + ".node: expected a non-negative integer");
            }
            req.node = static_cast<std::size_t>(node);
            req.mtu = mtu_ref(je, known, at);
            req.quantity = number(je, "quantity_mw", at);
            req.price = number(je, "price", at);
            const MtuSpec& spec = *by_id.at(req.mtu);
            if (ev.tick < spec.gate_open || ev.tick >= spec.gate_close) {
                sc.warnings.push_back(at + ": order " + req.id + " at tick " + std::to_string(ev.tick) +
                                      " is outside the gate of MTU " + std::to_string(req.mtu.value) +
                                      " and will be rejected");
            }
            ev.payload = OrderSubmit{std::move(req)};
        } else if (type == "order_cancel") {
            ev.payload = OrderCancel{text(je, "id", at)};
        } else {
            throw SchemaError(at + ".type: unknown event type \"" + type + "\"");
        }
        sc.events.push_back(std::move(ev));
    }
    std::stable_sort(sc.events.begin(), sc.events.end(),
                     [](const Event& a, const Event& b) { return a.tick < b.tick; });
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    Scenario sc = parse_scenario(read_json_file(path), path.parent_path());
    return sc;
}

// ---------------------------------------------------------------------------

std::vector<const ExecutedTrade*> RunReport::trades() const {
    std::vector<const ExecutedTrade*> out;
    for (const auto& inst : instances) {
        for (const auto& t : inst.result.trades) {
            out.push_back(&t);
        }
    }
    return out;
}

const GridSnapshot* RunReport::snapshot(std::uint64_t id) const {
    auto it = std::find_if(snapshots.begin(), snapshots.end(), [&](const GridSnapshot& s) { return s.id == id; });
    return it == snapshots.end() ? nullptr : &*it;
}

int RunReport::exit_code() const {
    if (baseline_failed) {
        return 3;
    }
    if (instance_aborted) {
        return 4;
    }
    return 0;
}

namespace {

class Simulation {
  public:
    explicit Simulation(const Scenario& sc)
        : sc_(sc),
          engine_({sc.network.bus_count(), sc.network.slack_bus, sc.config.max_order_qty_mw}),
          dso_(sc.network, sc.config.power_flow()) {
        report_.scenario_name = sc.name;
        report_.network = sc.network;
        report_.eps_lin = sc.config.eps_lin;
        report_.warnings = sc.warnings;
    }

    RunReport run() {
        if (initialize()) {
            for (const auto& ev : sc_.events) {
                if (!process(ev)) {
                    break;
                }
                ++report_.events_processed;
            }
        }
        finish();
        return std::move(report_);
    }

  private:
    bool initialize() {
        for (const auto& spec : sc_.mtus) {
            engine_.add_mtu(spec.id, spec.gate_open, spec.gate_close, sc_.baseline.at(spec.id));
        }
        for (const auto& spec : sc_.mtus) {
            dso_.set_clock(spec.gate_open);
            try {
                const GridData gd = dso_.forecast(spec.id, sc_.baseline.at(spec.id), "baseline");
                record_violations(spec.gate_open, gd);
                report_.violations_before += gd.margins.violated_lines.size();
            } catch (const GridServiceError& e) {
                fail_baseline(e.what());
                return false;
            }
        }
        return true;
    }

    bool process(const Event& ev) {
        dso_.set_clock(ev.tick);
        for (const Order& expired : engine_.close_gates(ev.tick)) {
            if (auto* o = outcome(expired.id)) {
                o->status = "expired";
                o->order.remaining = expired.remaining;
            }
        }

        if (const auto* f = std::get_if<ForecastUpdate>(&ev.payload)) {
            engine_.update_baseline(f->mtu, f->withdrawal);
            try {
                const GridData gd = dso_.forecast(f->mtu, engine_.ledger().scheduled(f->mtu), "forecast_update");
                record_violations(ev.tick, gd);
            } catch (const GridServiceError& e) {
                fail_baseline(e.what());
                return false;
            }
            run_instance(ev.tick, f->mtu, "forecast_update");
        } else if (const auto* s = std::get_if<OrderSubmit>(&ev.payload)) {
            const SubmitResult res = engine_.submit_order(s->request, ev.tick);
            OrderOutcome out{res.order, res.accepted() ? "open" : "rejected", res.rejection};
            if (res.accepted()) {
                index_[res.order.id] = report_.orders.size();
            } else {
                spdlog::info("tick {}: order {} rejected ({})", ev.tick, res.order.id, to_string(*res.rejection));
            }
            report_.orders.push_back(std::move(out));
            if (res.accepted()) {
                run_instance(ev.tick, s->request.mtu, "order_submit " + s->request.id);
            }
        } else if (const auto* c = std::get_if<OrderCancel>(&ev.payload)) {
            if (auto removed = engine_.cancel_order(c->id)) {
                if (auto* o = outcome(c->id)) {
                    o->status = "cancelled";
                    o->order.remaining = removed->remaining;
                }
            } else {
                const std::string msg = "tick " + std::to_string(ev.tick) + ": cancel of order " + c->id +
                                        " which is not open";
                spdlog::warn("{}", msg);
                report_.warnings.push_back(msg);
            }
        }
        return true;
    }

    void run_instance(Tick tick, MtuId mtu, std::string trigger) {
        InstanceRecord rec;
        rec.tick = tick;
        rec.trigger = std::move(trigger);
        rec.snapshot_at_start = dso_.latest(mtu).id;
        rec.result = engine_.run_instance(mtu, dso_);

        for (const auto& t : rec.result.trades) {
            for (const auto* id : {&t.trade.buy_order_id, &t.trade.sell_order_id}) {
                if (auto* o = outcome(*id)) {
                    o->order.remaining -= t.trade.quantity;
                    if (o->order.remaining <= 1e-9) {
                        o->order.remaining = 0.0;
                        o->status = "filled";
                    }
                }
            }
            if (t.snapshot_after) {
                const GridSnapshot& after = dso_.latest(mtu);
                report_.violation_timeline.push_back({tick, mtu, after.id, after.margins.violated_lines});
            }
            if (t.max_error_ratio > sc_.config.eps_lin) {
                ++report_.prediction_breaches;
                const std::string msg = "trade " + std::to_string(t.trade.sequence) +
                                        ": sensitivity prediction error " + std::to_string(t.max_error_ratio) +
                                        " of s_max exceeds eps_lin";
                spdlog::warn("{}", msg);
                report_.warnings.push_back(msg);
            }
            spdlog::info("tick {}: trade {} {} -> {} {} MW @ {}", tick, t.trade.sequence, t.trade.sell_order_id,
                         t.trade.buy_order_id, t.trade.quantity, t.trade.price);
        }
        if (rec.result.termination == Termination::aborted) {
            report_.instance_aborted = true;
            report_.failure = rec.result.abort_reason;
            spdlog::error("tick {}: instance {} aborted: {}", tick, rec.result.instance_id, rec.result.abort_reason);
        }
        report_.instances.push_back(std::move(rec));
    }

    void record_violations(Tick tick, const GridData& gd) {
        report_.violation_timeline.push_back({tick, gd.mtu, gd.snapshot_id, gd.margins.violated_lines});
    }

    void fail_baseline(const std::string& what) {
        report_.baseline_failed = true;
        report_.failure = what;
        spdlog::error("baseline power flow failed: {}", what);
    }

    OrderOutcome* outcome(const std::string& id) {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &report_.orders[it->second];
    }

    void finish() {
        for (const auto& spec : sc_.mtus) {
            if (engine_.ledger().has_mtu(spec.id)) {
                report_.schedules.push_back(
                    {spec.id, engine_.ledger().baseline(spec.id), engine_.ledger().adjustment(spec.id)});
            }
            if (dso_.has_mtu(spec.id)) {
                report_.violations_after += dso_.latest(spec.id).margins.violated_lines.size();
            }
        }
        report_.snapshots = dso_.snapshots();
    }

    const Scenario& sc_;
    MarketEngine engine_;
    DsoGridService dso_;
    RunReport report_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace

RunReport run(const Scenario& scenario) { return Simulation(scenario).run(); }

}  // namespace lfm
