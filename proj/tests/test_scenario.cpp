#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <doctest.h>

#include "fixtures.hpp"
#include "lfm/network_io.hpp"
#include "lfm/report.hpp"
#include "lfm/scenario.hpp"

using namespace lfm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json demo_doc() { return read_json_file(testing::data_path("scenarios/five_bus_overload.json")); }

Scenario parse(const json& doc) { return parse_scenario(doc, testing::data_path("scenarios")); }

RunReport run_file(const std::string& name) {
    return run(load_scenario(testing::data_path("scenarios/" + name)));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lfm_test_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("demo scenario: one trade fixes the overload") {
    const RunReport r = run_file("five_bus_overload.json");
    CHECK(r.exit_code() == 0);
    CHECK(r.violations_before == 1);
    CHECK(r.violations_after == 0);
    const auto trades = r.trades();
    REQUIRE(trades.size() == 1);
    CHECK(trades[0]->trade.buy_order_id == "B1");
    CHECK(trades[0]->trade.sell_order_id == "S1");
    CHECK(trades[0]->trade.quantity == 2.0);
    CHECK(trades[0]->trade.price == 40.0);
    CHECK(r.prediction_breaches == 0);
}

TEST_CASE("no violation scenario trades nothing") {
    const RunReport r = run_file("no_violation.json");
    CHECK(r.trades().empty());
    CHECK(r.violations_before == 0);
    for (const auto& o : r.orders) {
        CHECK(o.status == "open");
    }
}

TEST_CASE("oversized orders are cut back at the network limit") {
    const RunReport r = run_file("oversized_orders.json");
    const auto trades = r.trades();
    REQUIRE(trades.size() == 1);
    CHECK(trades[0]->trade.quantity < 4.0);
    CHECK(trades[0]->trade.quantity == trades[0]->assessment.q_upper);
    CHECK(to_string(*trades[0]->assessment.binding_constraint) == "line 2 from");
    // the linear bound may overshoot by a sliver, never beyond the tolerance
    const GridSnapshot* after = r.snapshot(*trades[0]->snapshot_after);
    REQUIRE(after != nullptr);
    for (std::size_t e = 0; e < after->margins.margin.size(); ++e) {
        CHECK(after->margins.margin[e] >= -r.eps_lin * after->margins.s_max[e]);
    }
}

TEST_CASE("two partial trades in one instance") {
    const RunReport r = run_file("partial_fills.json");
    REQUIRE(r.trades().size() == 2);
    CHECK(r.trades()[0]->trade.instance_id == r.trades()[1]->trade.instance_id);
    CHECK(r.violations_after == 0);
    for (const auto& o : r.orders) {
        if (o.order.id == "S1") {
            CHECK(o.status == "open");
            CHECK(o.order.remaining == doctest::Approx(2.0));
        } else {
            CHECK(o.status == "filled");
        }
    }
}

TEST_CASE("gates, slack orders, cancels and forecasts") {
    const Scenario sc = load_scenario(testing::data_path("scenarios/gate_and_forecast.json"));
    REQUIRE(sc.warnings.size() == 1);
    CHECK(sc.warnings[0].find("outside the gate") != std::string::npos);
    const RunReport r = run(sc);
    std::map<std::string, OrderOutcome> by_id;
    for (const auto& o : r.orders) {
        by_id[o.order.id] = o;
    }
    CHECK(by_id["B9"].rejection == RejectReason::slack_node);
    CHECK(by_id["B2"].rejection == RejectReason::gate_closed);
    CHECK(by_id["S2"].status == "expired");
    CHECK(by_id["S1"].status == "filled");
    REQUIRE(r.trades().size() == 1);
    CHECK(r.trades()[0]->trade.mtu == MtuId{2});
    // the cancel came after S1 was filled
    CHECK(r.warnings.back().find("not open") != std::string::npos);
    CHECK(r.instances.back().trigger == "forecast_update");
}

TEST_CASE("schema errors") {
    SUBCASE("unknown event type") {
        json d = demo_doc();
        d["events"][0]["type"] = "order_amend";
        CHECK_THROWS_AS((void)parse(d), SchemaError);
    }
    SUBCASE("unsupported version") {
        json d = demo_doc();
        d["schema_version"] = 2;
        CHECK_THROWS_AS((void)parse(d), SchemaError);
    }
    SUBCASE("order cap is mandatory") {
        json d = demo_doc();
        d["config"].erase("max_order_qty_mw");
        CHECK_THROWS_AS((void)parse(d), SchemaError);
    }
    SUBCASE("baseline of the wrong length") {
        json d = demo_doc();
        d["baseline"][0]["p_mw"] = {0.0, 1.0};
        CHECK_THROWS_AS((void)parse(d), SchemaError);
    }
    SUBCASE("missing baseline") {
        json d = demo_doc();
        d["mtus"].push_back({{"id", 2}, {"gate_open", 0}, {"gate_close", 10}});
        CHECK_THROWS_AS((void)parse(d), SchemaError);
    }
    SUBCASE("duplicate MTU") {
        json d = demo_doc();
        d["mtus"].push_back(d["mtus"][0]);
        CHECK_THROWS_AS((void)parse(d), SchemaError);
    }
    SUBCASE("empty gate") {
        json d = demo_doc();
        d["mtus"][0]["gate_close"] = 0;
        CHECK_THROWS_AS((void)parse(d), SchemaError);
    }
    SUBCASE("bad direction") {
        json d = demo_doc();
        d["events"][0]["direction"] = "hold";
        CHECK_THROWS_AS((void)parse(d), SchemaError);
    }
    SUBCASE("broken network surfaces as a network error") {
        json d = demo_doc();
        json net = network_to_json(testing::demo_network());
        net["lines"][0]["to"] = 0;
        d["network"] = net;
        CHECK_THROWS_AS((void)parse(d), NetworkError);
    }
}

TEST_CASE("inline network and stable event order") {
    json d = demo_doc();
    d["network"] = network_to_json(testing::demo_network());
    d["events"] = json::array({
        {{"tick", 5}, {"type", "order_cancel"}, {"id", "X"}},
        {{"tick", 1}, {"type", "order_cancel"}, {"id", "A"}},
        {{"tick", 5}, {"type", "order_cancel"}, {"id", "B"}},
    });
    const Scenario sc = parse(d);
    REQUIRE(sc.events.size() == 3);
    CHECK(std::get<OrderCancel>(sc.events[0].payload).id == "A");
    CHECK(std::get<OrderCancel>(sc.events[1].payload).id == "X");
    CHECK(std::get<OrderCancel>(sc.events[2].payload).id == "B");
}

TEST_CASE("baseline that does not converge is fatal") {
    json d = demo_doc();
    d["baseline"][0]["p_mw"] = {0.0, 80.0, 80.0, 80.0, 80.0};
    const RunReport r = run(parse(d));
    CHECK(r.baseline_failed);
    CHECK(r.exit_code() == 3);
    CHECK(r.trades().empty());
}

TEST_CASE("ledger adjustments net to zero") {
    for (const char* name : {"five_bus_overload.json", "partial_fills.json", "gate_and_forecast.json"}) {
        const RunReport r = run_file(name);
        for (const auto& s : r.schedules) {
            CHECK(std::accumulate(s.adjustment_mw.begin(), s.adjustment_mw.end(), 0.0) ==
                  doctest::Approx(0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("reports: deterministic mode is byte-stable") {
    const RunReport r = run_file("five_bus_overload.json");
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const auto files = report_write(r, a, {}, true);
    (void)report_write(run_file("five_bus_overload.json"), b, {}, true);
    CHECK(files.size() == 5);
    for (const auto& f : files) {
        CHECK(slurp(f) == slurp(b / f.filename()));
    }
    CHECK(slurp(a / "trades.json").find("generated_at") == std::string::npos);
    CHECK(slurp(a / "summary.txt").find("generated at") == std::string::npos);
}

TEST_CASE("reports: wall-clock stamp outside deterministic mode") {
    const fs::path dir = scratch("stamp");
    (void)report_write(run_file("five_bus_overload.json"), dir, {}, false);
    CHECK(slurp(dir / "trades.json").find("generated_at") != std::string::npos);
}

TEST_CASE("reports: csv only writes the trade log and the summary") {
    const fs::path dir = scratch("csv_only");
    const auto files = report_write(run_file("five_bus_overload.json"), dir, {true, false}, true);
    REQUIRE(files.size() == 2);
    CHECK(fs::exists(dir / "trades.csv"));
    CHECK(fs::exists(dir / "summary.txt"));
    CHECK_FALSE(fs::exists(dir / "trades.json"));
}

TEST_CASE("trade log csv") {
    const std::string csv = trade_log_csv(run_file("five_bus_overload.json"));
    CHECK(csv ==
          "sequence,instance_id,mtu,buy_id,sell_id,buy_bus,sell_bus,qty_mw,price,binding_constraint,"
          "fully_resolved_flag\n"
          "1,2,1,B1,S1,3,2,2,40,line 2 from,1\n");
}

TEST_CASE("doubles print shortest round-trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(-1.5e-20) == "-1.5e-20");
    const double x = 3.2432412353986413;
    CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("sensitivity dump covers every entry") {
    const Network net = testing::demo_network();
    const SensitivityBundle sb = compute_sensitivities(net, solve(net, testing::demo_baseline()));
    const std::string csv = sensitivities_csv(sb, net.line_count());
    const auto rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == 1 + 10 * 5 + 5 * 5);
    CHECK(csv.rfind("matrix,element,end,bus,value\n", 0) == 0);
}
