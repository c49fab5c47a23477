// lfm: command-line driver for the local flexibility market simulator.
//
//   lfm run           --scenario FILE --out DIR [--format csv|json] [--deterministic]
//   lfm powerflow     --scenario FILE [--mtu ID]
//   lfm sensitivities --scenario FILE [--mtu ID] [--out FILE]
//   lfm assess        --scenario FILE --buy-bus B --sell-bus S [--buy-qty Q] [--sell-qty Q] [--mtu ID]
//   lfm validate      --scenario FILE | --network FILE

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lfm/dso.hpp"
#include "lfm/report.hpp"
#include "lfm/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitSchema = 2;
constexpr int kExitDivergence = 3;

struct Common {
    std::string scenario;
    std::string log_level = "warn";
    int mtu = std::numeric_limits<int>::min();
};

lfm::MtuId pick_mtu(const lfm::Scenario& sc, int requested) {
    if (requested == std::numeric_limits<int>::min()) {
        return sc.mtus.front().id;
    }
    const lfm::MtuId id{requested};
    if (!sc.baseline.contains(id)) {
        throw lfm::SchemaError("scenario has no MTU " + std::to_string(requested));
    }
    return id;
}

int cmd_run(const Common& common, const std::string& out_dir, const std::vector<std::string>& formats,
            bool deterministic) {
    const lfm::Scenario sc = lfm::load_scenario(common.scenario);
    for (const auto& w : sc.warnings) {
        spdlog::warn("{}", w);
    }
    lfm::ReportFormats fmt{formats.empty(), formats.empty()};
    for (const auto& f : formats) {
        (f == "csv" ? fmt.csv : fmt.json) = true;
    }
    const lfm::RunReport report = lfm::run(sc);
    lfm::report_write(report, out_dir, fmt, deterministic);
    std::cout << lfm::summary_text(report, deterministic);
    return report.exit_code();
}

int cmd_powerflow(const Common& common) {
    const lfm::Scenario sc = lfm::load_scenario(common.scenario);
    const lfm::MtuId mtu = pick_mtu(sc, common.mtu);
    const auto& net = sc.network;
    const lfm::PowerFlowSolution sol = lfm::solve(net, sc.baseline.at(mtu), sc.config.power_flow());
    std::cout << "mtu " << mtu.value << ": " << (sol.converged ? "converged" : "NOT converged") << " in "
              << sol.iterations << " iterations, mismatch " << sol.mismatch_norm << " pu\n\n";
    const lfm::MarginReport mr = lfm::compute_margins(net, sol);

    std::cout << std::fixed << std::setprecision(5);
    std::cout << "bus   u_pu      theta_deg  headroom_up  headroom_down\n";
    for (std::size_t k = 0; k < net.bus_count(); ++k) {
        std::cout << std::setw(4) << k << "  " << std::setw(8) << sol.u[k] << "  " << std::setw(9)
                  << sol.theta[k] * 180.0 / 3.14159265358979323846 << "  " << std::setw(11) << mr.headroom_up[k]
                  << "  " << std::setw(13) << mr.headroom_down[k] << '\n';
    }
    const std::size_t m = net.line_count();
    std::cout << "\nline  from->to  s_from_mva  s_to_mva   s_max     margin    status\n";
    for (std::size_t l = 0; l < m; ++l) {
        const double margin = std::min(mr.margin[l], mr.margin[m + l]);
        std::cout << std::setw(4) << l << "  " << std::setw(4) << net.lines[l].from_bus << "->" << std::left
                  << std::setw(4) << net.lines[l].to_bus << std::right << std::setw(10) << mr.s_current[l]
                  << std::setw(10) << mr.s_current[m + l] << std::setw(10) << net.lines[l].s_max << std::setw(10)
                  << margin << "    " << (margin < 0.0 ? "OVERLOADED" : "ok") << '\n';
    }
    std::cout << "\nslack injection: " << sol.slack_p * net.base_mva << " MW, " << sol.slack_q * net.base_mva
              << " MVAr\n";
    return sol.converged ? kExitOk : kExitDivergence;
}

int cmd_sensitivities(const Common& common, const std::string& out_file) {
    const lfm::Scenario sc = lfm::load_scenario(common.scenario);
    const lfm::MtuId mtu = pick_mtu(sc, common.mtu);
    const lfm::GridData gd = lfm::make_grid_data(sc.network, sc.baseline.at(mtu), sc.config.power_flow(), mtu);
    const std::string csv = lfm::sensitivities_csv(gd.bundle, sc.network.line_count());
    if (out_file.empty()) {
        std::cout << csv;
    } else {
        std::ofstream(out_file, std::ios::binary) << csv;
    }
    return kExitOk;
}

int cmd_assess(const Common& common, std::size_t buy_bus, std::size_t sell_bus, double buy_qty, double sell_qty,
               bool as_json) {
    const lfm::Scenario sc = lfm::load_scenario(common.scenario);
    const lfm::MtuId mtu = pick_mtu(sc, common.mtu);
    const lfm::GridData gd = lfm::make_grid_data(sc.network, sc.baseline.at(mtu), sc.config.power_flow(), mtu);

    lfm::Order buy{"buy", lfm::Direction::buy, buy_bus, mtu, buy_qty, buy_qty, 0.0, 0, 0};
    lfm::Order sell{"sell", lfm::Direction::sell, sell_bus, mtu, sell_qty, sell_qty, 0.0, 0, 1};
    const lfm::PairAssessment a = lfm::assess_pair(gd, buy, sell);
    if (as_json) {
        std::cout << lfm::assessment_json(a).dump(2) << '\n';
        return kExitOk;
    }
    std::cout << "mtu " << mtu.value << ", buy at bus " << buy_bus << ", sell at bus " << sell_bus
              << ", violated lines:";
    for (auto l : gd.margins.violated_lines) {
        std::cout << ' ' << l;
    }
    std::cout << "\n\n" << lfm::assessment_table(a);
    return kExitOk;
}

int cmd_validate(const Common& common, const std::string& network) {
    if (!network.empty()) {
        const lfm::Network net = lfm::load_network(network);
        std::cout << "network ok: " << net.bus_count() << " buses, " << net.line_count() << " lines, slack bus "
                  << net.slack_bus << '\n';
        return kExitOk;
    }
    const lfm::Scenario sc = lfm::load_scenario(common.scenario);
    std::cout << "scenario ok: " << sc.name << ", " << sc.network.bus_count() << " buses, "
              << sc.network.line_count() << " lines, " << sc.mtus.size() << " MTUs, " << sc.events.size()
              << " events\n";
    for (const auto& w : sc.warnings) {
        std::cout << "warning: " << w << '\n';
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous local flexibility market simulator"};
    app.require_subcommand(1);
    Common common;

    auto add_common = [&](CLI::App* sub, bool scenario_required) {
        auto* opt = sub->add_option("--scenario", common.scenario, "Scenario file (JSON)");
        if (scenario_required) {
            opt->required()->check(CLI::ExistingFile);
        }
        sub->add_option("--log-level", common.log_level, "trace|debug|info|warn|error|off")
            ->capture_default_str();
    };

    std::string out_dir = "out";
    std::vector<std::string> formats;
    bool deterministic = false;
    auto* run = app.add_subcommand("run", "Run the full trading timeline and write reports");
    add_common(run, true);
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_option("--format", formats, "Trade log format(s): csv, json (default both)")
        ->check(CLI::IsMember({"csv", "json"}))
        ->delimiter(',');
    run->add_flag("--deterministic", deterministic, "Suppress the generated-at field");

    auto* pf = app.add_subcommand("powerflow", "Solve one MTU baseline and print voltages and flows");
    add_common(pf, true);
    pf->add_option("--mtu", common.mtu, "MTU id (default: first)");

    std::string sens_out;
    auto* sens = app.add_subcommand("sensitivities", "Dump k_up and k_sp as CSV");
    add_common(sens, true);
    sens->add_option("--mtu", common.mtu, "MTU id (default: first)");
    sens->add_option("--out", sens_out, "Output CSV file (default: stdout)");

    std::size_t buy_bus = 0;
    std::size_t sell_bus = 0;
    double buy_qty = std::numeric_limits<double>::infinity();
    double sell_qty = std::numeric_limits<double>::infinity();
    bool as_json = false;
    auto* assess = app.add_subcommand("assess", "Feasible quantity band for one buy/sell pair");
    add_common(assess, true);
    assess->add_option("--mtu", common.mtu, "MTU id (default: first)");
    assess->add_option("--buy-bus", buy_bus, "Bus of the buy order")->required();
    assess->add_option("--sell-bus", sell_bus, "Bus of the sell order")->required();
    assess->add_option("--buy-qty", buy_qty, "Buy quantity in MW (default: unlimited)");
    assess->add_option("--sell-qty", sell_qty, "Sell quantity in MW (default: unlimited)");
    assess->add_flag("--json", as_json, "Print the assessment trace as JSON");

    std::string network;
    auto* validate = app.add_subcommand("validate", "Schema and network checks");
    add_common(validate, false);
    validate->add_option("--network", network, "Validate a network file only")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    auto logger = spdlog::stderr_color_mt("lfm");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(common.log_level));

    try {
        if (*run) {
            return cmd_run(common, out_dir, formats, deterministic);
        }
        if (*pf) {
            return cmd_powerflow(common);
        }
        if (*sens) {
            return cmd_sensitivities(common, sens_out);
        }
        if (*assess) {
            return cmd_assess(common, buy_bus, sell_bus, buy_qty, sell_qty, as_json);
        }
        if (*validate) {
            if (common.scenario.empty() && network.empty()) {
                std::cerr << "validate: give --scenario or --network\n";
                return kExitSchema;
            }
            return cmd_validate(common, network);
        }
    } catch (const lfm::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return kExitSchema;
    } catch (const lfm::NetworkError& e) {
        std::cerr << "network error: " << e.what() << '\n';
        return kExitSchema;
    } catch (const lfm::NotConvergedError& e) {
        std::cerr << "power flow: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const lfm::SingularJacobianError& e) {
        std::cerr << "power flow: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}
