#include "lfm/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lfm {

namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_number(const std::optional<double>& v) { return v ? number_or_null(*v) : json(nullptr); }

json constraint_json(const std::optional<Constraint>& c) { return c ? json(to_string(*c)) : json(nullptr); }

std::string generated_at() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream os;
    os << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

std::string binding_name(const ExecutedTrade& t) {
    return t.assessment.binding_constraint ? to_string(*t.assessment.binding_constraint) : "none";
}

json order_json(const Order& o) {
    return {{"id", o.id},
            {"direction", to_string(o.direction)},
            {"node", o.node},
            {"mtu", o.mtu.value},
            {"quantity_mw", o.quantity},
            {"remaining_mw", o.remaining},
            {"price", o.price},
            {"timestamp", o.timestamp},
            {"sequence", o.sequence}};
}

json doubles(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) {
        out.push_back(number_or_null(x));
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trade_log_csv(const RunReport& report) {
    std::ostringstream os;
    os << "sequence,instance_id,mtu,buy_id,sell_id,buy_bus,sell_bus,qty_mw,price,binding_constraint,"
          "fully_resolved_flag\n";
    for (const auto* t : report.trades()) {
        os << t->trade.sequence << ',' << t->trade.instance_id << ',' << t->trade.mtu.value << ','
           << t->trade.buy_order_id << ',' << t->trade.sell_order_id << ',' << t->buy_bus << ',' << t->sell_bus
           << ',' << format_double(t->trade.quantity) << ',' << format_double(t->trade.price) << ','
           << binding_name(*t) << ',' << (t->assessment.fully_resolves() ? 1 : 0) << '\n';
    }
    return os.str();
}

json trade_log_json(const RunReport& report) {
    json trades = json::array();
    for (const auto* t : report.trades()) {
        trades.push_back({{"sequence", t->trade.sequence},
                          {"instance_id", t->trade.instance_id},
                          {"mtu", t->trade.mtu.value},
                          {"buy_id", t->trade.buy_order_id},
                          {"sell_id", t->trade.sell_order_id},
                          {"buy_bus", t->buy_bus},
                          {"sell_bus", t->sell_bus},
                          {"qty_mw", t->trade.quantity},
                          {"price", t->trade.price},
                          {"binding_constraint", binding_name(*t)},
                          {"fully_resolved_flag", t->assessment.fully_resolves()},
                          {"buy_price", t->buy_price},
                          {"sell_price", t->sell_price},
                          {"buy_timestamp", t->buy_timestamp},
                          {"sell_timestamp", t->sell_timestamp},
                          {"q_lower_full", number_or_null(t->assessment.q_lower_full)},
                          {"q_upper", number_or_null(t->assessment.q_upper)},
                          {"snapshot_before", t->snapshot_before},
                          {"snapshot_after", t->snapshot_after ? json(*t->snapshot_after) : json(nullptr)},
                          {"predicted_ds_mva", doubles(t->predicted_ds)},
                          {"exact_ds_mva", doubles(t->exact_ds)},
                          {"max_prediction_error_ratio", t->max_error_ratio},
                          {"prediction_breach", t->max_error_ratio > report.eps_lin}});
    }
    json orders = json::array();
    for (const auto& o : report.orders) {
        json jo = order_json(o.order);
        jo["status"] = o.status;
        jo["rejection"] = o.rejection ? json(to_string(*o.rejection)) : json(nullptr);
        orders.push_back(std::move(jo));
    }
    json schedules = json::array();
    for (const auto& s : report.schedules) {
        schedules.push_back({{"mtu", s.mtu.value},
                             {"baseline_p_mw", doubles(s.baseline.p_mw)},
                             {"baseline_q_mvar", doubles(s.baseline.q_mvar)},
                             {"adjustment_mw", doubles(s.adjustment_mw)}});
    }
    return {{"scenario", report.scenario_name}, {"trades", trades}, {"orders", orders}, {"schedules", schedules}};
}

json snapshots_json(const RunReport& report) {
    const std::size_t m = report.network.line_count();
    json snaps = json::array();
    for (const auto& s : report.snapshots) {
        std::vector<double> s_from(m), s_to(m), margin_from(m), margin_to(m);
        for (std::size_t l = 0; l < m; ++l) {
            s_from[l] = s.margins.s_current[l];
            s_to[l] = s.margins.s_current[m + l];
            margin_from[l] = s.margins.margin[l];
            margin_to[l] = s.margins.margin[m + l];
        }
        snaps.push_back({{"id", s.id},
                         {"mtu", s.mtu.value},
                         {"tick", s.tick},
                         {"cause", s.cause},
                         {"iterations", s.solution.iterations},
                         {"withdrawal_p_mw", doubles(s.withdrawal.p_mw)},
                         {"withdrawal_q_mvar", doubles(s.withdrawal.q_mvar)},
                         {"u_pu", doubles(s.solution.u)},
                         {"theta_rad", doubles(s.solution.theta)},
                         {"s_from_mva", doubles(s_from)},
                         {"s_to_mva", doubles(s_to)},
                         {"margin_from_mva", doubles(margin_from)},
                         {"margin_to_mva", doubles(margin_to)},
                         {"violated_lines", s.margins.violated_lines}});
    }
    json timeline = json::array();
    for (const auto& v : report.violation_timeline) {
        timeline.push_back(
            {{"tick", v.tick}, {"mtu", v.mtu.value}, {"snapshot_id", v.snapshot_id}, {"violated_lines", v.violated_lines}});
    }
    json instances = json::array();
    for (const auto& rec : report.instances) {
        json trades = json::array();
        for (const auto& t : rec.result.trades) {
            trades.push_back({{"sequence", t.trade.sequence},
                              {"snapshot_before", t.snapshot_before},
                              {"snapshot_after", t.snapshot_after ? json(*t.snapshot_after) : json(nullptr)}});
        }
        instances.push_back({{"instance_id", rec.result.instance_id},
                             {"mtu", rec.result.mtu.value},
                             {"tick", rec.tick},
                             {"trigger", rec.trigger},
                             {"snapshot_at_start", rec.snapshot_at_start},
                             {"termination", to_string(rec.result.termination)},
                             {"scans", rec.result.scans},
                             {"assessments", rec.result.evaluations.size()},
                             {"trades", trades},
                             {"abort_reason", rec.result.abort_reason}});
    }
    return {{"scenario", report.scenario_name},
            {"snapshots", snaps},
            {"violation_timeline", timeline},
            {"instances", instances}};
}

json assessment_json(const PairAssessment& a) {
    json bounds = json::array();
    for (const auto& b : a.bounds) {
        bounds.push_back({{"source", to_string(b.source)},
                          {"rule", to_string(b.rule)},
                          {"k_diff", b.coefficient},
                          {"lower", optional_number(b.lower)},
                          {"upper", optional_number(b.upper)}});
    }
    return {{"verdict", to_string(a.verdict)},
            {"q_lower_full", number_or_null(a.q_lower_full)},
            {"q_upper", number_or_null(a.q_upper)},
            {"q_clear", a.q_clear},
            {"binding_constraint", constraint_json(a.binding_constraint)},
            {"blocking_constraint", constraint_json(a.blocking_constraint)},
            {"k_diff_flow", doubles(a.k_diff_flow)},
            {"k_diff_volt", doubles(a.k_diff_volt)},
            {"bounds", bounds}};
}

json assessments_json(const RunReport& report) {
    json out = json::array();
    for (const auto& rec : report.instances) {
        for (const auto& ev : rec.result.evaluations) {
            json j = assessment_json(ev.assessment);
            j["instance_id"] = rec.result.instance_id;
            j["scan"] = ev.scan;
            j["snapshot_id"] = ev.snapshot_id;
            j["buy_id"] = ev.buy.id;
            j["sell_id"] = ev.sell.id;
            j["buy_bus"] = ev.buy.node;
            j["sell_bus"] = ev.sell.node;
            out.push_back(std::move(j));
        }
    }
    return {{"scenario", report.scenario_name}, {"assessments", out}};
}

std::string summary_text(const RunReport& report, bool deterministic) {
    std::ostringstream os;
    os << "scenario: " << report.scenario_name << '\n';
    if (!deterministic) {
        os << "generated at: " << generated_at() << '\n';
    }
    const auto trades = report.trades();
    std::size_t accepted = 0;
    for (const auto& o : report.orders) {
        accepted += o.rejection ? 0 : 1;
    }
    double volume = 0.0;
    double worst = 0.0;
    for (const auto* t : trades) {
        volume += t->trade.quantity;
        worst = std::max(worst, t->max_error_ratio);
    }
    std::size_t aborted = 0;
    for (const auto& rec : report.instances) {
        aborted += rec.result.termination == Termination::aborted ? 1 : 0;
    }
    os << "events processed: " << report.events_processed << '\n';
    os << "orders: " << accepted << " accepted, " << report.orders.size() - accepted << " rejected\n";
    os << "instances: " << report.instances.size() << " (" << aborted << " aborted)\n";
    os << "trades: " << trades.size() << '\n';
    os << "traded volume mw: " << format_double(volume) << '\n';
    os << "violations before: " << report.violations_before << '\n';
    os << "violations after: " << report.violations_after << '\n';
    os << "prediction breaches: " << report.prediction_breaches << " (eps_lin " << format_double(report.eps_lin)
       << ")\n";
    os << "max prediction error ratio: " << format_double(worst) << '\n';
    if (report.baseline_failed || report.instance_aborted) {
        os << "failure: " << report.failure << '\n';
    }
    os << "exit code: " << report.exit_code() << '\n';

    os << "\ninstances:\n";
    for (const auto& rec : report.instances) {
        os << "  #" << rec.result.instance_id << " tick " << rec.tick << " mtu " << rec.result.mtu.value << " ["
           << rec.trigger << "] trades " << rec.result.trades.size() << ", assessments "
           << rec.result.evaluations.size() << ", terminated: " << to_string(rec.result.termination) << '\n';
    }
    os << "\ntrades:\n";
    for (const auto* t : trades) {
        os << "  #" << t->trade.sequence << " instance " << t->trade.instance_id << " mtu " << t->trade.mtu.value
           << ": buy " << t->trade.buy_order_id << "@bus" << t->buy_bus << " / sell " << t->trade.sell_order_id
           << "@bus" << t->sell_bus << " " << format_double(t->trade.quantity) << " MW at "
           << format_double(t->trade.price) << ", binding " << binding_name(*t) << ", fully resolved "
           << (t->assessment.fully_resolves() ? "yes" : "no") << '\n';
    }
    if (!report.warnings.empty()) {
        os << "\nwarnings:\n";
        for (const auto& w : report.warnings) {
            os << "  " << w << '\n';
        }
    }
    return os.str();
}

std::vector<std::filesystem::path> report_write(const RunReport& report, const std::filesystem::path& out_dir,
                                                ReportFormats formats, bool deterministic) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const char* name, const std::string& content) {
        const auto path = out_dir / name;
        write_file(path, content);
        written.push_back(path);
    };
    if (formats.csv) {
        emit("trades.csv", trade_log_csv(report));
    }
    if (formats.json) {
        json trades = trade_log_json(report);
        if (!deterministic) {
            trades["generated_at"] = generated_at();
        }
        emit("trades.json", trades.dump(2) + "\n");
        emit("snapshots.json", snapshots_json(report).dump(2) + "\n");
        emit("assessments.json", assessments_json(report).dump(2) + "\n");
    }
    emit("summary.txt", summary_text(report, deterministic));
    return written;
}

std::string sensitivities_csv(const SensitivityBundle& bundle, std::size_t line_count) {
    std::ostringstream os;
    os << "matrix,element,end,bus,value\n";
    for (Eigen::Index r = 0; r < bundle.k_sp.rows(); ++r) {
        const auto ref = end_ref(static_cast<std::size_t>(r), line_count);
        for (Eigen::Index k = 0; k < bundle.k_sp.cols(); ++k) {
            os << "k_sp," << ref.line << ',' << to_string(ref.end) << ',' << k << ','
               << format_double(bundle.k_sp(r, k)) << '\n';
        }
    }
    for (Eigen::Index r = 0; r < bundle.k_up.rows(); ++r) {
        for (Eigen::Index k = 0; k < bundle.k_up.cols(); ++k) {
            os << "k_up," << r << ",," << k << ',' << format_double(bundle.k_up(r, k)) << '\n';
        }
    }
    return os.str();
}

std::string assessment_table(const PairAssessment& a) {
    auto cell = [](const std::optional<double>& v) {
        if (!v) {
            return std::string("-");
        }
        std::ostringstream os;
        os << std::setprecision(6) << *v;
        return os.str();
    };
    std::ostringstream os;
    os << std::left << std::setw(16) << "constraint" << std::setw(18) << "rule" << std::setw(14) << "k_diff"
       << std::setw(14) << "lower_mw" << "upper_mw\n";
    for (const auto& b : a.bounds) {
        std::ostringstream k;
        k << std::setprecision(6) << b.coefficient;
        os << std::left << std::setw(16) << to_string(b.source) << std::setw(18) << to_string(b.rule)
           << std::setw(14) << k.str() << std::setw(14) << cell(b.lower) << cell(b.upper) << '\n';
    }
    os << std::setprecision(6);
    os << "\nq_lower_full: " << a.q_lower_full << " MW\n";
    os << "q_upper: " << a.q_upper << " MW";
    if (a.binding_constraint) {
        os << " (binding: " << to_string(*a.binding_constraint) << ")";
    }
    os << "\nverdict: " << to_string(a.verdict);
    if (a.blocking_constraint) {
        os << " (not relieved: " << to_string(*a.blocking_constraint) << ")";
    }
    os << "\nq_clear: " << a.q_clear << " MW\n";
    return os.str();
}

}  // namespace lfm
