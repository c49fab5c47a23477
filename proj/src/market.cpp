#include "lfm/market.hpp"

#include <algorithm>
#include <cmath>

namespace lfm {

namespace {

constexpr double kFilledEpsilon = 1e-9;  // MW

std::vector<Order>& side_of(std::vector<Order>& buys, std::vector<Order>& sells, Direction d) {
    return d == Direction::buy ? buys : sells;
}

bool buy_priority(const Order& a, const Order& b) {
    if (a.price != b.price) {
        return a.price > b.price;
    }
    return submitted_before(a, b);
}

bool sell_priority(const Order& a, const Order& b) {
    if (a.price != b.price) {
        return a.price < b.price;
    }
    return submitted_before(a, b);
}

}  // namespace

// ---------------------------------------------------------------------------
// OrderBook

void OrderBook::add_mtu(MtuId mtu, Tick gate_open, Tick gate_close) {
    if (gate_close <= gate_open) {
        throw Error("MTU " + std::to_string(mtu.value) + ": gate must close after it opens");
    }
    if (!books_.emplace(mtu, MtuBook{gate_open, gate_close, false, {}, {}}).second) {
        throw Error("MTU " + std::to_string(mtu.value) + " declared twice");
    }
}

bool OrderBook::gate_open(MtuId mtu, Tick now) const {
    auto it = books_.find(mtu);
    if (it == books_.end()) {
        return false;
    }
    const auto& book = it->second;
    return !book.closed && book.gate_open <= now && now < book.gate_close;
}

void OrderBook::insert(Order order) {
    auto it = books_.find(order.mtu);
    if (it == books_.end()) {
        throw Error("order " + order.id + " refers to an unknown MTU");
    }
    side_of(it->second.buys, it->second.sells, order.direction).push_back(std::move(order));
}

std::optional<Order> OrderBook::cancel(const std::string& id) {
    for (auto& [mtu, book] : books_) {
        for (auto* side : {&book.buys, &book.sells}) {
            auto it = std::find_if(side->begin(), side->end(), [&](const Order& o) { return o.id == id; });
            if (it != side->end()) {
                Order removed = std::move(*it);
                side->erase(it);
                return removed;
            }
        }
    }
    return std::nullopt;
}

void OrderBook::fill(const std::string& id, double quantity) {
    for (auto& [mtu, book] : books_) {
        for (auto* side : {&book.buys, &book.sells}) {
            auto it = std::find_if(side->begin(), side->end(), [&](const Order& o) { return o.id == id; });
            if (it == side->end()) {
                continue;
            }
            if (quantity > it->remaining + kFilledEpsilon) {
                throw Error("fill of " + id + " exceeds its remaining volume");
            }
            it->remaining -= quantity;
            if (it->remaining <= kFilledEpsilon) {
                side->erase(it);
            }
            return;
        }
    }
    throw Error("fill of unknown order " + id);
}

std::vector<Order> OrderBook::close_gates(Tick now) {
    std::vector<Order> expired;
    for (auto& [mtu, book] : books_) {
        if (book.closed || now < book.gate_close) {
            continue;
        }
        book.closed = true;
        for (auto* side : {&book.buys, &book.sells}) {
            std::move(side->begin(), side->end(), std::back_inserter(expired));
            side->clear();
        }
    }
    return expired;
}

const Order* OrderBook::find(const std::string& id) const {
    for (const auto& [mtu, book] : books_) {
        for (const auto* side : {&book.buys, &book.sells}) {
            auto it = std::find_if(side->begin(), side->end(), [&](const Order& o) { return o.id == id; });
            if (it != side->end()) {
                return &*it;
            }
        }
    }
    return nullptr;
}

std::span<const Order> OrderBook::buys(MtuId mtu) const {
    auto it = books_.find(mtu);
    return it == books_.end() ? std::span<const Order>{} : std::span<const Order>{it->second.buys};
}

std::span<const Order> OrderBook::sells(MtuId mtu) const {
    auto it = books_.find(mtu);
    return it == books_.end() ? std::span<const Order>{} : std::span<const Order>{it->second.sells};
}

std::size_t OrderBook::open_orders(MtuId mtu) const { return buys(mtu).size() + sells(mtu).size(); }

// ---------------------------------------------------------------------------
// ScheduleLedger

void ScheduleLedger::set_baseline(MtuId mtu, NodalState baseline) {
    if (baseline.p_mw.size() != baseline.q_mvar.size()) {
        throw DimensionError("baseline p and q must have the same length");
    }
    auto it = entries_.find(mtu);
    if (it == entries_.end()) {
        const std::size_t n = baseline.p_mw.size();
        entries_.emplace(mtu, Entry{std::move(baseline), std::vector<double>(n, 0.0)});
        return;
    }
    if (baseline.p_mw.size() != it->second.adjustment.size()) {
        throw DimensionError("baseline size changed for MTU " + std::to_string(mtu.value));
    }
    it->second.baseline = std::move(baseline);
}

const ScheduleLedger::Entry& ScheduleLedger::entry(MtuId mtu) const {
    auto it = entries_.find(mtu);
    if (it == entries_.end()) {
        throw Error("no schedule for MTU " + std::to_string(mtu.value));
    }
    return it->second;
}

const NodalState& ScheduleLedger::baseline(MtuId mtu) const { return entry(mtu).baseline; }

const std::vector<double>& ScheduleLedger::adjustment(MtuId mtu) const { return entry(mtu).adjustment; }

NodalState ScheduleLedger::scheduled(MtuId mtu) const {
    const auto& e = entry(mtu);
    NodalState out = e.baseline;
    for (std::size_t k = 0; k < out.p_mw.size(); ++k) {
        out.p_mw[k] += e.adjustment[k];
    }
    return out;
}

void ScheduleLedger::adjust(MtuId mtu, std::size_t bus, double withdrawal_mw) {
    auto it = entries_.find(mtu);
    if (it == entries_.end()) {
        throw Error("no schedule for MTU " + std::to_string(mtu.value));
    }
    if (bus >= it->second.adjustment.size()) {
        throw DimensionError("bus index out of range in schedule adjustment");
    }
    it->second.adjustment[bus] += withdrawal_mw;
}

std::vector<MtuId> ScheduleLedger::mtus() const {
    std::vector<MtuId> out;
    for (const auto& [mtu, e] : entries_) {
        out.push_back(mtu);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matching rules

double trade_price(const Order& buy, const Order& sell) {
    return submitted_before(buy, sell) ? buy.price : sell.price;
}

NodalDelta apply_trade(ScheduleLedger& ledger, const Trade& trade, std::size_t buy_bus, std::size_t sell_bus) {
    ledger.adjust(trade.mtu, buy_bus, trade.quantity);
    ledger.adjust(trade.mtu, sell_bus, -trade.quantity);
    return {trade.mtu, {{buy_bus, trade.quantity}, {sell_bus, -trade.quantity}}};
}

std::vector<CandidatePair> sort_candidates(const OrderBook& book, MtuId mtu) {
    std::vector<Order> buys(book.buys(mtu).begin(), book.buys(mtu).end());
    std::vector<Order> sells(book.sells(mtu).begin(), book.sells(mtu).end());
    std::sort(buys.begin(), buys.end(), buy_priority);
    std::sort(sells.begin(), sells.end(), sell_priority);

    std::vector<CandidatePair> pairs;
    for (const auto& buy : buys) {
        for (const auto& sell : sells) {
            if (sell.price > buy.price) {
                break;
            }
            pairs.push_back({buy, sell});
        }
    }
    return pairs;
}

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::gate_closed:
            return "GATE_CLOSED";
        case RejectReason::invalid_quantity:
            return "INVALID_QUANTITY";
        case RejectReason::quantity_above_cap:
            return "QUANTITY_ABOVE_CAP";
        case RejectReason::invalid_price:
            return "INVALID_PRICE";
        case RejectReason::invalid_node:
            return "INVALID_NODE";
        case RejectReason::slack_node:
            return "SLACK_NODE";
        case RejectReason::unknown_mtu:
            return "UNKNOWN_MTU";
        case RejectReason::duplicate_id:
            return "DUPLICATE_ID";
    }
    return "?";
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::no_violation:
            return "no_violation";
        case Termination::no_feasible_pair:
            return "no_feasible_pair";
        case Termination::aborted:
            return "aborted";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// MarketEngine

MarketEngine::MarketEngine(MarketConfig config) : config_(config) {
    if (!(config_.max_order_qty_mw > 0.0)) {
        throw Error("max_order_qty_mw must be positive");
    }
    if (config_.slack_bus >= config_.bus_count) {
        throw Error("slack bus out of range");
    }
}

void MarketEngine::add_mtu(MtuId mtu, Tick gate_open, Tick gate_close, NodalState baseline) {
    if (baseline.p_mw.size() != config_.bus_count) {
        throw DimensionError("baseline does not match the bus count");
    }
    book_.add_mtu(mtu, gate_open, gate_close);
    ledger_.set_baseline(mtu, std::move(baseline));
}

void MarketEngine::update_baseline(MtuId mtu, NodalState baseline) {
    if (!ledger_.has_mtu(mtu)) {
        throw Error("forecast for unknown MTU " + std::to_string(mtu.value));
    }
    ledger_.set_baseline(mtu, std::move(baseline));
}

SubmitResult MarketEngine::submit_order(const OrderRequest& req, Tick clock) {
    SubmitResult result;
    result.order = Order{req.id, req.direction, req.node, req.mtu, req.quantity, req.quantity, req.price, clock, 0};
    auto reject = [&](RejectReason r) {
        result.rejection = r;
        return result;
    };
    if (req.id.empty() || known_ids_.contains(req.id)) {
        return reject(RejectReason::duplicate_id);
    }
    if (!book_.has_mtu(req.mtu)) {
        return reject(RejectReason::unknown_mtu);
    }
    if (!book_.gate_open(req.mtu, clock)) {
        return reject(RejectReason::gate_closed);
    }
    if (!std::isfinite(req.quantity) || !(req.quantity > 0.0)) {
        return reject(RejectReason::invalid_quantity);
    }
    if (req.quantity > config_.max_order_qty_mw) {
        return reject(RejectReason::quantity_above_cap);
    }
    if (!std::isfinite(req.price)) {
        return reject(RejectReason::invalid_price);
    }
    if (req.node >= config_.bus_count) {
        return reject(RejectReason::invalid_node);
    }
    if (req.node == config_.slack_bus) {
        return reject(RejectReason::slack_node);
    }
    known_ids_.insert(req.id);
    result.order.sequence = next_sequence_++;
    book_.insert(result.order);
    return result;
}

std::optional<Order> MarketEngine::cancel_order(const std::string& id) { return book_.cancel(id); }

std::vector<Order> MarketEngine::close_gates(Tick clock) { return book_.close_gates(clock); }

InstanceResult MarketEngine::run_instance(MtuId mtu, GridService& grid) {
    if (!running_.insert(mtu).second) {
        throw Error("a market instance for MTU " + std::to_string(mtu.value) + " is already running");
    }
    struct Release {
        std::set<MtuId>& running;
        MtuId mtu;
        ~Release() { running.erase(mtu); }
    } release{running_, mtu};

    InstanceResult result;
    result.instance_id = next_instance_++;
    result.mtu = mtu;

    GridData gd;
    try {
        gd = grid.grid_data(mtu);
    } catch (const GridServiceError& e) {
        result.termination = Termination::aborted;
        result.abort_reason = e.what();
        return result;
    }
    auto& latest = latest_snapshot_[mtu];
    latest = std::max(latest, gd.snapshot_id);

    for (;;) {
        if (!gd.margins.any_violation()) {
            result.termination = Termination::no_violation;
            return result;
        }
        const auto pairs = sort_candidates(book_, mtu);
        const std::size_t scan = result.scans++;
        bool traded = false;
        for (const auto& pair : pairs) {
            if (pair.buy.price < pair.sell.price) {
                continue;
            }
            PairAssessment assessment = assess_pair(gd, pair.buy, pair.sell, latest);
            result.evaluations.push_back({scan, pair.buy, pair.sell, gd.snapshot_id, assessment});
            if (!assessment.trades()) {
                continue;
            }

            ExecutedTrade exec;
            exec.trade = Trade{next_trade_++,    result.instance_id, mtu, pair.buy.id, pair.sell.id,
                               assessment.q_clear, trade_price(pair.buy, pair.sell)};
            exec.buy_bus = pair.buy.node;
            exec.sell_bus = pair.sell.node;
            exec.buy_timestamp = pair.buy.timestamp;
            exec.sell_timestamp = pair.sell.timestamp;
            exec.buy_price = pair.buy.price;
            exec.sell_price = pair.sell.price;
            exec.snapshot_before = gd.snapshot_id;
            exec.assessment = std::move(assessment);

            book_.fill(pair.buy.id, exec.trade.quantity);
            book_.fill(pair.sell.id, exec.trade.quantity);
            const NodalDelta delta = apply_trade(ledger_, exec.trade, exec.buy_bus, exec.sell_bus);

            GridData next;
            try {
                next = grid.apply_schedule_change(delta);
            } catch (const GridServiceError& e) {
                result.trades.push_back(std::move(exec));
                result.termination = Termination::aborted;
                result.abort_reason = e.what();
                return result;
            }

            const std::size_t ends = gd.margins.s_current.size();
            exec.predicted_ds.resize(ends);
            exec.exact_ds.resize(ends);
            for (std::size_t r = 0; r < ends; ++r) {
                exec.predicted_ds[r] = exec.assessment.k_diff_flow[r] * exec.trade.quantity;
                exec.exact_ds[r] = next.margins.s_current[r] - gd.margins.s_current[r];
                exec.max_error_ratio = std::max(
                    exec.max_error_ratio, std::abs(exec.predicted_ds[r] - exec.exact_ds[r]) / gd.margins.s_max[r]);
            }
            exec.snapshot_after = next.snapshot_id;
            latest = std::max(latest, next.snapshot_id);
            gd = std::move(next);
            result.trades.push_back(std::move(exec));
            traded = true;
            break;
        }
        if (!traded) {
            result.termination = Termination::no_feasible_pair;
            return result;
        }
    }
}

}  // namespace lfm
