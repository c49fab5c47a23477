#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lfm/feasibility.hpp"
#include "lfm/grid_model.hpp"
#include "lfm/order.hpp"

namespace lfm {

struct Trade {
    std::uint64_t sequence = 0;
    std::uint64_t instance_id = 0;
    MtuId mtu;
    std::string buy_order_id;
    std::string sell_order_id;
    double quantity = 0.0;  // MW
    double price = 0.0;
};

/// Open orders per MTU plus each MTU's trading gate [gate_open, gate_close).
class OrderBook {
  public:
    void add_mtu(MtuId mtu, Tick gate_open, Tick gate_close);
    [[nodiscard]] bool has_mtu(MtuId mtu) const { return books_.contains(mtu); }
    [[nodiscard]] bool gate_open(MtuId mtu, Tick now) const;

    void insert(Order order);
    std::optional<Order> cancel(const std::string& id);
    /// Reduces remaining volume; fully filled orders leave the book.
    void fill(const std::string& id, double quantity);
    /// Closes every gate whose close tick has been reached and returns the
    /// orders that were still open.
    std::vector<Order> close_gates(Tick now);

    [[nodiscard]] const Order* find(const std::string& id) const;
    [[nodiscard]] std::span<const Order> buys(MtuId mtu) const;
    [[nodiscard]] std::span<const Order> sells(MtuId mtu) const;
    [[nodiscard]] std::size_t open_orders(MtuId mtu) const;

  private:
    struct MtuBook {
        Tick gate_open = 0;
        Tick gate_close = 0;
        bool closed = false;
        std::vector<Order> buys;
        std::vector<Order> sells;
    };
    std::map<MtuId, MtuBook> books_;
};

/// Baseline withdrawal per (bus, MTU) and the cumulative traded adjustment.
class ScheduleLedger {
  public:
    void set_baseline(MtuId mtu, NodalState baseline);
    [[nodiscard]] bool has_mtu(MtuId mtu) const { return entries_.contains(mtu); }
    [[nodiscard]] const NodalState& baseline(MtuId mtu) const;
    [[nodiscard]] const std::vector<double>& adjustment(MtuId mtu) const;
    /// Baseline plus traded adjustment.
    [[nodiscard]] NodalState scheduled(MtuId mtu) const;
    void adjust(MtuId mtu, std::size_t bus, double withdrawal_mw);
    [[nodiscard]] std::vector<MtuId> mtus() const;

  private:
    struct Entry {
        NodalState baseline;
        std::vector<double> adjustment;
    };
    [[nodiscard]] const Entry& entry(MtuId mtu) const;
    std::map<MtuId, Entry> entries_;
};

/// Change in scheduled withdrawal sent to the DSO after a trade.
struct NodalDelta {
    MtuId mtu;
    std::vector<std::pair<std::size_t, double>> withdrawal_mw;
};

class GridServiceError : public Error {
  public:
    using Error::Error;
};

/// The DSO side as seen by the market operator.
class GridService {
  public:
    virtual ~GridService() = default;
    /// Latest grid data for an MTU.
    virtual GridData grid_data(MtuId mtu) = 0;
    /// Applies a schedule change, re-runs the power flow and returns fresh grid
    /// data. Throws GridServiceError when the power flow fails.
    virtual GridData apply_schedule_change(const NodalDelta& delta) = 0;
};

/// Price of the order that was submitted first.
[[nodiscard]] double trade_price(const Order& buy, const Order& sell);

/// Buy raises withdrawal at the buy bus, sell lowers it at the sell bus.
NodalDelta apply_trade(ScheduleLedger& ledger, const Trade& trade, std::size_t buy_bus, std::size_t sell_bus);

struct CandidatePair {
    Order buy;
    Order sell;
};

/// Price-time priority: buys by descending price, sells by ascending price,
/// older first on ties. Each buy is paired with sells in order until the sell
/// price exceeds the buy price.
[[nodiscard]] std::vector<CandidatePair> sort_candidates(const OrderBook& book, MtuId mtu);

enum class RejectReason {
    gate_closed,
    invalid_quantity,
    quantity_above_cap,
    invalid_price,
    invalid_node,
    slack_node,
    unknown_mtu,
    duplicate_id,
};

[[nodiscard]] const char* to_string(RejectReason r);

struct OrderRequest {
    std::string id;
    Direction direction = Direction::buy;
    std::size_t node = 0;
    MtuId mtu;
    double quantity = 0.0;
    double price = 0.0;
};

struct SubmitResult {
    std::optional<RejectReason> rejection;
    Order order;

    [[nodiscard]] bool accepted() const { return !rejection.has_value(); }
};

struct MarketConfig {
    std::size_t bus_count = 0;
    std::size_t slack_bus = 0;
    double max_order_qty_mw = 0.0;
};

/// One pair looked at during a market instance.
struct PairEvaluation {
    std::size_t scan = 0;
    Order buy;
    Order sell;
    std::uint64_t snapshot_id = 0;
    PairAssessment assessment;
};

struct ExecutedTrade {
    Trade trade;
    std::size_t buy_bus = 0;
    std::size_t sell_bus = 0;
    Tick buy_timestamp = 0;
    Tick sell_timestamp = 0;
    double buy_price = 0.0;
    double sell_price = 0.0;
    PairAssessment assessment;
    std::uint64_t snapshot_before = 0;
    std::optional<std::uint64_t> snapshot_after;
    /// Per line end: sensitivity-predicted vs re-solved change in apparent flow (MVA).
    std::vector<double> predicted_ds;
    std::vector<double> exact_ds;
    double max_error_ratio = 0.0;  // max |predicted - exact| / s_max
};

enum class Termination { no_violation, no_feasible_pair, aborted };

[[nodiscard]] const char* to_string(Termination t);

struct InstanceResult {
    std::uint64_t instance_id = 0;
    MtuId mtu;
    std::vector<ExecutedTrade> trades;
    std::vector<PairEvaluation> evaluations;
    std::size_t scans = 0;
    Termination termination = Termination::no_feasible_pair;
    std::string abort_reason;
};

/// Order book, ledger and the market-instance loop for all MTUs.
class MarketEngine {
  public:
    explicit MarketEngine(MarketConfig config);

    void add_mtu(MtuId mtu, Tick gate_open, Tick gate_close, NodalState baseline);
    /// Replaces the baseline (a new forecast); traded adjustments are kept.
    void update_baseline(MtuId mtu, NodalState baseline);

    SubmitResult submit_order(const OrderRequest& request, Tick clock);
    std::optional<Order> cancel_order(const std::string& id);
    std::vector<Order> close_gates(Tick clock);

    /// Runs matching until no violation remains or a full scan yields no
    /// trade. Instances for one MTU are strictly serialized.
    InstanceResult run_instance(MtuId mtu, GridService& grid);

    [[nodiscard]] const OrderBook& book() const { return book_; }
    [[nodiscard]] const ScheduleLedger& ledger() const { return ledger_; }
    [[nodiscard]] const MarketConfig& config() const { return config_; }

  private:
    MarketConfig config_;
    OrderBook book_;
    ScheduleLedger ledger_;
    std::set<std::string> known_ids_;
    std::set<MtuId> running_;
    std::map<MtuId, std::uint64_t> latest_snapshot_;
    std::uint64_t next_sequence_ = 1;
    std::uint64_t next_trade_ = 1;
    std::uint64_t next_instance_ = 1;
};

}  // namespace lfm
