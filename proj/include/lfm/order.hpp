#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <tuple>

namespace lfm {

/// Market time unit identifier.
struct MtuId {
    int value = 0;

    friend auto operator<=>(const MtuId&, const MtuId&) = default;
};

/// Scenario clock. Integer ticks, no wall-clock dependence.
using Tick = std::int64_t;

enum class Direction { buy, sell };

[[nodiscard]] inline const char* to_string(Direction d) { return d == Direction::buy ? "buy" : "sell"; }

/// O(d, n, mtu, q, p, t). Timestamp and sequence are assigned by the platform.
struct Order {
    std::string id;
    Direction direction = Direction::buy;
    std::size_t node = 0;
    MtuId mtu;
    double quantity = 0.0;   // MW
    double remaining = 0.0;  // MW
    double price = 0.0;      // currency per MW
    Tick timestamp = 0;
    std::uint64_t sequence = 0;
};

/// Strict submission order: clock tick, then platform sequence number.
[[nodiscard]] inline bool submitted_before(const Order& a, const Order& b) {
    return std::tie(a.timestamp, a.sequence) < std::tie(b.timestamp, b.sequence);
}

}  // namespace lfm
