#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfm/dso.hpp"
#include "lfm/grid_model.hpp"
#include "lfm/powerflow.hpp"
#include "lfm/scenario.hpp"

namespace lfm::testing {

using Rng = std::mt19937_64;

[[nodiscard]] double uniform(Rng& rng, double lo, double hi);
[[nodiscard]] std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi);  // inclusive

// ---- shipped demo ---------------------------------------------------------

[[nodiscard]] std::string data_path(const std::string& rel);
[[nodiscard]] Network demo_network();
[[nodiscard]] NodalState demo_baseline();  // overloads line 1
[[nodiscard]] Scenario demo_scenario();

// ---- random networks ------------------------------------------------------

struct RandomNetworkOptions {
    std::size_t min_buses = 5;
    std::size_t max_buses = 30;
    double r_lo = 0.01, r_hi = 0.3;
    double x_lo = 0.01, x_hi = 0.3;
    double base_mva = 10.0;
    double s_max = 1e3;
    double u_min = 0.5, u_max = 1.5;
    double mesh_fraction = 0.25;  // extra lines as a share of the tree
};

/// Random spanning tree plus a few chords; slack is bus 0.
[[nodiscard]] Network random_network(Rng& rng, const RandomNetworkOptions& opt = {});

/// Withdrawal shape, one entry per bus, slack zero. Mostly loads, some DER.
[[nodiscard]] NodalState random_load_shape(Rng& rng, std::size_t n);

[[nodiscard]] NodalState scaled(const NodalState& shape, double factor);

/// Largest factor on `shape` for which the power flow still converges from a
/// flat start (bisection, 1% resolution).
[[nodiscard]] double loadability(const Network& net, const NodalState& shape);

struct LoadedCase {
    Network net;
    NodalState state;
    double fraction = 0.0;  // of loadability
};

/// Random network loaded to `lo..hi` of its loadability.
[[nodiscard]] LoadedCase random_loaded_case(Rng& rng, double lo, double hi, const RandomNetworkOptions& opt = {});

// ---- oracles --------------------------------------------------------------

/// Withdrawal moved from `sell` to `buy` by q MW.
[[nodiscard]] NodalState transfer(const NodalState& s, std::size_t buy, std::size_t sell, double q);

struct FiniteDifference {
    Eigen::MatrixXd k_up;  // pu per MW
    Eigen::MatrixXd k_sp;  // MVA per MW
    Eigen::VectorXd s_base;  // MVA per line end at the operating point
};

/// Central differences with full re-solves, +-h MW of withdrawal per bus.
[[nodiscard]] FiniteDifference finite_difference(const Network& net, const NodalState& state, double h_mw = 0.01);

/// Largest transfer q in [0, q_hi] for which no constraint that is satisfied
/// at q = 0 is broken under the exact power flow. Bisection to `tol` MW.
[[nodiscard]] double exact_q_upper(const Network& net, const NodalState& state, std::size_t buy, std::size_t sell,
                                   double q_hi, double tol = 1e-6);

/// Apparent flow per line end in MVA after an exact solve.
[[nodiscard]] std::vector<double> exact_flows(const Network& net, const NodalState& state);

// ---- constructed overloads ------------------------------------------------

/// A random network whose limits are set so that a chosen buy/sell pair
/// relieves exactly one overloaded line and runs into a chosen other line.
struct OverloadCase {
    Network net;
    NodalState state;
    std::size_t buy = 0;
    std::size_t sell = 0;
    std::size_t violated_line = 0;
    std::size_t limiting_line = 0;
};

struct OverloadOptions {
    double load_lo = 0.2, load_hi = 0.5;        // share of loadability
    double relief_lo = 0.02, relief_hi = 0.1;   // share of the overloaded flow removed at q_lower_full
    double band_lo = 1.2, band_hi = 2.5;        // q_upper / q_lower_full
    double min_share = 0.2;                     // |k| of both chosen ends, MVA per MW
    // the order cap: at both band edges the exact flow change on the two chosen lines must match
    // the predicted one to this fraction
    double max_lin_error = 0.01;
};

[[nodiscard]] OverloadCase make_overload_case(Rng& rng, const OverloadOptions& opt = {});

}  // namespace lfm::testing
