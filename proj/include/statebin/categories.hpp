#pragma once

// Per-category plasticity rules: neighbor sets, deadline feasibility, NID
// convolution loads, and the TCL stochastic transition model with its
// real-time coarse clustering.

#include <optional>
#include <random>
#include <vector>

#include "statebin/popmodel.hpp"
#include "statebin/types.hpp"

namespace statebin {

// States reachable from x in one step. RIC: |dx| <= G clipped to the state
// space (discharge only when enabled); IS: {x, min(x+G, E)}; ideal battery:
// the whole space; NID: {x, 1}; TCL: the whole temperature grid.
std::vector<StateIndex> neighbor_set(const ClusterSpec& cluster, StateIndex x);

struct DeadlineViolation {
    ClusterId q;
    StateIndex x;
    Count n;
};

struct DeadlineReport {
    bool feasible = true;
    std::vector<DeadlineViolation> violations;
};

// Checks n_x^q(chi) = 0 for all x < rho * E on every battery-like cluster
// whose deadline has been reached at time t.
DeadlineReport deadline_feasible(const PopulationState& state,
                                 const std::vector<ClusterSpec>& catalog,
                                 TimeIndex t);

// Population load of one NID cluster: convolution of activation increments
// with the pulse. When cumulative arrivals are supplied the causality and
// no-miss constraints (d <= a, d(t) >= a(t - chi)) are verified.
std::vector<double> nid_load(const std::vector<double>& activation_increments,
                             const std::vector<double>& pulse,
                             const std::vector<double>* cumulative_arrivals = nullptr,
                             TimeIndex max_start_delay = 0);

// Resamples a pulse onto a different step duration preserving its energy.
std::vector<double> resample_pulse(const std::vector<double>& pulse,
                                   double from_dt_minutes, double to_dt_minutes);

// Temperature grid for the TCL state-bin model.
struct TemperatureGrid {
    double origin_f = 0.0; // centre of bin 0
    double step_f = 0.5;
    int bins = 0;

    double center(StateIndex x) const { return origin_f + step_f * x; }
    StateIndex nearest_bin(double temp_f) const;
};

TemperatureGrid tcl_default_grid(const TclClusterParams& params, double margin_f = 2.0);

// Transition pmf P(x'|x; b) over the grid per the linearized thermal
// dynamics x' = x (1-k) + alpha + b G with alpha ~ N(ambient * k, sigma).
// Probability mass falling outside the grid is folded into the boundary
// bins. Throws on degenerate grids.
std::vector<double> tcl_transition_pmf(const TclClusterParams& params,
                                       const TemperatureGrid& grid,
                                       StateIndex x, bool on, double ambient_f);

// ON/OFF split of a cluster's occupancy.
struct TclSwitchState {
    std::vector<Count> off; // n_{x,0}
    std::vector<Count> on;  // n_{x,1}

    void validate() const;
    Count total(StateIndex x) const { return off[x] + on[x]; }
};

// Draws a realization of the switch counts D_{x,x'}: each of the n_{x,b}
// units moves independently per its pmf, so the counts are multinomial and
// E[D_{x,x'} | n] = sum_b n_{x,b} P(x'|x;b).
SwitchMatrix tcl_sample_switches(const TclSwitchState& split,
                                 const TclClusterParams& params,
                                 const TemperatureGrid& grid,
                                 double ambient_f,
                                 ClusterId q, std::size_t num_clusters,
                                 std::uint64_t seed);

// Minutes until a unit at temperature x with switch state b reaches the
// comfort boundary it is drifting toward, holding the noise at alpha:
//   tau = (1/k) ln[(x - bG/k - alpha/k) / (x* - (-1)^b B/2 - bG/k - alpha/k)]
// Returns 0 when the unit is already outside the band. Throws when the
// boundary is unreachable (non-positive log argument).
double tcl_switch_deadline(double temp_f, bool on,
                           const TclClusterParams& params, double alpha);

// Coarse real-time state: units binned by quantized switching deadline and
// switch status. Units inside their courtesy period are excluded.
struct CoarseTclState {
    int num_bins = 30;        // deadline bins, default 1-minute spacing
    double bin_minutes = 1.0;
    std::vector<Count> off;   // n_{tau, 0}
    std::vector<Count> on;    // n_{tau, 1}
    double mean_power_watts = 0.0; // G-bar

    Count total() const;
};

struct CoarseUnitReport {
    bool reported = false;     // false while in the courtesy period
    double deadline_min = 0.0; // remaining minutes to the forced switch
    bool on = false;
};

CoarseTclState coarse_cluster(const std::vector<CoarseUnitReport>& units,
                              double mean_power_watts,
                              int num_bins = 30, double bin_minutes = 1.0);

} // namespace statebin
