#pragma once

// Real-time direct load scheduling: certainty-equivalent MPC and myopic EDF
// for deferrable loads, the coarse-deadline TCL tracker, and the anonymous
// downlink (ratios and FIFO thresholds) with its simulated execution.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "statebin/arrivals.hpp"
#include "statebin/categories.hpp"
#include "statebin/planner.hpp"
#include "statebin/tclsim.hpp"
#include "statebin/types.hpp"

namespace statebin {

// Causally observed arrivals and committed activations, per cluster and hour.
struct NidDispatchState {
    int horizon_hours = 0;
    std::vector<std::vector<Count>> arrivals;    // [q][h] increments
    std::vector<std::vector<Count>> activations; // [q][h] increments

    static NidDispatchState initial(std::size_t clusters, int horizon_hours);

    void observe_arrivals(const ScenarioTrace& trace, int hour);
    void commit(const std::vector<Count>& increments, int hour);

    Count cum_arrivals(ClusterId q, int through_hour) const;
    Count cum_activations(ClusterId q, int through_hour) const;
    // load of already-started pulses over [from_hour, horizon)
    std::vector<double> committed_load(const std::vector<ClusterSpec>& catalog,
                                       int from_hour) const;
    std::vector<double> realized_load(const std::vector<ClusterSpec>& catalog) const;
};

struct MpcConfig {
    int lookahead_hours = 0; // 0: to the end of the horizon
    int resolve_every_hours = 1;
    const ArrivalRateProfile* forecast = nullptr; // expected future arrivals
    const LpSolver* solver = nullptr;
};

struct MpcStepResult {
    std::vector<Count> increments; // committed activations for this hour
    bool forced_overdue = false;   // a deadline required immediate activation
    long lp_iterations = 0;
    // fractional lookahead plan, cumulative per cluster over [t, end); used
    // to commit between re-solves when the cadence is coarser than hourly
    std::vector<std::vector<double>> planned_cumulative;
    int plan_start_hour = 0;
};

// Integerizes hour t's decision from a stored lookahead plan (between
// re-solves).
std::vector<Count> commit_from_plan(const NidDispatchState& state,
                                    const std::vector<ClusterSpec>& catalog,
                                    const MpcStepResult& plan, int t);

// Lookahead LP at hour t with future arrivals replaced by their expected
// values; only the step-t decisions are committed (integerized).
MpcStepResult mpc_schedule_step(const NidDispatchState& state,
                                const std::vector<ClusterSpec>& catalog,
                                const std::vector<double>& purchase,
                                const PriceCurve& prices, const MpcConfig& config, int t);

// Activates waiting appliances closest to their start deadline until the
// hour's load is as near the purchase as possible (undershoot preferred);
// overdue appliances are always activated.
std::vector<Count> edf_schedule_step(const NidDispatchState& state,
                                     const std::vector<ClusterSpec>& catalog,
                                     const std::vector<double>& purchase, int t);

// Per-minute regulation tracking: forced (tau = 0) switches execute first,
// then the most imminent opposite-status bins close the gap between the
// measured load and baseline + signal.
TclTrackCommands tcl_track_step(const CoarseTclState& coarse, double baseline_watts,
                                double signal_watts, double mean_power_watts,
                                double measured_load_watts);

// ---------------------------------------------------------------------------
// Anonymous downlink

struct DispatchCommand {
    TimeIndex t = 0;

    struct SwitchRatio {
        ClusterId q;
        StateIndex from, to;
        double ratio; // kappa_{x,x'} = d_{x,x'} / n_x
    };
    std::vector<SwitchRatio> switch_ratios;

    struct OnRatio {
        ClusterId q;
        StateIndex x;
        double ratio; // kappa_x = n_{x,1} / n_x
    };
    std::vector<OnRatio> tcl_on_ratios;

    struct FifoThreshold {
        ClusterId q;
        TimeIndex tau;        // earliest epoch whose cumulative arrivals cover d
        double boundary_wait; // kappa^q: share of the tau cohort that keeps waiting
    };
    std::vector<FifoThreshold> fifo_thresholds;

    void validate() const;
};

// kappa ratios for battery-like switch decisions; bins with n_x = 0 emit no
// ratio, decisions exceeding occupancy are rejected.
DispatchCommand make_downlink(const SwitchMatrix& decisions, const PopulationState& state,
                              TimeIndex t);

// TCL on-ratios from the desired ON split.
DispatchCommand make_downlink_tcl(const std::vector<std::vector<Count>>& desired_on,
                                  const PopulationState& state, TimeIndex t);

// FIFO threshold per Eq-style rule: tau = min{t' <= t : a(t') >= d(t)} and
// kappa = (a(tau) - d) / (a(tau) - a(tau-1)).
DispatchCommand::FifoThreshold nid_fifo_threshold(const std::vector<Count>& cumulative_arrivals,
                                                  Count cumulative_target, ClusterId q);

// Simulated appliance population for executing downlinks.
struct SimAppliance {
    ClusterId q = 0;
    StateIndex x = 0;
    bool on = false;
    TimeIndex arrival = 0;
    int arrival_rank = 0; // FIFO order within the cluster
    bool started = false;
    TimeIndex started_at = -1;
};

struct DownlinkOutcome {
    SwitchMatrix realized;
    Count realized_moves = 0;
    Count realized_starts = 0;
};

DownlinkOutcome apply_downlink(const DispatchCommand& command,
                               std::vector<SimAppliance>& population,
                               std::size_t num_clusters, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Regulation signal and the replayable command log.

struct RegulationSignal {
    std::vector<double> watts; // per minute, target deviation from baseline

    void validate(double capacity_watts) const;
};

// columnar text: "minute value", value normalized to [-1, 1]
std::vector<double> read_normalized_signal(std::istream& in);
RegulationSignal scale_signal(const std::vector<double>& normalized, double capacity_watts);

void append_command_log(std::ostream& out, const DispatchCommand& command);
std::vector<DispatchCommand> read_command_log(std::istream& in);

} // namespace statebin
