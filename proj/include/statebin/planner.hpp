#pragma once

// Ex-ante planning: two-settlement forward purchases via stochastic LPs over
// scenario sets (clustered deferrable model and the coarse tank baseline),
// plus TCL regulation-capacity estimation.

#include <cstdint>
#include <optional>
#include <vector>

#include "statebin/arrivals.hpp"
#include "statebin/simplex.hpp"
#include "statebin/tclsim.hpp"
#include "statebin/types.hpp"

namespace statebin {

// Forward price per hour plus real-time up/down prices per sub-hourly step.
struct PriceCurve {
    int hours = 0;
    int substeps = 1; // T sub-steps per hour
    std::vector<double> forward; // size hours
    std::vector<double> up;      // size hours * substeps
    std::vector<double> dn;

    // case-study relation: up = 1.2 * forward, dn = 0.8 * forward
    static PriceCurve two_settlement(std::vector<double> forward, int substeps = 1);

    void validate() const;
    double up_hour_total(int h) const;
    double dn_hour_total(int h) const;
};

// C^R = sum_t [ pi_up (L-B)^+ + pi_dn (L-B)^- ]; the negative part is priced
// at pi_dn, i.e. under-consumption earns a rebate.
double realtime_cost(const std::vector<double>& load_substeps,
                     const std::vector<double>& purchase_hourly,
                     const PriceCurve& prices);

// ---------------------------------------------------------------------------
// Cumulative-service scheduling model. Each cluster activates units of
// service over time; cumulative activations D(t) must stay inside
// [cum_lower(t), cum_upper(t)] and be nondecreasing, and each activation
// contributes its pulse to the load. The clustered deferrable model uses
// cum_upper = a(t), cum_lower = a(t - chi); the tank model uses energy units
// with cum_upper = arrived energy and cum_lower jumping at the deadline.

struct ServiceCluster {
    std::vector<double> pulse;
    std::vector<double> cum_lower; // per hour of the schedule window
    std::vector<double> cum_upper;
    double committed = 0.0; // cumulative activations before the window
};

struct ScheduleLpSpec {
    int start_hour = 0;
    int end_hour = 0; // exclusive
    std::vector<ServiceCluster> clusters;
    std::vector<double> fixed_load; // per hour in [start, end), tails etc.

    int window_hours() const { return end_hour - start_hour; }
    void validate() const;
};

// Clustered deferrable model for one scenario trace.
ScheduleLpSpec make_nid_schedule_spec(const std::vector<ClusterSpec>& catalog,
                                      const ScenarioTrace& trace, int horizon_hours);

// Tank relaxation: appliances become ideal batteries keyed by their
// completion deadline; one cluster per deadline hour carrying arrived energy.
ScheduleLpSpec make_tank_schedule_spec(const std::vector<ClusterSpec>& catalog,
                                       const ScenarioTrace& trace, int horizon_hours);

// Explicit state-bin formulation of the tank model (variables d_{x,x'}) used
// to validate the compact energy formulation on small instances.
LpProblem build_tank_statebin_lp(const std::vector<ClusterSpec>& catalog,
                                 const ScenarioTrace& trace, int horizon_hours,
                                 const PriceCurve& prices);

struct ScheduleLp {
    LpProblem problem;
    // column ids
    std::vector<std::vector<int>> cum_vars; // [cluster][t - start]
    std::vector<int> over_vars;             // u_h
    std::vector<int> under_vars;            // v_h
    std::vector<int> link_rows;             // row index per hour (duals vs B)
};

// Subproblem with the purchase fixed (Benders subproblem / MPC step).
ScheduleLp build_schedule_lp(const ScheduleLpSpec& spec, const PriceCurve& prices,
                             const std::vector<double>& purchase);

// Scenario loads implied by cumulative activation paths.
std::vector<double> schedule_loads(const ScheduleLpSpec& spec,
                                   const std::vector<std::vector<double>>& cumulative);

// Largest-remainder integer rounding of one step's activation increments,
// preserving causality (cap) and deadlines (forced minimum).
std::vector<Count> round_step_increments(const std::vector<double>& fractional_cum,
                                         const std::vector<Count>& committed,
                                         const std::vector<Count>& cum_upper,
                                         const std::vector<Count>& cum_lower);

// ---------------------------------------------------------------------------

struct PlanConfig {
    const LpSolver* solver = nullptr; // defaults to the built-in dense simplex
    double benders_tolerance = 1e-7;
    int benders_max_iterations = 600;
    bool deterministic_equivalent = false; // build one big LP instead (small K)
    bool compute_exact_gap = false;        // exhaustive ILP on tiny instances
};

struct PlanResult {
    std::vector<double> purchase; // B(h), power units per hour
    double expected_cost = 0.0;   // forward + mean scenario real-time cost
    double forward_cost = 0.0;
    std::vector<double> scenario_costs;         // real-time LP cost per scenario
    std::vector<double> scenario_rounded_costs; // after integer rounding replay
    // fractional cumulative activations per scenario/cluster/hour
    std::vector<std::vector<std::vector<double>>> schedules;
    std::optional<double> relaxation_gap; // rounded cost - exact ILP optimum
    bool rounding_applied = false;
    int benders_iterations = 0;
    long lp_iterations = 0;

    double total_variation() const; // sum_h |B(h+1) - B(h)|
};

// Solves min_B sum_h pi_f B(h) + (1/K) sum_k C^R_k(B) over the given
// per-scenario scheduling polytopes (multi-cut decomposition; every LP goes
// through the solver interface).
PlanResult solve_two_settlement(const std::vector<ScheduleLpSpec>& scenario_specs,
                                const PriceCurve& prices, const PlanConfig& config = {});

PlanResult plan_forward_clustered(const ScenarioSet& scenarios, const PriceCurve& prices,
                                  const std::vector<ClusterSpec>& catalog,
                                  const PlanConfig& config = {});

PlanResult plan_forward_tank(const ScenarioSet& scenarios, const PriceCurve& prices,
                             const std::vector<ClusterSpec>& catalog,
                             const PlanConfig& config = {});

// Machine-readable purchase table ("h B" per line) preceded by a short text
// report of the cost decomposition.
void write_plan_table(std::ostream& out, const PlanResult& plan);

// ---------------------------------------------------------------------------
// TCL capacity estimation.

struct TclDutyCycle {
    double tau_on_min = 0.0;
    double tau_off_min = 0.0;
    double duty = 0.0;
};

// Expected cycle in the band [lower, upper]; throws Error when a boundary is
// unreachable (heater too weak for the ambient, or ambient above the band).
TclDutyCycle tcl_duty_cycle(const TclClusterParams& params, double ambient_f,
                            double lower_f, double upper_f);

// E[L(h)] = sum_q n^q(h) G^q tau_on / (tau_on + tau_off), in watts.
// occupancy[q][h] are expected unit counts.
std::vector<double> tcl_baseline_load(const std::vector<ClusterSpec>& catalog,
                                      const std::vector<std::vector<double>>& occupancy,
                                      const std::vector<double>& ambient_f);

struct TclEnvelopes {
    std::vector<double> max_load; // stationary envelope, watts per hour
    std::vector<double> min_load;
};

// Stationary envelopes with the operating band shifted to the top/bottom
// Theta-wide slice of each comfort band.
TclEnvelopes tcl_stationary_envelopes(const std::vector<ClusterSpec>& catalog,
                                      const std::vector<std::vector<double>>& occupancy,
                                      const std::vector<double>& ambient_f,
                                      double theta_f);

// M = min_h min(base - min, max - base)
double conservative_capacity(const TclEnvelopes& envelopes,
                             const std::vector<double>& baseline);

struct CapacityConfig {
    double hold_minutes = 19.0;          // 97% quantile of signal zero-crossing time
    double accept_tolerance_frac = 0.05; // of the candidate step height
    double accept_quantile = 0.95;
    int reference_units = 600; // per-cluster reference population for bisection
    int bisect_iterations = 12;
    double bracket_tolerance_frac = 0.01;
    double theta_f = 1.0;
    int warmup_minutes = 45;
    std::uint64_t seed = 1;
};

struct CapacityResult {
    std::vector<double> baseline; // watts per hour
    TclEnvelopes envelopes;
    double conservative = 0.0; // M, watts
    double simulated = 0.0;    // M', watts
    // per-unit acceptable step height per cluster and hour, watts
    std::vector<std::vector<double>> per_cluster_step;
    std::vector<ClusterId> failed_clusters; // scheduler divergence reports
};

// Bisection on the per-unit step height each cluster can hold for
// `hold_minutes` within the acceptance rule; M' = sum_q min_h n^q(h) M^q(h).
CapacityResult simulated_capacity(const TclCaseCatalog& catalog,
                                  const std::vector<std::vector<double>>& occupancy,
                                  const std::vector<double>& ambient_f,
                                  const CapacityConfig& config = {});

} // namespace statebin
