#pragma once

// Independent reference implementations used as test oracles. Everything in
// here recomputes results from first principles (per-appliance simulation,
// exhaustive enumeration, fine-step ODE integration) and must stay decoupled
// from the library code paths it checks.

#include <cstdint>
#include <functional>
#include <vector>

#include "statebin/popmodel.hpp"
#include "statebin/simplex.hpp"
#include "statebin/types.hpp"

namespace oracle {

using statebin::ClusterSpec;
using statebin::Count;
using statebin::LpProblem;
using statebin::PerStateCounts;
using statebin::PopulationState;
using statebin::SwitchMatrix;

// ---------------------------------------------------------------------------
// Per-appliance battery population simulator.

struct BatteryAppliance {
    int arrival = 1; // time index at which the appliance appears (>= 1)
    int initial = 0;
    statebin::ClusterId cluster = 0;
};

struct TrajectoryStep {
    PerStateCounts arrival_increments;
    SwitchMatrix switches;
    Count per_appliance_load = 0; // sum_i dx_i(t) a_i(t), computed per appliance
};

struct Trajectory {
    std::vector<BatteryAppliance> appliances;
    std::vector<TrajectoryStep> steps;
};

// Random feasible trajectory: each present appliance makes a uniformly random
// legal move every step. All bookkeeping is done per appliance.
Trajectory random_battery_trajectory(const std::vector<ClusterSpec>& catalog,
                                     int num_appliances, int num_steps,
                                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Brute-force LP oracle: enumerates candidate vertices (basis subsets with
// nonbasic variables pinned at finite bounds). Requires all variable bounds
// finite so the feasible set is a polytope.

struct LpBruteForceResult {
    bool feasible = false;
    double objective = 0.0;
};

LpBruteForceResult lp_brute_force(const LpProblem& problem);

// ---------------------------------------------------------------------------
// Exhaustive schedule enumeration for deferrable loads.

struct NidAppliance {
    int arrival = 0;
    std::vector<double> pulse;
    int max_delay = 0;
};

// Enumerates every feasible start-time assignment, evaluates the provided
// cost on the resulting load profile and returns the minimum.
double enumerate_nid_best(const std::vector<NidAppliance>& appliances, int horizon,
                          const std::function<double(const std::vector<double>&)>& cost);

struct TankAppliance {
    int arrival = 0;
    int initial = 0;
    int capacity = 0;
    int deadline = 0; // hour by which the battery must be full
};

// Enumerates integer charging profiles for small ideal-battery instances.
double enumerate_tank_best(const std::vector<TankAppliance>& appliances, int horizon,
                           const std::function<double(const std::vector<double>&)>& cost);

// Two-settlement cost of a deterministic load with the hourly purchase chosen
// optimally afterwards: sum_h min(pi_f, pi_up) * L(h) (valid for pi_dn <= pi_f).
double deterministic_plan_cost(const std::vector<double>& load,
                               const std::vector<double>& pi_f,
                               const std::vector<double>& pi_up,
                               const std::vector<double>& pi_dn);

// ---------------------------------------------------------------------------
// Thermostat ODE oracle: explicit Euler at a fine step.

struct DutyCycleResult {
    double tau_on_min = 0.0;
    double tau_off_min = 0.0;
    double duty = 0.0;
};

DutyCycleResult thermostat_duty_ode(const statebin::TclClusterParams& params,
                                    double ambient_f, double lower_f, double upper_f,
                                    double dt_min = 0.01);

// Time for a unit at x0 with fixed switch state to hit the boundary it drifts
// toward; Euler integration with linear interpolation at the crossing.
double boundary_hit_time_ode(const statebin::TclClusterParams& params, double x0,
                             bool on, double ambient_f, double dt_min = 0.01);

// ---------------------------------------------------------------------------
// Chi-square CDF (regularized lower incomplete gamma).

double chi_square_cdf(double x, double dof);

} // namespace oracle
