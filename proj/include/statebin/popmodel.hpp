#pragma once

// Quantized state-bin population machinery: cluster assignment, occupancy
// dynamics driven by switch processes, and load accounting. All counts are
// exact integers; every operation is a pure state transition.

#include <iosfwd>
#include <vector>

#include "statebin/types.hpp"

namespace statebin {

// Per-(q, x) integer deltas, indexed like the catalog's state spaces.
using PerStateCounts = std::vector<std::vector<Count>>;

PerStateCounts zero_counts(const std::vector<ClusterSpec>& catalog);

struct SwitchEntry {
    StateIndex from = 0;
    StateIndex to = 0;
    Count count = 0;
};

// Increments of the switch processes d_{x,x'} for one time step.
// d_{x,x} is structurally absent.
struct SwitchMatrix {
    std::vector<std::vector<SwitchEntry>> per_cluster;

    static SwitchMatrix empty(std::size_t num_clusters) {
        SwitchMatrix m;
        m.per_cluster.resize(num_clusters);
        return m;
    }
    void add(ClusterId q, StateIndex from, StateIndex to, Count count);
};

// Occupancy n_x^q(t) plus cumulative arrival/departure counters.
struct PopulationState {
    TimeIndex time = 0;
    PerStateCounts occupancy;
    PerStateCounts cumulative_arrivals;
    PerStateCounts cumulative_departures; // used by TCL clusters only

    static PopulationState initial(const std::vector<ClusterSpec>& catalog);

    Count total_in_cluster(ClusterId q) const;
    Count total() const;
};

// Maps a raw appliance record onto the catalog cluster whose quantized
// constraint tuple matches it. Capacities and rates snap to the nearest grid
// value; deadlines and slack times round down so the model never promises
// more delay than the user allows. Throws Error when theta lies outside the
// catalog grid.
ClusterId assign_cluster(const ApplianceRecord& record,
                         const std::vector<ClusterSpec>& clusters);

// One step of the population dynamics:
//   n_x(t+1) = n_x(t) + da_x(t) + sum_x' [dd_{x',x} - dd_{x,x'}]
// Switches are validated against the current occupancy and the category's
// neighbor structure before anything is applied.
PopulationState update_occupancy(const PopulationState& state,
                                 const PerStateCounts& new_arrivals,
                                 const SwitchMatrix& switches,
                                 const std::vector<ClusterSpec>& catalog,
                                 const PerStateCounts* departures = nullptr);

// L(t) = sum_q sum_{x,x'} (x' - x) dd_{x,x'}(t), in quantized power units.
Count load_from_switches(const SwitchMatrix& switches);

// Independent load oracle:
//   L(t) = sum_x [ (sum_{x'>=x} dn_{x'}(t)) - (x+1) da_x(t) ]
// computed from two consecutive occupancy snapshots and the arrival
// increments. Valid for battery-like clusters whose states are 0..E.
Count load_from_occupancy_deltas(const PopulationState& at_t,
                  const PopulationState& at_t_plus_1,
                  const PerStateCounts& arrival_increments);

// Line-oriented snapshot format: one "t q x n" record per occupied tuple,
// exact integer fields. Zero bins are written too so snapshots are
// position-independent.
void write_snapshot(std::ostream& out, const PopulationState& state);

struct SnapshotRecord {
    TimeIndex t;
    ClusterId q;
    StateIndex x;
    Count n;
};
std::vector<SnapshotRecord> read_snapshot_records(std::istream& in);

} // namespace statebin
