#pragma once

// Stochastic arrival generation: non-homogeneous Poisson processes per
// cluster/state and sample-average-approximation scenario sets.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "statebin/types.hpp"

namespace statebin {

// Expected arrivals per hour, indexed rates[q][x][h].
struct ArrivalRateProfile {
    int horizon_hours = 0;
    std::vector<std::vector<std::vector<double>>> rates;

    void validate() const;
    double total_expected() const;
    double rate(ClusterId q, StateIndex x, int h) const { return rates[q][x][h]; }
};

// One sampled realization: cumulative counts a_x^q(t), nondecreasing in t.
struct ScenarioTrace {
    std::uint64_t seed = 0;
    double step_minutes = 60.0;
    // cumulative[q][x][t], t = 0..steps-1
    std::vector<std::vector<std::vector<Count>>> cumulative;

    int steps() const {
        return cumulative.empty() || cumulative[0].empty()
                   ? 0
                   : static_cast<int>(cumulative[0][0].size());
    }
    Count cumulative_at(ClusterId q, StateIndex x, int t) const;
    Count increment_at(ClusterId q, StateIndex x, int t) const;
    Count total_arrivals() const;
};

struct ScenarioSet {
    std::vector<ScenarioTrace> traces;
};

// Draws per-step counts Poisson(lambda * dt/60) and accumulates them.
// Reproducible: the same (profile, seed, step) always yields the same trace.
ScenarioTrace sample_scenario(const ArrivalRateProfile& profile, std::uint64_t seed,
                              double step_minutes = 60.0);

ScenarioSet build_scenario_set(const ArrivalRateProfile& profile, int count,
                               std::uint64_t base_seed, double step_minutes = 60.0);

std::uint64_t trace_hash(const ScenarioTrace& trace);

// Bundled PHEV case profile: 15 clusters (5 initial-charge levels x 3 slack
// levels), 32-hour horizon, arrivals shaped by an evening-peaked template
// (synthetic, fully configurable through files) and scaled so the total
// expected arrivals equal 40,000 * scale.
ArrivalRateProfile ev_case_profile(double scale = 1.0);

// Matching NID catalog: pulse length 5 - soc at unit rate, slack 1..3 hours.
std::vector<ClusterSpec> ev_case_catalog();

inline ClusterId ev_case_cluster_id(int soc_hours, int slack_hours) {
    return soc_hours * 3 + (slack_hours - 1);
}

// Columnar text format: "q x h lambda" per line, '#' comments allowed.
void write_rate_profile(std::ostream& out, const ArrivalRateProfile& profile);
ArrivalRateProfile read_rate_profile(std::istream& in);

// Exports the cumulative counts in the population snapshot format
// ("t q x n" per line).
void write_trace_snapshots(std::ostream& out, const ScenarioTrace& trace);

} // namespace statebin
